use super::{check_dims, MutationPrior, PriorError};
use crate::scalar::Scalar;
use crate::sequence::{Alphabet, SequenceState};
use crate::sidecar::{softmax_columns, SidecarClient, SidecarConfig};

/// Prior served by a sidecar: one unmasked logits request per state, each
/// position's logits softmaxed independently.
#[derive(Debug)]
pub struct ExternalPrior {
    client: SidecarClient,
    alphabet_size: usize,
    length: usize,
}

impl ExternalPrior {
    pub fn spawn(config: &SidecarConfig, alphabet: &Alphabet, length: usize) -> Result<Self, PriorError> {
        let client = SidecarClient::spawn(config, &alphabet.symbols(), length)?;
        Ok(Self::from_client(client, alphabet, length))
    }

    /// Wraps a client that has already completed its handshake.
    pub fn from_client(client: SidecarClient, alphabet: &Alphabet, length: usize) -> Self {
        Self {
            client,
            alphabet_size: alphabet.size(),
            length,
        }
    }
}

impl<T: Scalar> MutationPrior<T> for ExternalPrior {
    fn scores(&mut self, state: &SequenceState) -> Result<Vec<T>, PriorError> {
        check_dims(state, self.alphabet_size, self.length)?;
        let logits = self.client.prior_logits(&state.to_string())?;
        Ok(softmax_columns(&logits).into_iter().map(T::lit).collect())
    }
}
