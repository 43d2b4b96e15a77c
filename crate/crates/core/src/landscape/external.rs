use std::sync::Mutex;

use super::{check_shape, Landscape, LandscapeError};
use crate::scalar::Scalar;
use crate::sequence::{Alphabet, SequenceState};
use crate::sidecar::{SidecarClient, SidecarConfig};

/// Fitness served by a sidecar process over the NDJSON protocol.
#[derive(Debug)]
pub struct ExternalOracle {
    alphabet: Alphabet,
    length: usize,
    client: Mutex<SidecarClient>,
}

impl ExternalOracle {
    pub fn spawn(
        config: &SidecarConfig,
        alphabet: &Alphabet,
        length: usize,
    ) -> Result<Self, LandscapeError> {
        let client = SidecarClient::spawn(config, &alphabet.symbols(), length)?;
        Ok(Self::from_client(client, alphabet, length))
    }

    /// Wraps a client that has already completed its handshake.
    pub fn from_client(client: SidecarClient, alphabet: &Alphabet, length: usize) -> Self {
        Self {
            alphabet: alphabet.clone(),
            length,
            client: Mutex::new(client),
        }
    }
}

impl<T: Scalar> Landscape<T> for ExternalOracle {
    fn fitness(&self, state: &SequenceState) -> Result<T, LandscapeError> {
        check_shape(state, &self.alphabet, self.length)?;
        let mut client = self.client.lock().unwrap_or_else(|e| e.into_inner());
        Ok(T::lit(client.fitness(&state.to_string())?))
    }

    fn shape(&self) -> Option<(Alphabet, usize)> {
        Some((self.alphabet.clone(), self.length))
    }
}
