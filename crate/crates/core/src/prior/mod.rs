//! Mutation priors: probability distributions over the legal single-site
//! substitutions of a state.

mod external;
mod profile;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::sequence::{MutationAction, SequenceState};
use crate::sidecar::ProtocolError;

pub use external::ExternalPrior;
pub use profile::{train_profile, ProfileArtifact, ProfilePrior, TrainingReport, DEFAULT_PSEUDOCOUNT};

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("prior backend: {0}")]
    Backend(#[from] ProtocolError),
    #[error("prior is dimensioned for A = {expected_alphabet}, L = {expected_length}; state has A = {alphabet}, L = {length}")]
    Shape {
        alphabet: usize,
        length: usize,
        expected_alphabet: usize,
        expected_length: usize,
    },
    #[error("training data: {0}")]
    Training(String),
    #[error("prior artifact: {0}")]
    Artifact(String),
    #[error("state has no legal actions")]
    NoLegalActions,
}

/// Source of per-cell mutation scores.
pub trait MutationPrior<T: Scalar> {
    /// Non-negative scores over the row-major `A × L` action matrix. Entries
    /// for the state's current residues are ignored by callers.
    fn scores(&mut self, state: &SequenceState) -> Result<Vec<T>, PriorError>;
}

impl<T: Scalar, P: MutationPrior<T> + ?Sized> MutationPrior<T> for &mut P {
    fn scores(&mut self, state: &SequenceState) -> Result<Vec<T>, PriorError> {
        (**self).scores(state)
    }
}

impl<T: Scalar, P: MutationPrior<T> + ?Sized> MutationPrior<T> for Box<P> {
    fn scores(&mut self, state: &SequenceState) -> Result<Vec<T>, PriorError> {
        (**self).scores(state)
    }
}

/// Every legal action equally likely.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPrior;

impl<T: Scalar> MutationPrior<T> for UniformPrior {
    fn scores(&mut self, state: &SequenceState) -> Result<Vec<T>, PriorError> {
        Ok(vec![T::one(); state.alphabet().size() * state.len()])
    }
}

/// Normalized probabilities over a list of legal actions.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDistribution<T> {
    pub actions: Vec<MutationAction>,
    pub probs: Vec<T>,
}

impl<T: Scalar> PriorDistribution<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Most probable action; ties go to the earliest (lowest flat index).
    pub fn argmax(&self) -> Option<MutationAction> {
        crate::scalar::argmax(self.probs.iter().copied()).map(|i| self.actions[i])
    }

    /// Actions sorted by descending probability, ties by list order.
    pub fn ranked(&self) -> Vec<(MutationAction, T)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.probs[b]
                .partial_cmp(&self.probs[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx.into_iter().map(|i| (self.actions[i], self.probs[i])).collect()
    }
}

/// Distribution over all legal actions of `state`, in canonical order.
pub fn prior_over_actions<T: Scalar, P: MutationPrior<T> + ?Sized>(
    prior: &mut P,
    state: &SequenceState,
) -> Result<PriorDistribution<T>, PriorError> {
    distribution_over(prior, state, state.legal_actions())
}

/// Distribution restricted to `actions`, which must all be legal for
/// `state`. When every candidate scores zero the distribution is uniform.
pub fn distribution_over<T: Scalar, P: MutationPrior<T> + ?Sized>(
    prior: &mut P,
    state: &SequenceState,
    actions: Vec<MutationAction>,
) -> Result<PriorDistribution<T>, PriorError> {
    if actions.is_empty() {
        return Err(PriorError::NoLegalActions);
    }
    let scores = prior.scores(state)?;
    let (size, len) = (state.alphabet().size(), state.len());
    if scores.len() != size * len {
        return Err(PriorError::Shape {
            alphabet: size,
            length: len,
            expected_alphabet: scores.len() / len.max(1),
            expected_length: len,
        });
    }
    let mut probs: Vec<T> = actions
        .iter()
        .map(|a| {
            debug_assert!(state.is_legal(*a));
            let v = scores[a.flat_index(len)];
            if v > T::zero() {
                v
            } else {
                T::zero()
            }
        })
        .collect();
    let total: T = probs.iter().copied().sum();
    if total > T::zero() && total.is_finite() {
        probs.iter_mut().for_each(|p| *p /= total);
    } else {
        let u = T::one() / T::from_usize_lossy(probs.len());
        probs.iter_mut().for_each(|p| *p = u);
    }
    Ok(PriorDistribution { actions, probs })
}

pub(crate) fn check_dims(
    state: &SequenceState,
    alphabet: usize,
    length: usize,
) -> Result<(), PriorError> {
    if state.alphabet().size() != alphabet || state.len() != length {
        return Err(PriorError::Shape {
            alphabet: state.alphabet().size(),
            length: state.len(),
            expected_alphabet: alphabet,
            expected_length: length,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Alphabet;

    #[test]
    fn uniform_prior_over_small_state() {
        let a = Alphabet::new("ACD").unwrap();
        let s = SequenceState::parse(&a, "AC").unwrap();
        let d: PriorDistribution<f64> = prior_over_actions(&mut UniformPrior, &s).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.probs.iter().all(|&p| p == 0.25));
        assert_eq!(d.argmax(), Some(d.actions[0]));
    }

    #[test]
    fn empty_action_list_is_an_error() {
        let a = Alphabet::new("AC").unwrap();
        let s = SequenceState::parse(&a, "AC").unwrap();
        let r: Result<PriorDistribution<f64>, _> = distribution_over(&mut UniformPrior, &s, vec![]);
        assert!(matches!(r, Err(PriorError::NoLegalActions)));
    }

    #[test]
    fn ranking_is_stable_on_ties() {
        let d = PriorDistribution {
            actions: (0..4).map(|i| MutationAction::new(i, 0)).collect(),
            probs: vec![0.2f64, 0.3, 0.2, 0.3],
        };
        let order: Vec<usize> = d.ranked().iter().map(|(a, _)| a.position).collect();
        assert_eq!(order, vec![1, 3, 0, 2]);
    }
}
