//! Fitness landscapes: deterministic sequence → fitness oracles.

mod external;
mod nk;
mod oracle;
mod profile;
mod synthetic;
mod table;

use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::sequence::{Alphabet, SequenceState};
use crate::sidecar::ProtocolError;

pub use external::ExternalOracle;
pub use nk::NkLandscape;
pub use oracle::{BudgetedOracle, CountMode, Evaluation, OracleError, TracePoint, DEFAULT_BUDGET};
pub use profile::ProfileLandscape;
pub use synthetic::{enumerate_sequences, local_optima, Direction, MAX_ENUMERATION};
pub use table::{Fallback, TableLandscape};

#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error("sequence {0} is not in the fitness table")]
    UnknownSequence(String),
    #[error("sequence shape (alphabet {alphabet}, length {length}) does not match landscape (alphabet {expected_alphabet}, length {expected_length})")]
    Shape {
        alphabet: String,
        length: usize,
        expected_alphabet: String,
        expected_length: usize,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("enumeration of {0} sequences exceeds the limit of {MAX_ENUMERATION}")]
    TooLarge(f64),
    #[error("external oracle: {0}")]
    External(#[from] ProtocolError),
    #[error("reading fitness table: {0}")]
    Csv(#[from] csv::Error),
}

/// Deterministic black-box fitness function.
pub trait Landscape<T: Scalar> {
    fn fitness(&self, state: &SequenceState) -> Result<T, LandscapeError>;

    /// Alphabet and length this landscape is defined on, when fixed.
    fn shape(&self) -> Option<(Alphabet, usize)> {
        None
    }
}

impl<T: Scalar, L: Landscape<T> + ?Sized> Landscape<T> for &L {
    fn fitness(&self, state: &SequenceState) -> Result<T, LandscapeError> {
        (**self).fitness(state)
    }
    fn shape(&self) -> Option<(Alphabet, usize)> {
        (**self).shape()
    }
}

impl<T: Scalar, L: Landscape<T> + ?Sized> Landscape<T> for Box<L> {
    fn fitness(&self, state: &SequenceState) -> Result<T, LandscapeError> {
        (**self).fitness(state)
    }
    fn shape(&self) -> Option<(Alphabet, usize)> {
        (**self).shape()
    }
}

impl<T: Scalar, L: Landscape<T> + ?Sized> Landscape<T> for Arc<L> {
    fn fitness(&self, state: &SequenceState) -> Result<T, LandscapeError> {
        (**self).fitness(state)
    }
    fn shape(&self) -> Option<(Alphabet, usize)> {
        (**self).shape()
    }
}

pub(crate) fn check_shape(
    state: &SequenceState,
    alphabet: &Alphabet,
    length: usize,
) -> Result<(), LandscapeError> {
    if state.alphabet() != alphabet || state.len() != length {
        return Err(LandscapeError::Shape {
            alphabet: state.alphabet().symbols(),
            length: state.len(),
            expected_alphabet: alphabet.symbols(),
            expected_length: length,
        });
    }
    Ok(())
}
