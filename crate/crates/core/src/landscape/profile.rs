use super::{check_shape, Landscape, LandscapeError};
use crate::scalar::Scalar;
use crate::sequence::{Alphabet, SequenceState};

/// Additive landscape: `offset + Σ_p weight[residue_p, p]`.
///
/// Weights are stored row-major (`A × L`), matching the one-hot layout.
#[derive(Debug, Clone)]
pub struct ProfileLandscape<T> {
    alphabet: Alphabet,
    length: usize,
    weights: Vec<T>,
    offset: T,
}

impl<T: Scalar> ProfileLandscape<T> {
    pub fn new(
        alphabet: &Alphabet,
        length: usize,
        weights: Vec<T>,
        offset: T,
    ) -> Result<Self, LandscapeError> {
        if length == 0 || weights.len() != alphabet.size() * length {
            return Err(LandscapeError::Invalid(format!(
                "profile weights must have A·L = {}·{} entries, got {}",
                alphabet.size(),
                length,
                weights.len()
            )));
        }
        Ok(Self {
            alphabet: alphabet.clone(),
            length,
            weights,
            offset,
        })
    }

    /// Builds from rows indexed `[residue][position]`.
    pub fn from_rows(alphabet: &Alphabet, rows: &[Vec<T>], offset: T) -> Result<Self, LandscapeError> {
        let length = rows.first().map_or(0, Vec::len);
        if rows.len() != alphabet.size() || rows.iter().any(|r| r.len() != length) {
            return Err(LandscapeError::Invalid(
                "profile weight rows must form an A × L matrix".into(),
            ));
        }
        Self::new(alphabet, length, rows.concat(), offset)
    }

    pub fn zeros(alphabet: &Alphabet, length: usize) -> Self {
        Self::new(alphabet, length, vec![T::zero(); alphabet.size() * length], T::zero())
            .expect("consistent dimensions")
    }

    pub fn weight(&self, residue: usize, position: usize) -> T {
        self.weights[residue * self.length + position]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Analytic optimum: the per-position best residue (lowest index on ties).
    pub fn optimum(&self) -> (SequenceState, T) {
        self.extremum(|a, b| a > b)
    }

    pub fn minimum(&self) -> (SequenceState, T) {
        self.extremum(|a, b| a < b)
    }

    fn extremum(&self, better: impl Fn(T, T) -> bool) -> (SequenceState, T) {
        let mut total = self.offset;
        let mut residues = Vec::with_capacity(self.length);
        for p in 0..self.length {
            let mut best = 0;
            for r in 1..self.alphabet.size() {
                if better(self.weight(r, p), self.weight(best, p)) {
                    best = r;
                }
            }
            total += self.weight(best, p);
            residues.push(best as u8);
        }
        let state = SequenceState::from_indices(&self.alphabet, residues).expect("in range");
        (state, total)
    }
}

impl<T: Scalar> Landscape<T> for ProfileLandscape<T> {
    fn fitness(&self, state: &SequenceState) -> Result<T, LandscapeError> {
        check_shape(state, &self.alphabet, self.length)?;
        Ok(self.offset
            + state
                .active_indices()
                .map(|i| self.weights[i])
                .sum::<T>())
    }

    fn shape(&self) -> Option<(Alphabet, usize)> {
        Some((self.alphabet.clone(), self.length))
    }
}
