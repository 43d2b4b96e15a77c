//! Offline helpers over landscapes: exhaustive enumeration and unbudgeted
//! local search used to synthesize homolog sets and low-fitness starts.

use rand::Rng;

use super::{Landscape, LandscapeError};
use crate::rng::seeded;
use crate::scalar::Scalar;
use crate::sequence::{Alphabet, SequenceState};

/// Upper bound on `A^N` for exhaustive enumeration.
pub const MAX_ENUMERATION: f64 = 1e7;

/// Calls `visit` with every residue vector of length `len` over `size`
/// symbols, in lexicographic order.
pub fn enumerate_sequences(
    size: usize,
    len: usize,
    mut visit: impl FnMut(&[u8]),
) -> Result<(), LandscapeError> {
    let total = (size as f64).powi(len as i32);
    if total > MAX_ENUMERATION {
        return Err(LandscapeError::TooLarge(total));
    }
    let mut digits = vec![0u8; len];
    loop {
        visit(&digits);
        let mut pos = len;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            digits[pos] += 1;
            if usize::from(digits[pos]) < size {
                break;
            }
            digits[pos] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascend,
    Descend,
}

/// Steepest-ascent (or descent) local search from `count` seeded random
/// starts, each run until no single substitution improves. Returns the local
/// optima reached, in start order (duplicates possible).
pub fn local_optima<T: Scalar, L: Landscape<T> + ?Sized>(
    landscape: &L,
    alphabet: &Alphabet,
    length: usize,
    count: usize,
    direction: Direction,
    seed: u64,
) -> Result<Vec<(SequenceState, T)>, LandscapeError> {
    let mut rng = seeded(seed);
    let better = |a: T, b: T| match direction {
        Direction::Ascend => a > b,
        Direction::Descend => a < b,
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let residues = (0..length)
            .map(|_| rng.random_range(0..alphabet.size() as u8))
            .collect();
        let mut current = SequenceState::from_indices(alphabet, residues)
            .map_err(|e| LandscapeError::Invalid(e.to_string()))?;
        let mut value = landscape.fitness(&current)?;
        loop {
            let mut step: Option<(SequenceState, T)> = None;
            for action in current.legal_actions() {
                let cand = current.apply(action).expect("legal action");
                let f = landscape.fitness(&cand)?;
                let reference = step.as_ref().map_or(value, |(_, v)| *v);
                if better(f, reference) {
                    step = Some((cand, f));
                }
            }
            match step {
                Some((s, f)) => {
                    current = s;
                    value = f;
                }
                None => break,
            }
        }
        out.push((current, value));
    }
    Ok(out)
}
