use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_dims, MutationPrior, PriorError};
use crate::scalar::Scalar;
use crate::sequence::{Alphabet, SequenceState};

/// Laplace smoothing.
pub const DEFAULT_PSEUDOCOUNT: f64 = 1.0;

const ARTIFACT_VERSION: u32 = 1;

/// Column-wise residue frequency matrix.
///
/// Among models that predict a masked residue from its position alone, the
/// unsmoothed column frequencies minimize the masked-prediction negative log
/// likelihood over the training sequences, so training is closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePrior<T> {
    alphabet: Alphabet,
    length: usize,
    /// Row-major `A × L`; every column sums to one.
    freqs: Vec<T>,
    pseudocount: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainingReport<T> {
    pub sequences: usize,
    pub length: usize,
    /// Mean per-position cross-entropy (nats) of the training columns under
    /// the fitted frequencies.
    pub cross_entropy: T,
}

/// Fits a profile with pseudocount `alpha`:
/// `F[r, p] = (count(r at p) + alpha) / (n + alpha·A)`.
pub fn train_profile<T: Scalar>(
    homologs: &[SequenceState],
    alpha: T,
) -> Result<(ProfilePrior<T>, TrainingReport<T>), PriorError> {
    let first = homologs
        .first()
        .ok_or_else(|| PriorError::Training("no homolog sequences".into()))?;
    if !(alpha >= T::zero()) || !alpha.is_finite() {
        return Err(PriorError::Training(format!("pseudocount must be ≥ 0, got {alpha}")));
    }
    let (alphabet, length) = (first.alphabet().clone(), first.len());
    let size = alphabet.size();
    let mut counts = vec![0usize; size * length];
    for (i, s) in homologs.iter().enumerate() {
        if s.len() != length || s.alphabet() != &alphabet {
            return Err(PriorError::Training(format!(
                "homolog {i} has length {} (alphabet {}), expected {length} ({alphabet})",
                s.len(),
                s.alphabet()
            )));
        }
        for idx in s.active_indices() {
            counts[idx] += 1;
        }
    }
    let n = T::from_usize_lossy(homologs.len());
    let denom = n + alpha * T::from_usize_lossy(size);
    let freqs: Vec<T> = counts
        .iter()
        .map(|&c| (T::from_usize_lossy(c) + alpha) / denom)
        .collect();

    let mut total = T::zero();
    for (&c, &f) in counts.iter().zip(&freqs) {
        if c > 0 {
            total -= T::from_usize_lossy(c) / n * f.ln();
        }
    }
    let report = TrainingReport {
        sequences: homologs.len(),
        length,
        cross_entropy: total / T::from_usize_lossy(length),
    };
    let prior = ProfilePrior {
        alphabet,
        length,
        freqs,
        pseudocount: alpha,
    };
    Ok((prior, report))
}

impl<T: Scalar> ProfilePrior<T> {
    /// Builds from rows indexed `[residue][position]`; columns must be
    /// probability distributions.
    pub fn from_rows(alphabet: &Alphabet, rows: &[Vec<T>], pseudocount: T) -> Result<Self, PriorError> {
        let length = rows.first().map_or(0, Vec::len);
        if length == 0 || rows.len() != alphabet.size() || rows.iter().any(|r| r.len() != length) {
            return Err(PriorError::Artifact("frequency rows must form an A × L matrix".into()));
        }
        let freqs = rows.concat();
        let tol = T::lit(1e-9);
        for p in 0..length {
            let mut sum = T::zero();
            for r in 0..alphabet.size() {
                let v = freqs[r * length + p];
                if !(v >= T::zero()) || !v.is_finite() {
                    return Err(PriorError::Artifact(format!("negative or non-finite entry at ({r}, {p})")));
                }
                sum += v;
            }
            if (sum - T::one()).abs() > tol {
                return Err(PriorError::Artifact(format!("column {p} sums to {sum}")));
            }
        }
        Ok(Self {
            alphabet: alphabet.clone(),
            length,
            freqs,
            pseudocount,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn pseudocount(&self) -> T {
        self.pseudocount
    }

    pub fn frequency(&self, residue: usize, position: usize) -> T {
        self.freqs[residue * self.length + position]
    }

    pub fn frequencies(&self) -> &[T] {
        &self.freqs
    }

    pub fn column(&self, position: usize) -> Vec<T> {
        (0..self.alphabet.size())
            .map(|r| self.frequency(r, position))
            .collect()
    }

    pub fn to_artifact(&self) -> ProfileArtifact {
        ProfileArtifact {
            version: ARTIFACT_VERSION,
            alphabet: self.alphabet.symbols(),
            length: self.length,
            pseudocount: self.pseudocount.as_f64(),
            frequencies: (0..self.alphabet.size())
                .map(|r| (0..self.length).map(|p| self.frequency(r, p).as_f64()).collect())
                .collect(),
        }
    }

    pub fn from_artifact(artifact: &ProfileArtifact) -> Result<Self, PriorError> {
        if artifact.version != ARTIFACT_VERSION {
            return Err(PriorError::Artifact(format!(
                "unsupported artifact version {}",
                artifact.version
            )));
        }
        let alphabet =
            Alphabet::new(&artifact.alphabet).map_err(|e| PriorError::Artifact(e.to_string()))?;
        let rows: Vec<Vec<T>> = artifact
            .frequencies
            .iter()
            .map(|row| row.iter().map(|&v| T::lit(v)).collect())
            .collect();
        let prior = Self::from_rows(&alphabet, &rows, T::lit(artifact.pseudocount))?;
        if prior.length != artifact.length {
            return Err(PriorError::Artifact(format!(
                "declared length {} but matrix has {} columns",
                artifact.length, prior.length
            )));
        }
        Ok(prior)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PriorError> {
        let text = serde_json::to_string_pretty(&self.to_artifact())
            .map_err(|e| PriorError::Artifact(e.to_string()))?;
        fs::write(path, text).map_err(|e| PriorError::Artifact(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PriorError> {
        let text = fs::read_to_string(path).map_err(|e| PriorError::Artifact(e.to_string()))?;
        let artifact: ProfileArtifact =
            serde_json::from_str(&text).map_err(|e| PriorError::Artifact(e.to_string()))?;
        Self::from_artifact(&artifact)
    }
}

impl<T: Scalar> MutationPrior<T> for ProfilePrior<T> {
    fn scores(&mut self, state: &SequenceState) -> Result<Vec<T>, PriorError> {
        check_dims(state, self.alphabet.size(), self.length)?;
        Ok(self.freqs.clone())
    }
}

/// On-disk JSON form of a profile: `frequencies[residue][position]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileArtifact {
    pub version: u32,
    pub alphabet: String,
    pub length: usize,
    pub pseudocount: f64,
    pub frequencies: Vec<Vec<f64>>,
}
