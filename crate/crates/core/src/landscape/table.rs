use std::collections::HashMap;
use std::io::Read;

use serde::Deserialize;

use super::{Landscape, LandscapeError};
use crate::scalar::Scalar;
use crate::sequence::{Alphabet, SequenceState};

/// What a [`TableLandscape`] answers for sequences it does not know.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fallback<T> {
    Error,
    Penalty(T),
}

/// Replays measured fitness values.
#[derive(Debug, Clone)]
pub struct TableLandscape<T> {
    alphabet: Alphabet,
    length: usize,
    entries: HashMap<SequenceState, T>,
    fallback: Fallback<T>,
}

#[derive(Deserialize)]
struct Row {
    sequence: String,
    fitness: f64,
}

impl<T: Scalar> TableLandscape<T> {
    pub fn new(
        entries: impl IntoIterator<Item = (SequenceState, T)>,
        fallback: Fallback<T>,
    ) -> Result<Self, LandscapeError> {
        let mut map = HashMap::new();
        let mut shape: Option<(Alphabet, usize)> = None;
        for (state, value) in entries {
            match &shape {
                None => shape = Some((state.alphabet().clone(), state.len())),
                Some((a, l)) => super::check_shape(&state, a, *l)?,
            }
            map.insert(state, value);
        }
        let (alphabet, length) =
            shape.ok_or_else(|| LandscapeError::Invalid("empty fitness table".into()))?;
        Ok(Self {
            alphabet,
            length,
            entries: map,
            fallback,
        })
    }

    /// Reads CSV with header `sequence,fitness`.
    pub fn from_csv<R: Read>(
        reader: R,
        alphabet: &Alphabet,
        fallback: Fallback<T>,
    ) -> Result<Self, LandscapeError> {
        let mut rows = Vec::new();
        for (line, row) in csv::Reader::from_reader(reader).deserialize::<Row>().enumerate() {
            let row = row?;
            let state = SequenceState::parse(alphabet, row.sequence.trim())
                .map_err(|e| LandscapeError::Invalid(format!("row {}: {e}", line + 1)))?;
            if !row.fitness.is_finite() {
                return Err(LandscapeError::Invalid(format!(
                    "row {}: non-finite fitness",
                    line + 1
                )));
            }
            rows.push((state, T::lit(row.fitness)));
        }
        Self::new(rows, fallback)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lowest-fitness entry; ties go to the lexicographically smallest sequence.
    pub fn minimum(&self) -> (SequenceState, T) {
        self.entries
            .iter()
            .min_by(|a, b| {
                a.1.partial_cmp(b.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.0.residues().cmp(b.0.residues()))
            })
            .map(|(s, v)| (s.clone(), *v))
            .expect("non-empty table")
    }

    pub fn sequences(&self) -> impl Iterator<Item = (&SequenceState, T)> {
        self.entries.iter().map(|(s, v)| (s, *v))
    }
}

impl<T: Scalar> Landscape<T> for TableLandscape<T> {
    fn fitness(&self, state: &SequenceState) -> Result<T, LandscapeError> {
        super::check_shape(state, &self.alphabet, self.length)?;
        match (self.entries.get(state), self.fallback) {
            (Some(v), _) => Ok(*v),
            (None, Fallback::Penalty(p)) => Ok(p),
            (None, Fallback::Error) => Err(LandscapeError::UnknownSequence(state.to_string())),
        }
    }

    fn shape(&self) -> Option<(Alphabet, usize)> {
        Some((self.alphabet.clone(), self.length))
    }
}
