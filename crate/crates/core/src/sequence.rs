//! Alphabets, fixed-length sequence states and single-site mutation actions.
//!
//! A state over an alphabet of size `A` with length `L` is viewed as an
//! `A × L` one-hot matrix stored row-major, so the cell for residue `r` at
//! position `p` has flat index `r * L + p`. Mutation actions use the same
//! flattening.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;

/// The twenty canonical amino acids in the conventional one-letter order.
pub const PROTEIN_SYMBOLS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// Residue deletion marker used by the condensing workflow.
pub const DELETION_SYMBOL: char = '-';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SequenceError {
    #[error("alphabet needs at least two symbols, got {0}")]
    AlphabetTooSmall(usize),
    #[error("symbol {0:?} appears more than once in the alphabet")]
    DuplicateSymbol(char),
    #[error("symbol {0:?} is not a printable ASCII character")]
    UnsupportedSymbol(char),
    #[error("character {ch:?} at offset {offset} is not in the alphabet {alphabet}")]
    UnknownCharacter {
        ch: char,
        offset: usize,
        alphabet: String,
    },
    #[error("position {position} out of range for length {length}")]
    PositionOutOfRange { position: usize, length: usize },
    #[error("residue index {residue} out of range for alphabet size {size}")]
    ResidueOutOfRange { residue: usize, size: usize },
    #[error("flat action index {index} out of range (A·L = {limit})")]
    FlatIndexOutOfRange { index: usize, limit: usize },
    #[error("invalid move: position {position} already holds residue {residue}")]
    InvalidMove { position: usize, residue: usize },
    #[error("empty sequence")]
    Empty,
}

#[derive(Debug)]
struct AlphabetInner {
    symbols: Vec<u8>,
    lookup: [Option<u8>; 128],
}

/// Ordered set of single-character symbols. Cheap to clone.
#[derive(Clone)]
pub struct Alphabet(Arc<AlphabetInner>);

impl Alphabet {
    /// Builds an alphabet from its symbols. Symbols are upper-cased.
    pub fn new(symbols: &str) -> Result<Self, SequenceError> {
        let mut lookup = [None; 128];
        let mut out = Vec::new();
        for ch in symbols.chars() {
            let ch = ch.to_ascii_uppercase();
            if !ch.is_ascii_graphic() {
                return Err(SequenceError::UnsupportedSymbol(ch));
            }
            let slot = &mut lookup[ch as usize];
            if slot.is_some() {
                return Err(SequenceError::DuplicateSymbol(ch));
            }
            *slot = Some(out.len() as u8);
            out.push(ch as u8);
        }
        if out.len() < 2 {
            return Err(SequenceError::AlphabetTooSmall(out.len()));
        }
        Ok(Self(Arc::new(AlphabetInner {
            symbols: out,
            lookup,
        })))
    }

    pub fn protein() -> Self {
        Self::new(PROTEIN_SYMBOLS).expect("valid protein alphabet")
    }

    /// Protein alphabet with the deletion marker appended as the 21st symbol.
    pub fn protein_with_deletion() -> Self {
        Self::new(&format!("{PROTEIN_SYMBOLS}{DELETION_SYMBOL}")).expect("valid alphabet")
    }

    pub fn size(&self) -> usize {
        self.0.symbols.len()
    }

    pub fn symbol(&self, index: usize) -> char {
        self.0.symbols[index] as char
    }

    pub fn index_of(&self, ch: char) -> Option<usize> {
        let ch = ch.to_ascii_uppercase();
        if !ch.is_ascii() {
            return None;
        }
        self.0.lookup[ch as usize].map(usize::from)
    }

    pub fn symbols(&self) -> String {
        self.0.symbols.iter().map(|&b| b as char).collect()
    }

    pub fn contains(&self, ch: char) -> bool {
        self.index_of(ch).is_some()
    }
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.symbols == other.0.symbols
    }
}

impl Eq for Alphabet {}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Alphabet({:?})", self.symbols())
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbols())
    }
}

/// Single-site substitution: set `position` to `residue`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MutationAction {
    pub position: usize,
    pub residue: usize,
}

impl MutationAction {
    pub fn new(position: usize, residue: usize) -> Self {
        Self { position, residue }
    }

    /// Row-major index into the `A × L` action matrix.
    pub fn flat_index(&self, length: usize) -> usize {
        self.residue * length + self.position
    }

    pub fn from_flat_index(
        index: usize,
        length: usize,
        alphabet_size: usize,
    ) -> Result<Self, SequenceError> {
        let limit = length * alphabet_size;
        if index >= limit {
            return Err(SequenceError::FlatIndexOutOfRange { index, limit });
        }
        Ok(Self {
            position: index % length,
            residue: index / length,
        })
    }
}

/// Fixed-length sequence over an alphabet. Equality and hashing only look at
/// the residues.
#[derive(Clone)]
pub struct SequenceState {
    alphabet: Alphabet,
    residues: Vec<u8>,
}

impl SequenceState {
    /// Parses a sequence, upper-casing it first. Unknown characters are
    /// rejected.
    pub fn parse(alphabet: &Alphabet, text: &str) -> Result<Self, SequenceError> {
        let mut residues = Vec::with_capacity(text.len());
        for (offset, ch) in text.chars().enumerate() {
            let idx = alphabet
                .index_of(ch)
                .ok_or_else(|| SequenceError::UnknownCharacter {
                    ch,
                    offset,
                    alphabet: alphabet.symbols(),
                })?;
            residues.push(idx as u8);
        }
        if residues.is_empty() {
            return Err(SequenceError::Empty);
        }
        Ok(Self {
            alphabet: alphabet.clone(),
            residues,
        })
    }

    pub fn from_indices(alphabet: &Alphabet, residues: Vec<u8>) -> Result<Self, SequenceError> {
        if residues.is_empty() {
            return Err(SequenceError::Empty);
        }
        if let Some(&r) = residues.iter().find(|&&r| usize::from(r) >= alphabet.size()) {
            return Err(SequenceError::ResidueOutOfRange {
                residue: r.into(),
                size: alphabet.size(),
            });
        }
        Ok(Self {
            alphabet: alphabet.clone(),
            residues,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn residues(&self) -> &[u8] {
        &self.residues
    }

    pub fn residue(&self, position: usize) -> usize {
        self.residues[position].into()
    }

    /// Row-major `A × L` one-hot matrix.
    pub fn one_hot<T: Scalar>(&self) -> Vec<T> {
        let len = self.len();
        let mut out = vec![T::zero(); self.alphabet.size() * len];
        for (p, &r) in self.residues.iter().enumerate() {
            out[usize::from(r) * len + p] = T::one();
        }
        out
    }

    /// Flat indices of the non-zero one-hot cells, one per position.
    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let len = self.len();
        self.residues
            .iter()
            .enumerate()
            .map(move |(p, &r)| usize::from(r) * len + p)
    }

    fn check_action(&self, action: MutationAction) -> Result<(), SequenceError> {
        if action.position >= self.len() {
            return Err(SequenceError::PositionOutOfRange {
                position: action.position,
                length: self.len(),
            });
        }
        if action.residue >= self.alphabet.size() {
            return Err(SequenceError::ResidueOutOfRange {
                residue: action.residue,
                size: self.alphabet.size(),
            });
        }
        Ok(())
    }

    pub fn is_legal(&self, action: MutationAction) -> bool {
        self.check_action(action).is_ok() && self.residue(action.position) != action.residue
    }

    /// Returns the mutated copy. A no-op substitution is an invalid move.
    pub fn apply(&self, action: MutationAction) -> Result<Self, SequenceError> {
        self.check_action(action)?;
        if self.residue(action.position) == action.residue {
            return Err(SequenceError::InvalidMove {
                position: action.position,
                residue: action.residue,
            });
        }
        let mut next = self.clone();
        next.residues[action.position] = action.residue as u8;
        Ok(next)
    }

    /// All legal substitutions in ascending flat-index order.
    pub fn legal_actions(&self) -> Vec<MutationAction> {
        self.legal_actions_where(|_| true)
    }

    /// Legal substitutions restricted to positions accepted by `open`.
    pub fn legal_actions_where(&self, open: impl Fn(usize) -> bool) -> Vec<MutationAction> {
        let len = self.len();
        let mut out = Vec::with_capacity(len * (self.alphabet.size() - 1));
        for residue in 0..self.alphabet.size() {
            for position in 0..len {
                if self.residue(position) != residue && open(position) {
                    out.push(MutationAction { position, residue });
                }
            }
        }
        out
    }

    /// Number of positions holding `symbol`.
    pub fn count_symbol(&self, symbol: char) -> usize {
        match self.alphabet.index_of(symbol) {
            Some(idx) => self.residues.iter().filter(|&&r| usize::from(r) == idx).count(),
            None => 0,
        }
    }
}

impl PartialEq for SequenceState {
    fn eq(&self, other: &Self) -> bool {
        self.residues == other.residues
    }
}

impl Eq for SequenceState {}

impl Hash for SequenceState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.residues.hash(state);
    }
}

impl fmt::Display for SequenceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &r in &self.residues {
            write!(f, "{}", self.alphabet.symbol(r.into()))?;
        }
        Ok(())
    }
}

impl fmt::Debug for SequenceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SequenceState({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn acd() -> Alphabet {
        Alphabet::new("ACD").unwrap()
    }

    #[test]
    fn alphabet_validation() {
        assert_eq!(Alphabet::new("A"), Err(SequenceError::AlphabetTooSmall(1)));
        assert_eq!(Alphabet::new("ABA"), Err(SequenceError::DuplicateSymbol('A')));
        assert_eq!(Alphabet::new("aA"), Err(SequenceError::DuplicateSymbol('A')));
        assert_eq!(Alphabet::protein().size(), 20);
        let cond = Alphabet::protein_with_deletion();
        assert_eq!(cond.size(), 21);
        assert_eq!(cond.symbol(20), '-');
        for i in 0..cond.size() {
            assert_eq!(cond.index_of(cond.symbol(i)), Some(i));
        }
    }

    #[test]
    fn parse_normalizes_case_and_rejects_unknown() {
        let a = acd();
        assert_eq!(SequenceState::parse(&a, "acd").unwrap().to_string(), "ACD");
        assert!(matches!(
            SequenceState::parse(&a, "AX"),
            Err(SequenceError::UnknownCharacter { ch: 'X', offset: 1, .. })
        ));
        assert_eq!(SequenceState::parse(&a, ""), Err(SequenceError::Empty));
    }

    #[test]
    fn apply_single_substitution() {
        let a = acd();
        let s = SequenceState::parse(&a, "AC").unwrap();
        let next = s.apply(MutationAction::new(1, 2)).unwrap();
        assert_eq!(next.to_string(), "AD");
        assert_eq!(s.to_string(), "AC");
    }

    #[test]
    fn no_op_mutation_is_invalid() {
        let s = SequenceState::parse(&acd(), "AC").unwrap();
        assert_eq!(
            s.apply(MutationAction::new(0, 0)),
            Err(SequenceError::InvalidMove { position: 0, residue: 0 })
        );
        assert!(matches!(
            s.apply(MutationAction::new(2, 0)),
            Err(SequenceError::PositionOutOfRange { .. })
        ));
        assert!(matches!(
            s.apply(MutationAction::new(0, 3)),
            Err(SequenceError::ResidueOutOfRange { .. })
        ));
    }

    #[test]
    fn flat_index_round_trip_example() {
        let a = MutationAction::new(5, 3);
        assert_eq!(a.flat_index(238), 719);
        assert_eq!(MutationAction::from_flat_index(719, 238, 20).unwrap(), a);
        assert!(MutationAction::from_flat_index(20 * 238, 238, 20).is_err());
    }

    #[test]
    fn legal_action_counts() {
        let s = SequenceState::parse(&acd(), "AC").unwrap();
        let acts = s.legal_actions();
        assert_eq!(acts.len(), 4);
        let flats: Vec<_> = acts.iter().map(|a| a.flat_index(2)).collect();
        assert_eq!(flats, vec![1, 2, 4, 5]);

        let ab = Alphabet::new("AB").unwrap();
        assert_eq!(SequenceState::parse(&ab, "B").unwrap().legal_actions().len(), 1);

        let p = Alphabet::protein();
        let long = SequenceState::from_indices(&p, vec![0; 238]).unwrap();
        assert_eq!(long.legal_actions().len(), 4522);
    }

    #[test]
    fn masked_legal_actions() {
        let s = SequenceState::parse(&acd(), "ACD").unwrap();
        let acts = s.legal_actions_where(|p| p != 1);
        assert_eq!(acts.len(), 4);
        assert!(acts.iter().all(|a| a.position != 1));
    }

    fn state_strategy() -> impl Strategy<Value = (usize, Vec<u8>)> {
        (2usize..6).prop_flat_map(|a| {
            (Just(a), proptest::collection::vec(0..a as u8, 1..8))
        })
    }

    proptest! {
        #[test]
        fn flat_index_is_bijection(len in 1usize..40, size in 2usize..22) {
            for idx in 0..len * size {
                let act = MutationAction::from_flat_index(idx, len, size).unwrap();
                prop_assert!(act.position < len && act.residue < size);
                prop_assert_eq!(act.flat_index(len), idx);
            }
        }

        #[test]
        fn legal_actions_change_exactly_one_column((size, residues) in state_strategy()) {
            let alphabet = Alphabet::new(&"ABCDEFG"[..size]).unwrap();
            let s = SequenceState::from_indices(&alphabet, residues).unwrap();
            let before: Vec<f64> = s.one_hot();
            let acts = s.legal_actions();
            prop_assert_eq!(acts.len(), s.len() * (size - 1));
            let mut last = None;
            for act in acts {
                let flat = act.flat_index(s.len());
                prop_assert!(last.map_or(true, |l| l < flat));
                last = Some(flat);
                let next = s.apply(act).unwrap();
                prop_assert_ne!(&next, &s);
                let after: Vec<f64> = next.one_hot();
                for p in 0..s.len() {
                    let col: Vec<f64> = (0..size).map(|r| after[r * s.len() + p]).collect();
                    prop_assert_eq!(col.iter().sum::<f64>(), 1.0);
                    if p == act.position {
                        prop_assert_eq!(col[act.residue], 1.0);
                    } else {
                        for r in 0..size {
                            prop_assert_eq!(after[r * s.len() + p], before[r * s.len() + p]);
                        }
                    }
                }
            }
        }
    }
}
