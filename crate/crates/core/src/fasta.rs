//! Minimal FASTA reader and writer.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::sequence::{Alphabet, SequenceError, SequenceState};

#[derive(Debug, Error)]
pub enum FastaError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("record {index} ({header}): {source}")]
    Sequence {
        index: usize,
        header: String,
        source: SequenceError,
    },
    #[error("sequence data before the first '>' header on line {0}")]
    MissingHeader(usize),
    #[error("no records found")]
    Empty,
    #[error("record {index} has length {found}, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    pub header: String,
    pub sequence: String,
}

pub fn parse_fasta(text: &str) -> Result<Vec<FastaRecord>, FastaError> {
    let mut records: Vec<FastaRecord> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            records.push(FastaRecord {
                header: header.trim().to_string(),
                sequence: String::new(),
            });
        } else {
            match records.last_mut() {
                Some(rec) => rec.sequence.extend(line.split_whitespace()),
                None => return Err(FastaError::MissingHeader(lineno + 1)),
            }
        }
    }
    Ok(records)
}

pub fn read_fasta(path: impl AsRef<Path>) -> Result<Vec<FastaRecord>, FastaError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FastaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_fasta(&text)
}

/// Parses every record against `alphabet` and requires a shared length.
pub fn to_states(
    records: &[FastaRecord],
    alphabet: &Alphabet,
) -> Result<Vec<SequenceState>, FastaError> {
    if records.is_empty() {
        return Err(FastaError::Empty);
    }
    let mut out: Vec<SequenceState> = Vec::with_capacity(records.len());
    for (index, rec) in records.iter().enumerate() {
        let state = SequenceState::parse(alphabet, &rec.sequence).map_err(|source| {
            FastaError::Sequence {
                index,
                header: rec.header.clone(),
                source,
            }
        })?;
        if let Some(first) = out.first() {
            if first.len() != state.len() {
                return Err(FastaError::LengthMismatch {
                    index,
                    expected: first.len(),
                    found: state.len(),
                });
            }
        }
        out.push(state);
    }
    Ok(out)
}

pub fn read_states(
    path: impl AsRef<Path>,
    alphabet: &Alphabet,
) -> Result<Vec<SequenceState>, FastaError> {
    to_states(&read_fasta(path)?, alphabet)
}

pub fn write_fasta<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> io::Result<()> {
    for (header, seq) in records {
        writeln!(out, ">{header}")?;
        for chunk in seq.as_bytes().chunks(60) {
            out.write_all(chunk)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_multiline_records() {
        let recs = parse_fasta(">a desc\nAC\nDE\n\n>b\nacde\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].header, "a desc");
        assert_eq!(recs[0].sequence, "ACDE");
        let states = to_states(&recs, &Alphabet::protein()).unwrap();
        assert_eq!(states[0], states[1]);
    }

    #[test]
    fn length_mismatch_is_a_load_error() {
        let recs = parse_fasta(">a\nAC\n>b\nACD\n").unwrap();
        assert!(matches!(
            to_states(&recs, &Alphabet::protein()),
            Err(FastaError::LengthMismatch { index: 1, expected: 2, found: 3 })
        ));
        assert!(matches!(to_states(&[], &Alphabet::protein()), Err(FastaError::Empty)));
        assert!(matches!(parse_fasta("AC\n"), Err(FastaError::MissingHeader(1))));
    }

    #[test]
    fn write_then_read() {
        let mut buf = Vec::new();
        let long = "A".repeat(130);
        write_fasta(&mut buf, [("x", long.as_str())]).unwrap();
        let recs = parse_fasta(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(recs[0].sequence, long);
    }
}
