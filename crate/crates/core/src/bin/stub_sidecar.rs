//! Minimal NDJSON sidecar used by the protocol tests.
//!
//! Serves all-zero logits, or an additive profile landscape loaded from a
//! JSON file (`{"alphabet": "...", "weights": [[...]], "offset": 0.0}`,
//! weights indexed `[residue][position]`). A fault mode misbehaves on the
//! n-th request.

use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fault {
    None,
    Malformed,
    WrongId,
    Sleep,
    Nonfinite,
    Error,
    Exit,
}

#[derive(Debug, Parser)]
struct Args {
    /// Alphabet the handshake must announce.
    #[arg(long)]
    alphabet: Option<String>,
    /// Length the handshake must announce.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    fault: Fault,
    /// 1-based index of the request that triggers the fault.
    #[arg(long, default_value_t = 1)]
    after: usize,
    #[arg(long, default_value_t = 5000)]
    sleep_ms: u64,
}

#[derive(Debug, Deserialize)]
struct Profile {
    alphabet: String,
    weights: Vec<Vec<f64>>,
    #[serde(default)]
    offset: f64,
}

impl Profile {
    fn fitness(&self, sequence: &str) -> Result<f64, String> {
        let mut total = self.offset;
        for (p, ch) in sequence.chars().enumerate() {
            let r = self
                .alphabet
                .chars()
                .position(|c| c == ch)
                .ok_or_else(|| format!("symbol {ch:?} not in alphabet"))?;
            total += self.weights[r].get(p).ok_or("sequence too long")?;
        }
        Ok(total)
    }

    fn logits(&self, length: usize) -> Vec<Vec<f64>> {
        (0..length).map(|p| self.weights.iter().map(|row| row[p]).collect()).collect()
    }
}

fn main() -> Result<()> {
    let args = Args::parse();
    let profile: Option<Profile> = match &args.profile {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(serde_json::from_str(&text)?)
        }
        None => None,
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut shape: Option<(usize, usize)> = None;
    let mut served = 0;
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                writeln!(out, "{}", json!({"error": format!("bad request: {e}")}))?;
                out.flush()?;
                continue;
            }
        };
        let kind = request.get("type").and_then(Value::as_str).unwrap_or("");
        if kind == "hello" {
            let alphabet = request.get("alphabet").and_then(Value::as_str).unwrap_or("");
            let length = request.get("length").and_then(Value::as_u64).unwrap_or(0) as usize;
            let reason = match (&args.alphabet, args.length, &profile) {
                (Some(a), _, _) if a != alphabet => Some(format!("alphabet mismatch: expected {a:?}, got {alphabet:?}")),
                (_, Some(l), _) if l != length => Some(format!("length mismatch: expected {l}, got {length}")),
                (_, _, Some(p)) if p.alphabet != alphabet => Some(format!("profile alphabet is {:?}", p.alphabet)),
                _ => None,
            };
            let reply = match reason {
                Some(r) => json!({"ok": false, "reason": r}),
                None => {
                    shape = Some((alphabet.chars().count(), length));
                    json!({"ok": true})
                }
            };
            writeln!(out, "{reply}")?;
            out.flush()?;
            continue;
        }
        served += 1;
        let id = request.get("id").and_then(Value::as_u64).unwrap_or(0);
        let fault = if served == args.after { args.fault } else { Fault::None };
        match fault {
            Fault::Malformed => {
                writeln!(out, "this is not json")?;
                out.flush()?;
                continue;
            }
            Fault::Sleep => thread::sleep(Duration::from_millis(args.sleep_ms)),
            Fault::Exit => return Ok(()),
            Fault::Error => {
                writeln!(out, "{}", json!({"id": id, "error": "injected failure"}))?;
                out.flush()?;
                continue;
            }
            Fault::Nonfinite => {
                let body = if kind == "prior" { r#""logits":[[1e999]]"# } else { r#""value":1e999"# };
                writeln!(out, "{{\"id\":{id},{body}}}")?;
                out.flush()?;
                continue;
            }
            Fault::WrongId | Fault::None => {}
        }
        let reply_id = if fault == Fault::WrongId { id + 1000 } else { id };
        let sequence = request.get("sequence").and_then(Value::as_str).unwrap_or("");
        let (size, length) = shape.unwrap_or((0, sequence.chars().count()));
        let reply = match kind {
            "prior" => match &profile {
                Some(p) => json!({"id": reply_id, "logits": p.logits(length)}),
                None => json!({"id": reply_id, "logits": vec![vec![0.0; size]; length]}),
            },
            "fitness" => match profile.as_ref().map(|p| p.fitness(sequence)) {
                Some(Ok(v)) => json!({"id": reply_id, "value": v}),
                Some(Err(e)) => json!({"id": reply_id, "error": e}),
                None => json!({"id": reply_id, "error": "fitness not supported"}),
            },
            other => json!({"id": reply_id, "error": format!("unknown request type {other:?}")}),
        };
        writeln!(out, "{reply}")?;
        out.flush()?;
    }
    Ok(())
}
