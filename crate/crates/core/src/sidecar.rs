//! Newline-delimited JSON protocol spoken with external prior and oracle
//! processes over their standard streams.
//!
//! ```text
//! → {"type":"hello","alphabet":"ACDE…","length":L}
//! ← {"ok":true}                      | {"ok":false,"reason":"…"}
//! → {"id":n,"type":"prior","sequence":"…"}
//! ← {"id":n,"logits":[[A floats] × L]}
//! → {"id":n,"type":"fitness","sequence":"…"}
//! ← {"id":n,"value":f}
//! ```
//!
//! One request is in flight at a time and every reply must echo its id. A
//! reply of the form `{"id":n,"error":"…"}` is surfaced as a remote error.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const DEFAULT_TIMEOUT_SECS: f64 = 60.0;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("failed to launch sidecar {command:?}: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("sidecar i/o: {0}")]
    Io(#[from] io::Error),
    #[error("sidecar did not answer within {0:?}")]
    Timeout(Duration),
    #[error("sidecar closed its output stream")]
    Closed,
    #[error("malformed sidecar line {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("reply id {got} does not match request id {expected}")]
    IdMismatch { expected: u64, got: u64 },
    #[error("sidecar sent a non-finite number")]
    NonFinite,
    #[error("sidecar rejected handshake: {0}")]
    Rejected(String),
    #[error("sidecar reported an error: {0}")]
    Remote(String),
    #[error("logits shape {rows}×{cols} does not match L×A = {length}×{alphabet}")]
    Shape {
        rows: usize,
        cols: usize,
        length: usize,
        alphabet: usize,
    },
}

/// How to launch a sidecar process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarConfig {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

impl SidecarConfig {
    pub fn new(command: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            command: command.into(),
            args,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }
}

/// Requests as they appear on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request {
    Hello { alphabet: String, length: usize },
    Prior { id: u64, sequence: String },
    Fitness { id: u64, sequence: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloReply {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorReply {
    pub id: u64,
    pub logits: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReply {
    pub id: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub id: u64,
    pub error: String,
}

/// Client end of one sidecar connection.
pub struct SidecarClient {
    child: Option<Child>,
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    timeout: Duration,
    next_id: u64,
    alphabet_size: usize,
    length: usize,
}

impl std::fmt::Debug for SidecarClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SidecarClient")
            .field("pid", &self.child.as_ref().map(Child::id))
            .field("next_id", &self.next_id)
            .finish()
    }
}

impl SidecarClient {
    /// Launches the configured process and performs the handshake.
    pub fn spawn(config: &SidecarConfig, alphabet: &str, length: usize) -> Result<Self, ProtocolError> {
        let mut child = Command::new(&config.command)
            .args(&config.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ProtocolError::Spawn {
                command: config.command.clone(),
                source,
            })?;
        let stdin = child.stdin.take().ok_or(ProtocolError::Closed)?;
        let stdout = child.stdout.take().ok_or(ProtocolError::Closed)?;
        let timeout = Duration::from_secs_f64(config.timeout_secs.max(0.0));
        let mut client = Self::over_streams(stdout, stdin, timeout);
        client.child = Some(child);
        client.handshake(alphabet, length)?;
        Ok(client)
    }

    /// Connects over arbitrary streams without performing the handshake.
    pub fn over_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            child: None,
            writer: Box::new(writer),
            lines: rx,
            timeout,
            next_id: 0,
            alphabet_size: 0,
            length: 0,
        }
    }

    pub fn handshake(&mut self, alphabet: &str, length: usize) -> Result<(), ProtocolError> {
        self.send(&Request::Hello {
            alphabet: alphabet.to_string(),
            length,
        })?;
        let line = self.recv()?;
        let reply: HelloReply = parse_line(&line)?;
        if !reply.ok {
            return Err(ProtocolError::Rejected(
                reply.reason.unwrap_or_else(|| "no reason given".into()),
            ));
        }
        self.alphabet_size = alphabet.chars().count();
        self.length = length;
        Ok(())
    }

    /// Per-position logits, `L` rows of `A` values in alphabet order.
    pub fn prior_logits(&mut self, sequence: &str) -> Result<Vec<Vec<f64>>, ProtocolError> {
        let id = self.bump_id();
        self.send(&Request::Prior {
            id,
            sequence: sequence.to_string(),
        })?;
        let value = self.recv_reply(id)?;
        let reply: PriorReply = from_value(value)?;
        let shape_ok = reply.logits.len() == self.length
            && reply.logits.iter().all(|row| row.len() == self.alphabet_size);
        if !shape_ok {
            return Err(ProtocolError::Shape {
                rows: reply.logits.len(),
                cols: reply.logits.first().map_or(0, Vec::len),
                length: self.length,
                alphabet: self.alphabet_size,
            });
        }
        if reply.logits.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ProtocolError::NonFinite);
        }
        Ok(reply.logits)
    }

    pub fn fitness(&mut self, sequence: &str) -> Result<f64, ProtocolError> {
        let id = self.bump_id();
        self.send(&Request::Fitness {
            id,
            sequence: sequence.to_string(),
        })?;
        let reply: FitnessReply = from_value(self.recv_reply(id)?)?;
        if !reply.value.is_finite() {
            return Err(ProtocolError::NonFinite);
        }
        Ok(reply.value)
    }

    fn bump_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn send(&mut self, request: &Request) -> Result<(), ProtocolError> {
        let mut line = serde_json::to_string(request).expect("requests serialize");
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<String, ProtocolError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(ProtocolError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(ProtocolError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ProtocolError::Closed),
        }
    }

    fn recv_reply(&mut self, id: u64) -> Result<Value, ProtocolError> {
        let line = self.recv()?;
        let value: Value = parse_line(&line)?;
        let got = value
            .get("id")
            .and_then(Value::as_u64)
            .ok_or_else(|| ProtocolError::Malformed {
                line: line.clone(),
                reason: "missing numeric id".into(),
            })?;
        if got != id {
            return Err(ProtocolError::IdMismatch { expected: id, got });
        }
        if let Some(err) = value.get("error") {
            return Err(ProtocolError::Remote(
                err.as_str().map_or_else(|| err.to_string(), str::to_string),
            ));
        }
        Ok(value)
    }
}

impl Drop for SidecarClient {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn parse_line<D: serde::de::DeserializeOwned>(line: &str) -> Result<D, ProtocolError> {
    serde_json::from_str(line).map_err(|e| ProtocolError::Malformed {
        line: line.to_string(),
        reason: e.to_string(),
    })
}

fn from_value<D: serde::de::DeserializeOwned>(value: Value) -> Result<D, ProtocolError> {
    let line = value.to_string();
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed {
        line,
        reason: e.to_string(),
    })
}

/// Row-wise softmax of `L × A` logits into a row-major `A × L` score matrix.
pub fn softmax_columns(logits: &[Vec<f64>]) -> Vec<f64> {
    let length = logits.len();
    let size = logits.first().map_or(0, Vec::len);
    let mut out = vec![0.0; size * length];
    for (p, row) in logits.iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (r, e) in exps.into_iter().enumerate() {
            out[r * length + p] = e / total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn wire_format_of_requests() {
        let hello = serde_json::to_value(Request::Hello {
            alphabet: "AC".into(),
            length: 3,
        })
        .unwrap();
        assert_eq!(hello, serde_json::json!({"type":"hello","alphabet":"AC","length":3}));
        let prior = serde_json::to_value(Request::Prior {
            id: 4,
            sequence: "ACA".into(),
        })
        .unwrap();
        assert_eq!(prior, serde_json::json!({"id":4,"type":"prior","sequence":"ACA"}));
        let parsed: Request =
            serde_json::from_str(r#"{"id":9,"type":"fitness","sequence":"CC"}"#).unwrap();
        assert_eq!(parsed, Request::Fitness { id: 9, sequence: "CC".into() });
    }

    fn scripted(replies: &str) -> SidecarClient {
        let mut c = SidecarClient::over_streams(
            Cursor::new(replies.as_bytes().to_vec()),
            io::sink(),
            Duration::from_secs(5),
        );
        c.handshake("AC", 2).unwrap();
        c
    }

    #[test]
    fn scripted_round_trips() {
        let mut c = scripted(
            "{\"ok\":true}\n{\"id\":1,\"logits\":[[0,0],[1,2]]}\n{\"id\":2,\"value\":0.25}\n",
        );
        assert_eq!(c.prior_logits("AC").unwrap(), vec![vec![0.0, 0.0], vec![1.0, 2.0]]);
        assert_eq!(c.fitness("AC").unwrap(), 0.25);
        assert!(matches!(c.fitness("AC"), Err(ProtocolError::Closed)));
    }

    #[test]
    fn scripted_failures() {
        let mut c = scripted("{\"ok\":true}\n{\"id\":7,\"value\":1}\n");
        assert!(matches!(
            c.fitness("AA"),
            Err(ProtocolError::IdMismatch { expected: 1, got: 7 })
        ));
        let mut c = scripted("{\"ok\":true}\nnot json\n");
        assert!(matches!(c.fitness("AA"), Err(ProtocolError::Malformed { .. })));
        let mut c = scripted("{\"ok\":true}\n{\"id\":1,\"logits\":[[0,0]]}\n");
        assert!(matches!(c.prior_logits("AA"), Err(ProtocolError::Shape { .. })));
        let mut c = scripted("{\"ok\":true}\n{\"id\":1,\"error\":\"boom\"}\n");
        assert!(matches!(c.fitness("AA"), Err(ProtocolError::Remote(m)) if m == "boom"));
        let mut c = scripted("{\"ok\":true}\n{\"id\":1,\"value\":null}\n");
        assert!(matches!(c.fitness("AA"), Err(ProtocolError::Malformed { .. })));
    }

    #[test]
    fn rejected_handshake() {
        let mut c = SidecarClient::over_streams(
            Cursor::new(b"{\"ok\":false,\"reason\":\"alphabet\"}\n".to_vec()),
            io::sink(),
            Duration::from_secs(5),
        );
        assert!(matches!(c.handshake("AC", 2), Err(ProtocolError::Rejected(r)) if r == "alphabet"));
    }

    #[test]
    fn softmax_of_constant_rows_is_uniform() {
        let s = softmax_columns(&[vec![0.0; 4], vec![3.0; 4]]);
        assert!(s.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let s = softmax_columns(&[vec![0.0, 2.0_f64.ln()]]);
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-15 && (s[1] - 2.0 / 3.0).abs() < 1e-15);
    }
}
