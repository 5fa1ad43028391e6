//! Adapter that lets an externally served model (for example a fine-tuned
//! transformer encoder) act as the clarification-need predictor over a
//! newline-delimited JSON protocol.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Prediction;

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("could not reach external predictor: {0}")]
    Connection(String),
    #[error("external predictor protocol violation: {0}")]
    Protocol(String),
}

/// Where the external predictor lives: a child process spoken to over
/// stdin/stdout, or a TCP endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EndpointConfig {
    Stdio {
        command: String,
        #[serde(default)]
        args: Vec<String>,
    },
    Tcp {
        addr: String,
    },
}

#[derive(Serialize)]
struct Request<'a> {
    query: &'a str,
}

#[derive(Deserialize)]
struct Response {
    probability_ambiguous: f64,
}

#[derive(Debug)]
enum Channel {
    Child {
        process: Child,
        stdin: ChildStdin,
        stdout: BufReader<ChildStdout>,
    },
    Tcp {
        writer: TcpStream,
        reader: BufReader<TcpStream>,
    },
}

/// A live connection to an external predictor. One request line out, one
/// response line back, per query.
#[derive(Debug)]
pub struct ExternalPredictor {
    channel: Channel,
}

impl ExternalPredictor {
    pub fn connect(config: &EndpointConfig) -> Result<ExternalPredictor, ExternalError> {
        let channel = match config {
            EndpointConfig::Stdio { command, args } => {
                let mut process = Command::new(command)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| ExternalError::Connection(format!("spawn {command}: {e}")))?;
                let stdin = process.stdin.take().expect("piped stdin");
                let stdout = BufReader::new(process.stdout.take().expect("piped stdout"));
                Channel::Child {
                    process,
                    stdin,
                    stdout,
                }
            }
            EndpointConfig::Tcp { addr } => {
                let writer = TcpStream::connect(addr)
                    .map_err(|e| ExternalError::Connection(format!("connect {addr}: {e}")))?;
                let reader = writer
                    .try_clone()
                    .map_err(|e| ExternalError::Connection(e.to_string()))?;
                Channel::Tcp {
                    writer,
                    reader: BufReader::new(reader),
                }
            }
        };
        Ok(ExternalPredictor { channel })
    }

    pub fn predict(&mut self, query: &str) -> Result<Prediction, ExternalError> {
        let request = serde_json::to_string(&Request { query }).expect("request serializes");
        let line = self.round_trip(&request)?;
        let response: Response = serde_json::from_str(&line)
            .map_err(|e| ExternalError::Protocol(format!("bad response line {line:?}: {e}")))?;
        let p = response.probability_ambiguous;
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(ExternalError::Protocol(format!(
                "probability_ambiguous {p} outside [0, 1]"
            )));
        }
        Ok(Prediction::from_probability(p))
    }

    fn round_trip(&mut self, request: &str) -> Result<String, ExternalError> {
        let (writer, reader): (&mut dyn Write, &mut dyn BufRead) = match &mut self.channel {
            Channel::Child { stdin, stdout, .. } => (stdin, stdout),
            Channel::Tcp { writer, reader } => (writer, reader),
        };
        writer
            .write_all(request.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .and_then(|_| writer.flush())
            .map_err(|e| ExternalError::Connection(format!("send failed: {e}")))?;
        let mut line = String::new();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| ExternalError::Connection(format!("receive failed: {e}")))?;
        if n == 0 {
            return Err(ExternalError::Protocol(
                "endpoint closed before responding".into(),
            ));
        }
        Ok(line)
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Channel::Child { process, .. } = &mut self.channel {
            let _ = process.kill();
            let _ = process.wait();
        }
    }
}

/// Connects, asks about one query, and disconnects.
pub fn external_predict(config: &EndpointConfig, query: &str) -> Result<Prediction, ExternalError> {
    ExternalPredictor::connect(config)?.predict(query)
}
