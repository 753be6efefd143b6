//! Client for scorers running in another process, speaking the protocol in
//! [`crate::protocol`].
//!
//! Endpoints are written `cmd:<shell command>` (the command's stdin and
//! stdout carry the protocol) or `tcp:<host>:<port>`.

use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use templner_core::{GenerativeScorer, ScoreError, TokenScores};

use crate::protocol::{to_line, Hello, ScoreRequest, ScoreResponse, PROTOCOL_VERSION};

/// Overrides the configured scorer endpoint.
pub const ENDPOINT_ENV: &str = "TEMPLNER_SCORER_ENDPOINT";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Command(String),
    Tcp(String),
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(cmd) = s.strip_prefix("cmd:") {
            if cmd.trim().is_empty() {
                return Err("empty command in `cmd:` endpoint".into());
            }
            Ok(Endpoint::Command(cmd.to_string()))
        } else if let Some(addr) = s.strip_prefix("tcp:") {
            if !addr.contains(':') {
                return Err(format!("`{s}` needs host:port"));
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else {
            Err(format!("endpoint `{s}` must start with `cmd:` or `tcp:`"))
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Command(c) => write!(f, "cmd:{c}"),
            Endpoint::Tcp(a) => write!(f, "tcp:{a}"),
        }
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    next_id: i64,
    child: Option<Child>,
}

/// A remote [`GenerativeScorer`]. Calls are serialized over one connection;
/// responses are matched to requests by id, so the server may answer in any
/// order.
pub struct ExternalScorer {
    name: String,
    timeout: Duration,
    conn: Mutex<Connection>,
}

impl fmt::Debug for ExternalScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalScorer").field("endpoint", &self.name).field("timeout", &self.timeout).finish()
    }
}

fn spawn_reader<R: Read + Send + 'static>(reader: R) -> Receiver<io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(reader).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl ExternalScorer {
    /// Connects and waits up to `timeout` for the handshake.
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self, ScoreError> {
        let name = endpoint.to_string();
        let transport = |e: io::Error| ScoreError::Transport { endpoint: name.clone(), message: e.to_string() };
        match endpoint {
            Endpoint::Command(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(transport)?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let mut scorer = Self::from_streams(name.clone(), stdout, stdin, timeout);
                scorer.conn.get_mut().expect("fresh mutex").child = Some(child);
                scorer.handshake()?;
                Ok(scorer)
            }
            Endpoint::Tcp(addr) => {
                let addrs: Vec<_> = addr.to_socket_addrs().map_err(transport)?.collect();
                let mut last = io::Error::new(io::ErrorKind::NotFound, "address resolved to nothing");
                for a in addrs {
                    match TcpStream::connect_timeout(&a, timeout) {
                        Ok(stream) => {
                            let reader = stream.try_clone().map_err(transport)?;
                            let scorer = Self::from_streams(name.clone(), reader, stream, timeout);
                            scorer.handshake()?;
                            return Ok(scorer);
                        }
                        Err(e) => last = e,
                    }
                }
                Err(transport(last))
            }
        }
    }

    /// Wraps already-open streams. [`ExternalScorer::handshake`] must be
    /// called before scoring.
    pub fn from_streams<R, W>(name: impl Into<String>, reader: R, writer: W, timeout: Duration) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let conn = Connection { writer: Box::new(writer), lines: spawn_reader(reader), next_id: 0, child: None };
        Self { name: name.into(), timeout, conn: Mutex::new(conn) }
    }

    pub fn endpoint(&self) -> &str {
        &self.name
    }

    fn transport(&self, message: impl fmt::Display) -> ScoreError {
        ScoreError::Transport { endpoint: self.name.clone(), message: message.to_string() }
    }

    fn lock(&self) -> Result<std::sync::MutexGuard<'_, Connection>, ScoreError> {
        self.conn.lock().map_err(|_| self.transport("connection poisoned by an earlier panic"))
    }

    /// Reads and checks the server's handshake line.
    pub fn handshake(&self) -> Result<(), ScoreError> {
        let conn = self.lock()?;
        let line = match conn.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(self.transport(e)),
            Err(RecvTimeoutError::Timeout) => {
                return Err(ScoreError::NotReady(format!("no handshake from {} within {:?}", self.name, self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => return Err(self.transport("closed before the handshake")),
        };
        let hello: Hello = serde_json::from_str(&line).map_err(|_| ScoreError::Malformed {
            id: None,
            message: format!("expected handshake, got `{line}`"),
        })?;
        if hello.hello != 1 {
            return Err(ScoreError::Malformed { id: None, message: format!("bad handshake `{line}`") });
        }
        if hello.protocol_version != PROTOCOL_VERSION {
            return Err(ScoreError::VersionMismatch { expected: PROTOCOL_VERSION, found: hello.protocol_version });
        }
        Ok(())
    }

    /// Sends every `(source, target)` pair, then collects the answers.
    /// Empty targets score zero locally and are never sent.
    pub fn score_batch(&self, requests: &[(&[String], &[String])]) -> Result<Vec<TokenScores>, ScoreError> {
        let mut conn = self.lock()?;
        let first = conn.next_id;
        let mut results: Vec<Option<TokenScores>> = vec![None; requests.len()];
        let mut expected = std::collections::BTreeMap::new();
        for (i, (src, tgt)) in requests.iter().enumerate() {
            if tgt.is_empty() {
                results[i] = Some(TokenScores::default());
                continue;
            }
            let id = conn.next_id;
            conn.next_id += 1;
            let request = ScoreRequest { id, src: src.to_vec(), tgt: tgt.to_vec(), protocol_version: PROTOCOL_VERSION };
            writeln!(conn.writer, "{}", to_line(&request)).map_err(|e| self.transport(e))?;
            expected.insert(id, (i, tgt.len()));
        }
        conn.writer.flush().map_err(|e| self.transport(e))?;

        while !expected.is_empty() {
            let line = match conn.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(self.transport(e)),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(ScoreError::Timeout { endpoint: self.name.clone(), ids: expected.keys().copied().collect() })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let ids: Vec<i64> = expected.keys().copied().collect();
                    return Err(self.transport(format!("connection closed with ids {ids:?} outstanding")));
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let response: ScoreResponse = serde_json::from_str(&line)
                .map_err(|e| ScoreError::Malformed { id: None, message: format!("{e} in `{line}`") })?;
            let id = response.id;
            if id >= 0 && id < first {
                // late answer to an abandoned batch
                continue;
            }
            let Some((slot, len)) = expected.remove(&id) else {
                return Err(ScoreError::Malformed { id: Some(id), message: "response id matches no outstanding request".into() });
            };
            if let Some(error) = response.error {
                return Err(ScoreError::Backend { id, message: error });
            }
            let Some(values) = response.token_logprobs else {
                return Err(ScoreError::Malformed { id: Some(id), message: "neither token_logprobs nor error".into() });
            };
            if values.len() != len {
                return Err(ScoreError::Contract {
                    id,
                    message: format!("{} values for a {len}-token target", values.len()),
                });
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v > 0.0) {
                return Err(ScoreError::Contract { id, message: format!("log-probability {bad} is not finite and <= 0") });
            }
            results[slot] = Some(TokenScores::from_per_token(values));
        }
        Ok(results.into_iter().map(|r| r.expect("every slot answered")).collect())
    }
}

impl GenerativeScorer for ExternalScorer {
    fn score_target(&self, source: &[String], target: &[String]) -> Result<TokenScores, ScoreError> {
        Ok(self.score_batch(&[(source, target)])?.remove(0))
    }

    fn score_targets(&self, source: &[String], targets: &[Vec<String>]) -> Result<Vec<TokenScores>, ScoreError> {
        let requests: Vec<(&[String], &[String])> = targets.iter().map(|t| (source, t.as_slice())).collect();
        self.score_batch(&requests)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Ok(conn) = self.conn.get_mut() {
            conn.writer = Box::new(io::sink());
            if let Some(mut child) = conn.child.take() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}
