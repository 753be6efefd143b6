//! Server side of the scorer protocol around any in-process scorer.
//!
//! Wrapping the built-in model gives a loopback sidecar whose answers can be
//! compared against in-process scoring.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;

use templner_core::GenerativeScorer;

use crate::protocol::{to_line, Hello, ScoreRequest, ScoreResponse, PROTOCOL_VERSION, UNPARSEABLE_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ServeSummary {
    pub requests: usize,
    pub errors: usize,
}

/// Answers one request line.
pub fn respond<S: GenerativeScorer + ?Sized>(scorer: &S, line: &str) -> ScoreResponse {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(_) => return ScoreResponse::err(UNPARSEABLE_ID, "parse"),
    };
    let Some(id) = value.get("id").and_then(serde_json::Value::as_i64) else {
        return ScoreResponse::err(UNPARSEABLE_ID, "parse");
    };
    let request: ScoreRequest = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return ScoreResponse::err(id, format!("invalid request: {e}")),
    };
    if request.protocol_version != PROTOCOL_VERSION {
        return ScoreResponse::err(
            id,
            format!("protocol_version: expected {PROTOCOL_VERSION}, found {}", request.protocol_version),
        );
    }
    if request.tgt.is_empty() {
        return ScoreResponse::err(id, "empty target");
    }
    match scorer.score_target(&request.src, &request.tgt) {
        Ok(scores) => ScoreResponse::ok(id, scores.per_token),
        Err(e) => ScoreResponse::err(id, format!("backend: {e}")),
    }
}

/// Writes the handshake, then one response per non-blank input line until
/// end of input.
pub fn serve<S, R, W>(scorer: &S, input: R, mut output: W) -> io::Result<ServeSummary>
where
    S: GenerativeScorer + ?Sized,
    R: BufRead,
    W: Write,
{
    writeln!(output, "{}", to_line(&Hello::current()))?;
    output.flush()?;
    let mut summary = ServeSummary::default();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = respond(scorer, &line);
        summary.requests += 1;
        summary.errors += usize::from(response.error.is_some());
        writeln!(output, "{}", to_line(&response))?;
        output.flush()?;
    }
    Ok(summary)
}

/// Serves TCP connections one after another with the same framing as
/// [`serve`]. Stops after `max_connections` when given.
pub fn serve_tcp<S: GenerativeScorer + ?Sized>(
    scorer: &S,
    listener: &TcpListener,
    max_connections: Option<usize>,
) -> io::Result<ServeSummary> {
    let mut total = ServeSummary::default();
    for (n, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let reader = BufReader::new(stream.try_clone()?);
        let s = serve(scorer, reader, stream)?;
        total.requests += s.requests;
        total.errors += s.errors;
        if max_connections.is_some_and(|m| n + 1 >= m) {
            break;
        }
    }
    Ok(total)
}
