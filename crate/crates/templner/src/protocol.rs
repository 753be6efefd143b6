//! JSON-lines scorer protocol, version 1.
//!
//! The server first writes the handshake `{"hello":1,"protocol_version":1}`.
//! The client then writes one [`ScoreRequest`] per line and the server
//! answers each with one [`ScoreResponse`] carrying the same id, in any
//! order. Unparseable lines are answered with id `-1` and error `"parse"`.

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// Id used in responses to lines that could not be parsed at all.
pub const UNPARSEABLE_ID: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub hello: u32,
    pub protocol_version: u32,
}

impl Hello {
    pub fn current() -> Self {
        Self { hello: 1, protocol_version: PROTOCOL_VERSION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: i64,
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    pub protocol_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScoreResponse {
    pub fn ok(id: i64, token_logprobs: Vec<f64>) -> Self {
        Self { id, token_logprobs: Some(token_logprobs), error: None }
    }

    pub fn err(id: i64, error: impl Into<String>) -> Self {
        Self { id, token_logprobs: None, error: Some(error.into()) }
    }
}

/// Serializes one record as a single line without the trailing newline.
pub fn to_line<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("protocol records always serialize")
}
