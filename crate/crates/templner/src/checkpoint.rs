//! Binary model checkpoints.
//!
//! Layout: the 8-byte magic `TMPLNRCK`, the format version as a
//! little-endian `u32`, the header length as a little-endian `u64`, a UTF-8
//! JSON header (model dims, vocabulary, tensor names and shapes), then every
//! tensor's values in header order as row-major little-endian `f64`.
//! Loading and saving round-trips bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use templner_core::scorer::{Matrix, ModelConfig, Vocab};
use templner_core::TinySeq2Seq;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"TMPLNRCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0} (this build reads {FORMAT_VERSION})")]
    Version(u32),
    #[error("checkpoint truncated: {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after the last tensor")]
    Trailing(usize),
    #[error("bad header: {0}")]
    Header(String),
    #[error("inconsistent model: {0}")]
    Model(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model: ModelConfig,
    vocab: Vec<String>,
    tensors: Vec<TensorEntry>,
}

pub fn to_bytes(model: &TinySeq2Seq) -> Vec<u8> {
    let tensors = model.tensors();
    let header = Header {
        format_version: FORMAT_VERSION,
        model: *model.config(),
        vocab: model.vocab().tokens().to_vec(),
        tensors: tensors
            .iter()
            .map(|(name, m)| TensorEntry { name: name.to_string(), rows: m.rows, cols: m.cols })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let body: usize = tensors.iter().map(|(_, m)| m.data.len() * 8).sum();
    let mut out = Vec::with_capacity(20 + json.len() + body);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, m) in tensors {
        for v in &m.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
    if bytes.len() < n {
        return Err(CheckpointError::Truncated(what));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<TinySeq2Seq, CheckpointError> {
    let input = &mut bytes;
    if take(input, 8, "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(take(input, 4, "version")?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let len = u64::from_le_bytes(take(input, 8, "header length")?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| CheckpointError::Truncated("header"))?;
    let header: Header =
        serde_json::from_slice(take(input, len, "header")?).map_err(|e| CheckpointError::Header(e.to_string()))?;
    if header.format_version != version {
        return Err(CheckpointError::Header(format!(
            "header says version {}, prefix says {version}",
            header.format_version
        )));
    }
    let vocab = Vocab::from_token_list(header.vocab)
        .ok_or_else(|| CheckpointError::Header("vocabulary must start with the special tokens and be unique".into()))?;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        let n = entry.rows.checked_mul(entry.cols).ok_or(CheckpointError::Truncated("tensor"))?;
        let raw = take(input, n.checked_mul(8).ok_or(CheckpointError::Truncated("tensor"))?, "tensor data")?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let matrix = Matrix::from_vec(entry.rows, entry.cols, data).expect("length checked");
        tensors.push((entry.name, matrix));
    }
    if !input.is_empty() {
        return Err(CheckpointError::Trailing(input.len()));
    }
    TinySeq2Seq::from_tensors(vocab, header.model, tensors).map_err(|e| CheckpointError::Model(e.to_string()))
}

pub fn save(model: &TinySeq2Seq, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_bytes(model)).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
}

pub fn load(path: &Path) -> Result<TinySeq2Seq, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> TinySeq2Seq {
        let vocab = Vocab::build(["a", "b", "c"]);
        let config = ModelConfig { embed_dim: 3, hidden_dim: 4, seed: 9, zero_output_layer: false };
        TinySeq2Seq::new(vocab, config).unwrap()
    }

    #[test]
    fn bit_exact_round_trip() {
        let m = model();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(to_bytes(&back), bytes);
        for ((n1, a), (n2, b)) in m.tensors().into_iter().zip(back.tensors()) {
            assert_eq!(n1, n2);
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back.vocab(), m.vocab());
        assert_eq!(back.config(), m.config());
    }

    #[test]
    fn rejects_damage() {
        let bytes = to_bytes(&model());
        assert!(matches!(from_bytes(b"NOTACKPT\x01\0\0\0"), Err(CheckpointError::BadMagic)));
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(CheckpointError::Truncated(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(from_bytes(&extra), Err(CheckpointError::Trailing(1))));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(from_bytes(&v2), Err(CheckpointError::Version(2))));
    }
}
