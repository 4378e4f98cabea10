//! `EYEMLP1` model files: the ASCII magic `"EYEMLP1\n"`, little-endian `u32`
//! `n_in` and `n_hidden`, then `w1` (row-major), `b1`, `w2`, `b2` as
//! little-endian `f64`, with no padding.

use super::MlpParams;
use crate::{Error, Result};
use std::path::Path;

pub const MODEL_MAGIC: &[u8; 8] = b"EYEMLP1\n";

/// Upper bound on `n_in * n_hidden` accepted by the decoder.
pub const MAX_WEIGHTS: u64 = 1 << 26;

pub fn encode_model(m: &MlpParams) -> Vec<u8> {
    let n_weights = m.w1.len() + m.b1.len() + m.w2.len() + 1;
    let mut out = Vec::with_capacity(16 + 8 * n_weights);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(m.n_in() as u32).to_le_bytes());
    out.extend_from_slice(&(m.n_hidden() as u32).to_le_bytes());
    for v in m.w1.iter().chain(&m.b1).chain(&m.w2).chain(std::iter::once(&m.b2)) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpParams> {
    if bytes.len() < MODEL_MAGIC.len() || &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(Error::BadMagic { expected: "EYEMLP1\\n" });
    }
    let rest = &bytes[MODEL_MAGIC.len()..];
    if rest.len() < 8 {
        return Err(Error::Truncated("model header".into()));
    }
    let n_in = u32::from_le_bytes(rest[0..4].try_into().expect("4 bytes")) as u64;
    let n_hidden = u32::from_le_bytes(rest[4..8].try_into().expect("4 bytes")) as u64;
    if n_in.saturating_mul(n_hidden) > MAX_WEIGHTS {
        return Err(Error::ModelOverflow { n_in, n_hidden });
    }
    let count = (n_in * n_hidden + 2 * n_hidden + 1) as usize;
    let body = &rest[8..];
    if body.len() < count * 8 {
        return Err(Error::Truncated(format!(
            "model weights ({} of {} bytes)",
            body.len(),
            count * 8
        )));
    }
    if body.len() > count * 8 {
        return Err(Error::InvalidParameter(format!(
            "{} trailing bytes after model weights",
            body.len() - count * 8
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let (n_in, n_hidden) = (n_in as usize, n_hidden as usize);
    let (w1, rest) = values.split_at(n_in * n_hidden);
    let (b1, rest) = rest.split_at(n_hidden);
    let (w2, rest) = rest.split_at(n_hidden);
    MlpParams::from_parts(n_in, n_hidden, w1.to_vec(), b1.to_vec(), w2.to_vec(), rest[0])
}

pub fn save_model(m: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(m)).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes)
}
