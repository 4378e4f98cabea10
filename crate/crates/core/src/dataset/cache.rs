//! `EYEDS1` dataset cache: magic `"EYEDS1\n"`, little-endian `u32` sample
//! count and `u32` vector length, then per sample one label byte (0 or 1)
//! followed by the vector as little-endian `f64`.

use super::{Label, Provenance, Sample};
use crate::{Error, Result};
use std::path::Path;

pub const DATASET_MAGIC: &[u8; 7] = b"EYEDS1\n";

/// Upper bound on `count * vector length` accepted by the decoder.
pub const MAX_VALUES: u64 = 1 << 28;

pub fn encode_dataset(samples: &[Sample]) -> Result<Vec<u8>> {
    let dim = samples.first().map_or(0, |s| s.vector.len());
    if let Some(bad) = samples.iter().find(|s| s.vector.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.vector.len(),
        });
    }
    let mut out = Vec::with_capacity(15 + samples.len() * (1 + 8 * dim));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for s in samples {
        out.push(s.label as u8);
        for v in &s.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<Sample>> {
    if bytes.len() < DATASET_MAGIC.len() || &bytes[..DATASET_MAGIC.len()] != DATASET_MAGIC {
        return Err(Error::BadMagic { expected: "EYEDS1\\n" });
    }
    let rest = &bytes[DATASET_MAGIC.len()..];
    if rest.len() < 8 {
        return Err(Error::Truncated("dataset header".into()));
    }
    let count = u32::from_le_bytes(rest[0..4].try_into().expect("4 bytes")) as u64;
    let dim = u32::from_le_bytes(rest[4..8].try_into().expect("4 bytes")) as u64;
    if count.saturating_mul(dim) > MAX_VALUES {
        return Err(Error::InvalidParameter(format!(
            "dataset of {count} x {dim} values exceeds the limit"
        )));
    }
    let record = 1 + 8 * dim as usize;
    let body = &rest[8..];
    let needed = count as usize * record;
    if body.len() < needed {
        return Err(Error::Truncated(format!(
            "dataset samples ({} of {needed} bytes)",
            body.len()
        )));
    }
    if body.len() > needed {
        return Err(Error::InvalidParameter(format!(
            "{} trailing bytes after dataset",
            body.len() - needed
        )));
    }
    let mut samples = Vec::with_capacity(count as usize);
    for (i, chunk) in body.chunks_exact(record.max(1)).take(count as usize).enumerate() {
        let label = match chunk[0] {
            0 => Label::NonEye,
            1 => Label::Eye,
            other => return Err(Error::InvalidParameter(format!("sample {i}: label byte {other}"))),
        };
        let vector: Vec<f64> = chunk[1..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset vector"));
        }
        samples.push(Sample {
            vector,
            label,
            provenance: Provenance::Cache { index: i },
        });
    }
    Ok(samples)
}

pub fn save_dataset(samples: &[Sample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_dataset(samples)?).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    decode_dataset(&bytes)
}
