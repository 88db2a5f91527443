use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_atomic, Label, Split};
use crate::augment::Transform;
use crate::dsp::{FeatureKind, FeatureMatrix, FrameConfig, Matrix};
use crate::{Error, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"FRAG";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Provenance stored next to a feature file as `<name>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub config: FrameConfig,
    pub kind: FeatureKind,
    pub sample_rate: u32,
    #[serde(default)]
    pub utterance: Option<String>,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub split: Option<Split>,
    #[serde(default)]
    pub variant: usize,
    #[serde(default)]
    pub transform: Option<Transform>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub config_hash: Option<String>,
}

/// `magic | version | rows | cols` (u32 little-endian) followed by the
/// row-major f32 little-endian payload.
pub fn encode_matrix(magic: [u8; 4], rows: usize, cols: usize, values: &[f32]) -> Vec<u8> {
    assert_eq!(values.len(), rows * cols, "payload does not match shape");
    let mut out = Vec::with_capacity(HEADER_LEN + values.len() * 4);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

pub(crate) fn check_magic(bytes: &[u8], magic: [u8; 4], header_len: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: header_len,
            found: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("four bytes");
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            expected: header_len,
            found: bytes.len(),
        });
    }
    let version = read_u32(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok(())
}

/// Inverse of [`encode_matrix`]: `(rows, cols, values)`.
pub fn decode_matrix(bytes: &[u8], magic: [u8; 4]) -> Result<(usize, usize, Vec<f32>)> {
    check_magic(bytes, magic, HEADER_LEN)?;
    let rows = read_u32(bytes, 8) as usize;
    let cols = read_u32(bytes, 12) as usize;
    let expected = rows * cols * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::invalid(format!(
            "{} trailing bytes after a {rows}x{cols} payload",
            payload.len() - expected
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
        .collect();
    Ok((rows, cols, values))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the matrix (as f32) and its JSON sidecar, both atomically.
pub fn write_features(path: &Path, features: &FeatureMatrix, sidecar: &FeatureSidecar) -> Result<()> {
    let values: Vec<f32> = features.values.as_slice().iter().map(|&v| v as f32).collect();
    let bytes = encode_matrix(FEATURE_MAGIC, features.frames(), features.dims(), &values);
    write_atomic(path, &bytes)?;
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(sidecar)?.as_bytes())
}

pub fn read_features(path: &Path) -> Result<(FeatureMatrix, FeatureSidecar)> {
    let (rows, cols, values) = decode_matrix(&fs::read(path)?, FEATURE_MAGIC)?;
    let sidecar: FeatureSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let matrix = FeatureMatrix {
        values: Matrix::from_vec(rows, cols, values.into_iter().map(f64::from).collect()),
        kind: sidecar.kind,
        config: sidecar.config.clone(),
    };
    Ok((matrix, sidecar))
}
