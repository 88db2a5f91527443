use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Ensemble, ModelParams, Standardizer, TrainConfig, CHANNELS, HIDDEN, KERNEL};
use crate::augment::AugPolicy;
use crate::corpus::{check_magic, read_u32, sidecar_path, write_atomic, FORMAT_VERSION};
use crate::dsp::{FeatureKind, FrameConfig};
use crate::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"FMDL";

/// magic, version, models, dims, kernel, channels, hidden, frames per segment
const HEADER_LEN: usize = 32;

/// Provenance stored next to a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSidecar {
    pub train_config: TrainConfig,
    pub kind: FeatureKind,
    pub baseline: FrameConfig,
    pub policy: AugPolicy,
    pub folds: usize,
    pub master_seed: u64,
    pub config_hash: String,
    #[serde(default)]
    pub loss_curves: Vec<Vec<f64>>,
}

fn encode(ensemble: &Ensemble) -> Result<Vec<u8>> {
    let dims = ensemble.standardizer.mean.len();
    if ensemble.models.is_empty() || ensemble.models.iter().any(|m| m.dims != dims) {
        return Err(Error::invalid("ensemble models disagree with the standardizer dimensionality"));
    }
    let header = [
        FORMAT_VERSION,
        ensemble.models.len() as u32,
        dims as u32,
        KERNEL as u32,
        CHANNELS as u32,
        HIDDEN as u32,
        ensemble.frames_per_segment as u32,
    ];
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    for v in header {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let values = ensemble
        .standardizer
        .mean
        .iter()
        .chain(&ensemble.standardizer.std)
        .copied()
        .chain(ensemble.models.iter().flat_map(ModelParams::to_flat));
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn decode(bytes: &[u8]) -> Result<Ensemble> {
    check_magic(bytes, MODEL_MAGIC, HEADER_LEN)?;
    let n_models = read_u32(bytes, 8) as usize;
    let dims = read_u32(bytes, 12) as usize;
    let shape = (read_u32(bytes, 16) as usize, read_u32(bytes, 20) as usize, read_u32(bytes, 24) as usize);
    if shape != (KERNEL, CHANNELS, HIDDEN) {
        return Err(Error::invalid(format!(
            "checkpoint architecture {shape:?} differs from kernel {KERNEL}, channels {CHANNELS}, hidden {HIDDEN}"
        )));
    }
    let frames_per_segment = read_u32(bytes, 28) as usize;
    let per_model = ModelParams::zeros(dims).num_params();
    let expected = (2 * dims + n_models * per_model) * 8;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::invalid(format!("{} trailing bytes in checkpoint", payload.len() - expected)));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    let (norm, params) = values.split_at(2 * dims);
    let models = params
        .chunks_exact(per_model.max(1))
        .map(|flat| ModelParams::from_flat(dims, flat))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        models,
        standardizer: Standardizer {
            mean: norm[..dims].to_vec(),
            std: norm[dims..].to_vec(),
        },
        frames_per_segment,
    })
}

/// Writes an FMDL file and its JSON sidecar, both atomically.
pub fn save_checkpoint(path: &Path, ensemble: &Ensemble, sidecar: &CheckpointSidecar) -> Result<()> {
    write_atomic(path, &encode(ensemble)?)?;
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(sidecar)?.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<(Ensemble, CheckpointSidecar)> {
    let ensemble = decode(&fs::read(path)?)?;
    let sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    Ok((ensemble, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble() -> Ensemble {
        Ensemble {
            models: (0..3).map(|s| ModelParams::init(4, s)).collect(),
            standardizer: Standardizer {
                mean: vec![0.5, -1.0, 2.0, 0.0],
                std: vec![1.0, 2.0, 0.25, 3.0],
            },
            frames_per_segment: 120,
        }
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fmdl");
        let sidecar = CheckpointSidecar {
            train_config: TrainConfig::default(),
            kind: FeatureKind::LogMel,
            baseline: FrameConfig::default(),
            policy: AugPolicy::None,
            folds: 0,
            master_seed: 7,
            config_hash: "abc".into(),
            loss_curves: vec![vec![0.7, 0.6]],
        };
        save_checkpoint(&path, &ensemble(), &sidecar).unwrap();
        let (e, s) = load_checkpoint(&path).unwrap();
        assert_eq!(e, ensemble());
        assert_eq!(s, sidecar);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = encode(&ensemble()).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(Error::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad), Err(Error::UnsupportedVersion(9))));
        let mut bad = bytes;
        bad[20] = 8;
        assert!(matches!(decode(&bad), Err(Error::InvalidArgument(_))));
    }
}
