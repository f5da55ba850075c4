//! Binary checkpoint container. See `docs/checkpoint-format.md` for the
//! byte layout.

use std::path::Path;

use arma_core::data::{ScalerStats, SplitSpec};
use arma_core::metrics::MetricsReport;
use arma_core::model::{ArmaParams, ParamGroup, Variant};
use arma_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"ARMACKPT";
pub const END_MARKER: &[u8; 8] = b"ARMAEND\0";
pub const FORMAT_VERSION: u32 = 1;

const REVIN_EPS: &str = "revin.eps";
const SCALER_MEAN: &str = "scaler.mean";
const SCALER_STD: &str = "scaler.std";

/// Everything needed to re-evaluate a trained block on fresh data.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub scaler: ScalerStats,
    pub params: ArmaParams,
}

/// The JSON section of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub train_config: TrainConfig,
    pub dataset: String,
    pub split: SplitSpec,
    pub channel_names: Vec<String>,
    pub best_epoch: Option<usize>,
    pub best_val: Option<MetricsReport>,
}

impl Checkpoint {
    pub fn variant(&self) -> Variant {
        self.meta.train_config.variant
    }

    pub fn expect_variant(&self, expected: Variant) -> Result<()> {
        if self.variant() != expected {
            return Err(CliError::VariantMismatch {
                expected,
                found: self.variant(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("checkpoint metadata always serializes");
        let mut arrays: Vec<(&str, &[f64])> = ParamGroup::ALL
            .iter()
            .map(|&g| (g.name(), self.params.group(g)))
            .collect();
        let eps = [self.params.revin_eps];
        arrays.push((REVIN_EPS, &eps));
        arrays.push((SCALER_MEAN, &self.scaler.mean));
        arrays.push((SCALER_STD, &self.scaler.std));

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for (name, values) in arrays {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(END_MARKER);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err("not a checkpoint file (bad magic)".into());
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(format!("unsupported format version {version} (expected {FORMAT_VERSION})"));
        }
        let meta_len = usize::try_from(cur.u64()?).map_err(|_| "metadata length overflows")?;
        let meta: CheckpointMeta =
            serde_json::from_slice(cur.take(meta_len)?).map_err(|e| format!("bad metadata: {e}"))?;
        let count = cur.u32()?;
        let mut arrays = std::collections::BTreeMap::new();
        for _ in 0..count {
            let name_len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(name_len)?)
                .map_err(|_| "array name is not UTF-8")?
                .to_string();
            let len = usize::try_from(cur.u64()?).map_err(|_| "array length overflows")?;
            let raw = cur.take(len.checked_mul(8).ok_or("array length overflows")?)?;
            let values: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            if arrays.insert(name.clone(), values).is_some() {
                return Err(format!("duplicate array '{name}'"));
            }
        }
        if cur.take(8)? != END_MARKER {
            return Err("missing end marker".into());
        }
        if cur.pos != bytes.len() {
            return Err(format!("{} trailing bytes after end marker", bytes.len() - cur.pos));
        }

        let tc = &meta.train_config;
        let mut params = ArmaParams::zeros(tc.lookback, tc.horizon, tc.kernel_size, tc.channels).map_err(|e| e.to_string())?;
        let mut take_array = |name: &str, expected: usize| -> std::result::Result<Vec<f64>, String> {
            let values = arrays.remove(name).ok_or_else(|| format!("missing array '{name}'"))?;
            if values.len() != expected {
                return Err(format!("array '{name}' has {} values, expected {expected}", values.len()));
            }
            Ok(values)
        };
        for group in ParamGroup::ALL {
            let len = params.group(group).len();
            let values = take_array(group.name(), len)?;
            params.group_mut(group).copy_from_slice(&values);
        }
        params.revin_eps = take_array(REVIN_EPS, 1)?[0];
        let scaler = ScalerStats {
            mean: take_array(SCALER_MEAN, tc.channels)?,
            std: take_array(SCALER_STD, tc.channels)?,
        };
        if let Some(name) = arrays.keys().next() {
            return Err(format!("unknown array '{name}'"));
        }
        params.validate().map_err(|e| e.to_string())?;
        Ok(Checkpoint { meta, scaler, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::Checkpoint {
                path: path.to_path_buf(),
                message: "file not found".into(),
            },
            _ => CliError::io(path)(e),
        })?;
        Self::from_bytes(&bytes).map_err(|message| CliError::Checkpoint {
            path: path.to_path_buf(),
            message,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            format!("truncated: needed {n} bytes at offset {}, file has {}", self.pos, self.bytes.len())
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
