//! Checkpoint persistence: one JSON document whose numeric arrays are
//! base64-encoded little-endian `f64` payloads with explicit shapes.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::codec::{Codec, CodecRegistry};
use crate::condition::{Condition, ConditionSpace};
use crate::denoiser::{Architecture, DenoiserParams};
use crate::engine::{Checkpoint, EngineConfig, Provenance};
use crate::error::{DfsError, Result};
use crate::fuzzification::RepresentativeTrajectory;
use crate::rulebase::{NoiseSchedule, RuleChain, ScheduleParams};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A shaped `f64` array stored as base64 of its little-endian bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackedArray {
    pub shape: Vec<usize>,
    pub data: String,
}

impl PackedArray {
    pub fn pack(shape: Vec<usize>, values: &[f64]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self { shape, data: STANDARD.encode(bytes) }
    }

    pub fn unpack(&self) -> Result<Vec<f64>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| DfsError::Format(format!("bad base64 payload: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(DfsError::Format("payload length is not a multiple of 8 bytes".into()));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let expected: usize = self.shape.iter().product();
        if values.len() != expected {
            return Err(DfsError::Format(format!(
                "array of shape {:?} holds {} values",
                self.shape,
                values.len()
            )));
        }
        Ok(values)
    }

    fn unpack_shape(&self, shape: &[usize]) -> Result<Vec<f64>> {
        if self.shape != shape {
            return Err(DfsError::Format(format!("expected shape {:?}, found {:?}", shape, self.shape)));
        }
        self.unpack()
    }

    fn unpack_rows(&self) -> Result<Vec<Vec<f64>>> {
        if self.shape.len() != 2 {
            return Err(DfsError::Format(format!("expected a matrix, found shape {:?}", self.shape)));
        }
        let cols = self.shape[1];
        Ok(self.unpack()?.chunks(cols.max(1)).map(<[f64]>::to_vec).collect())
    }
}

fn pack_rows(rows: &[Vec<f64>]) -> PackedArray {
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    PackedArray::pack(vec![rows.len(), cols], &flat)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodecDoc {
    sample_dim: usize,
    latent_dim: usize,
    enc_w: PackedArray,
    enc_b: PackedArray,
    dec_w: PackedArray,
    dec_b: PackedArray,
    representative: PackedArray,
    representative_condition: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDoc {
    path: usize,
    denoiser: usize,
    condition: usize,
    trajectory: PackedArray,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenoiserDoc {
    arch: Architecture,
    values: PackedArray,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    version: u32,
    config: EngineConfig,
    schedule: ScheduleParams,
    conditions: PackedArray,
    codecs: Vec<CodecDoc>,
    medoids: Vec<usize>,
    chains: Vec<ChainDoc>,
    denoisers: Vec<DenoiserDoc>,
    loss_history: PackedArray,
    provenance: Option<Provenance>,
}

impl CheckpointDoc {
    fn from_checkpoint(c: &Checkpoint) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config: c.config.clone(),
            schedule: c.schedule.params(),
            conditions: pack_rows(c.conditions.table()),
            codecs: c
                .codecs
                .codecs()
                .iter()
                .map(|k| CodecDoc {
                    sample_dim: k.sample_dim,
                    latent_dim: k.latent_dim,
                    enc_w: PackedArray::pack(vec![k.latent_dim, k.sample_dim], &k.enc_w),
                    enc_b: PackedArray::pack(vec![k.latent_dim], &k.enc_b),
                    dec_w: PackedArray::pack(vec![k.sample_dim, k.latent_dim], &k.dec_w),
                    dec_b: PackedArray::pack(vec![k.sample_dim], &k.dec_b),
                    representative: PackedArray::pack(vec![k.sample_dim], &k.representative),
                    representative_condition: k.representative_condition.0,
                })
                .collect(),
            medoids: c.medoids.clone(),
            chains: c
                .chains
                .iter()
                .map(|ch| ChainDoc {
                    path: ch.path,
                    denoiser: ch.denoiser,
                    condition: ch.trajectory.condition.0,
                    trajectory: pack_rows(&ch.trajectory.states),
                })
                .collect(),
            denoisers: c
                .denoisers
                .iter()
                .map(|d| DenoiserDoc {
                    arch: d.arch.clone(),
                    values: PackedArray::pack(vec![d.values.len()], &d.values),
                })
                .collect(),
            loss_history: PackedArray::pack(vec![c.loss_history.len()], &c.loss_history),
            provenance: c.provenance.clone(),
        }
    }

    fn into_checkpoint(self) -> Result<Checkpoint> {
        if self.version != CHECKPOINT_VERSION {
            return Err(DfsError::Format(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let codecs = self
            .codecs
            .into_iter()
            .map(|k| {
                let (s, l) = (k.sample_dim, k.latent_dim);
                Ok(Codec {
                    sample_dim: s,
                    latent_dim: l,
                    enc_w: k.enc_w.unpack_shape(&[l, s])?,
                    enc_b: k.enc_b.unpack_shape(&[l])?,
                    dec_w: k.dec_w.unpack_shape(&[s, l])?,
                    dec_b: k.dec_b.unpack_shape(&[s])?,
                    representative: k.representative.unpack_shape(&[s])?,
                    representative_condition: Condition(k.representative_condition),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let chains = self
            .chains
            .into_iter()
            .map(|c| {
                let states = c.trajectory.unpack_rows()?;
                let trajectory = RepresentativeTrajectory { path: c.path, condition: Condition(c.condition), states };
                Ok(RuleChain::new(c.path, trajectory, c.denoiser))
            })
            .collect::<Result<Vec<_>>>()?;
        let denoisers = self
            .denoisers
            .into_iter()
            .map(|d| {
                let n = d.arch.param_count();
                DenoiserParams::from_values(d.arch, d.values.unpack_shape(&[n])?)
            })
            .collect::<Result<Vec<_>>>()?;
        let checkpoint = Checkpoint {
            config: self.config,
            schedule: NoiseSchedule::from_params(self.schedule)?,
            codecs: CodecRegistry::new(codecs)?,
            conditions: ConditionSpace::from_table(self.conditions.unpack_rows()?)?,
            medoids: self.medoids,
            chains,
            denoisers,
            loss_history: self.loss_history.unpack()?,
            provenance: self.provenance,
        };
        checkpoint.validate().map_err(|e| DfsError::Format(format!("inconsistent checkpoint: {e}")))?;
        Ok(checkpoint)
    }
}

/// Serializes a checkpoint to its canonical JSON text.
pub fn checkpoint_to_json(checkpoint: &Checkpoint) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&CheckpointDoc::from_checkpoint(checkpoint))?;
    text.push('\n');
    Ok(text)
}

pub fn checkpoint_from_json(text: &str) -> Result<Checkpoint> {
    let doc: CheckpointDoc = serde_json::from_str(text)?;
    doc.into_checkpoint()
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_json(checkpoint)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    checkpoint_from_json(&std::fs::read_to_string(path)?)
}
