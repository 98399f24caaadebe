//! The inference engine and the end-to-end pipeline: cross-path membership
//! normalization, consequent weighting, multi-path training and generation,
//! path fusion, and ablations.
//!
//! # Random stream layout
//!
//! Everything is drawn from sub-streams of the run's root [`RngStream`], so a
//! result never depends on evaluation order:
//!
//! | purpose                         | stream                                   |
//! |---------------------------------|------------------------------------------|
//! | codec training                  | `("codec", label)`                       |
//! | k-medoids                       | `"kmedoids"`                             |
//! | sampled trajectory of path `k`  | `("trajectory", k)`                      |
//! | denoiser `i` initialization     | `("denoiser-init", i)`                   |
//! | epoch `e` shuffle               | `("shuffle", e)`                         |
//! | batch `b` of epoch `e`          | `("epoch", e)` then `("batch", b)`       |
//! | generated sample `j`            | `("sample", j)`                          |
//!
//! Within a batch stream each example draws its step `t` and then its noise.
//! Within a sample stream the initial noise comes first, followed by one
//! noise vector per stochastic reverse step `t = T..2`, shared by all paths.

mod ablation;
mod config;
mod generate;
mod membership;
mod train;
mod weighting;

pub use ablation::{ablation_config, ablation_report, evaluate_samples, generate_balanced, run_ablation, AblationReport};
pub use config::{Ablation, CodecMode, EngineConfig, PathMode, TrainingStates};
pub use generate::{generate, generate_with, Generation};
pub use membership::{fuse, normalize_memberships, MembershipTrace, MembershipVector};
pub use train::{batch_stream, train, train_observed};
pub use weighting::{weight_consequent, weighting, ConsequentWeighting, GateOnly, Renormalized, Verbatim, WEIGHTINGS};

use serde::{Deserialize, Serialize};

use crate::codec::CodecRegistry;
use crate::condition::ConditionSpace;
use crate::data::DatasetDescriptor;
use crate::denoiser::DenoiserParams;
use crate::error::{invalid, Result};
use crate::rulebase::{NoiseSchedule, RuleChain};

/// Where the training data came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: DatasetDescriptor,
    pub data_seed: u64,
}

/// Complete trained state of an engine.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: EngineConfig,
    pub schedule: NoiseSchedule,
    pub codecs: CodecRegistry,
    pub conditions: ConditionSpace,
    /// Training-set indices of the chain medoids.
    pub medoids: Vec<usize>,
    pub chains: Vec<RuleChain>,
    pub denoisers: Vec<DenoiserParams>,
    /// Mean minibatch loss of every epoch.
    pub loss_history: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl Checkpoint {
    pub fn paths(&self) -> usize {
        self.chains.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.codecs.latent_dim()
    }

    pub fn denoiser_for(&self, path: usize) -> &DenoiserParams {
        &self.denoisers[self.chains[path].denoiser]
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.chains.is_empty() || self.chains.len() != self.config.paths {
            return invalid("checkpoint chain count does not match config");
        }
        if self.schedule.steps() != self.config.steps {
            return invalid("checkpoint schedule does not match config");
        }
        let l = self.latent_dim();
        for c in &self.chains {
            if c.denoiser >= self.denoisers.len() || c.steps() != self.config.steps {
                return invalid("rule chain is inconsistent with checkpoint");
            }
            if c.trajectory.states.iter().any(|s| s.len() != l) {
                return invalid("trajectory latent dimension mismatch");
            }
        }
        for d in &self.denoisers {
            if d.arch.latent_dim != l || d.arch.cond_dim != self.conditions.dim() || d.arch.steps != self.config.steps {
                return invalid("denoiser architecture does not match checkpoint");
            }
            if !d.is_finite() {
                return invalid("denoiser parameters are not finite");
            }
        }
        Ok(())
    }
}
