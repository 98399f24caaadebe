use serde::{Deserialize, Serialize};

use crate::denoiser::Architecture;
use crate::error::{invalid, DfsError, Result};
use crate::fuzzification::{MembershipParams, TrajectoryMode};
use crate::rulebase::{reverse_step, NoiseSchedule};

use super::weighting::weighting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMode {
    /// One denoiser per rule chain.
    #[default]
    PerPath,
    /// A single denoiser shared by every chain.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Ablation {
    #[default]
    #[serde(rename = "full")]
    Full,
    /// Inference engine off: raw memberships, no per-step weighting.
    #[serde(rename = "DFS-I")]
    NoInference,
    /// Only the highest-membership chain at `t = T` runs.
    #[serde(rename = "DFS-IS")]
    SingleChain,
    /// Single chain, diffusion directly in sample space.
    #[serde(rename = "DFS-ISL")]
    SingleChainRaw,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoInference,
        Ablation::SingleChain,
        Ablation::SingleChainRaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoInference => "DFS-I",
            Ablation::SingleChain => "DFS-IS",
            Ablation::SingleChainRaw => "DFS-ISL",
        }
    }

    pub fn normalizes(self) -> bool {
        !matches!(self, Ablation::NoInference)
    }

    pub fn single_chain(self) -> bool {
        matches!(self, Ablation::SingleChain | Ablation::SingleChainRaw)
    }
}

impl std::str::FromStr for Ablation {
    type Err = DfsError;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DfsError::InvalidArgument(format!("unknown ablation mode '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingStates {
    /// Closed-form forward marginal.
    #[default]
    Marginal,
    /// Step-by-step forward rules with the configured consequent weighting.
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodecMode {
    /// Diffusion runs on raw samples.
    #[default]
    Identity,
    /// One trained codec for the whole dataset.
    Single,
    /// One trained codec per condition label.
    PerLabel,
}

/// Every knob of training and generation. All fields have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub paths: usize,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub alpha: f64,
    pub weighting: String,
    pub path_mode: PathMode,
    pub reverse_step: String,
    pub trajectory: TrajectoryMode,
    pub training_states: TrainingStates,
    pub ablation: Ablation,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub time_dim: usize,
    pub cond_dim: usize,
    pub codec: CodecMode,
    pub codec_latent_dim: usize,
    pub codec_epochs: usize,
    pub codec_lr: f64,
    pub kmedoids_restarts: usize,
    pub kmedoids_max_iter: usize,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            paths: 3,
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            alpha: 0.5,
            weighting: "gate-only".into(),
            path_mode: PathMode::PerPath,
            reverse_step: "eq20-literal".into(),
            trajectory: TrajectoryMode::Mean,
            training_states: TrainingStates::Marginal,
            ablation: Ablation::Full,
            batch_size: 64,
            epochs: 30,
            lr: 1e-3,
            hidden: vec![128, 128],
            time_dim: 16,
            cond_dim: 8,
            codec: CodecMode::Identity,
            codec_latent_dim: 16,
            codec_epochs: 200,
            codec_lr: 1e-3,
            kmedoids_restarts: 10,
            kmedoids_max_iter: 100,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return invalid("paths must be >= 1");
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be >= 1");
        }
        if !(self.lr > 0.0) {
            return invalid("lr must be positive");
        }
        MembershipParams::new(self.alpha)?;
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)?;
        weighting(&self.weighting)?;
        reverse_step(&self.reverse_step)?;
        Architecture::new(1, self.time_dim, self.cond_dim, self.hidden.clone(), self.steps)?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }

    pub fn membership(&self) -> Result<MembershipParams> {
        MembershipParams::new(self.alpha)
    }

    pub fn architecture(&self, latent_dim: usize) -> Result<Architecture> {
        Architecture::new(latent_dim, self.time_dim, self.cond_dim, self.hidden.clone(), self.steps)
    }

    /// Betas scaled by `1000 / steps` so short schedules still end near pure
    /// noise, capped below 1.
    pub fn with_scaled_betas(mut self) -> Self {
        let s = 1000.0 / self.steps as f64;
        self.beta_start = (1e-4 * s).min(0.5);
        self.beta_end = (0.02 * s).min(0.999);
        self
    }
}
