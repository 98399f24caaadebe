use crate::condition::Condition;
use crate::data::SampleSet;
use crate::error::{invalid, Result};
use crate::evaluation::metric;
use crate::numerics::RngStream;

use super::config::{Ablation, CodecMode, EngineConfig};
use super::generate::generate_with;
use super::membership::MembershipTrace;
use super::train::train;
use super::Checkpoint;

/// Metrics of one ablation mode against held-out data.
#[derive(Debug, Clone)]
pub struct AblationReport {
    pub mode: Ablation,
    /// `(metric name, value)` in request order.
    pub metrics: Vec<(String, f64)>,
    pub samples: SampleSet,
    pub traces: Vec<MembershipTrace>,
}

impl AblationReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Generates as many samples per label as `reference` holds, label `l`
/// drawing from stream `("label", l)`; the pooled set keeps label order.
pub fn generate_balanced(
    checkpoint: &Checkpoint,
    reference: &SampleSet,
    ablation: Ablation,
    rng: &RngStream,
) -> Result<(SampleSet, Vec<MembershipTrace>)> {
    let labels = match &reference.labels {
        Some(l) => l,
        None => return invalid("balanced generation needs a labeled reference set"),
    };
    let mut data = Vec::new();
    let mut out_labels = Vec::new();
    let mut traces = Vec::new();
    for label in 0..reference.label_count() {
        let count = labels.iter().filter(|&&l| l == label).count();
        if count == 0 {
            continue;
        }
        let stream = rng.derive_indexed("label", label as u64);
        let g = generate_with(checkpoint, Condition(label), count, &stream, ablation)?;
        data.extend_from_slice(&g.samples.data);
        out_labels.extend(std::iter::repeat_n(label, count));
        traces.extend(g.traces);
    }
    Ok((SampleSet::new(reference.dim, data, Some(out_labels))?, traces))
}

/// Evaluates `gen` against `real` with the named metrics; each metric gets
/// its own stream `("metric", i)`.
pub fn evaluate_samples(real: &SampleSet, gen: &SampleSet, names: &[&str], rng: &RngStream) -> Result<Vec<(String, f64)>> {
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let m = metric(name)?;
            let mut stream = rng.derive_indexed("metric", i as u64);
            Ok((name.to_string(), m.compute(real, gen, &mut stream)?))
        })
        .collect()
}

/// Configuration an ablation mode trains with: DFS-ISL drops the latent
/// codec, every other mode keeps the configured one.
pub fn ablation_config(config: &EngineConfig, mode: Ablation) -> EngineConfig {
    let mut cfg = config.clone();
    cfg.ablation = mode;
    if mode == Ablation::SingleChainRaw {
        cfg.codec = CodecMode::Identity;
    }
    cfg
}

/// Scores one ablation mode on an already trained checkpoint.
pub fn ablation_report(
    checkpoint: &Checkpoint,
    heldout: &SampleSet,
    mode: Ablation,
    metrics: &[&str],
    rng: &RngStream,
) -> Result<AblationReport> {
    let (samples, traces) = generate_balanced(checkpoint, heldout, mode, &rng.derive("generate"))?;
    let metrics = evaluate_samples(heldout, &samples, metrics, &rng.derive("evaluate"))?;
    Ok(AblationReport { mode, metrics, samples, traces })
}

/// Trains under `mode` and scores generated samples against `heldout`.
pub fn run_ablation(
    train_set: &SampleSet,
    heldout: &SampleSet,
    config: &EngineConfig,
    mode: Ablation,
    metrics: &[&str],
    rng: &RngStream,
) -> Result<AblationReport> {
    let cfg = ablation_config(config, mode);
    let checkpoint = train(train_set, &cfg, &rng.derive("train"))?;
    ablation_report(&checkpoint, heldout, mode, metrics, rng)
}
