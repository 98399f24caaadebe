use rayon::prelude::*;

use crate::codec::argmax;
use crate::condition::Condition;
use crate::data::SampleSet;
use crate::denoiser::{input_row, predict_rows};
use crate::error::{invalid, Result};
use crate::fuzzification::smc;
use crate::numerics::RngStream;
use crate::rulebase::reverse_step;

use super::config::Ablation;
use super::membership::{fuse, normalize_memberships, MembershipTrace};
use super::weighting::weighting;
use super::Checkpoint;

/// Output of one generation call.
#[derive(Debug, Clone)]
pub struct Generation {
    /// Decoded samples, labeled with the prompt condition.
    pub samples: SampleSet,
    /// Fused latent of every sample.
    pub latents: Vec<Vec<f64>>,
    /// Chains that ran for each sample.
    pub active_paths: Vec<Vec<usize>>,
    /// Final state of each active chain, aligned with `active_paths`.
    pub path_states: Vec<Vec<Vec<f64>>>,
    pub fusion_weights: Vec<Vec<f64>>,
    pub traces: Vec<MembershipTrace>,
}

/// Reverse diffusion through every rule chain from shared initial noise,
/// followed by membership-weighted fusion and decoding.
pub fn generate(checkpoint: &Checkpoint, cond: Condition, n: usize, rng: &RngStream) -> Result<Generation> {
    generate_with(checkpoint, cond, n, rng, checkpoint.config.ablation)
}

/// As [`generate`] with an explicit ablation mode.
pub fn generate_with(
    checkpoint: &Checkpoint,
    cond: Condition,
    n: usize,
    rng: &RngStream,
    ablation: Ablation,
) -> Result<Generation> {
    let cfg = &checkpoint.config;
    let space = &checkpoint.conditions;
    let emb = space.embed(cond)?.to_vec();
    if n == 0 {
        return invalid("generate: n must be >= 1");
    }
    let params = cfg.membership()?;
    let schedule = &checkpoint.schedule;
    let steps = schedule.steps();
    let weighting = weighting(&cfg.weighting)?;
    let reverse = reverse_step(&cfg.reverse_step)?;
    let chains = &checkpoint.chains;
    let k = chains.len();
    let d = checkpoint.latent_dim();
    let arch = &checkpoint.denoisers[0].arch;

    let membership_of = |z: &[f64], t: usize, path: usize| {
        smc(z, chains[path].antecedent(t), cond, chains[path].trajectory.condition, space, params)
    };

    let mut streams: Vec<RngStream> = (0..n).map(|j| rng.derive_indexed("sample", j as u64)).collect();
    let mut states: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    let mut active_paths: Vec<Vec<usize>> = Vec::with_capacity(n);
    for s in streams.iter_mut() {
        let eps = s.normal_vec(d);
        let active = if ablation.single_chain() {
            let raw = (0..k).map(|p| membership_of(&eps, steps, p)).collect::<Result<Vec<_>>>()?;
            vec![argmax(&normalize_memberships(&raw).normalized)]
        } else {
            (0..k).collect()
        };
        states.push(vec![eps; active.len()]);
        active_paths.push(active);
    }
    let mut traces: Vec<MembershipTrace> = (0..n)
        .map(|_| MembershipTrace {
            rows: Vec::with_capacity(steps),
            normalized: ablation.normalizes(),
        })
        .collect();

    for t in (1..=steps).rev() {
        // memberships of the incoming states
        let mut mus: Vec<Vec<f64>> = Vec::with_capacity(n);
        for j in 0..n {
            let raw = active_paths[j]
                .iter()
                .zip(&states[j])
                .map(|(&p, z)| membership_of(z, t, p))
                .collect::<Result<Vec<_>>>()?;
            let row = if ablation.single_chain() {
                let mut one_hot = vec![0.0; k];
                one_hot[active_paths[j][0]] = 1.0;
                one_hot
            } else if ablation.normalizes() {
                normalize_memberships(&raw).normalized
            } else {
                raw.clone()
            };
            traces[j].rows.push(row);
            mus.push(if ablation.normalizes() {
                normalize_memberships(&raw).normalized
            } else {
                raw
            });
        }
        let noises: Vec<Option<Vec<f64>>> = streams
            .iter_mut()
            .map(|s| (reverse.stochastic() && t > 1).then(|| s.normal_vec(d)))
            .collect();

        // (sample, slot) pairs handled by each path
        let work: Vec<Vec<(usize, usize)>> = (0..k)
            .map(|p| {
                (0..n)
                    .filter_map(|j| active_paths[j].iter().position(|&a| a == p).map(|slot| (j, slot)))
                    .collect()
            })
            .collect();
        let predictions: Vec<Result<Vec<f64>>> = work
            .par_iter()
            .enumerate()
            .map(|(p, pairs)| {
                if pairs.is_empty() {
                    return Ok(Vec::new());
                }
                let mut block = Vec::with_capacity(pairs.len() * arch.input_dim());
                for &(j, slot) in pairs {
                    block.extend(input_row(arch, &states[j][slot], t, &emb)?);
                }
                predict_rows(checkpoint.denoiser_for(p), &block, pairs.len())
            })
            .collect();
        for (p, (pairs, pred)) in work.iter().zip(predictions).enumerate() {
            let pred = pred?;
            for (r, &(j, slot)) in pairs.iter().enumerate() {
                let eps_hat = &pred[r * d..(r + 1) * d];
                let mut next = reverse.step(&states[j][slot], t, schedule, eps_hat, noises[j].as_deref())?;
                if ablation == Ablation::Full {
                    weighting.apply(&mut next, mus[j][slot], k);
                }
                debug_assert_eq!(active_paths[j][slot], p);
                states[j][slot] = next;
            }
        }
    }

    let codec = checkpoint.codecs.get(checkpoint.codecs.select_for_condition(cond, space)?);
    let mut latents = Vec::with_capacity(n);
    let mut fusion_weights = Vec::with_capacity(n);
    let mut decoded = Vec::with_capacity(n * codec.sample_dim);
    for j in 0..n {
        let (fused, w) = if ablation.single_chain() {
            (states[j][0].clone(), vec![1.0])
        } else {
            let raw = active_paths[j]
                .iter()
                .zip(&states[j])
                .map(|(&p, z)| membership_of(z, 0, p))
                .collect::<Result<Vec<_>>>()?;
            let w = normalize_memberships(&raw).normalized;
            (fuse(&states[j], &w)?, w)
        };
        decoded.extend(codec.decode(&fused)?);
        latents.push(fused);
        fusion_weights.push(w);
    }
    let samples = SampleSet::new(codec.sample_dim, decoded, Some(vec![cond.0; n]))
        .map_err(|e| crate::error::DfsError::InvalidArgument(format!("generation produced invalid samples: {e}")))?;
    Ok(Generation {
        samples,
        latents,
        active_paths,
        path_states: states,
        fusion_weights,
        traces,
    })
}
