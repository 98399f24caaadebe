use rayon::prelude::*;

use crate::codec::{medoid_index, train_codec, Codec, CodecRegistry, CodecTraining};
use crate::condition::{Condition, ConditionSpace};
use crate::data::SampleSet;
use crate::denoiser::{adam_step, input_row, loss_and_grads, AdamState, DenoiserParams, TrainingBatch};
use crate::error::{invalid, DfsError, Result};
use crate::fuzzification::{build_trajectory, kmedoids_restarts, smc, MembershipParams};
use crate::numerics::RngStream;
use crate::rulebase::{forward_gen, forward_marginal, NoiseSchedule, RuleChain};

use super::config::{CodecMode, EngineConfig, PathMode, TrainingStates};
use super::membership::{normalize_memberships, MembershipVector};
use super::weighting::{weighting, ConsequentWeighting};
use super::Checkpoint;

/// Stream for minibatch `batch` of `epoch`.
pub fn batch_stream(root: &RngStream, epoch: usize, batch: usize) -> RngStream {
    root.derive_indexed("epoch", epoch as u64).derive_indexed("batch", batch as u64)
}

pub fn train(dataset: &SampleSet, config: &EngineConfig, rng: &RngStream) -> Result<Checkpoint> {
    train_observed(dataset, config, rng, &mut |_| {})
}

fn build_codecs(
    rows: &[Vec<f64>],
    conds: &[Condition],
    config: &EngineConfig,
    labels: usize,
    rng: &RngStream,
) -> Result<CodecRegistry> {
    let cfg = CodecTraining {
        latent_dim: config.codec_latent_dim,
        epochs: config.codec_epochs,
        batch_size: 32,
        lr: config.codec_lr,
    };
    let codecs = match config.codec {
        CodecMode::Identity => {
            let rep = medoid_index(rows)?;
            vec![Codec::identity(rows[0].len(), rows[rep].clone(), conds[rep])?]
        }
        CodecMode::Single => vec![train_codec(rows, conds, cfg, &mut rng.derive_indexed("codec", 0))?],
        CodecMode::PerLabel => (0..labels)
            .filter_map(|l| {
                let idx: Vec<usize> = (0..rows.len()).filter(|&i| conds[i].0 == l).collect();
                if idx.is_empty() {
                    return None;
                }
                let sub: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
                let sub_conds: Vec<Condition> = idx.iter().map(|&i| conds[i]).collect();
                Some(train_codec(&sub, &sub_conds, cfg, &mut rng.derive_indexed("codec", l as u64)))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    CodecRegistry::new(codecs)
}

struct Example {
    row: Vec<f64>,
    eps: Vec<f64>,
    /// Per-path noisy state when chains diverge, `None` for the shared
    /// marginal state.
    chain_rows: Option<Vec<Vec<f64>>>,
    membership: MembershipVector,
}

#[allow(clippy::too_many_arguments)]
fn make_example(
    z0: &[f64],
    cond: Condition,
    t: usize,
    stream: &mut RngStream,
    config: &EngineConfig,
    schedule: &NoiseSchedule,
    chains: &[RuleChain],
    space: &ConditionSpace,
    params: MembershipParams,
    weighting: &dyn ConsequentWeighting,
    arch: &crate::denoiser::Architecture,
) -> Result<Example> {
    let emb = space.embed(cond)?;
    let d = z0.len();
    let k = chains.len();
    match config.training_states {
        TrainingStates::Marginal => {
            let eps = stream.normal_vec(d);
            let z_t = forward_marginal(z0, t, schedule, &eps)?;
            let raw = chains
                .iter()
                .map(|c| smc(&z_t, c.antecedent(t), cond, c.trajectory.condition, space, params))
                .collect::<Result<Vec<_>>>()?;
            Ok(Example {
                row: input_row(arch, &z_t, t, emb)?,
                eps,
                chain_rows: None,
                membership: normalize_memberships(&raw),
            })
        }
        TrainingStates::Chain => {
            let noises: Vec<Vec<f64>> = (0..t).map(|_| stream.normal_vec(d)).collect();
            let mut states = vec![z0.to_vec(); k];
            let mut mv = normalize_memberships(&vec![1.0; k]);
            for s in 1..=t {
                let next = states
                    .iter()
                    .map(|z| forward_gen(z, s, schedule, &noises[s - 1]))
                    .collect::<Result<Vec<_>>>()?;
                let raw = next
                    .iter()
                    .zip(chains)
                    .map(|(z, c)| smc(z, c.antecedent(s), cond, c.trajectory.condition, space, params))
                    .collect::<Result<Vec<_>>>()?;
                mv = normalize_memberships(&raw);
                states = next;
                for (z, mu) in states.iter_mut().zip(&mv.normalized) {
                    weighting.apply(z, *mu, k);
                }
            }
            let rows = states
                .iter()
                .map(|z| input_row(arch, z, t, emb))
                .collect::<Result<Vec<_>>>()?;
            Ok(Example {
                row: rows[0].clone(),
                eps: noises.last().cloned().unwrap_or_else(|| vec![0.0; d]),
                chain_rows: Some(rows),
                membership: mv,
            })
        }
    }
}

/// Multi-path training. `observer` sees every membership vector computed.
pub fn train_observed(
    dataset: &SampleSet,
    config: &EngineConfig,
    rng: &RngStream,
    observer: &mut dyn FnMut(&MembershipVector),
) -> Result<Checkpoint> {
    config.validate()?;
    if dataset.is_empty() {
        return invalid("train: empty dataset");
    }
    let rows = dataset.to_rows();
    let conds = dataset
        .conditions()
        .unwrap_or_else(|| vec![Condition(0); rows.len()]);
    let labels = conds.iter().map(|c| c.0 + 1).max().unwrap_or(1);
    if config.paths > rows.len() {
        return invalid(format!("{} paths but only {} samples", config.paths, rows.len()));
    }
    let schedule = config.schedule()?;
    let params = config.membership()?;
    let space = ConditionSpace::new(labels, config.cond_dim, config.seed)?;
    let codecs = build_codecs(&rows, &conds, config, labels, rng)?;

    let latents = rows
        .iter()
        .zip(&conds)
        .map(|(x, c)| {
            let (i, _) = codecs.select(x, *c, &space, params)?;
            codecs.get(i).encode(x)
        })
        .collect::<Result<Vec<_>>>()?;

    let clustering = kmedoids_restarts(
        &latents,
        config.paths,
        config.kmedoids_restarts,
        config.kmedoids_max_iter,
        &rng.derive("kmedoids"),
    )?;
    let shared = config.path_mode == PathMode::Shared;
    let chains: Vec<RuleChain> = clustering
        .medoids
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let tr = build_trajectory(
                k,
                &latents[m],
                conds[m],
                &schedule,
                config.trajectory,
                &rng.derive_indexed("trajectory", k as u64),
            );
            RuleChain::new(k, tr, if shared { 0 } else { k })
        })
        .collect();

    let arch = config.architecture(codecs.latent_dim())?;
    let n_nets = if shared { 1 } else { config.paths };
    let mut nets: Vec<DenoiserParams> = (0..n_nets)
        .map(|i| DenoiserParams::init(arch.clone(), &mut rng.derive_indexed("denoiser-init", i as u64)))
        .collect();
    let mut optims: Vec<AdamState> = nets.iter().map(|n| AdamState::new(n.values.len())).collect();
    let weighting = weighting(&config.weighting)?;

    let k = config.paths;
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = rng.derive_indexed("shuffle", epoch as u64).permutation(rows.len());
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut stream = batch_stream(rng, epoch, b);
            let inv_b = 1.0 / chunk.len() as f64;
            let mut per_net: Vec<TrainingBatch> = vec![TrainingBatch::default(); n_nets];
            for &i in chunk {
                let t = stream.uniform_int(1, config.steps);
                let ex = make_example(
                    &latents[i], conds[i], t, &mut stream, config, &schedule, &chains, &space, params,
                    weighting.as_ref(), &arch,
                )?;
                observer(&ex.membership);
                let mu = &ex.membership.normalized;
                match (&ex.chain_rows, shared) {
                    (None, true) => {
                        let w: f64 = mu.iter().sum::<f64>() * inv_b;
                        per_net[0].push_row(&ex.row, &ex.eps, w)?;
                    }
                    (None, false) => {
                        for p in 0..k {
                            per_net[p].push_row(&ex.row, &ex.eps, mu[p] * inv_b)?;
                        }
                    }
                    (Some(rows), _) => {
                        for p in 0..k {
                            let net = if shared { 0 } else { p };
                            per_net[net].push_row(&rows[p], &ex.eps, mu[p] * inv_b)?;
                        }
                    }
                }
            }
            let results: Vec<Result<f64>> = nets
                .par_iter_mut()
                .zip(optims.par_iter_mut())
                .zip(per_net.par_iter())
                .map(|((net, opt), batch)| {
                    let (loss, grads) = loss_and_grads(net, batch)?;
                    adam_step(net, &grads, opt, config.lr);
                    Ok(loss)
                })
                .collect();
            let mut total = 0.0;
            for r in results {
                total += r?;
            }
            if !total.is_finite() || nets.iter().any(|n| !n.is_finite()) {
                return Err(DfsError::TrainingDiverged {
                    epoch,
                    step: b,
                    loss: total,
                });
            }
            epoch_loss += total;
            batches += 1;
        }
        loss_history.push(epoch_loss / batches.max(1) as f64);
    }

    Ok(Checkpoint {
        config: config.clone(),
        schedule,
        codecs,
        conditions: space,
        medoids: clustering.medoids,
        chains,
        denoisers: nets,
        loss_history,
        provenance: None,
    })
}
