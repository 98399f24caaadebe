mod common;

use dfs_core::codec::{train_codec, CodecTraining};
use dfs_core::data::DatasetDescriptor;
use dfs_core::denoiser::DenoiserParams;
use dfs_core::engine::{generate_with, train, train_observed, Ablation, CodecMode, EngineConfig, PathMode, TrainingStates};
use dfs_core::evaluation::psnr;
use dfs_core::numerics::Tensor;
use dfs_core::persist::{checkpoint_from_json, checkpoint_to_json};
use dfs_core::{Condition, RngStream};

fn small(paths: usize) -> EngineConfig {
    EngineConfig {
        paths,
        steps: 20,
        epochs: 2,
        batch_size: 32,
        hidden: vec![16, 16],
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn memberships_are_normalized_everywhere() {
    let data = common::three_modes(50).generate(1, "train").unwrap();
    for (paths, states) in [(3, TrainingStates::Marginal), (3, TrainingStates::Chain), (1, TrainingStates::Marginal)] {
        let cfg = EngineConfig { training_states: states, ..small(paths) };
        let mut seen = 0usize;
        let ck = train_observed(&data, &cfg, &RngStream::new(2), &mut |mv| {
            let s: f64 = mv.normalized.iter().sum();
            assert!((s - 1.0).abs() <= 1e-12, "sum {s}");
            if paths == 1 {
                assert_eq!(mv.normalized, vec![1.0]);
            }
            seen += 1;
        })
        .unwrap();
        assert!(seen > 0);
        let g = generate_with(&ck, Condition(0), 10, &RngStream::new(3), Ablation::Full).unwrap();
        for (trace, w) in g.traces.iter().zip(&g.fusion_weights) {
            assert!(trace.normalized);
            for row in trace.rows.iter().chain(std::iter::once(w)) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                if paths == 1 {
                    assert_eq!(row, &vec![1.0]);
                }
            }
        }
    }
}

/// With a zero denoiser every reverse step is linear, so verbatim weighting
/// scales each path by exactly the product of its logged memberships.
#[test]
fn verbatim_weighting_decays_by_membership_product() {
    let data = common::three_modes(40).generate(6, "train").unwrap();
    let cfg = EngineConfig { steps: 10, epochs: 0, ..small(3) };
    let mut ck = train(&data, &cfg, &RngStream::new(1)).unwrap();
    ck.denoisers = ck.denoisers.iter().map(|d| DenoiserParams::zeros(d.arch.clone())).collect();
    let root = RngStream::new(8);
    let plain = generate_with(&ck, Condition(1), 6, &root, Ablation::Full).unwrap();
    ck.config.weighting = "verbatim".into();
    let weighted = generate_with(&ck, Condition(1), 6, &root, Ablation::Full).unwrap();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for j in 0..6 {
        for (a, b) in plain.traces[j].rows.iter().zip(&weighted.traces[j].rows) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        for k in 0..3 {
            let product: f64 = weighted.traces[j].rows.iter().map(|r| r[k]).product();
            let want = norm(&plain.path_states[j][k]) * product;
            let got = norm(&weighted.path_states[j][k]);
            assert!((got - want).abs() <= 1e-8 * want, "sample {j} path {k}: {got} vs {want}");
        }
    }
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let data = common::three_modes(40).generate(3, "train").unwrap();
    for cfg in [
        small(3),
        EngineConfig { path_mode: PathMode::Shared, ..small(2) },
        EngineConfig { codec: CodecMode::PerLabel, codec_latent_dim: 2, codec_epochs: 3, ..small(3) },
    ] {
        let a = checkpoint_to_json(&train(&data, &cfg, &RngStream::new(5)).unwrap()).unwrap();
        let b = checkpoint_to_json(&train(&data, &cfg, &RngStream::new(5)).unwrap()).unwrap();
        assert_eq!(a, b);
        let loaded = checkpoint_from_json(&a).unwrap();
        assert_eq!(checkpoint_to_json(&loaded).unwrap(), a);
        let g1 = generate_with(&loaded, Condition(2), 3, &RngStream::new(1), Ablation::Full).unwrap();
        let original = checkpoint_from_json(&b).unwrap();
        let g2 = generate_with(&original, Condition(2), 3, &RngStream::new(1), Ablation::Full).unwrap();
        assert_eq!(g1.samples, g2.samples);
    }
}

#[test]
fn raw_space_single_chain_uses_sample_dimension() {
    let desc = DatasetDescriptor::Shapes16 { n_per_class: 12, noise: 0.03 };
    let data = desc.generate(0, "train").unwrap();
    let cfg = EngineConfig { codec: CodecMode::Identity, ablation: Ablation::SingleChainRaw, epochs: 1, ..small(3) };
    let ck = train(&data, &cfg, &RngStream::new(0)).unwrap();
    let g = generate_with(&ck, Condition(0), 2, &RngStream::new(0), Ablation::SingleChainRaw).unwrap();
    assert_eq!(g.path_states[0][0].len(), 256);
    assert_eq!(g.samples.dim, 256);
    assert_eq!(g.active_paths[0].len(), 1);
}

#[test]
fn shapes_codec_reaches_psnr_target() {
    let desc = DatasetDescriptor::shapes_default();
    let train_set = desc.generate(0, "train").unwrap();
    let heldout = desc.generate(0, "heldout").unwrap();
    let conds = train_set.conditions().unwrap();
    let cfg = CodecTraining { latent_dim: 16, epochs: 200, ..Default::default() };
    let codec = train_codec(&train_set.to_rows(), &conds, cfg, &mut RngStream::new(0)).unwrap();
    let mean: f64 = heldout
        .rows()
        .map(|x| {
            let y = codec.round_trip(x).unwrap();
            psnr(&Tensor::vector(x.to_vec()), &Tensor::vector(y), 1.0).unwrap()
        })
        .sum::<f64>()
        / heldout.len() as f64;
    println!("held-out round-trip PSNR {mean:.2} dB");
    assert!(mean >= 25.0, "{mean}");
}
