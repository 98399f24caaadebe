use std::path::{Path, PathBuf};

use dfs_core::engine::{ablation_config, ablation_report, evaluate_samples, generate_with, train as train_engine, Ablation, Provenance};
use dfs_core::evaluation::{friedman as friedman_test, holm as holm_test, membership_stability, RankTable};
use dfs_core::fuzzification::kmedoids_restarts;
use dfs_core::persist::{load_checkpoint, save_checkpoint};
use dfs_core::{Condition, RngStream};
use serde_json::json;

use crate::config::RunConfig;
use crate::io::{ensure_dir, read_samples, read_traces, write_csv, write_json, write_samples, write_text, write_traces};
use crate::plot::{line_chart, Series};
use crate::CliError;

/// Average ranks of nine generators over four benchmark datasets.
pub const TABLE_VI: [(&str, f64); 9] = [
    ("DFS", 1.25),
    ("DDPM", 8.75),
    ("DDIM", 7.75),
    ("ADM-G", 5.375),
    ("GLIDE", 3.5),
    ("CFDG", 6.5),
    ("unCLIP", 4.0),
    ("LDM", 2.0),
    ("SDG", 5.875),
];

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = flag.unwrap_or_else(|| cfg.run.out_dir.clone());
    ensure_dir(&dir)?;
    Ok(dir)
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

pub fn gen_data(config: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let dir = out_dir(out, &cfg)?;
    let seed = cfg.data_seed();
    let mut splits = serde_json::Map::new();
    for split in ["train", "heldout"] {
        let set = cfg.dataset.generate(seed, split)?;
        let file = format!("{split}.csv");
        write_samples(&dir.join(&file), &set)?;
        splits.insert(split.into(), json!({ "file": file, "rows": set.len(), "dim": set.dim }));
    }
    write_json(
        &dir.join("manifest.json"),
        &json!({ "dataset": cfg.dataset, "seed": seed, "splits": splits }),
    )
}

pub fn cluster(data: &Path, k: usize, seed: u64, restarts: usize) -> Result<(), CliError> {
    let set = read_samples(data)?;
    let c = kmedoids_restarts(&set.to_rows(), k, restarts, 100, &RngStream::new(seed))?;
    let doc = json!({
        "k": k,
        "seed": seed,
        "medoids": c.medoids,
        "cost": c.cost,
        "assignment": c.assignment,
    });
    println!("{doc}");
    Ok(())
}

pub fn train(config: &Path, data: Option<&Path>, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let dir = out_dir(out, &cfg)?;
    let (set, provenance) = match data {
        Some(p) => (read_samples(p)?, None),
        None => {
            let seed = cfg.data_seed();
            let provenance = Provenance { dataset: cfg.dataset.clone(), data_seed: seed };
            (cfg.dataset.generate(seed, "train")?, Some(provenance))
        }
    };
    let mut checkpoint = train_engine(&set, &cfg.engine, &RngStream::new(cfg.engine.seed).derive("train"))?;
    checkpoint.provenance = provenance;
    save_checkpoint(&checkpoint, &dir.join("checkpoint.json"))?;
    let rows: Vec<Vec<String>> = checkpoint
        .loss_history
        .iter()
        .enumerate()
        .map(|(e, l)| vec![e.to_string(), l.to_string()])
        .collect();
    write_csv(Some(&dir.join("loss.csv")), &header(&["epoch", "loss"]), &rows)
}

pub fn sample(checkpoint: &Path, cond: usize, n: usize, seed: u64, ablation: Option<&str>, out: &Path) -> Result<(), CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let mode = match ablation {
        Some(a) => a.parse::<Ablation>()?,
        None => ck.config.ablation,
    };
    let g = generate_with(&ck, Condition(cond), n, &RngStream::new(seed), mode)?;
    ensure_dir(out)?;
    write_samples(&out.join("samples.csv"), &g.samples)?;
    write_traces(&out.join("trace.csv"), &g.traces)?;
    write_json(
        &out.join("manifest.json"),
        &json!({
            "checkpoint": checkpoint.display().to_string(),
            "cond": cond,
            "n": n,
            "seed": seed,
            "ablation": mode,
            "trace_normalized": mode.normalizes(),
        }),
    )
}

fn metric_list(spec: &str) -> Vec<&str> {
    spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

pub fn eval(real: &Path, gen: &Path, metrics: &str, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let names = metric_list(metrics);
    if names.is_empty() {
        return Err(CliError::invalid("no metrics requested"));
    }
    let (a, b) = (read_samples(real)?, read_samples(gen)?);
    let values = evaluate_samples(&a, &b, &names, &RngStream::new(seed))?;
    let rows: Vec<Vec<String>> = values.into_iter().map(|(m, v)| vec![m, v.to_string()]).collect();
    write_csv(out, &header(&["metric", "value"]), &rows)
}

fn ablation_modes(spec: &str) -> Result<Vec<Ablation>, CliError> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(Ablation::ALL.to_vec());
    }
    let modes = spec
        .split(',')
        .map(|m| m.trim().parse::<Ablation>())
        .collect::<Result<Vec<_>, _>>()?;
    if modes.is_empty() {
        return Err(CliError::invalid("no ablation mode given"));
    }
    Ok(modes)
}

/// Modes other than DFS-ISL share one checkpoint per seed (they differ only
/// at generation time); DFS-ISL trains its own raw-space model.
pub fn ablate(config: &Path, mode: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let modes = ablation_modes(mode)?;
    let dir = out_dir(out, &cfg)?;
    let names: Vec<&str> = cfg.run.metrics.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for seed in cfg.seeds() {
        let data_seed = cfg.run.data_seed.unwrap_or(seed);
        let train_set = cfg.dataset.generate(data_seed, "train")?;
        let heldout = cfg.dataset.generate(data_seed, "heldout")?;
        let engine = dfs_core::EngineConfig { seed, ..cfg.engine.clone() };
        let root = RngStream::new(seed);
        let mut shared = None;
        for &m in &modes {
            let mcfg = ablation_config(&engine, m);
            let report = if m == Ablation::SingleChainRaw {
                let ck = train_engine(&train_set, &mcfg, &root.derive("train"))?;
                ablation_report(&ck, &heldout, m, &names, &root)?
            } else {
                if shared.is_none() {
                    shared = Some(train_engine(&train_set, &ablation_config(&engine, Ablation::Full), &root.derive("train"))?);
                }
                ablation_report(shared.as_ref().expect("trained above"), &heldout, m, &names, &root)?
            };
            for (metric, value) in report.metrics {
                rows.push(vec![seed.to_string(), m.name().to_string(), metric, value.to_string()]);
            }
        }
    }
    let head = header(&["seed", "mode", "metric", "value"]);
    write_csv(Some(&dir.join("ablation.csv")), &head, &rows)?;
    write_csv(None, &head, &rows)
}

pub fn convergence(trace: &Path, tail: f64, out: &Path) -> Result<(), CliError> {
    let traces = read_traces(trace)?;
    let steps = traces[0].steps();
    let k = traces[0].paths();
    if traces.iter().any(|t| t.steps() != steps || t.paths() != k) {
        return Err(CliError::format("traces differ in length or path count"));
    }
    let mut rows = Vec::new();
    for (j, t) in traces.iter().enumerate() {
        let s = membership_stability(t, tail)?;
        let dom = t.dominant_path();
        for (p, v) in s.iter().enumerate() {
            rows.push(vec![j.to_string(), p.to_string(), (p == dom).to_string(), v.to_string()]);
        }
    }
    let n = traces.len() as f64;
    let mean_rows: Vec<Vec<f64>> = (0..steps)
        .map(|i| (0..k).map(|p| traces.iter().map(|t| t.rows[i][p]).sum::<f64>() / n).collect())
        .collect();
    let mean = dfs_core::engine::MembershipTrace { rows: mean_rows, normalized: traces[0].normalized };
    let dom = mean.dominant_path();
    for (p, v) in membership_stability(&mean, tail)?.iter().enumerate() {
        rows.push(vec!["mean".into(), p.to_string(), (p == dom).to_string(), v.to_string()]);
    }
    ensure_dir(out)?;
    write_csv(Some(&out.join("stability.csv")), &header(&["sample", "path", "dominant", "stdev"]), &rows)?;
    let series: Vec<Series> = (0..k)
        .map(|p| Series {
            label: format!("path {p}"),
            points: mean.rows.iter().enumerate().map(|(i, r)| (mean.step_of_row(i) as f64, r[p])).collect(),
        })
        .collect();
    let y = if mean.normalized { "mean normalized membership" } else { "mean raw membership" };
    write_text(&out.join("convergence.svg"), &line_chart("Membership over reverse steps", "step t", y, &series, true))
}

pub fn rank_table(ranks: &str, n_blocks: usize) -> Result<RankTable, CliError> {
    let values: Vec<f64> = if ranks.eq_ignore_ascii_case("table-vi") {
        TABLE_VI.iter().map(|(_, r)| *r).collect()
    } else {
        ranks
            .split(',')
            .map(|r| r.trim().parse::<f64>().map_err(|_| CliError::invalid(format!("bad rank {r:?}"))))
            .collect::<Result<_, _>>()?
    };
    Ok(RankTable::new(values, n_blocks)?)
}

fn method_name(ranks: &str, i: usize) -> String {
    if ranks.eq_ignore_ascii_case("table-vi") {
        TABLE_VI[i].0.to_string()
    } else {
        format!("method_{i}")
    }
}

pub fn friedman(table: &RankTable, out: Option<&Path>) -> Result<(), CliError> {
    let (statistic, p) = friedman_test(table)?;
    let row = vec![
        table.methods().to_string(),
        table.blocks.to_string(),
        statistic.to_string(),
        (table.methods() - 1).to_string(),
        p.to_string(),
    ];
    write_csv(out, &header(&["methods", "blocks", "statistic", "df", "p"]), &[row])
}

pub fn holm(table: &RankTable, ranks: &str, control: usize, alpha: f64, out: Option<&Path>) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = holm_test(table, control, alpha)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                method_name(ranks, r.method),
                r.z.to_string(),
                r.p.to_string(),
                r.threshold.to_string(),
                r.reject.to_string(),
            ]
        })
        .collect();
    write_csv(out, &header(&["i", "method", "z", "p", "holm", "reject"]), &rows)
}
