//! CSV and JSON file helpers. Every CSV has a header row.

use std::fs;
use std::path::Path;

use dfs_core::engine::MembershipTrace;
use dfs_core::SampleSet;
use serde::Serialize;

use crate::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes `rows` under `header` to `path`, or to stdout when `path` is `None`.
pub fn write_csv(path: Option<&Path>, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut buf = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::format(e.to_string());
    buf.write_record(header).map_err(csv_err)?;
    for r in rows {
        buf.write_record(r).map_err(csv_err)?;
    }
    let bytes = buf.into_inner().map_err(|e| CliError::format(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::format(e.to_string()))?;
    match path {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(format!("{}: {other:?}", path.display())),
    })?;
    let header = reader
        .headers()
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let records = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    Ok((header, records))
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64, CliError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::format(format!("{}: record {line}: {field:?} is not a number", path.display())))?;
    if !v.is_finite() {
        return Err(CliError::format(format!("{}: record {line}: non-finite value", path.display())));
    }
    Ok(v)
}

/// Header `x0, ..., x{d-1}[, label]`.
pub fn sample_header(dim: usize, labeled: bool) -> Vec<String> {
    let mut h: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    if labeled {
        h.push("label".into());
    }
    h
}

pub fn write_samples(path: &Path, set: &SampleSet) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = (0..set.len())
        .map(|i| {
            let mut r: Vec<String> = set.row(i).iter().map(|v| v.to_string()).collect();
            if let Some(l) = &set.labels {
                r.push(l[i].to_string());
            }
            r
        })
        .collect();
    write_csv(Some(path), &sample_header(set.dim, set.labels.is_some()), &rows)
}

/// Reads a sample CSV; a trailing `label` column is optional.
pub fn read_samples(path: &Path) -> Result<SampleSet, CliError> {
    let (header, records) = read_records(path)?;
    let labeled = header.last().is_some_and(|h| h == "label");
    let dim = header.len() - usize::from(labeled);
    if dim == 0 {
        return Err(CliError::format(format!("{}: no feature columns", path.display())));
    }
    let mut data = Vec::with_capacity(records.len() * dim);
    let mut labels = Vec::with_capacity(records.len());
    for (line, rec) in records.iter().enumerate() {
        if rec.len() != header.len() {
            return Err(CliError::format(format!("{}: record {line} has {} fields", path.display(), rec.len())));
        }
        for f in rec.iter().take(dim) {
            data.push(parse_f64(path, line, f)?);
        }
        if labeled {
            let l = rec[dim]
                .trim()
                .parse::<usize>()
                .map_err(|_| CliError::format(format!("{}: record {line}: bad label", path.display())))?;
            labels.push(l);
        }
    }
    Ok(SampleSet::new(dim, data, labeled.then_some(labels))?)
}

/// Header `sample, step, mu_0, ..., mu_{K-1}`; one row per sample and step.
pub fn write_traces(path: &Path, traces: &[MembershipTrace]) -> Result<(), CliError> {
    let k = traces.first().map(|t| t.paths()).unwrap_or(0);
    let mut header = vec!["sample".to_string(), "step".to_string()];
    header.extend((0..k).map(|p| format!("mu_{p}")));
    let mut rows = Vec::new();
    for (j, t) in traces.iter().enumerate() {
        for (i, r) in t.rows.iter().enumerate() {
            let mut row = vec![j.to_string(), t.step_of_row(i).to_string()];
            row.extend(r.iter().map(|v| v.to_string()));
            rows.push(row);
        }
    }
    write_csv(Some(path), &header, &rows)
}

pub fn read_traces(path: &Path) -> Result<Vec<MembershipTrace>, CliError> {
    let (header, records) = read_records(path)?;
    if header.len() < 3 || header[0] != "sample" || header[1] != "step" {
        return Err(CliError::format(format!("{}: expected columns sample,step,mu_0,...", path.display())));
    }
    let mut traces: Vec<MembershipTrace> = Vec::new();
    for (line, rec) in records.iter().enumerate() {
        let sample: usize = rec[0]
            .parse()
            .map_err(|_| CliError::format(format!("{}: record {line}: bad sample index", path.display())))?;
        if sample > traces.len() {
            return Err(CliError::format(format!("{}: record {line}: samples out of order", path.display())));
        }
        if sample == traces.len() {
            traces.push(MembershipTrace { rows: Vec::new(), normalized: true });
        }
        let row = rec.iter().skip(2).map(|f| parse_f64(path, line, f)).collect::<Result<Vec<_>, _>>()?;
        traces[sample].rows.push(row);
    }
    if traces.is_empty() {
        return Err(CliError::format(format!("{}: no trace rows", path.display())));
    }
    for t in &mut traces {
        t.normalized = t.rows.iter().all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    Ok(traces)
}
