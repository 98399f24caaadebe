//! Deterministic synthetic datasets: a labeled 2-D Gaussian mixture and
//! 16x16 binary-ish shape images (disk, cross, square).

use serde::{Deserialize, Serialize};

use crate::condition::Condition;
use crate::error::{invalid, Result};
use crate::numerics::RngStream;

/// `n x dim` row-major samples with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub dim: usize,
    pub data: Vec<f64>,
    pub labels: Option<Vec<usize>>,
}

impl SampleSet {
    pub fn new(dim: usize, data: Vec<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return invalid(format!("{} values do not form rows of {dim}", data.len()));
        }
        if let Some(l) = &labels {
            if l.len() != data.len() / dim {
                return invalid("label count does not match row count");
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return invalid("sample set contains non-finite values");
        }
        Ok(Self { dim, data, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return invalid("rows of mixed dimension");
        }
        Self::new(dim, rows.concat(), labels)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn conditions(&self) -> Option<Vec<Condition>> {
        self.labels.as_ref().map(|l| l.iter().map(|&c| Condition(c)).collect())
    }

    pub fn label_count(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max().map(|m| m + 1))
            .unwrap_or(0)
    }

    /// Rows whose label is `label`.
    pub fn with_label(&self, label: usize) -> SampleSet {
        let labels = self.labels.as_deref().unwrap_or(&[]);
        let mut data = Vec::new();
        let mut kept = 0;
        for (i, row) in self.rows().enumerate() {
            if labels.get(i) == Some(&label) {
                data.extend_from_slice(row);
                kept += 1;
            }
        }
        SampleSet {
            dim: self.dim,
            data,
            labels: Some(vec![label; kept]),
        }
    }
}

pub const SHAPE_CLASSES: [&str; 3] = ["disk", "cross", "square"];
pub const SHAPE_SIDE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetDescriptor {
    Mixture2d {
        means: Vec<[f64; 2]>,
        /// Per-axis standard deviation of every mode.
        std: f64,
        n_per_mode: usize,
    },
    Shapes16 {
        n_per_class: usize,
        /// Standard deviation of additive pixel noise before clamping.
        noise: f64,
    },
}

impl DatasetDescriptor {
    pub fn mixture_default() -> Self {
        Self::Mixture2d {
            means: vec![[-4.0, 0.0], [4.0, 0.0], [0.0, 6.0]],
            std: 1.0,
            n_per_mode: 1000,
        }
    }

    pub fn shapes_default() -> Self {
        Self::Shapes16 {
            n_per_class: 300,
            noise: 0.03,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Mixture2d { .. } => 2,
            Self::Shapes16 { .. } => SHAPE_SIDE * SHAPE_SIDE,
        }
    }

    /// Samples for `split` ("train", "heldout", ...); a pure function of
    /// `(self, seed, split)`. Rows are grouped by label.
    pub fn generate(&self, seed: u64, split: &str) -> Result<SampleSet> {
        let mut rng = RngStream::new(seed).derive(split);
        match self {
            Self::Mixture2d { means, std, n_per_mode } => {
                if means.is_empty() || *n_per_mode == 0 || !(*std >= 0.0) {
                    return invalid("mixture2d needs modes, a positive count and std >= 0");
                }
                let mut data = Vec::with_capacity(means.len() * n_per_mode * 2);
                let mut labels = Vec::with_capacity(means.len() * n_per_mode);
                for (label, m) in means.iter().enumerate() {
                    for _ in 0..*n_per_mode {
                        data.push(m[0] + std * rng.normal());
                        data.push(m[1] + std * rng.normal());
                        labels.push(label);
                    }
                }
                SampleSet::new(2, data, Some(labels))
            }
            Self::Shapes16 { n_per_class, noise } => {
                if *n_per_class == 0 || !(*noise >= 0.0) {
                    return invalid("shapes16 needs a positive count and noise >= 0");
                }
                let mut data = Vec::with_capacity(3 * n_per_class * SHAPE_SIDE * SHAPE_SIDE);
                let mut labels = Vec::with_capacity(3 * n_per_class);
                for label in 0..SHAPE_CLASSES.len() {
                    for _ in 0..*n_per_class {
                        data.extend(shape_image(label, *noise, &mut rng));
                        labels.push(label);
                    }
                }
                SampleSet::new(SHAPE_SIDE * SHAPE_SIDE, data, Some(labels))
            }
        }
    }
}

/// One jittered, anti-aliased 16x16 shape with values in [0, 1].
fn shape_image(class: usize, noise: f64, rng: &mut RngStream) -> Vec<f64> {
    let c = (SHAPE_SIDE as f64 - 1.0) / 2.0;
    let cx = c + (rng.uniform() - 0.5) * 2.0;
    let cy = c + (rng.uniform() - 0.5) * 2.0;
    let size = 4.0 + rng.uniform() * 1.5;
    let mut img = Vec::with_capacity(SHAPE_SIDE * SHAPE_SIDE);
    for y in 0..SHAPE_SIDE {
        for x in 0..SHAPE_SIDE {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // signed distance inside the shape, positive inside
            let inside = match class {
                0 => size - (dx * dx + dy * dy).sqrt(),
                1 => {
                    let arm = 1.5;
                    let horiz = (size - dx.abs()).min(arm - dy.abs());
                    let vert = (arm - dx.abs()).min(size - dy.abs());
                    horiz.max(vert)
                }
                _ => 0.8 * size - dx.abs().max(dy.abs()),
            };
            let v = (inside + 0.5).clamp(0.0, 1.0) + noise * rng.normal();
            img.push(v.clamp(0.0, 1.0));
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_means_match() {
        let d = DatasetDescriptor::mixture_default();
        let s = d.generate(7, "train").unwrap();
        assert_eq!(s.len(), 3000);
        let means = [[-4.0, 0.0], [4.0, 0.0], [0.0, 6.0]];
        for (label, m) in means.iter().enumerate() {
            let sub = s.with_label(label);
            let n = sub.len() as f64;
            let mx = sub.rows().map(|r| r[0]).sum::<f64>() / n;
            let my = sub.rows().map(|r| r[1]).sum::<f64>() / n;
            assert!((mx - m[0]).abs() < 0.15 && (my - m[1]).abs() < 0.15);
        }
    }

    #[test]
    fn shapes_in_unit_range() {
        let d = DatasetDescriptor::Shapes16 { n_per_class: 5, noise: 0.05 };
        let s = d.generate(1, "train").unwrap();
        assert_eq!(s.dim, 256);
        assert_eq!(s.len(), 15);
        assert!(s.data.iter().all(|v| (0.0..=1.0).contains(v)));
        let disk = s.with_label(0);
        assert_eq!(disk.len(), 5);
    }

    #[test]
    fn generation_is_pure() {
        let d = DatasetDescriptor::shapes_default();
        assert_eq!(d.generate(3, "train").unwrap(), d.generate(3, "train").unwrap());
        assert_ne!(d.generate(3, "train").unwrap(), d.generate(3, "heldout").unwrap());
    }

    #[test]
    fn descriptor_round_trips_through_json() {
        let d = DatasetDescriptor::mixture_default();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"kind\":\"mixture2d\""));
        assert_eq!(serde_json::from_str::<DatasetDescriptor>(&s).unwrap(), d);
    }
}
