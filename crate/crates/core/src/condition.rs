//! Categorical conditions and their fixed orthonormal embeddings.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition(pub usize);

impl Condition {
    pub fn label(self) -> usize {
        self.0
    }
}

/// One orthonormal embedding vector per label: the one-hot code rotated by a
/// seeded random orthogonal matrix. Distinct labels are orthogonal, so their
/// `cosine01` similarity is exactly 0.5 up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSpace {
    dim: usize,
    table: Vec<Vec<f64>>,
}

impl ConditionSpace {
    pub fn new(labels: usize, dim: usize, seed: u64) -> Result<Self> {
        if labels == 0 || dim == 0 {
            return invalid("condition space needs at least one label and dimension");
        }
        if labels > dim {
            return invalid(format!(
                "{labels} labels do not fit in an orthonormal {dim}-dim embedding"
            ));
        }
        let mut rng = RngStream::new(seed).derive("condition-embedding");
        let g = DMatrix::from_vec(dim, dim, rng.normal_vec(dim * dim));
        let q = g.qr().q();
        let table = (0..labels)
            .map(|l| q.column(l).iter().copied().collect())
            .collect();
        Ok(Self { dim, table })
    }

    pub fn from_table(table: Vec<Vec<f64>>) -> Result<Self> {
        let dim = table.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || table.iter().any(|r| r.len() != dim) {
            return invalid("condition table rows must be non-empty and equal length");
        }
        Ok(Self { dim, table })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn embed(&self, cond: Condition) -> Result<&[f64]> {
        match self.table.get(cond.0) {
            Some(v) => Ok(v),
            None => invalid(format!(
                "unknown condition label {} (have {})",
                cond.0,
                self.table.len()
            )),
        }
    }
}
