use crate::error::{invalid, Result};

/// Raw similarity memberships of one state against every chain, and their
/// cross-path normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// `raw[k] / sum(raw)`, or uniform when the sum is below 1e-12.
pub fn normalize_memberships(raw: &[f64]) -> MembershipVector {
    let k = raw.len();
    let total: f64 = raw.iter().sum();
    let normalized = if total < 1e-12 {
        vec![1.0 / k as f64; k]
    } else {
        raw.iter().map(|r| r / total).collect()
    };
    MembershipVector {
        raw: raw.to_vec(),
        normalized,
    }
}

/// Per reverse step memberships of one generated sample; `rows[0]` is step
/// `T`, the last row is step 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipTrace {
    pub rows: Vec<Vec<f64>>,
    /// Whether rows hold normalized (sum to one) or raw memberships.
    pub normalized: bool,
}

impl MembershipTrace {
    pub fn steps(&self) -> usize {
        self.rows.len()
    }

    pub fn paths(&self) -> usize {
        self.rows.first().map(Vec::len).unwrap_or(0)
    }

    /// Step number of row `i`.
    pub fn step_of_row(&self, i: usize) -> usize {
        self.rows.len() - i
    }

    /// Path with the highest mean membership (lowest index on ties).
    pub fn dominant_path(&self) -> usize {
        let k = self.paths();
        let means: Vec<f64> = (0..k)
            .map(|p| self.rows.iter().map(|r| r[p]).sum::<f64>())
            .collect();
        crate::codec::argmax(&means)
    }
}

/// Convex combination `sum_k mu[k] * outputs[k]`.
pub fn fuse(outputs: &[Vec<f64>], mu: &[f64]) -> Result<Vec<f64>> {
    if outputs.is_empty() || outputs.len() != mu.len() {
        return invalid(format!("fuse: {} outputs vs {} weights", outputs.len(), mu.len()));
    }
    let d = outputs[0].len();
    if outputs.iter().any(|o| o.len() != d) {
        return invalid("fuse: path outputs differ in dimension");
    }
    let total: f64 = mu.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("fuse: weights sum to {total}, expected 1"));
    }
    let mut acc: Vec<f64> = outputs[0].iter().map(|x| mu[0] * x).collect();
    for (o, w) in outputs.iter().zip(mu).skip(1) {
        acc.iter_mut().zip(o).for_each(|(a, x)| *a += w * x);
    }
    Ok(acc)
}
