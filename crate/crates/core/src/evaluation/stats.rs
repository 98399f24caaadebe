use crate::engine::MembershipTrace;
use crate::error::{invalid, Result};
use crate::numerics::{chi2_sf, normal_two_sided_p};

/// Average rank of each of `k` methods over `blocks` datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub ranks: Vec<f64>,
    pub blocks: usize,
}

impl RankTable {
    pub fn new(ranks: Vec<f64>, blocks: usize) -> Result<Self> {
        let k = ranks.len();
        if k < 2 {
            return invalid("a rank table needs at least two methods");
        }
        if blocks < 2 {
            return invalid("a rank table needs at least two blocks");
        }
        if let Some(r) = ranks.iter().find(|r| !(**r >= 1.0 && **r <= k as f64)) {
            return invalid(format!("rank {r} outside [1, {k}]"));
        }
        Ok(RankTable { ranks, blocks })
    }

    pub fn methods(&self) -> usize {
        self.ranks.len()
    }

    /// Standard error of a difference of two average ranks.
    pub fn standard_error(&self) -> f64 {
        let k = self.methods() as f64;
        (k * (k + 1.0) / (6.0 * self.blocks as f64)).sqrt()
    }
}

/// Friedman chi-square statistic and its upper-tail p-value with `k - 1`
/// degrees of freedom.
pub fn friedman(table: &RankTable) -> Result<(f64, f64)> {
    let k = table.methods() as f64;
    let n = table.blocks as f64;
    let centre = (k + 1.0) / 2.0;
    let spread: f64 = table.ranks.iter().map(|r| (r - centre).powi(2)).sum();
    let statistic = 12.0 * n / (k * (k + 1.0)) * spread;
    let p = chi2_sf(statistic, table.methods() - 1)?;
    Ok((statistic, p))
}

/// One control-vs-method comparison of the Holm procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct HolmRow {
    /// Index of the compared method in the rank table.
    pub method: usize,
    /// `(R_method - R_control) / SE`: positive when the control ranks better.
    pub z: f64,
    pub p: f64,
    pub threshold: f64,
    pub reject: bool,
}

/// Holm step-down comparison of every method against `control`, sorted by
/// descending `|z|`.
pub fn holm(table: &RankTable, control: usize, alpha: f64) -> Result<Vec<HolmRow>> {
    if control >= table.methods() {
        return invalid(format!("control index {control} out of range for {} methods", table.methods()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let se = table.standard_error();
    let r0 = table.ranks[control];
    let mut rows: Vec<HolmRow> = (0..table.methods())
        .filter(|&i| i != control)
        .map(|i| {
            let z = (table.ranks[i] - r0) / se;
            HolmRow { method: i, z, p: normal_two_sided_p(z), threshold: 0.0, reject: false }
        })
        .collect();
    rows.sort_by(|a, b| b.z.abs().total_cmp(&a.z.abs()).then(a.method.cmp(&b.method)));
    let m = rows.len();
    let mut still_rejecting = true;
    for (i, row) in rows.iter_mut().enumerate() {
        row.threshold = alpha / (m - i) as f64;
        still_rejecting = still_rejecting && row.p <= row.threshold;
        row.reject = still_rejecting;
    }
    Ok(rows)
}

/// Population standard deviation of each path's membership over the last
/// `ceil(tail_fraction * T)` reverse steps of a trace.
pub fn membership_stability(trace: &MembershipTrace, tail_fraction: f64) -> Result<Vec<f64>> {
    if trace.steps() == 0 || trace.paths() == 0 {
        return invalid("membership trace is empty");
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return invalid(format!("tail fraction must lie in (0, 1], got {tail_fraction}"));
    }
    let steps = trace.steps();
    let tail = ((tail_fraction * steps as f64).ceil() as usize).clamp(1, steps);
    let window = &trace.rows[steps - tail..];
    Ok((0..trace.paths())
        .map(|k| {
            let mean = window.iter().map(|r| r[k]).sum::<f64>() / tail as f64;
            let var = window.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / tail as f64;
            var.sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const TABLE_VI: [f64; 9] = [1.25, 8.75, 7.75, 5.375, 3.5, 6.5, 4.0, 2.0, 5.875];

    #[test]
    fn friedman_table_vi() {
        let t = RankTable::new(TABLE_VI.to_vec(), 4).unwrap();
        let (s, p) = friedman(&t).unwrap();
        assert!((s - 27.25).abs() < 0.01, "{s}");
        assert!((p - 0.00064).abs() < 5e-5, "{p}");
    }

    #[test]
    fn block_count_four_is_unique() {
        let hits: Vec<usize> = (2..=20)
            .filter(|&n| {
                let (s, _) = friedman(&RankTable::new(TABLE_VI.to_vec(), n).unwrap()).unwrap();
                (s - 27.25).abs() < 0.01
            })
            .collect();
        assert_eq!(hits, vec![4]);
    }

    #[test]
    fn friedman_trivial_cases() {
        let tied = RankTable::new(vec![2.0; 3], 5).unwrap();
        assert_eq!(friedman(&tied).unwrap(), (0.0, 1.0));
        let two = RankTable::new(vec![1.0, 2.0], 10).unwrap();
        assert!((friedman(&two).unwrap().0 - 10.0).abs() < 1e-12);
        assert!(RankTable::new(vec![0.5, 2.0], 3).is_err());
        assert!(RankTable::new(vec![1.0, 3.0], 3).is_err());
    }

    #[test]
    fn holm_table_vii() {
        let t = RankTable::new(TABLE_VI.to_vec(), 4).unwrap();
        let rows = holm(&t, 0, 0.05).unwrap();
        let z: Vec<f64> = rows.iter().map(|r| r.z).collect();
        let want = [3.872983, 3.356586, 2.711088, 2.38834, 2.130141, 1.420094, 1.161895, 0.387298];
        for (a, b) in z.iter().zip(want) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        let thr = [0.00625, 0.05 / 7.0, 0.05 / 6.0, 0.01, 0.0125, 0.05 / 3.0, 0.025, 0.05];
        for (r, t) in rows.iter().zip(thr) {
            assert!((r.threshold - t).abs() < 1e-15);
        }
        assert!((rows[0].p - 1.0750e-4).abs() < 1e-6);
        assert!(holm(&t, 9, 0.05).is_err());
    }

    #[test]
    fn holm_two_methods_is_single_z_test() {
        let t = RankTable::new(vec![1.0, 2.0], 10).unwrap();
        let rows = holm(&t, 0, 0.05).unwrap();
        assert_eq!(rows.len(), 1);
        let z = 1.0 / (2.0 * 3.0 / 60.0f64).sqrt();
        assert!((rows[0].z - z).abs() < 1e-12);
        assert_eq!(rows[0].threshold, 0.05);
        assert_eq!(rows[0].reject, rows[0].p <= 0.05);
    }

    #[test]
    fn stability_cases() {
        let constant = MembershipTrace { rows: vec![vec![0.3, 0.7]; 8], normalized: true };
        assert_eq!(membership_stability(&constant, 0.25).unwrap(), vec![0.0, 0.0]);
        let alt = MembershipTrace {
            rows: (0..8).map(|i| if i % 2 == 0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] }).collect(),
            normalized: true,
        };
        assert_eq!(membership_stability(&alt, 1.0).unwrap(), vec![0.5, 0.5]);
        assert!(membership_stability(&alt, 0.0).is_err());
        let empty = MembershipTrace { rows: vec![], normalized: true };
        assert!(membership_stability(&empty, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn friedman_relabel_invariant_and_linear_in_n(
            perm_seed in 0u64..1000, n in 2usize..30
        ) {
            let mut rng = crate::numerics::RngStream::new(perm_seed);
            let perm = rng.permutation(9);
            let shuffled: Vec<f64> = perm.iter().map(|&i| TABLE_VI[i]).collect();
            let a = friedman(&RankTable::new(TABLE_VI.to_vec(), n).unwrap()).unwrap().0;
            let b = friedman(&RankTable::new(shuffled, n).unwrap()).unwrap().0;
            prop_assert!((a - b).abs() < 1e-9);
            let one = friedman(&RankTable::new(TABLE_VI.to_vec(), 2).unwrap()).unwrap().0 / 2.0;
            prop_assert!((a - one * n as f64).abs() < 1e-9);
        }

        #[test]
        fn holm_z_antisymmetric(i in 0usize..9, j in 0usize..9) {
            prop_assume!(i != j);
            let t = RankTable::new(TABLE_VI.to_vec(), 4).unwrap();
            let zij = holm(&t, i, 0.05).unwrap().into_iter().find(|r| r.method == j).unwrap().z;
            let zji = holm(&t, j, 0.05).unwrap().into_iter().find(|r| r.method == i).unwrap().z;
            prop_assert!((zij + zji).abs() < 1e-12);
        }
    }
}
