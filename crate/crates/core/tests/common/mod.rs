#![allow(dead_code)]

pub mod brute;
pub mod reference;

use dfs_core::data::DatasetDescriptor;

pub fn three_modes(n_per_mode: usize) -> DatasetDescriptor {
    DatasetDescriptor::Mixture2d {
        means: vec![[-4.0, 0.0], [4.0, 0.0], [0.0, 6.0]],
        std: 1.0,
        n_per_mode,
    }
}

/// PAM (best of the default restarts) against the exhaustive optimum on 20
/// seeded instances with N <= 8 points and K <= 3; returns
/// `(pam cost, optimal cost)` per instance.
pub fn kmedoids_trials() -> Vec<(f64, f64)> {
    use dfs_core::fuzzification::kmedoids;
    use dfs_core::numerics::RngStream;
    (0..20u64)
        .map(|seed| {
            let mut rng = RngStream::new(seed).derive("instance");
            let n = rng.uniform_int(4, 8);
            let k = rng.uniform_int(1, 3);
            let points: Vec<Vec<f64>> = (0..n).map(|_| vec![10.0 * rng.uniform(), 10.0 * rng.uniform()]).collect();
            let pam = kmedoids(&points, k, &RngStream::new(seed).derive("pam"), 100).unwrap();
            (brute::cost(&points, &pam.medoids), brute::optimum(&points, k))
        })
        .collect()
}
