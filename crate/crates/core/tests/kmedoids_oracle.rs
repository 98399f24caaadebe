mod common;

#[test]
fn pam_matches_exhaustive_search() {
    let trials = common::kmedoids_trials();
    assert_eq!(trials.len(), 20);
    let mut exact = 0;
    for (i, (pam, best)) in trials.iter().enumerate() {
        assert!(pam <= &(best * 1.02 + 1e-12), "instance {i}: {pam} vs optimum {best}");
        if (pam - best).abs() <= 1e-9 * best.max(1.0) {
            exact += 1;
        }
    }
    assert!(exact >= 16, "only {exact}/20 exact");
}

#[test]
fn reported_cost_matches_independent_cost() {
    use dfs_core::fuzzification::kmedoids;
    use dfs_core::RngStream;
    let mut rng = RngStream::new(8);
    let points: Vec<Vec<f64>> = (0..30).map(|_| rng.normal_vec(3)).collect();
    let c = kmedoids(&points, 4, &RngStream::new(1), 100).unwrap();
    assert!((c.cost - common::brute::cost(&points, &c.medoids)).abs() < 1e-9);
    assert!(c.cost_history.windows(2).all(|w| w[1] <= w[0]));
}
