//! Noise schedule, per-path rule chains, and the forward/backward rule
//! consequents.
//!
//! Each rule chain holds `2*T` cascaded rules: `T` forward rules that add
//! noise and `T` backward rules that remove predicted noise. The antecedent
//! of rule `t` on path `k` is "similar to the representative state at step
//! `t`", so the chain carries the representative trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fuzzification::RepresentativeTrajectory;

/// Linear beta schedule with the derived `alpha` and cumulative `alpha_bar`.
///
/// Arrays are indexed by step: index `t - 1` holds the value for step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta_start: f64,
    beta_end: f64,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl NoiseSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return invalid("schedule needs at least one step");
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return invalid(format!(
                "schedule needs 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
            ));
        }
        let beta: Vec<f64> = if steps == 1 {
            vec![beta_start]
        } else {
            let span = (steps - 1) as f64;
            (0..steps)
                .map(|i| beta_start + (beta_end - beta_start) * i as f64 / span)
                .collect()
        };
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let alpha_bar = alpha
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            beta_start,
            beta_end,
            beta,
            alpha,
            alpha_bar,
        })
    }

    pub fn from_params(p: ScheduleParams) -> Result<Self> {
        Self::linear(p.steps, p.beta_start, p.beta_end)
    }

    pub fn params(&self) -> ScheduleParams {
        ScheduleParams {
            steps: self.steps(),
            beta_start: self.beta_start,
            beta_end: self.beta_end,
        }
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// `alpha_bar(0) = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return invalid(format!("step {t} outside 1..={}", self.steps()));
        }
        Ok(())
    }
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return invalid(format!("latent length mismatch {} vs {}", a.len(), b.len()));
    }
    Ok(())
}

/// Forward rule consequent: `sqrt(1 - beta_t) z + sqrt(beta_t) eps`.
pub fn forward_gen(z_prev: &[f64], t: usize, schedule: &NoiseSchedule, eps: &[f64]) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    check_len(z_prev, eps)?;
    let keep = (1.0 - schedule.beta(t)).sqrt();
    let add = schedule.beta(t).sqrt();
    Ok(z_prev.iter().zip(eps).map(|(z, e)| keep * z + add * e).collect())
}

/// Backward rule consequent: `(z - sqrt(beta_t) eps_hat) / sqrt(1 - beta_t)`.
///
/// Exact inverse of [`forward_gen`] for matched noise. No noise is injected.
pub fn backward_gen(z_t: &[f64], t: usize, schedule: &NoiseSchedule, eps_hat: &[f64]) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    check_len(z_t, eps_hat)?;
    let keep = (1.0 - schedule.beta(t)).sqrt();
    let sub = schedule.beta(t).sqrt();
    Ok(z_t.iter().zip(eps_hat).map(|(z, e)| (z - sub * e) / keep).collect())
}

/// Closed-form forward marginal `sqrt(abar_t) z0 + sqrt(1 - abar_t) eps`.
pub fn forward_marginal(z0: &[f64], t: usize, schedule: &NoiseSchedule, eps: &[f64]) -> Result<Vec<f64>> {
    if t > schedule.steps() {
        return invalid(format!("step {t} outside 0..={}", schedule.steps()));
    }
    check_len(z0, eps)?;
    if t == 0 {
        return Ok(z0.to_vec());
    }
    let ab = schedule.alpha_bar(t);
    let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(z0.iter().zip(eps).map(|(z, e)| s * z + n * e).collect())
}

/// A reverse (denoising) update rule.
pub trait ReverseStep: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether [`ReverseStep::step`] consumes a fresh noise vector.
    fn stochastic(&self) -> bool;

    fn step(
        &self,
        z_t: &[f64],
        t: usize,
        schedule: &NoiseSchedule,
        eps_hat: &[f64],
        noise: Option<&[f64]>,
    ) -> Result<Vec<f64>>;
}

/// The backward rule consequent applied verbatim.
#[derive(Debug, Default)]
pub struct LiteralReverse;

impl ReverseStep for LiteralReverse {
    fn name(&self) -> &'static str {
        "eq20-literal"
    }

    fn stochastic(&self) -> bool {
        false
    }

    fn step(
        &self,
        z_t: &[f64],
        t: usize,
        schedule: &NoiseSchedule,
        eps_hat: &[f64],
        _noise: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        backward_gen(z_t, t, schedule, eps_hat)
    }
}

/// Ancestral DDPM step: posterior mean plus `sigma_t` noise, with
/// `sigma_t^2 = beta_t (1 - abar_{t-1}) / (1 - abar_t)` and no noise at t = 1.
#[derive(Debug, Default)]
pub struct PosteriorReverse;

impl ReverseStep for PosteriorReverse {
    fn name(&self) -> &'static str {
        "ddpm-posterior"
    }

    fn stochastic(&self) -> bool {
        true
    }

    fn step(
        &self,
        z_t: &[f64],
        t: usize,
        schedule: &NoiseSchedule,
        eps_hat: &[f64],
        noise: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        schedule.check_step(t)?;
        check_len(z_t, eps_hat)?;
        let beta = schedule.beta(t);
        let ab = schedule.alpha_bar(t);
        let coef = beta / (1.0 - ab).sqrt();
        let inv_sqrt_alpha = 1.0 / schedule.alpha(t).sqrt();
        let mut out: Vec<f64> = z_t
            .iter()
            .zip(eps_hat)
            .map(|(z, e)| inv_sqrt_alpha * (z - coef * e))
            .collect();
        if t > 1 {
            let noise = match noise {
                Some(n) => n,
                None => return invalid("ddpm-posterior step needs a noise vector"),
            };
            check_len(z_t, noise)?;
            let sigma = (beta * (1.0 - schedule.alpha_bar(t - 1)) / (1.0 - ab)).sqrt();
            out.iter_mut().zip(noise).for_each(|(o, n)| *o += sigma * n);
        }
        Ok(out)
    }
}

pub const REVERSE_STEPS: &[&str] = &["eq20-literal", "ddpm-posterior"];

/// Looks up a reverse step by its registered name.
pub fn reverse_step(name: &str) -> Result<Box<dyn ReverseStep>> {
    match name {
        "eq20-literal" => Ok(Box::new(LiteralReverse)),
        "ddpm-posterior" => Ok(Box::new(PosteriorReverse)),
        other => invalid(format!(
            "unknown reverse step '{other}', expected one of {REVERSE_STEPS:?}"
        )),
    }
}

/// One diffusion path: `T` forward and `T` backward rules sharing the same
/// representative trajectory as their antecedents.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleChain {
    pub path: usize,
    pub trajectory: RepresentativeTrajectory,
    /// Index of the denoiser this chain calls into.
    pub denoiser: usize,
}

impl RuleChain {
    pub fn new(path: usize, trajectory: RepresentativeTrajectory, denoiser: usize) -> Self {
        Self {
            path,
            trajectory,
            denoiser,
        }
    }

    pub fn rule_count(&self) -> usize {
        2 * self.steps()
    }

    pub fn steps(&self) -> usize {
        self.trajectory.states.len() - 1
    }

    /// Antecedent representative at step `t` (0..=T).
    pub fn antecedent(&self, t: usize) -> &[f64] {
        &self.trajectory.states[t]
    }

    pub fn forward_rule(&self, z_prev: &[f64], t: usize, schedule: &NoiseSchedule, eps: &[f64]) -> Result<Vec<f64>> {
        forward_gen(z_prev, t, schedule, eps)
    }

    pub fn backward_rule(&self, z_t: &[f64], t: usize, schedule: &NoiseSchedule, eps_hat: &[f64]) -> Result<Vec<f64>> {
        backward_gen(z_t, t, schedule, eps_hat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    #[test]
    fn linear_schedule_endpoints() {
        let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(1000) - 0.02).abs() < 1e-15);
        // independent oracle: straight product of (1 - beta_t) over the
        // closed-form beta values
        let mut prod = 1.0f64;
        for i in 0..1000 {
            prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * i as f64 / 999.0);
        }
        assert!((s.alpha_bar(1000) - prod).abs() <= 1e-12 * prod);
        assert!((s.alpha_bar(1000) - 4.04e-5).abs() < 1e-7);
        assert!((s.alpha_bar(1000).sqrt() - 6.36e-3).abs() < 1e-5);
    }

    #[test]
    fn single_step_schedule() {
        let s = NoiseSchedule::linear(1, 0.3, 0.3).unwrap();
        assert_eq!(s.betas(), &[0.3]);
        assert!((s.alpha_bar(1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn schedule_rejects_bad_ranges() {
        assert!(NoiseSchedule::linear(0, 1e-4, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.03, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 1e-4, 1.0).is_err());
    }

    #[test]
    fn schedule_monotone() {
        let s = NoiseSchedule::linear(200, 1e-4, 0.02).unwrap();
        assert!(s.betas().windows(2).all(|w| w[0] <= w[1]));
        assert!(s.alpha_bars().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn consequent_special_cases() {
        let s = NoiseSchedule::linear(10, 1e-4, 0.02).unwrap();
        let z = [1.5, -2.0];
        let out = forward_gen(&z, 3, &s, &[0.0, 0.0]).unwrap();
        let k = (1.0 - s.beta(3)).sqrt();
        assert_eq!(out, vec![k * 1.5, k * -2.0]);
        let out = forward_gen(&[0.0, 0.0], 3, &s, &z).unwrap();
        assert_eq!(out, vec![s.beta(3).sqrt() * 1.5, s.beta(3).sqrt() * -2.0]);
        let out = backward_gen(&z, 3, &s, &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.5 / k, -2.0 / k]);
        assert!(forward_gen(&z, 0, &s, &z).is_err());
        assert!(backward_gen(&z, 11, &s, &z).is_err());
    }

    #[test]
    fn backward_gen_hand_value() {
        let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
        let out = backward_gen(&[1.0, 0.0], 1, &s, &[1.0, 0.0]).unwrap();
        assert!((out[0] - 0.99 / 0.9999f64.sqrt()).abs() < 1e-12);
        assert!((out[0] - 0.990_049_5).abs() < 1e-7);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn marginal_edges() {
        let s = NoiseSchedule::linear(10, 1e-4, 0.02).unwrap();
        let z = [0.3, 0.4];
        assert_eq!(forward_marginal(&z, 0, &s, &[9.0, 9.0]).unwrap(), z.to_vec());
        let n = (1.0 - s.alpha_bar(7)).sqrt();
        assert_eq!(forward_marginal(&[0.0, 0.0], 7, &s, &z).unwrap(), vec![n * 0.3, n * 0.4]);
        assert!(forward_marginal(&z, 11, &s, &z).is_err());
    }

    #[test]
    fn chained_forward_matches_marginal_variance() {
        let s = NoiseSchedule::linear(100, 1e-4, 0.02).unwrap();
        let mut rng = RngStream::new(5);
        let reps = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..reps {
            let mut z = vec![0.0];
            for t in 1..=50 {
                z = forward_gen(&z, t, &s, &[rng.normal()]).unwrap();
            }
            sum += z[0];
            sum_sq += z[0] * z[0];
        }
        let mean = sum / reps as f64;
        let var = sum_sq / reps as f64 - mean * mean;
        let expected = 1.0 - s.alpha_bar(50);
        assert!((var / expected - 1.0).abs() < 0.03, "var {var} vs {expected}");
    }

    #[test]
    fn posterior_step_needs_noise_except_last() {
        let s = NoiseSchedule::linear(10, 1e-4, 0.02).unwrap();
        let step = reverse_step("ddpm-posterior").unwrap();
        assert!(step.step(&[1.0], 5, &s, &[0.0], None).is_err());
        assert!(step.step(&[1.0], 1, &s, &[0.0], None).is_ok());
        assert!(reverse_step("euler").is_err());
    }

    proptest! {
        #[test]
        fn backward_inverts_forward(
            z in prop::collection::vec(-10.0f64..10.0, 3),
            e in prop::collection::vec(-4.0f64..4.0, 3),
            t in 1usize..=1000,
        ) {
            let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
            let back = backward_gen(&forward_gen(&z, t, &s, &e).unwrap(), t, &s, &e).unwrap();
            let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            let err = back.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err / norm <= 1e-10 || err <= 1e-12);
        }

        #[test]
        fn consequents_are_affine(
            a in prop::collection::vec(-3.0f64..3.0, 2),
            b in prop::collection::vec(-3.0f64..3.0, 2),
            e in prop::collection::vec(-3.0f64..3.0, 2),
            lam in 0.0f64..1.0,
            t in 1usize..=50,
        ) {
            let s = NoiseSchedule::linear(50, 1e-4, 0.02).unwrap();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
            for f in [forward_gen, backward_gen] {
                let lhs = f(&mix, t, &s, &e).unwrap();
                let fa = f(&a, t, &s, &e).unwrap();
                let fb = f(&b, t, &s, &e).unwrap();
                for i in 0..2 {
                    prop_assert!((lhs[i] - (lam * fa[i] + (1.0 - lam) * fb[i])).abs() < 1e-9);
                }
            }
        }
    }
}
