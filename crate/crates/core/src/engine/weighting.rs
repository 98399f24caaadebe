//! Consequent weighting strategies: how a chain's membership at step `t`
//! modulates the state it passes to the next rule.

use crate::error::{invalid, Result};

pub trait ConsequentWeighting: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether [`ConsequentWeighting::apply`] can change the state.
    fn alters_state(&self) -> bool {
        true
    }

    fn apply(&self, state: &mut [f64], mu: f64, paths: usize);
}

/// Memberships gate the loss, trace, and final fusion only.
#[derive(Debug, Default)]
pub struct GateOnly;

impl ConsequentWeighting for GateOnly {
    fn name(&self) -> &'static str {
        "gate-only"
    }

    fn alters_state(&self) -> bool {
        false
    }

    fn apply(&self, _state: &mut [f64], _mu: f64, _paths: usize) {}
}

/// The state is scaled by the normalized membership.
#[derive(Debug, Default)]
pub struct Verbatim;

impl ConsequentWeighting for Verbatim {
    fn name(&self) -> &'static str {
        "verbatim"
    }

    fn apply(&self, state: &mut [f64], mu: f64, _paths: usize) {
        state.iter_mut().for_each(|x| *x *= mu);
    }
}

/// Scaled by `K * mu`, which is the identity under uniform memberships.
#[derive(Debug, Default)]
pub struct Renormalized;

impl ConsequentWeighting for Renormalized {
    fn name(&self) -> &'static str {
        "renormalized"
    }

    fn apply(&self, state: &mut [f64], mu: f64, paths: usize) {
        let s = paths as f64 * mu;
        state.iter_mut().for_each(|x| *x *= s);
    }
}

pub const WEIGHTINGS: &[&str] = &["gate-only", "verbatim", "renormalized"];

pub fn weighting(name: &str) -> Result<Box<dyn ConsequentWeighting>> {
    match name {
        "gate-only" => Ok(Box::new(GateOnly)),
        "verbatim" => Ok(Box::new(Verbatim)),
        "renormalized" => Ok(Box::new(Renormalized)),
        other => invalid(format!("unknown weighting mode '{other}', expected one of {WEIGHTINGS:?}")),
    }
}

/// Weighted copy of `state` under the named mode.
pub fn weight_consequent(state: &[f64], mu: f64, mode: &str, paths: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&mu) {
        return invalid(format!("membership {mu} outside [0, 1]"));
    }
    let w = weighting(mode)?;
    let mut out = state.to_vec();
    w.apply(&mut out, mu, paths);
    Ok(out)
}
