//! Conditional noise-prediction network: a SiLU multilayer perceptron over
//! `z ‖ time_embedding(t) ‖ cond_embedding`, with hand-written
//! backpropagation and an Adam optimizer.
//!
//! Every dot product and gradient reduction runs in a fixed index order, so a
//! batch of `B` rows produces bit-identical per-row outputs to `B` single-row
//! calls, and training is reproducible to the bit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub latent_dim: usize,
    pub time_dim: usize,
    pub cond_dim: usize,
    pub hidden: Vec<usize>,
    /// Number of diffusion steps, the valid range of `t`.
    pub steps: usize,
}

impl Architecture {
    pub fn new(latent_dim: usize, time_dim: usize, cond_dim: usize, hidden: Vec<usize>, steps: usize) -> Result<Self> {
        if latent_dim == 0 || steps == 0 {
            return invalid("architecture needs latent_dim >= 1 and steps >= 1");
        }
        if time_dim % 2 != 0 {
            return invalid(format!("time embedding dim must be even, got {time_dim}"));
        }
        if hidden.contains(&0) {
            return invalid("hidden layer widths must be positive");
        }
        Ok(Self {
            latent_dim,
            time_dim,
            cond_dim,
            hidden,
            steps,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.latent_dim + self.time_dim + self.cond_dim
    }

    /// `(fan_in, fan_out)` of every dense layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim()];
        dims.extend(&self.hidden);
        dims.push(self.latent_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn with_uniform_width(&self, width: usize) -> Self {
        Self {
            hidden: vec![width; self.hidden.len()],
            ..self.clone()
        }
    }

    /// Uniform hidden width whose parameter count is closest to `paths`
    /// copies of this architecture.
    pub fn matched_width(&self, paths: usize) -> usize {
        let target = (self.param_count() * paths) as f64;
        (1..=4096)
            .min_by(|&a, &b| {
                let da = (self.with_uniform_width(a).param_count() as f64 - target).abs();
                let db = (self.with_uniform_width(b).param_count() as f64 - target).abs();
                da.total_cmp(&db)
            })
            .expect("non-empty range")
    }
}

/// Sinusoidal embedding of step `t` with geometric frequencies
/// `1 / 10000^(i / (dim/2))`, laid out as interleaved `(sin, cos)` pairs.
pub fn time_embedding(t: usize, steps: usize, dim: usize) -> Result<Vec<f64>> {
    if dim % 2 != 0 {
        return invalid(format!("time embedding dim must be even, got {dim}"));
    }
    if t == 0 || t > steps {
        return invalid(format!("step {t} outside 1..={steps}"));
    }
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = 10_000f64.powf(-(i as f64) / half as f64);
        let arg = t as f64 * freq;
        out.push(arg.sin());
        out.push(arg.cos());
    }
    Ok(out)
}

/// Flat parameter vector; per layer, a row-major `fan_out x fan_in` weight
/// matrix followed by `fan_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub arch: Architecture,
    pub values: Vec<f64>,
}

impl DenoiserParams {
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        Self {
            arch,
            values: vec![0.0; n],
        }
    }

    /// LeCun-normal weights, zero biases.
    pub fn init(arch: Architecture, rng: &mut RngStream) -> Self {
        let mut values = Vec::with_capacity(arch.param_count());
        for (fan_in, fan_out) in arch.layers() {
            let scale = (1.0 / fan_in as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| scale * rng.normal()));
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self { arch, values }
    }

    pub fn from_values(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.param_count() {
            return invalid(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                values.len()
            ));
        }
        Ok(Self { arch, values })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Builds the network input row for one example.
pub fn input_row(arch: &Architecture, z: &[f64], t: usize, cond_embedding: &[f64]) -> Result<Vec<f64>> {
    if z.len() != arch.latent_dim {
        return invalid(format!("latent has {} dims, network expects {}", z.len(), arch.latent_dim));
    }
    if cond_embedding.len() != arch.cond_dim {
        return invalid(format!(
            "condition embedding has {} dims, network expects {}",
            cond_embedding.len(),
            arch.cond_dim
        ));
    }
    let mut row = Vec::with_capacity(arch.input_dim());
    row.extend_from_slice(z);
    row.extend(time_embedding(t, arch.steps, arch.time_dim)?);
    row.extend_from_slice(cond_embedding);
    Ok(row)
}

#[inline]
fn dot_fixed(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

struct Activations {
    /// `inputs[l]` feeds layer `l` (post-activation of layer `l - 1`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every hidden layer.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

fn forward(params: &DenoiserParams, x: &[f64], rows: usize) -> Activations {
    let layers = params.arch.layers();
    let last = layers.len() - 1;
    let mut offset = 0;
    let mut inputs = vec![x.to_vec()];
    let mut pre = Vec::with_capacity(last);
    let mut output = Vec::new();
    for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
        let w = &params.values[offset..offset + fan_in * fan_out];
        let b = &params.values[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let h = &inputs[l];
        let mut a = vec![0.0; rows * fan_out];
        for r in 0..rows {
            let hr = &h[r * fan_in..(r + 1) * fan_in];
            for j in 0..fan_out {
                a[r * fan_out + j] = b[j] + dot_fixed(hr, &w[j * fan_in..(j + 1) * fan_in]);
            }
        }
        if l == last {
            output = a;
        } else {
            let act = a.iter().map(|&v| silu(v)).collect();
            pre.push(a);
            inputs.push(act);
        }
    }
    Activations { inputs, pre, output }
}

/// Predicted noise for a `rows x input_dim` block of input rows.
pub fn predict_rows(params: &DenoiserParams, x: &[f64], rows: usize) -> Result<Vec<f64>> {
    if x.len() != rows * params.arch.input_dim() {
        return invalid("input block does not match architecture");
    }
    Ok(forward(params, x, rows).output)
}

/// `eps_theta(z, t, cond)` for a single latent.
pub fn predict_noise(params: &DenoiserParams, z: &[f64], t: usize, cond_embedding: &[f64]) -> Result<Vec<f64>> {
    let row = input_row(&params.arch, z, t, cond_embedding)?;
    predict_rows(params, &row, 1)
}

/// Weighted noise-regression examples, stored as network input rows.
#[derive(Debug, Clone, Default)]
pub struct TrainingBatch {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn push(&mut self, arch: &Architecture, z_t: &[f64], eps: &[f64], t: usize, cond_embedding: &[f64], weight: f64) -> Result<()> {
        let row = input_row(arch, z_t, t, cond_embedding)?;
        self.push_row(&row, eps, weight)
    }

    pub fn push_row(&mut self, row: &[f64], eps: &[f64], weight: f64) -> Result<()> {
        if !(weight >= 0.0) {
            return invalid(format!("example weight must be >= 0, got {weight}"));
        }
        self.inputs.extend_from_slice(row);
        self.targets.extend_from_slice(eps);
        self.weights.push(weight);
        Ok(())
    }
}

/// `sum_b w_b ||eps_b - eps_theta(x_b)||^2` and its gradient.
pub fn loss_and_grads(params: &DenoiserParams, batch: &TrainingBatch) -> Result<(f64, Vec<f64>)> {
    let arch = &params.arch;
    let rows = batch.len();
    let out_dim = arch.latent_dim;
    if batch.inputs.len() != rows * arch.input_dim() || batch.targets.len() != rows * out_dim {
        return invalid("training batch does not match architecture");
    }
    let mut grads = vec![0.0; params.values.len()];
    if rows == 0 {
        return Ok((0.0, grads));
    }
    let acts = forward(params, &batch.inputs, rows);

    let mut loss = 0.0;
    let mut delta = vec![0.0; rows * out_dim];
    for r in 0..rows {
        let w = batch.weights[r];
        let mut sq = 0.0;
        for j in 0..out_dim {
            let diff = acts.output[r * out_dim + j] - batch.targets[r * out_dim + j];
            sq += diff * diff;
            delta[r * out_dim + j] = 2.0 * w * diff;
        }
        loss += w * sq;
    }

    let layers = arch.layers();
    let mut offsets = Vec::with_capacity(layers.len());
    let mut off = 0;
    for &(i, o) in &layers {
        offsets.push(off);
        off += i * o + o;
    }
    for l in (0..layers.len()).rev() {
        let (fan_in, fan_out) = layers[l];
        let base = offsets[l];
        let h = &acts.inputs[l];
        {
            let (gw, gb) = grads[base..base + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            for j in 0..fan_out {
                let gw_row = &mut gw[j * fan_in..(j + 1) * fan_in];
                for r in 0..rows {
                    let d = delta[r * fan_out + j];
                    if d == 0.0 {
                        continue;
                    }
                    let hr = &h[r * fan_in..(r + 1) * fan_in];
                    for (g, x) in gw_row.iter_mut().zip(hr) {
                        *g += d * x;
                    }
                    gb[j] += d;
                }
            }
        }
        if l == 0 {
            break;
        }
        let w = &params.values[base..base + fan_in * fan_out];
        let pre = &acts.pre[l - 1];
        let mut prev = vec![0.0; rows * fan_in];
        for r in 0..rows {
            let pr = &mut prev[r * fan_in..(r + 1) * fan_in];
            for j in 0..fan_out {
                let d = delta[r * fan_out + j];
                if d == 0.0 {
                    continue;
                }
                for (p, wv) in pr.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                    *p += d * wv;
                }
            }
            for (p, a) in pr.iter_mut().zip(&pre[r * fan_in..(r + 1) * fan_in]) {
                *p *= silu_grad(*a);
            }
        }
        delta = prev;
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            config: AdamConfig::default(),
        }
    }

    /// In-place bias-corrected Adam update of a raw parameter slice.
    pub fn update(&mut self, values: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(values.len(), self.m.len(), "optimizer state shape");
        assert_eq!(grads.len(), self.m.len(), "gradient shape");
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..values.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

pub fn adam_step(params: &mut DenoiserParams, grads: &[f64], state: &mut AdamState, lr: f64) {
    state.update(&mut params.values, grads, lr);
}

/// Largest relative error between analytic gradients and central
/// differences (step 1e-5) over `n_coords` sampled parameter coordinates.
pub fn finite_diff_check(params: &DenoiserParams, batch: &TrainingBatch, n_coords: usize, rng: &mut RngStream) -> Result<f64> {
    if n_coords == 0 {
        return invalid("finite_diff_check needs at least one coordinate");
    }
    let (_, grads) = loss_and_grads(params, batch)?;
    let h = 1e-5;
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..n_coords {
        let i = rng.uniform_int(0, params.values.len() - 1);
        let orig = probe.values[i];
        probe.values[i] = orig + h;
        let (lp, _) = loss_and_grads(&probe, batch)?;
        probe.values[i] = orig - h;
        let (lm, _) = loss_and_grads(&probe, batch)?;
        probe.values[i] = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let denom = grads[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((grads[i] - numeric).abs() / denom);
    }
    Ok(worst)
}
