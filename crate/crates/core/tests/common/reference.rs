//! A plain single-network conditional DDPM written without the engine's
//! training or generation code. It follows the same random stream protocol
//! and the same floating-point evaluation order as the engine documents, so
//! a one-path engine run must agree with it bit for bit.

use dfs_core::numerics::RngStream;

pub struct Mlp {
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

fn silu(x: f64) -> f64 {
    x * (1.0 / (1.0 + (-x).exp()))
}

fn silu_slope(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Four interleaved partial sums combined pairwise, then the remainder.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n4 = a.len() - a.len() % 4;
    let mut lanes = [0.0f64; 4];
    for i in (0..n4).step_by(4) {
        for l in 0..4 {
            lanes[l] += a[i + l] * b[i + l];
        }
    }
    let rest: f64 = (n4..a.len()).fold(0.0, |s, i| s + a[i] * b[i]);
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + rest
}

impl Mlp {
    pub fn lecun(dims: Vec<usize>, rng: &mut RngStream) -> Self {
        let mut values = Vec::new();
        for w in dims.windows(2) {
            let std = (1.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                values.push(std * rng.normal());
            }
            values.resize(values.len() + w[1], 0.0);
        }
        Mlp { dims, values }
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let mut off = 0;
        for w in self.dims.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        (&self.values[off..off + i * o], &self.values[off + i * o..off + i * o + o])
    }

    /// Returns the per-layer inputs, hidden pre-activations and output.
    fn run(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let layers = self.dims.len() - 1;
        let mut ins = vec![x.to_vec()];
        let mut pres = Vec::new();
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let i = self.dims[l];
            let a: Vec<f64> = (0..self.dims[l + 1]).map(|j| b[j] + dot(&ins[l], &w[j * i..(j + 1) * i])).collect();
            if l + 1 == layers {
                return (ins, pres, a);
            }
            ins.push(a.iter().map(|&v| silu(v)).collect());
            pres.push(a);
        }
        unreachable!()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.run(x).2
    }

    /// Gradient of `sum_b w ||f(x_b) - y_b||^2`, accumulated example by example.
    pub fn grad(&self, xs: &[Vec<f64>], ys: &[Vec<f64>], w: f64) -> Vec<f64> {
        let layers = self.dims.len() - 1;
        let mut offs = vec![0];
        for d in self.dims.windows(2) {
            offs.push(offs.last().unwrap() + d[0] * d[1] + d[1]);
        }
        let mut g = vec![0.0; self.values.len()];
        let runs: Vec<_> = xs.iter().map(|x| self.run(x)).collect();
        let mut deltas: Vec<Vec<f64>> = runs
            .iter()
            .zip(ys)
            .map(|(r, y)| r.2.iter().zip(y).map(|(o, t)| 2.0 * w * (o - t)).collect())
            .collect();
        for l in (0..layers).rev() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            for (run, delta) in runs.iter().zip(&deltas) {
                for j in 0..o {
                    for k in 0..i {
                        g[offs[l] + j * i + k] += delta[j] * run.0[l][k];
                    }
                    g[offs[l] + i * o + j] += delta[j];
                }
            }
            if l == 0 {
                break;
            }
            let (wm, _) = self.layer(l);
            deltas = runs
                .iter()
                .zip(&deltas)
                .map(|(run, delta)| {
                    let mut back = vec![0.0; i];
                    for j in 0..o {
                        for k in 0..i {
                            back[k] += delta[j] * wm[j * i + k];
                        }
                    }
                    back.iter().zip(&run.1[l - 1]).map(|(b, p)| b * silu_slope(*p)).collect()
                })
                .collect();
        }
        g
    }
}

pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    n: i32,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], n: 0 }
    }

    pub fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        self.n += 1;
        let (b1, b2) = (0.9f64, 0.999f64);
        let (c1, c2) = (1.0 - b1.powi(self.n), 1.0 - b2.powi(self.n));
        for i in 0..p.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

pub struct Ddpm {
    pub steps: usize,
    pub betas: Vec<f64>,
    pub abar: Vec<f64>,
    pub time_dim: usize,
    pub cond_table: Vec<Vec<f64>>,
    pub net: Mlp,
}

pub struct TrainSpec {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub hidden: Vec<usize>,
    pub time_dim: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Ddpm {
    fn input(&self, z: &[f64], t: usize, label: usize) -> Vec<f64> {
        let mut row = z.to_vec();
        let half = self.time_dim / 2;
        for i in 0..half {
            let arg = t as f64 * 10_000f64.powf(-(i as f64) / half as f64);
            row.push(arg.sin());
            row.push(arg.cos());
        }
        row.extend_from_slice(&self.cond_table[label]);
        row
    }

    pub fn train(rows: &[Vec<f64>], labels: &[usize], cond_table: Vec<Vec<f64>>, spec: &TrainSpec, root: &RngStream) -> Self {
        let t_max = spec.steps;
        let betas: Vec<f64> = (0..t_max)
            .map(|i| spec.beta_start + (spec.beta_end - spec.beta_start) * i as f64 / (t_max - 1) as f64)
            .collect();
        let mut abar = Vec::with_capacity(t_max);
        let mut prod = 1.0;
        for b in &betas {
            prod *= 1.0 - b;
            abar.push(prod);
        }
        let d = rows[0].len();
        let mut dims = vec![d + spec.time_dim + cond_table[0].len()];
        dims.extend(&spec.hidden);
        dims.push(d);
        let net = Mlp::lecun(dims, &mut root.derive_indexed("denoiser-init", 0));
        let mut model = Ddpm { steps: t_max, betas, abar, time_dim: spec.time_dim, cond_table, net };
        let mut adam = Adam::new(model.net.values.len());
        for epoch in 0..spec.epochs {
            let order = root.derive_indexed("shuffle", epoch as u64).permutation(rows.len());
            for (b, idx) in order.chunks(spec.batch).enumerate() {
                let mut rng = root.derive_indexed("epoch", epoch as u64).derive_indexed("batch", b as u64);
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for &i in idx {
                    let t = rng.uniform_int(1, t_max);
                    let eps = rng.normal_vec(d);
                    let (s, n) = (model.abar[t - 1].sqrt(), (1.0 - model.abar[t - 1]).sqrt());
                    let zt: Vec<f64> = rows[i].iter().zip(&eps).map(|(z, e)| s * z + n * e).collect();
                    xs.push(model.input(&zt, t, labels[i]));
                    ys.push(eps);
                }
                let g = model.net.grad(&xs, &ys, 1.0 / idx.len() as f64);
                adam.step(&mut model.net.values, &g, spec.lr);
            }
        }
        model
    }

    /// Sample `j` uses stream `("sample", j)`: initial noise first, then one
    /// noise vector per step `t = T..2` when `ancestral`.
    pub fn sample(&self, label: usize, n: usize, ancestral: bool, root: &RngStream) -> Vec<Vec<f64>> {
        let d = self.net.dims.last().copied().unwrap();
        (0..n)
            .map(|j| {
                let mut rng = root.derive_indexed("sample", j as u64);
                let mut z = rng.normal_vec(d);
                for t in (1..=self.steps).rev() {
                    let eps = self.net.predict(&self.input(&z, t, label));
                    let beta = self.betas[t - 1];
                    if ancestral {
                        let noise = (t > 1).then(|| rng.normal_vec(d));
                        let ab = self.abar[t - 1];
                        let c = beta / (1.0 - ab).sqrt();
                        let k = 1.0 / (1.0 - beta).sqrt();
                        z = z.iter().zip(&eps).map(|(z, e)| k * (z - c * e)).collect();
                        if let Some(noise) = noise {
                            let sigma = (beta * (1.0 - self.abar[t - 2]) / (1.0 - ab)).sqrt();
                            z.iter_mut().zip(&noise).for_each(|(z, n)| *z += sigma * n);
                        }
                    } else {
                        z = z.iter().zip(&eps).map(|(z, e)| (z - beta.sqrt() * e) / (1.0 - beta).sqrt()).collect();
                    }
                }
                z
            })
            .collect()
    }
}
