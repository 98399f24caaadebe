//! Latent-space compression: small linear encoder/decoder pairs, a registry
//! of them, and membership-based selection of the pair used for each input.

use serde::{Deserialize, Serialize};

use crate::condition::{Condition, ConditionSpace};
use crate::denoiser::AdamState;
use crate::error::{invalid, Result};
use crate::fuzzification::{smc, MembershipParams};
use crate::numerics::{sq_dist, RngStream};

/// Affine encoder `z = E x + e` and decoder `x = D z + f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codec {
    pub sample_dim: usize,
    pub latent_dim: usize,
    /// `latent_dim x sample_dim`, row-major.
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    /// `sample_dim x latent_dim`, row-major.
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
    pub representative: Vec<f64>,
    pub representative_condition: Condition,
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(i, bi)| {
            let row = &w[i * n_in..(i + 1) * n_in];
            row.iter().zip(x).fold(*bi, |acc, (w, x)| acc + w * x)
        })
        .collect()
}

/// Index of the row minimizing total Euclidean distance to all rows.
pub fn medoid_index(rows: &[Vec<f64>]) -> Result<usize> {
    if rows.is_empty() {
        return invalid("medoid of an empty set");
    }
    let n = rows.len();
    let mut totals = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(&rows[i], &rows[j]).sqrt();
            totals[i] += d;
            totals[j] += d;
        }
    }
    Ok(totals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty"))
}

impl Codec {
    /// Identity maps on `dim`-dimensional samples.
    pub fn identity(dim: usize, representative: Vec<f64>, representative_condition: Condition) -> Result<Self> {
        if dim == 0 || representative.len() != dim {
            return invalid("identity codec needs a representative of the sample dimension");
        }
        let mut eye = vec![0.0; dim * dim];
        (0..dim).for_each(|i| eye[i * dim + i] = 1.0);
        Ok(Self {
            sample_dim: dim,
            latent_dim: dim,
            enc_w: eye.clone(),
            enc_b: vec![0.0; dim],
            dec_w: eye,
            dec_b: vec![0.0; dim],
            representative,
            representative_condition,
        })
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.sample_dim {
            return invalid(format!("encode: sample has {} dims, codec expects {}", x.len(), self.sample_dim));
        }
        Ok(affine(&self.enc_w, &self.enc_b, x))
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim {
            return invalid(format!("decode: latent has {} dims, codec expects {}", z.len(), self.latent_dim));
        }
        Ok(affine(&self.dec_w, &self.dec_b, z))
    }

    pub fn round_trip(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }

    fn check_shapes(&self) -> Result<()> {
        let (s, l) = (self.sample_dim, self.latent_dim);
        if self.enc_w.len() != l * s
            || self.enc_b.len() != l
            || self.dec_w.len() != s * l
            || self.dec_b.len() != s
            || self.representative.len() != s
        {
            return invalid("codec parameter shapes are inconsistent");
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_shapes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecTraining {
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for CodecTraining {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            epochs: 200,
            batch_size: 32,
            lr: 1e-3,
        }
    }
}

/// Fits a linear autoencoder to `rows` by minibatch Adam on the mean squared
/// reconstruction error. The representative is the subset medoid.
pub fn train_codec(rows: &[Vec<f64>], labels: &[Condition], cfg: CodecTraining, rng: &mut RngStream) -> Result<Codec> {
    if rows.is_empty() {
        return invalid("train_codec: empty dataset");
    }
    if labels.len() != rows.len() {
        return invalid("train_codec: labels and rows differ in length");
    }
    let s = rows[0].len();
    let l = cfg.latent_dim;
    if l == 0 || l > s {
        return invalid(format!("train_codec: latent_dim {l} must be in 1..={s}"));
    }
    if rows.iter().any(|r| r.len() != s) {
        return invalid("train_codec: rows of mixed dimension");
    }
    let rep = medoid_index(rows)?;

    // Tied random start: decoder is the encoder transpose.
    let scale = (1.0 / s as f64).sqrt();
    let enc_w: Vec<f64> = (0..l * s).map(|_| scale * rng.normal()).collect();
    let mut dec_w = vec![0.0; s * l];
    for i in 0..l {
        for j in 0..s {
            dec_w[j * l + i] = enc_w[i * s + j];
        }
    }
    let mean: Vec<f64> = (0..s).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect();
    let mut codec = Codec {
        sample_dim: s,
        latent_dim: l,
        enc_w,
        enc_b: vec![0.0; l],
        dec_w,
        dec_b: mean,
        representative: rows[rep].clone(),
        representative_condition: labels[rep],
    };

    let n_params = 2 * l * s + l + s;
    let mut adam = AdamState::new(n_params);
    let mut flat = vec![0.0; n_params];
    let bs = cfg.batch_size.max(1);
    for _ in 0..cfg.epochs {
        let order = rng.permutation(rows.len());
        for chunk in order.chunks(bs) {
            let grads = codec_grads(&codec, rows, chunk);
            pack(&codec, &mut flat);
            adam.update(&mut flat, &grads, cfg.lr);
            unpack(&mut codec, &flat);
        }
    }
    Ok(codec)
}

fn pack(c: &Codec, flat: &mut [f64]) {
    let mut o = 0;
    for part in [&c.enc_w, &c.enc_b, &c.dec_w, &c.dec_b] {
        flat[o..o + part.len()].copy_from_slice(part);
        o += part.len();
    }
}

fn unpack(c: &mut Codec, flat: &[f64]) {
    let mut o = 0;
    for part in [&mut c.enc_w, &mut c.enc_b, &mut c.dec_w, &mut c.dec_b] {
        let n = part.len();
        part.copy_from_slice(&flat[o..o + n]);
        o += n;
    }
}

fn codec_grads(c: &Codec, rows: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let (s, l) = (c.sample_dim, c.latent_dim);
    let mut g_enc_w = vec![0.0; l * s];
    let mut g_enc_b = vec![0.0; l];
    let mut g_dec_w = vec![0.0; s * l];
    let mut g_dec_b = vec![0.0; s];
    let norm = 2.0 / (idx.len() * s) as f64;
    for &i in idx {
        let x = &rows[i];
        let z = affine(&c.enc_w, &c.enc_b, x);
        let y = affine(&c.dec_w, &c.dec_b, &z);
        let dy: Vec<f64> = y.iter().zip(x).map(|(a, b)| norm * (a - b)).collect();
        let mut dz = vec![0.0; l];
        for j in 0..s {
            g_dec_b[j] += dy[j];
            let row = &c.dec_w[j * l..(j + 1) * l];
            for k in 0..l {
                g_dec_w[j * l + k] += dy[j] * z[k];
                dz[k] += row[k] * dy[j];
            }
        }
        for k in 0..l {
            g_enc_b[k] += dz[k];
            let g = &mut g_enc_w[k * s..(k + 1) * s];
            for (gv, xv) in g.iter_mut().zip(x) {
                *gv += dz[k] * xv;
            }
        }
    }
    let mut out = g_enc_w;
    out.extend(g_enc_b);
    out.extend(g_dec_w);
    out.extend(g_dec_b);
    out
}

/// Ordered collection of codecs sharing one sample dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecRegistry {
    codecs: Vec<Codec>,
}

impl CodecRegistry {
    pub fn new(codecs: Vec<Codec>) -> Result<Self> {
        let Some(first) = codecs.first() else {
            return invalid("codec registry needs at least one codec");
        };
        let s = first.sample_dim;
        let l = first.latent_dim;
        for c in &codecs {
            c.validate()?;
            if c.sample_dim != s || c.latent_dim != l {
                return invalid("codecs in a registry must share sample and latent dimensions");
            }
        }
        Ok(Self { codecs })
    }

    pub fn codecs(&self) -> &[Codec] {
        &self.codecs
    }

    pub fn get(&self, i: usize) -> &Codec {
        &self.codecs[i]
    }

    pub fn len(&self) -> usize {
        self.codecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codecs.is_empty()
    }

    pub fn sample_dim(&self) -> usize {
        self.codecs[0].sample_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.codecs[0].latent_dim
    }

    /// Memberships of `x` in every codec's representative subset and the
    /// argmax index (lowest index on ties).
    pub fn select(&self, x: &[f64], cond: Condition, space: &ConditionSpace, params: MembershipParams) -> Result<(usize, Vec<f64>)> {
        if x.len() != self.sample_dim() {
            return invalid(format!("select_codec: sample has {} dims, registry expects {}", x.len(), self.sample_dim()));
        }
        let memberships = self
            .codecs
            .iter()
            .map(|c| smc(x, &c.representative, cond, c.representative_condition, space, params))
            .collect::<Result<Vec<_>>>()?;
        Ok((argmax(&memberships), memberships))
    }

    /// Codec used to decode generated latents for a prompt: the highest
    /// semantic similarity between the prompt and representative conditions.
    pub fn select_for_condition(&self, cond: Condition, space: &ConditionSpace) -> Result<usize> {
        let prompt = space.embed(cond)?;
        let scores = self
            .codecs
            .iter()
            .map(|c| crate::numerics::cosine01(prompt, space.embed(c.representative_condition)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(argmax(&scores))
    }
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> ConditionSpace {
        ConditionSpace::new(3, 8, 0).unwrap()
    }

    #[test]
    fn identity_codec_round_trips_exactly() {
        let c = Codec::identity(2, vec![0.0, 0.0], Condition(0)).unwrap();
        let x = [1.25, -3.5];
        assert_eq!(c.encode(&x).unwrap(), x.to_vec());
        assert_eq!(c.decode(&x).unwrap(), x.to_vec());
        assert!(c.decode(&[1.0]).is_err());
        assert!(c.encode(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn linear_encoder_is_linear() {
        let mut rng = RngStream::new(1);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| rng.normal_vec(5)).collect();
        let labels = vec![Condition(0); 20];
        let cfg = CodecTraining { latent_dim: 3, epochs: 2, ..Default::default() };
        let mut c = train_codec(&rows, &labels, cfg, &mut rng).unwrap();
        c.enc_b.iter_mut().for_each(|b| *b = 0.0);
        let (a, b) = (0.7, -1.3);
        let mix: Vec<f64> = rows[0].iter().zip(&rows[1]).map(|(x, y)| a * x + b * y).collect();
        let lhs = c.encode(&mix).unwrap();
        let e0 = c.encode(&rows[0]).unwrap();
        let e1 = c.encode(&rows[1]).unwrap();
        for i in 0..3 {
            assert!((lhs[i] - (a * e0[i] + b * e1[i])).abs() < 1e-12);
        }
        assert_eq!(c.round_trip(&rows[2]).unwrap().len(), 5);
    }

    #[test]
    fn training_validates_and_is_deterministic() {
        let mut rng = RngStream::new(2);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| rng.normal_vec(4)).collect();
        let labels = vec![Condition(1); 30];
        let cfg = CodecTraining { latent_dim: 2, epochs: 3, ..Default::default() };
        let a = train_codec(&rows, &labels, cfg, &mut RngStream::new(5)).unwrap();
        let b = train_codec(&rows, &labels, cfg, &mut RngStream::new(5)).unwrap();
        assert_eq!(a, b);
        assert!(rows.contains(&a.representative));
        let too_big = CodecTraining { latent_dim: 5, ..cfg };
        assert!(train_codec(&rows, &labels, too_big, &mut RngStream::new(5)).is_err());
        assert!(train_codec(&[], &[], cfg, &mut RngStream::new(5)).is_err());
    }

    #[test]
    fn training_reduces_reconstruction_error() {
        let mut rng = RngStream::new(3);
        // rank-2 data embedded in 6 dims plus a little noise
        let basis = [rng.normal_vec(6), rng.normal_vec(6)];
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let (a, b) = (rng.normal(), rng.normal());
                (0..6).map(|j| a * basis[0][j] + b * basis[1][j] + 0.01 * rng.normal()).collect()
            })
            .collect();
        let labels = vec![Condition(0); 200];
        let mse = |c: &Codec| {
            rows.iter()
                .map(|r| sq_dist(&c.round_trip(r).unwrap(), r))
                .sum::<f64>()
                / (200.0 * 6.0)
        };
        let start = train_codec(&rows, &labels, CodecTraining { latent_dim: 2, epochs: 0, ..Default::default() }, &mut RngStream::new(1)).unwrap();
        let fit = train_codec(&rows, &labels, CodecTraining { latent_dim: 2, epochs: 100, lr: 1e-2, ..Default::default() }, &mut RngStream::new(1)).unwrap();
        assert!(mse(&fit) < 0.05 * mse(&start), "{} vs {}", mse(&fit), mse(&start));
    }

    #[test]
    fn selection_rules() {
        let sp = space();
        let p = MembershipParams::default();
        let single = CodecRegistry::new(vec![Codec::identity(2, vec![1.0, 0.0], Condition(0)).unwrap()]).unwrap();
        assert_eq!(single.select(&[-5.0, 2.0], Condition(2), &sp, p).unwrap().0, 0);

        let reg = CodecRegistry::new(vec![
            Codec::identity(2, vec![1.0, 0.0], Condition(0)).unwrap(),
            Codec::identity(2, vec![0.0, 1.0], Condition(1)).unwrap(),
            Codec::identity(2, vec![-1.0, 0.0], Condition(2)).unwrap(),
        ])
        .unwrap();
        let (idx, mu) = reg.select(&[0.0, 1.0], Condition(1), &sp, p).unwrap();
        assert_eq!(idx, 1);
        assert!((mu[1] - 1.0).abs() < 1e-12);
        assert!(mu.iter().all(|m| *m <= mu[idx]));
        assert!(reg.select(&[0.0], Condition(1), &sp, p).is_err());
        assert_eq!(reg.select_for_condition(Condition(2), &sp).unwrap(), 2);

        let twins = CodecRegistry::new(vec![
            Codec::identity(2, vec![1.0, 1.0], Condition(0)).unwrap(),
            Codec::identity(2, vec![1.0, 1.0], Condition(0)).unwrap(),
        ])
        .unwrap();
        assert_eq!(twins.select(&[0.3, 0.9], Condition(0), &sp, p).unwrap().0, 0);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.7]), 0);
    }
}
