use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::numerics::Tensor;

/// Deterministic random stream keyed by `(seed, stream id)`.
///
/// The underlying generator is ChaCha8, which is counter based: a stream id
/// selects an independent keystream, and the word position is the counter.
/// Sub-streams are derived from a label so that work keyed by e.g. a path
/// index draws the same values no matter in which order it is scheduled.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

// FNV-1a, fixed so that stream ids do not depend on std's hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Fresh stream for `label`, independent of how far `self` has advanced.
    pub fn derive(&self, label: &str) -> RngStream {
        let id = mix(self.stream ^ mix(fnv1a(label.as_bytes())));
        Self::with_stream(self.seed, id)
    }

    /// Fresh stream for `(label, index)`.
    pub fn derive_indexed(&self, label: &str, index: u64) -> RngStream {
        let base = mix(self.stream ^ mix(fnv1a(label.as_bytes())));
        Self::with_stream(self.seed, mix(base ^ mix(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn uniform_int(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..=hi)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// I.i.d. standard normal tensor.
    pub fn standard_normal(&mut self, shape: &[usize]) -> Result<Tensor> {
        if shape.is_empty() || shape.contains(&0) {
            return invalid(format!("standard_normal: degenerate shape {shape:?}"));
        }
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), self.normal_vec(n))
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.uniform_int(0, i);
            idx.swap(i, j);
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_moments() {
        let mut rng = RngStream::new(0);
        let t = rng.standard_normal(&[100_000]).unwrap();
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn same_seed_same_draws() {
        let a = RngStream::new(42).standard_normal(&[3, 7]).unwrap();
        let b = RngStream::new(42).standard_normal(&[3, 7]).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn zero_shape_rejected() {
        assert!(RngStream::new(0).standard_normal(&[0]).is_err());
        assert!(RngStream::new(0).standard_normal(&[]).is_err());
    }

    #[test]
    fn derived_streams_differ_and_ignore_parent_position() {
        let root = RngStream::new(9);
        let mut advanced = root.clone();
        advanced.normal_vec(17);
        let mut a = root.derive("path");
        let mut b = advanced.derive("path");
        assert_eq!(a.next_u64(), b.next_u64());
        let mut c = root.derive("other");
        let mut d = root.derive_indexed("path", 1);
        let mut e = root.derive_indexed("path", 2);
        let first = root.derive("path").next_u64();
        assert_ne!(first, c.next_u64());
        assert_ne!(d.next_u64(), e.next_u64());
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = RngStream::new(3).permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
