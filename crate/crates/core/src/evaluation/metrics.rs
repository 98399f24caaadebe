use crate::data::SampleSet;
use crate::error::{invalid, Result};
use crate::numerics::{covariance, sq_dist, sym_psd_sqrt, Matrix, RngStream, Tensor};

const RIDGE: f64 = 1e-6;

fn same_dim(a: &SampleSet, b: &SampleSet) -> Result<()> {
    if a.dim != b.dim {
        return invalid(format!("sample sets differ in dimension: {} vs {}", a.dim, b.dim));
    }
    Ok(())
}

/// Fréchet distance between Gaussian fits of two sample sets, each
/// covariance regularized by `1e-6 I`.
pub fn gaussian_frechet(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    same_dim(a, b)?;
    if a.len() < 2 || b.len() < 2 {
        return invalid("gaussian_frechet needs at least two samples per set");
    }
    let d = a.dim;
    let (mu_a, mut cov_a) = covariance(&a.data, a.len(), d);
    let (mu_b, mut cov_b) = covariance(&b.data, b.len(), d);
    for i in 0..d {
        cov_a[(i, i)] += RIDGE;
        cov_b[(i, i)] += RIDGE;
    }
    let mean_term = sq_dist(&mu_a, &mu_b);
    let root_a = sym_psd_sqrt(&cov_a)?;
    let inner: Matrix = &root_a * &cov_b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = sym_psd_sqrt(&inner)?;
    let trace = cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
    Ok((mean_term + trace).max(0.0))
}

/// Exact squared 2-Wasserstein distance between two 1-D empirical measures.
pub fn w2_squared_1d(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len(), xb.len());
    if na == nb {
        return xa.iter().zip(&xb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / na as f64;
    }
    // integrate (F_a^{-1}(u) - F_b^{-1}(u))^2 over the merged quantile grid;
    // breakpoints i/na and j/nb are compared exactly in integer arithmetic
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0.0;
    let mut total = 0.0;
    while i < na && j < nb {
        let (ea, eb) = ((i + 1) * nb, (j + 1) * na);
        let next = ea.min(eb) as f64 / (na * nb) as f64;
        let diff = xa[i] - xb[j];
        total += (next - prev) * diff * diff;
        prev = next;
        if ea <= eb {
            i += 1;
        }
        if eb <= ea {
            j += 1;
        }
    }
    total
}

/// Mean over `n_projections` random unit directions of the squared 1-D
/// Wasserstein-2 distance between the projected sets.
pub fn sliced_w2(a: &SampleSet, b: &SampleSet, n_projections: usize, rng: &mut RngStream) -> Result<f64> {
    same_dim(a, b)?;
    if a.is_empty() || b.is_empty() || n_projections == 0 {
        return invalid("sliced_w2 needs non-empty sets and at least one projection");
    }
    let d = a.dim;
    let mut total = 0.0;
    for _ in 0..n_projections {
        let mut dir = rng.normal_vec(d);
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if d == 1 || norm < 1e-12 {
            dir = vec![1.0; d];
        } else {
            dir.iter_mut().for_each(|x| *x /= norm);
        }
        let pa: Vec<f64> = a.rows().map(|r| crate::numerics::dot(r, &dir)).collect();
        let pb: Vec<f64> = b.rows().map(|r| crate::numerics::dot(r, &dir)).collect();
        total += w2_squared_1d(&pa, &pb);
    }
    Ok(total / n_projections as f64)
}

/// Peak signal-to-noise ratio in dB; identical inputs give `+inf`.
pub fn psnr(a: &Tensor, b: &Tensor, peak: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return invalid(format!("psnr: shapes {:?} and {:?} differ", a.shape(), b.shape()));
    }
    if !(peak > 0.0) {
        return invalid("psnr: peak must be positive");
    }
    let mse = sq_dist(a.data(), b.data()) / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Mean SSIM over all `window x window` patches (stride 1) of two 2-D
/// images, uniform weights, `C1 = (0.01 peak)^2`, `C2 = (0.03 peak)^2`.
pub fn ssim(a: &Tensor, b: &Tensor, window: usize, peak: f64) -> Result<f64> {
    if a.shape().len() != 2 || a.shape() != b.shape() {
        return invalid("ssim: inputs must be 2-D images of equal shape");
    }
    let (h, w) = (a.shape()[0], a.shape()[1]);
    if window == 0 || h < window || w < window {
        return invalid(format!("ssim: {h}x{w} image is smaller than the {window}x{window} window"));
    }
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let (da, db) = (a.data(), b.data());
    let npx = (window * window) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(h - window) {
        for x0 in 0..=(w - window) {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in y0..y0 + window {
                for x in x0..x0 + window {
                    let (p, q) = (da[y * w + x], db[y * w + x]);
                    sa += p;
                    sb += q;
                    saa += p * p;
                    sbb += q * q;
                    sab += p * q;
                }
            }
            let (ma, mb) = (sa / npx, sb / npx);
            let va = (saa / npx - ma * ma).max(0.0);
            let vb = (sbb / npx - mb * mb).max(0.0);
            let cov = sab / npx - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn kth_neighbor_radii(set: &SampleSet, k: usize) -> Vec<f64> {
    let n = set.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| sq_dist(set.row(i), set.row(j)))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1].sqrt()
        })
        .collect()
}

fn coverage(manifold: &SampleSet, radii: &[f64], probes: &SampleSet) -> f64 {
    let inside = probes
        .rows()
        .filter(|p| {
            manifold
                .rows()
                .zip(radii)
                .any(|(m, r)| sq_dist(p, m).sqrt() <= *r)
        })
        .count();
    inside as f64 / probes.len() as f64
}

/// k-NN manifold precision (generated samples inside the real manifold) and
/// recall (real samples inside the generated manifold).
pub fn knn_precision_recall(real: &SampleSet, gen: &SampleSet, k: usize) -> Result<(f64, f64)> {
    same_dim(real, gen)?;
    if k == 0 || real.len() < k + 1 || gen.len() < k + 1 {
        return invalid(format!("knn_precision_recall needs at least k + 1 = {} samples per set", k + 1));
    }
    let real_r = kth_neighbor_radii(real, k);
    let gen_r = kth_neighbor_radii(gen, k);
    Ok((coverage(real, &real_r, gen), coverage(gen, &gen_r, real)))
}
