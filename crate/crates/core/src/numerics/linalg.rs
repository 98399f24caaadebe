use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};

pub type Matrix = DMatrix<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cosine similarity mapped onto [0, 1]: `(1 + cos) / 2`.
///
/// Either vector with norm below 1e-12 yields 0.5.
pub fn cosine01(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return invalid(format!(
            "cosine01: length mismatch {} vs {}",
            a.len(),
            b.len()
        ));
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return Ok(0.5);
    }
    let cos = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Ok((1.0 + cos) / 2.0)
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    a * b
}

/// Principal square root of a symmetric positive semi-definite matrix.
///
/// Eigenvalues down to -1e-10 (relative to the spectral scale) are clamped
/// to zero; anything more negative is rejected.
pub fn sym_psd_sqrt(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return invalid(format!("sym_psd_sqrt: {}x{} is not square", m.nrows(), m.ncols()));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-8 * scale {
        return invalid(format!("sym_psd_sqrt: asymmetry {asym:e}"));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-10 * scale {
            return invalid(format!("sym_psd_sqrt: negative eigenvalue {v:e}"));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    let s = q * Matrix::from_diagonal(&vals) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Column means of an `n x d` row-major sample matrix.
pub fn mean_rows(data: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mu = vec![0.0; d];
    for row in data.chunks_exact(d).take(n) {
        for (m, x) in mu.iter_mut().zip(row) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    mu
}

/// Unbiased sample covariance of an `n x d` row-major sample matrix.
pub fn covariance(data: &[f64], n: usize, d: usize) -> (Vec<f64>, Matrix) {
    let mu = mean_rows(data, n, d);
    let mut cov = Matrix::zeros(d, d);
    for row in data.chunks_exact(d).take(n) {
        for i in 0..d {
            let di = row[i] - mu[i];
            for j in i..d {
                cov[(i, j)] += di * (row[j] - mu[j]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mu, cov)
}
