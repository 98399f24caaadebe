use crate::data::SampleSet;
use crate::error::{invalid, Result};
use crate::numerics::{RngStream, Tensor};

use super::metrics::{gaussian_frechet, knn_precision_recall, psnr, sliced_w2, ssim};

const SLICED_PROJECTIONS: usize = 64;
const KNN_K: usize = 3;

/// A scalar quality metric comparing a generated sample set with real data.
pub trait SampleMetric: Send + Sync {
    fn name(&self) -> &'static str;
    fn compute(&self, real: &SampleSet, gen: &SampleSet, rng: &mut RngStream) -> Result<f64>;
}

struct Frechet;
struct SlicedW2;
struct Precision;
struct Recall;
struct PairedPsnr;
struct PairedSsim;

impl SampleMetric for Frechet {
    fn name(&self) -> &'static str {
        "frechet"
    }
    fn compute(&self, real: &SampleSet, gen: &SampleSet, _: &mut RngStream) -> Result<f64> {
        gaussian_frechet(real, gen)
    }
}

impl SampleMetric for SlicedW2 {
    fn name(&self) -> &'static str {
        "sliced-w2"
    }
    fn compute(&self, real: &SampleSet, gen: &SampleSet, rng: &mut RngStream) -> Result<f64> {
        sliced_w2(real, gen, SLICED_PROJECTIONS, rng)
    }
}

impl SampleMetric for Precision {
    fn name(&self) -> &'static str {
        "precision"
    }
    fn compute(&self, real: &SampleSet, gen: &SampleSet, _: &mut RngStream) -> Result<f64> {
        Ok(knn_precision_recall(real, gen, KNN_K)?.0)
    }
}

impl SampleMetric for Recall {
    fn name(&self) -> &'static str {
        "recall"
    }
    fn compute(&self, real: &SampleSet, gen: &SampleSet, _: &mut RngStream) -> Result<f64> {
        Ok(knn_precision_recall(real, gen, KNN_K)?.1)
    }
}

fn paired(real: &SampleSet, gen: &SampleSet) -> Result<usize> {
    if real.dim != gen.dim || real.len() != gen.len() || real.is_empty() {
        return invalid("paired image metrics need equally sized, non-empty sets of equal dimension");
    }
    Ok(real.len())
}

fn square_side(dim: usize) -> Result<usize> {
    let side = (dim as f64).sqrt().round() as usize;
    if side * side != dim {
        return invalid(format!("ssim needs square images, got dimension {dim}"));
    }
    Ok(side)
}

/// Mean PSNR (peak 1) over row-aligned pairs; infinite pairs are skipped.
impl SampleMetric for PairedPsnr {
    fn name(&self) -> &'static str {
        "psnr"
    }
    fn compute(&self, real: &SampleSet, gen: &SampleSet, _: &mut RngStream) -> Result<f64> {
        let n = paired(real, gen)?;
        let mut finite = Vec::with_capacity(n);
        for i in 0..n {
            let v = psnr(&Tensor::vector(real.row(i).to_vec()), &Tensor::vector(gen.row(i).to_vec()), 1.0)?;
            if v.is_finite() {
                finite.push(v);
            }
        }
        if finite.is_empty() {
            return Ok(f64::INFINITY);
        }
        Ok(finite.iter().sum::<f64>() / finite.len() as f64)
    }
}

/// Mean SSIM (8x8 window, peak 1) over row-aligned pairs of square images.
impl SampleMetric for PairedSsim {
    fn name(&self) -> &'static str {
        "ssim"
    }
    fn compute(&self, real: &SampleSet, gen: &SampleSet, _: &mut RngStream) -> Result<f64> {
        let n = paired(real, gen)?;
        let side = square_side(real.dim)?;
        let mut total = 0.0;
        for i in 0..n {
            let a = Tensor::new(vec![side, side], real.row(i).to_vec())?;
            let b = Tensor::new(vec![side, side], gen.row(i).to_vec())?;
            total += ssim(&a, &b, 8, 1.0)?;
        }
        Ok(total / n as f64)
    }
}

/// Names accepted by [`metric`].
pub const METRICS: [&str; 6] = ["frechet", "sliced-w2", "precision", "recall", "psnr", "ssim"];

pub fn metric(name: &str) -> Result<Box<dyn SampleMetric>> {
    Ok(match name {
        "frechet" => Box::new(Frechet),
        "sliced-w2" => Box::new(SlicedW2),
        "precision" => Box::new(Precision),
        "recall" => Box::new(Recall),
        "psnr" => Box::new(PairedPsnr),
        "ssim" => Box::new(PairedSsim),
        other => return invalid(format!("unknown metric '{other}' (expected one of {})", METRICS.join(", "))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_round_trip() {
        for name in METRICS {
            assert_eq!(metric(name).unwrap().name(), name);
        }
        assert!(metric("fid").is_err());
    }

    #[test]
    fn paired_metrics_on_identical_sets() {
        let mut rng = RngStream::new(0);
        let rows: Vec<f64> = (0..4 * 256).map(|_| rng.uniform()).collect();
        let s = SampleSet::new(256, rows, None).unwrap();
        assert_eq!(metric("psnr").unwrap().compute(&s, &s, &mut rng).unwrap(), f64::INFINITY);
        assert!((metric("ssim").unwrap().compute(&s, &s, &mut rng).unwrap() - 1.0).abs() < 1e-12);
    }
}
