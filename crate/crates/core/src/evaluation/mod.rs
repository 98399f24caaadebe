//! Sample-quality metrics, the rank-based significance tests, and
//! membership-convergence statistics.

mod metrics;
mod registry;
mod stats;

pub use metrics::{gaussian_frechet, knn_precision_recall, psnr, sliced_w2, ssim, w2_squared_1d};
pub use registry::{metric, SampleMetric, METRICS};
pub use stats::{friedman, holm, membership_stability, HolmRow, RankTable};
