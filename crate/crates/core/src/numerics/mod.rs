//! Random streams, tensors, and the small amount of linear algebra and
//! special-function machinery the rest of the crate leans on.

mod linalg;
mod rng;
mod special;
mod tensor;

pub use linalg::{
    cosine01, covariance, dot, frobenius, mat_mul, mean_rows, sq_dist, sym_psd_sqrt, Matrix,
};
pub use rng::RngStream;
pub use special::{chi2_sf, normal_two_sided_p};
pub use tensor::Tensor;
