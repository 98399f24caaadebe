use statrs::function::{erf::erfc, gamma::gamma_ur};

use crate::error::{invalid, Result};

/// Upper-tail chi-square probability `Q(df/2, x/2)`.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    if !(x >= 0.0) {
        return invalid(format!("chi2_sf: x must be >= 0, got {x}"));
    }
    if df == 0 {
        return invalid("chi2_sf: df must be >= 1");
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0))
}

/// Two-sided standard normal tail probability `P(|Z| >= |z|)`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}
