use crate::error::{Error, Result};

/// Confidence constant and regret bound for CascadeLinUCB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremBound {
    pub c: f64,
    pub bound: f64,
}

/// With `g = ln(1 + nK / (dσ²))`:
///
/// - `c = √(d·g + 2·ln(nK)) / σ + ‖θ*‖`
/// - `R(n) ≤ 2cK·√(d·n·g / ln(1 + 1/σ²)) + 1`
///
/// The bound holds with `c` at least this value, for features with norm at
/// most 1 and attraction probabilities exactly linear in them.
pub fn theorem_bound(n: u64, k: usize, d: usize, sigma: f64, theta_norm: f64) -> Result<TheoremBound> {
    if n == 0 || k == 0 || d == 0 {
        return Err(Error::invalid("n, K and d must be positive"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(theta_norm.is_finite() && theta_norm > 0.0) {
        return Err(Error::invalid(format!("theta norm must be positive, got {theta_norm}")));
    }
    let (n, k, d) = (n as f64, k as f64, d as f64);
    let s2 = sigma * sigma;
    let g = (n * k / (d * s2)).ln_1p();
    let c = (d * g + 2.0 * (n * k).ln()).sqrt() / sigma + theta_norm;
    let bound = 2.0 * c * k * (d * n * g / (1.0 / s2).ln_1p()).sqrt() + 1.0;
    Ok(TheoremBound { c, bound })
}
