use nalgebra::{DMatrix, DVector};

use crate::environment::{AttractionProbabilities, Environment};
use crate::error::{Error, Result};
use crate::features::ItemFeatures;
use crate::rng::SimRng;

/// Lowest attraction probability of a synthetic item.
pub const MIN_ATTRACTION: f64 = 0.05;
/// Highest attraction probability of a synthetic item.
pub const MAX_ATTRACTION: f64 = 0.95;
const MAX_ATTEMPTS: usize = 100;

/// Environment whose attraction probabilities are exactly `w̄(e) = x_eᵀθ*`.
#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    pub environment: Environment,
    pub features: ItemFeatures,
    pub theta: DVector<f64>,
    pub probs: AttractionProbabilities,
}

impl SyntheticEnv {
    pub fn theta_norm(&self) -> f64 {
        self.theta.norm()
    }
}

/// Perfect-linear Bernoulli environment drawn from `theta_seed`.
///
/// Every feature is `x_e = (1/√2, u_e/√2)` with `u_e` uniform on the unit
/// sphere of `R^{d-1}`, so `‖x_e‖ = 1`. A random direction `φ` scores the
/// items, `s_e = u_eᵀφ`, and `θ*` is chosen so that `x_eᵀθ*` maps the score
/// range affinely onto `[0.05, 0.95]`. Needs `d ≥ 2` and two items with
/// different scores; draws are retried up to 100 times.
pub fn synthetic_env(l: usize, d: usize, k: usize, theta_seed: u64) -> Result<SyntheticEnv> {
    if d == 0 || l == 0 || d > l {
        return Err(Error::invalid(format!(
            "synthetic env needs 1 <= d <= L, got d={d}, L={l}"
        )));
    }
    let mut rng = SimRng::seed_from_u64(theta_seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..MAX_ATTEMPTS {
        let free = d - 1;
        let mut features = DMatrix::<f64>::zeros(l, d);
        for e in 0..l {
            features[(e, 0)] = half;
            if free == 0 {
                continue;
            }
            let u = random_unit(free, &mut rng);
            for i in 0..free {
                features[(e, i + 1)] = half * u[i];
            }
        }
        let phi = DVector::from_fn(free, |_, _| rng.standard_normal());
        let scores: Vec<f64> = (0..l)
            .map(|e| (0..free).map(|i| features[(e, i + 1)] / half * phi[i]).sum())
            .collect();
        let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let spread = hi - lo;
        if spread.is_nan() || spread <= 1e-9 * phi.norm().max(1e-300) {
            continue;
        }
        let slope = (MAX_ATTRACTION - MIN_ATTRACTION) / (hi - lo);
        let offset = MIN_ATTRACTION - lo * slope;
        let mut theta = DVector::<f64>::zeros(d);
        theta[0] = offset / half;
        for i in 0..free {
            theta[i + 1] = slope * phi[i] / half;
        }
        let probs: Vec<f64> = (&features * &theta).iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let probs = AttractionProbabilities::new(probs)?;
        let environment = Environment::bernoulli(probs.clone(), k)?;
        return Ok(SyntheticEnv {
            environment,
            features: ItemFeatures::new(features)?,
            theta,
            probs,
        });
    }
    Err(Error::invalid(format!(
        "could not draw a non-degenerate synthetic environment in {MAX_ATTEMPTS} attempts (d={d}, L={l})"
    )))
}

fn random_unit(dim: usize, rng: &mut SimRng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.standard_normal());
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}
