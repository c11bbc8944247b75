use nalgebra::DVector;

use crate::environment::{top_k, ClickFeedback, RecommendationList};
use crate::error::{Error, Result};
use crate::features::ItemFeatures;
use crate::numerics::{sample_mvn, PdMatrixInverse};
use crate::rng::SimRng;

/// Posterior statistics shared by CascadeLinTS and CascadeLinUCB: the
/// inverse gram matrix `M⁻¹`, the response vector `B` and the cached mean
/// `θ̄ = σ⁻² M⁻¹ B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearState {
    minv: PdMatrixInverse,
    b: DVector<f64>,
    sigma: f64,
    theta_bar: DVector<f64>,
}

impl LinearState {
    /// `M₀ = I_d`, `B₀ = 0`.
    pub fn new(dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        check_sigma(sigma)?;
        Ok(Self {
            minv: PdMatrixInverse::identity(dim),
            b: DVector::zeros(dim),
            sigma,
            theta_bar: DVector::zeros(dim),
        })
    }

    /// State with a given `M⁻¹` and `B`; `θ̄` is derived.
    pub fn from_parts(minv: PdMatrixInverse, b: DVector<f64>, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if b.len() != minv.dim() {
            return Err(Error::DimensionMismatch {
                expected: minv.dim(),
                actual: b.len(),
            });
        }
        let mut state = Self {
            theta_bar: DVector::zeros(b.len()),
            minv,
            b,
            sigma,
        };
        state.refresh_mean();
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn minv(&self) -> &PdMatrixInverse {
        &self.minv
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn theta_bar(&self) -> &DVector<f64> {
        &self.theta_bar
    }

    fn refresh_mean(&mut self) {
        self.theta_bar = self.minv.matrix() * &self.b / (self.sigma * self.sigma);
    }

    /// Adds one observation: `M ← M + σ⁻² x xᵀ`, `B ← B + x·weight`.
    pub fn observe(&mut self, x: &DVector<f64>, weight: f64) -> Result<()> {
        self.minv.rank_one_update(x, self.sigma)?;
        self.b.axpy(weight, x, 1.0);
        self.refresh_mean();
        Ok(())
    }

    /// Folds in the observed prefix `k = 1..=min{C_t, K}` of `list`.
    pub fn update(&mut self, list: &RecommendationList, click: ClickFeedback, feats: &ItemFeatures) -> Result<()> {
        click.check(list.len())?;
        for (k, &e) in list.items()[..click.observed_len(list.len())].iter().enumerate() {
            let x = feats.vector(e)?;
            let weight = if click.position() == Some(k + 1) { 1.0 } else { 0.0 };
            self.minv.rank_one_update(&x, self.sigma)?;
            self.b.axpy(weight, &x, 1.0);
        }
        self.refresh_mean();
        Ok(())
    }

    /// `θ_t ~ N(θ̄, M⁻¹)`.
    pub fn sample_theta(&self, rng: &mut SimRng) -> Result<DVector<f64>> {
        sample_mvn(&self.theta_bar, self.minv.matrix(), rng)
    }

    /// Thompson-sampling list: one `θ_t` draw, then the `k` items with the
    /// largest `x_eᵀ θ_t`.
    pub fn ts_select(&self, feats: &ItemFeatures, k: usize, rng: &mut SimRng) -> Result<RecommendationList> {
        self.check_select(feats, k)?;
        let theta = self.sample_theta(rng)?;
        RecommendationList::new(top_k(&feats.scores(&theta), k), feats.items())
    }

    /// `U(e) = min{x_eᵀ θ̄ + c √(x_eᵀ M⁻¹ x_e), 1}` for every item.
    pub fn ucb_scores(&self, feats: &ItemFeatures, c: f64) -> Vec<f64> {
        let x = feats.matrix();
        let xm = x * self.minv.matrix();
        let means = x * &self.theta_bar;
        (0..feats.items())
            .map(|e| {
                let width = xm.row(e).dot(&x.row(e)).max(0.0).sqrt();
                (means[e] + c * width).min(1.0)
            })
            .collect()
    }

    pub fn ucb_select(&self, feats: &ItemFeatures, k: usize, c: f64) -> Result<RecommendationList> {
        self.check_select(feats, k)?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!("c must be positive and finite, got {c}")));
        }
        RecommendationList::new(top_k(&self.ucb_scores(feats, c), k), feats.items())
    }

    fn check_select(&self, feats: &ItemFeatures, k: usize) -> Result<()> {
        if feats.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: feats.dim(),
            });
        }
        check_list_len(k, feats.items())
    }
}

pub(crate) fn check_list_len(k: usize, items: usize) -> Result<()> {
    if k == 0 || k > items {
        return Err(Error::invalid(format!("list length {k} must be in 1..={items}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}
