//! Learning policies behind one select/update interface.
//!
//! | policy          | state                 | list choice                          |
//! |-----------------|-----------------------|--------------------------------------|
//! | `CascadeUcb1`   | per-item counts/means | top-`K` by UCB1 index                |
//! | `CascadeLinTs`  | one [`LinearState`]   | top-`K` by `x_eᵀθ_t`, one draw       |
//! | `CascadeLinUcb` | one [`LinearState`]   | top-`K` by clipped linear UCB        |
//! | `RankedLinTs`   | one state per position| per-position draw and argmax         |
//!
//! All argmax ties go to the lowest item index. Randomized policies own
//! their random stream, so a policy built from a seed replays exactly.

mod linear;
mod ranked;
mod ucb1;

use std::sync::Arc;

pub use linear::LinearState;
pub use ranked::RankedState;
pub use ucb1::Ucb1State;

use crate::environment::{ClickFeedback, RecommendationList};
use crate::error::Result;
use crate::features::ItemFeatures;
use crate::rng::SimRng;

pub trait Policy: Send {
    fn name(&self) -> &'static str;

    fn select(&mut self, k: usize) -> Result<RecommendationList>;

    fn update(&mut self, list: &RecommendationList, click: ClickFeedback) -> Result<()>;
}

#[derive(Debug, Clone)]
pub struct CascadeUcb1 {
    pub state: Ucb1State,
}

impl CascadeUcb1 {
    pub fn new(items: usize) -> Self {
        Self {
            state: Ucb1State::new(items),
        }
    }
}

impl Policy for CascadeUcb1 {
    fn name(&self) -> &'static str {
        "cascade_ucb1"
    }

    fn select(&mut self, k: usize) -> Result<RecommendationList> {
        self.state.select(k)
    }

    fn update(&mut self, list: &RecommendationList, click: ClickFeedback) -> Result<()> {
        self.state.update(list, click)
    }
}

#[derive(Debug, Clone)]
pub struct CascadeLinTs {
    pub state: LinearState,
    features: Arc<ItemFeatures>,
    rng: SimRng,
}

impl CascadeLinTs {
    pub fn new(features: Arc<ItemFeatures>, sigma: f64, rng: SimRng) -> Result<Self> {
        Ok(Self {
            state: LinearState::new(features.dim(), sigma)?,
            features,
            rng,
        })
    }
}

impl Policy for CascadeLinTs {
    fn name(&self) -> &'static str {
        "cascade_lin_ts"
    }

    fn select(&mut self, k: usize) -> Result<RecommendationList> {
        self.state.ts_select(&self.features, k, &mut self.rng)
    }

    fn update(&mut self, list: &RecommendationList, click: ClickFeedback) -> Result<()> {
        self.state.update(list, click, &self.features)
    }
}

#[derive(Debug, Clone)]
pub struct CascadeLinUcb {
    pub state: LinearState,
    features: Arc<ItemFeatures>,
    c: f64,
}

impl CascadeLinUcb {
    pub fn new(features: Arc<ItemFeatures>, sigma: f64, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(crate::Error::invalid(format!("c must be positive and finite, got {c}")));
        }
        Ok(Self {
            state: LinearState::new(features.dim(), sigma)?,
            features,
            c,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl Policy for CascadeLinUcb {
    fn name(&self) -> &'static str {
        "cascade_lin_ucb"
    }

    fn select(&mut self, k: usize) -> Result<RecommendationList> {
        self.state.ucb_select(&self.features, k, self.c)
    }

    fn update(&mut self, list: &RecommendationList, click: ClickFeedback) -> Result<()> {
        self.state.update(list, click, &self.features)
    }
}

#[derive(Debug, Clone)]
pub struct RankedLinTs {
    pub state: RankedState,
    features: Arc<ItemFeatures>,
    rng: SimRng,
}

impl RankedLinTs {
    pub fn new(features: Arc<ItemFeatures>, k: usize, sigma: f64, rng: SimRng) -> Result<Self> {
        Ok(Self {
            state: RankedState::new(k, features.dim(), sigma)?,
            features,
            rng,
        })
    }
}

impl Policy for RankedLinTs {
    fn name(&self) -> &'static str {
        "ranked_lin_ts"
    }

    fn select(&mut self, k: usize) -> Result<RecommendationList> {
        self.state.select(&self.features, k, &mut self.rng)
    }

    fn update(&mut self, list: &RecommendationList, click: ClickFeedback) -> Result<()> {
        self.state.update(list, click, &self.features)
    }
}

/// Always plays a fixed list. With `A*` this is the zero-regret reference.
#[derive(Debug, Clone)]
pub struct FixedList {
    list: RecommendationList,
}

impl FixedList {
    pub fn new(list: RecommendationList) -> Self {
        Self { list }
    }
}

impl Policy for FixedList {
    fn name(&self) -> &'static str {
        "fixed_list"
    }

    fn select(&mut self, k: usize) -> Result<RecommendationList> {
        if k != self.list.len() {
            return Err(crate::Error::invalid(format!(
                "fixed list has {} items, {k} requested",
                self.list.len()
            )));
        }
        Ok(self.list.clone())
    }

    fn update(&mut self, _list: &RecommendationList, _click: ClickFeedback) -> Result<()> {
        Ok(())
    }
}

/// Uniformly random `K`-permutation every step; a no-learning baseline.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    items: usize,
    rng: SimRng,
}

impl UniformRandom {
    pub fn new(items: usize, rng: SimRng) -> Self {
        Self { items, rng }
    }
}

impl Policy for UniformRandom {
    fn name(&self) -> &'static str {
        "uniform_random"
    }

    fn select(&mut self, k: usize) -> Result<RecommendationList> {
        linear::check_list_len(k, self.items)?;
        let mut all: Vec<usize> = (0..self.items).collect();
        // partial Fisher-Yates
        for i in 0..k {
            let j = i + self.rng.index(self.items - i);
            all.swap(i, j);
        }
        all.truncate(k);
        RecommendationList::new(all, self.items)
    }

    fn update(&mut self, _list: &RecommendationList, _click: ClickFeedback) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::simulate_click;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn unit_features(l: usize, d: usize, seed: u64) -> Arc<ItemFeatures> {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut m = DMatrix::from_fn(l, d, |_, _| rng.standard_normal());
        for e in 0..l {
            let n = m.row(e).norm();
            m.row_mut(e).unscale_mut(n);
        }
        Arc::new(ItemFeatures::new(m).unwrap())
    }

    fn all_policies(l: usize, d: usize, k: usize, seed: u64) -> Vec<Box<dyn Policy>> {
        let f = unit_features(l, d, seed);
        vec![
            Box::new(CascadeUcb1::new(l)),
            Box::new(CascadeLinTs::new(f.clone(), 1.0, SimRng::seed_from_u64(seed)).unwrap()),
            Box::new(CascadeLinUcb::new(f.clone(), 1.0, 2.0).unwrap()),
            Box::new(RankedLinTs::new(f, k, 1.0, SimRng::seed_from_u64(seed)).unwrap()),
            Box::new(UniformRandom::new(l, SimRng::seed_from_u64(seed))),
        ]
    }

    fn drive(policy: &mut dyn Policy, k: usize, rows: &[Vec<u8>], steps: usize, seed: u64) -> Vec<RecommendationList> {
        let mut rng = SimRng::seed_from_u64(seed);
        (0..steps)
            .map(|_| {
                let a = policy.select(k).unwrap();
                let row = &rows[rng.index(rows.len())];
                let c = simulate_click(&a, row).unwrap();
                policy.update(&a, c).unwrap();
                a
            })
            .collect()
    }

    fn random_rows(m: usize, l: usize, seed: u64) -> Vec<Vec<u8>> {
        let mut rng = SimRng::seed_from_u64(seed);
        (0..m)
            .map(|_| (0..l).map(|_| u8::from(rng.bernoulli(0.15))).collect())
            .collect()
    }

    #[test]
    fn every_policy_replays_identically() {
        let rows = random_rows(30, 12, 1);
        let runs: Vec<Vec<Vec<RecommendationList>>> = (0..2)
            .map(|_| {
                all_policies(12, 3, 4, 9)
                    .iter_mut()
                    .map(|p| drive(p.as_mut(), 4, &rows, 60, 5))
                    .collect()
            })
            .collect();
        assert_eq!(runs[0], runs[1]);
    }

    #[test]
    fn fixed_list_replays() {
        let a = RecommendationList::new(vec![2, 0], 3).unwrap();
        let mut p = FixedList::new(a.clone());
        assert_eq!(p.select(2).unwrap(), a);
        assert!(p.select(1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn selections_are_valid_and_ucb1_conserves_counts(
            seed in any::<u64>(),
            l in 4usize..20,
            k_frac in 0.0f64..1.0,
        ) {
            let k = 1 + ((l - 1) as f64 * k_frac) as usize;
            let rows = random_rows(25, l, seed);
            for mut p in all_policies(l, 3, k, seed) {
                for a in drive(p.as_mut(), k, &rows, 40, seed ^ 1) {
                    prop_assert_eq!(a.len(), k);
                    let mut items = a.items().to_vec();
                    items.sort_unstable();
                    items.dedup();
                    prop_assert_eq!(items.len(), k);
                    prop_assert!(items.iter().all(|&e| e < l));
                }
            }

            let mut ucb = CascadeUcb1::new(l);
            let mut rng = SimRng::seed_from_u64(seed);
            let mut observed = 0u64;
            for _ in 0..200 {
                let a = ucb.select(k).unwrap();
                let c = simulate_click(&a, &rows[rng.index(rows.len())]).unwrap();
                observed += c.observed_len(k) as u64;
                ucb.update(&a, c).unwrap();
            }
            prop_assert_eq!(ucb.state.counts().iter().sum::<u64>(), observed);
        }
    }
}
