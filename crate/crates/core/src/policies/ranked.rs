use crate::environment::{ClickFeedback, RecommendationList};
use crate::error::{Error, Result};
use crate::features::ItemFeatures;
use crate::rng::SimRng;

use super::linear::{check_list_len, LinearState};

/// One independent linear posterior per list position.
///
/// Position `k` is credited only with the item it placed: a click at `k`
/// counts as 1, a click later in the list or no click counts as 0, and
/// positions after the click learn nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedState {
    per_position: Vec<LinearState>,
}

impl RankedState {
    pub fn new(positions: usize, dim: usize, sigma: f64) -> Result<Self> {
        if positions == 0 {
            return Err(Error::invalid("ranked state needs at least one position"));
        }
        let state = LinearState::new(dim, sigma)?;
        Ok(Self {
            per_position: vec![state; positions],
        })
    }

    pub fn positions(&self) -> usize {
        self.per_position.len()
    }

    pub fn position(&self, k: usize) -> &LinearState {
        &self.per_position[k]
    }

    /// For each position in order: draw `θ^k`, then take the best item not
    /// already placed (lowest index on ties).
    pub fn select(&self, feats: &ItemFeatures, k: usize, rng: &mut SimRng) -> Result<RecommendationList> {
        check_list_len(k, feats.items())?;
        if k != self.positions() {
            return Err(Error::invalid(format!(
                "list length {k} differs from the {} learned positions",
                self.positions()
            )));
        }
        if feats.dim() != self.per_position[0].dim() {
            return Err(Error::DimensionMismatch {
                expected: self.per_position[0].dim(),
                actual: feats.dim(),
            });
        }
        let mut taken = vec![false; feats.items()];
        let mut items = Vec::with_capacity(k);
        for state in &self.per_position {
            let theta = state.sample_theta(rng)?;
            let scores = feats.scores(&theta);
            let mut best: Option<usize> = None;
            for e in (0..scores.len()).filter(|&e| !taken[e]) {
                if best.is_none_or(|b| scores[e] > scores[b]) {
                    best = Some(e);
                }
            }
            let pick = best.expect("k <= items leaves a candidate");
            taken[pick] = true;
            items.push(pick);
        }
        RecommendationList::new(items, feats.items())
    }

    pub fn update(&mut self, list: &RecommendationList, click: ClickFeedback, feats: &ItemFeatures) -> Result<()> {
        click.check(list.len())?;
        if list.len() != self.positions() {
            return Err(Error::DimensionMismatch {
                expected: self.positions(),
                actual: list.len(),
            });
        }
        for (k, &e) in list.items()[..click.observed_len(list.len())].iter().enumerate() {
            let x = feats.vector(e)?;
            let weight = if click.position() == Some(k + 1) { 1.0 } else { 0.0 };
            self.per_position[k].observe(&x, weight)?;
        }
        Ok(())
    }
}
