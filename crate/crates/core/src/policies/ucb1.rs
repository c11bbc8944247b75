use crate::environment::{top_k, ClickFeedback, RecommendationList};
use crate::error::Result;

use super::linear::check_list_len;

/// Per-item statistics of CascadeUCB1.
#[derive(Debug, Clone, PartialEq)]
pub struct Ucb1State {
    counts: Vec<u64>,
    means: Vec<f64>,
    t: u64,
}

impl Ucb1State {
    pub fn new(items: usize) -> Self {
        Self {
            counts: vec![0; items],
            means: vec![0.0; items],
            t: 0,
        }
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }

    /// Number of completed steps.
    pub fn step(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Empirical attraction mean of `item`, `None` before its first
    /// observation.
    pub fn mean(&self, item: usize) -> Option<f64> {
        (self.counts[item] > 0).then(|| self.means[item])
    }

    /// `ŵ(e) + √(1.5 ln t / T(e))` with `t` the number of completed steps;
    /// `+∞` for items never observed.
    pub fn ucb(&self, item: usize) -> f64 {
        let n = self.counts[item];
        if n == 0 {
            return f64::INFINITY;
        }
        self.means[item] + (1.5 * (self.t as f64).ln() / n as f64).sqrt()
    }

    pub fn select(&self, k: usize) -> Result<RecommendationList> {
        check_list_len(k, self.items())?;
        let scores: Vec<f64> = (0..self.items()).map(|e| self.ucb(e)).collect();
        RecommendationList::new(top_k(&scores, k), self.items())
    }

    pub fn update(&mut self, list: &RecommendationList, click: ClickFeedback) -> Result<()> {
        click.check(list.len())?;
        for (k, &e) in list.items()[..click.observed_len(list.len())].iter().enumerate() {
            let w = if click.position() == Some(k + 1) { 1.0 } else { 0.0 };
            self.counts[e] += 1;
            self.means[e] += (w - self.means[e]) / self.counts[e] as f64;
        }
        self.t += 1;
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn with_stats(counts: Vec<u64>, means: Vec<f64>, t: u64) -> Self {
        Self { counts, means, t }
    }
}
