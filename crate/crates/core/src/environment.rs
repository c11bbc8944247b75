//! Cascade-model simulator.
//!
//! A user scans a [`RecommendationList`] from the top and clicks the first
//! attractive item. Only the items up to and including the click are
//! observed. The environment draws one attraction realization `w_t` per
//! step, either as a uniformly random row of a [`FeedbackMatrix`] or as
//! independent Bernoulli draws from known attraction probabilities.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Binary user × item attraction matrix `W` (`W[i][j] = 1` iff user `i` is
/// attracted by item `j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackMatrix {
    users: usize,
    items: usize,
    bits: Vec<u8>,
}

impl FeedbackMatrix {
    /// Row-major construction. Every entry must be 0 or 1.
    pub fn new(users: usize, items: usize, bits: Vec<u8>) -> Result<Self> {
        if users == 0 || items == 0 {
            return Err(Error::invalid(format!(
                "feedback matrix needs at least one user and one item, got {users}x{items}"
            )));
        }
        if bits.len() != users * items {
            return Err(Error::DimensionMismatch {
                expected: users * items,
                actual: bits.len(),
            });
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(format!(
                "entry ({}, {}) is {}, expected 0 or 1",
                pos / items,
                pos % items,
                bits[pos]
            )));
        }
        Ok(Self { users, items, bits })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let users = rows.len();
        let items = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != items) {
            return Err(Error::DimensionMismatch {
                expected: items,
                actual: bad.len(),
            });
        }
        Self::new(users, items, rows.concat())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn get(&self, user: usize, item: usize) -> bool {
        self.bits[user * self.items + item] == 1
    }

    pub fn row(&self, user: usize) -> &[u8] {
        &self.bits[user * self.items..(user + 1) * self.items]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.bits.chunks_exact(self.items)
    }

    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0usize; self.items];
        for row in self.rows() {
            for (s, &b) in sums.iter_mut().zip(row) {
                *s += b as usize;
            }
        }
        sums
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.rows().map(|r| r.iter().map(|&b| b as usize).sum()).collect()
    }

    /// Sub-matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut bits = Vec::with_capacity(rows.len() * self.items);
        for &r in rows {
            if r >= self.users {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: self.users,
                });
            }
            bits.extend_from_slice(self.row(r));
        }
        Self::new(rows.len(), self.items, bits)
    }

    /// Sub-matrix made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.items) {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: self.items,
            });
        }
        let bits = self.rows().flat_map(|row| cols.iter().map(move |&c| row[c])).collect();
        Self::new(self.users, cols.len(), bits)
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.users, self.items, |i, j| self.bits[i * self.items + j] as f64)
    }

    /// Fraction of users attracted by at least one item of `list`, i.e. the
    /// expected reward of `list` when users are drawn uniformly.
    pub fn coverage(&self, list: &RecommendationList) -> f64 {
        let covered = self
            .rows()
            .filter(|row| list.items().iter().any(|&e| row[e] == 1))
            .count();
        covered as f64 / self.users as f64
    }
}

/// Ordered list of `K` distinct item indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RecommendationList {
    items: Vec<usize>,
}

impl RecommendationList {
    /// Validates that `items` is non-empty, distinct and within `0..n_items`.
    pub fn new(items: Vec<usize>, n_items: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("recommendation list is empty"));
        }
        let mut seen = vec![false; n_items];
        for &e in &items {
            if e >= n_items {
                return Err(Error::IndexOutOfRange { index: e, len: n_items });
            }
            if std::mem::replace(&mut seen[e], true) {
                return Err(Error::invalid(format!("item {e} appears twice in the list")));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Click position `C_t`: 1-based position of the clicked item, or `None`
/// when nothing was clicked (`C_t = ∞`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClickFeedback(Option<usize>);

impl ClickFeedback {
    pub const NONE: ClickFeedback = ClickFeedback(None);

    /// Click at 1-based position `k`.
    pub fn at(k: usize) -> Self {
        assert!(k >= 1, "click positions are 1-based");
        ClickFeedback(Some(k))
    }

    pub fn position(self) -> Option<usize> {
        self.0
    }

    pub fn is_click(self) -> bool {
        self.0.is_some()
    }

    /// Number of observed positions `min{C_t, K}` in a list of length `k`.
    pub fn observed_len(self, k: usize) -> usize {
        self.0.map_or(k, |c| c.min(k))
    }

    pub(crate) fn check(self, list_len: usize) -> Result<()> {
        match self.0 {
            Some(c) if c > list_len => Err(Error::invalid(format!(
                "click at position {c} but the list has only {list_len} items"
            ))),
            _ => Ok(()),
        }
    }
}

/// Attraction probabilities `w̄`, one per item.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionProbabilities {
    probs: Vec<f64>,
}

impl AttractionProbabilities {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("no attraction probabilities"));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("attraction probability {p} outside [0, 1]")));
        }
        Ok(Self { probs })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Attraction weight of one item: a binary realization or a probability.
pub trait Weight: Copy {
    fn value(self) -> f64;
}

impl Weight for f64 {
    fn value(self) -> f64 {
        self
    }
}

impl Weight for u8 {
    fn value(self) -> f64 {
        self as f64
    }
}

/// `f(A, w) = 1 − Π_k (1 − w(a_k))`.
pub fn reward<W: Weight>(list: &RecommendationList, w: &[W]) -> Result<f64> {
    let mut miss = 1.0;
    for &e in list.items() {
        let we = w.get(e).ok_or(Error::IndexOutOfRange { index: e, len: w.len() })?;
        miss *= 1.0 - we.value();
    }
    Ok(1.0 - miss)
}

/// Position of the first attractive item of `list` under the binary
/// realization `w_row`.
pub fn simulate_click(list: &RecommendationList, w_row: &[u8]) -> Result<ClickFeedback> {
    for (k, &e) in list.items().iter().enumerate() {
        let b = *w_row.get(e).ok_or(Error::IndexOutOfRange {
            index: e,
            len: w_row.len(),
        })?;
        if b == 1 {
            return Ok(ClickFeedback::at(k + 1));
        }
    }
    Ok(ClickFeedback::NONE)
}

/// Observed weights `a_k ↦ 1{C_t = k}` for `k = 1..=min{C_t, K}`, in list
/// order. Items after the click are absent.
pub fn observed_weights(list: &RecommendationList, click: ClickFeedback) -> Result<Vec<(usize, u8)>> {
    click.check(list.len())?;
    let observed = click.observed_len(list.len());
    Ok(list.items()[..observed]
        .iter()
        .enumerate()
        .map(|(k, &e)| (e, u8::from(click.position() == Some(k + 1))))
        .collect())
}

/// Greedy max-coverage list: repeatedly adds the item attracting the most
/// users not attracted by any earlier pick. Ties go to the lowest index.
pub fn greedy_oracle(w: &FeedbackMatrix, k: usize) -> Result<RecommendationList> {
    if k == 0 || k > w.items() {
        return Err(Error::invalid(format!("list length {k} must be in 1..={}", w.items())));
    }
    let mut covered = vec![false; w.users()];
    let mut chosen = vec![false; w.items()];
    let mut list = Vec::with_capacity(k);
    let mut gains = vec![0usize; w.items()];
    for _ in 0..k {
        gains.iter_mut().for_each(|g| *g = 0);
        for (row, _) in w.rows().zip(&covered).filter(|(_, &c)| !c) {
            for (g, &b) in gains.iter_mut().zip(row) {
                *g += b as usize;
            }
        }
        let best = (0..w.items())
            .filter(|&e| !chosen[e])
            .max_by(|&a, &b| gains[a].cmp(&gains[b]).then(b.cmp(&a)))
            .expect("k <= items leaves a candidate");
        chosen[best] = true;
        list.push(best);
        for (i, c) in covered.iter_mut().enumerate() {
            *c |= w.get(i, best);
        }
    }
    RecommendationList::new(list, w.items())
}

/// Column means of `W`.
pub fn attraction_probs(w: &FeedbackMatrix) -> AttractionProbabilities {
    let m = w.users() as f64;
    AttractionProbabilities {
        probs: w.column_sums().into_iter().map(|s| s as f64 / m).collect(),
    }
}

/// Indices of the `k` largest scores in decreasing order; equal scores go
/// to the lower index first.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx
}

/// Result of one interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub click: ClickFeedback,
    /// `f(A*, w_t) − f(A_t, w_t)`; may be negative when `A*` is the greedy
    /// approximation.
    pub regret: f64,
    /// `f(A_t, w_t)`.
    pub reward: f64,
}

/// Ground truth the policies interact with, together with the regret
/// baseline `A*`.
#[derive(Debug, Clone)]
pub enum Environment {
    /// Users drawn uniformly with replacement from the rows of `W`;
    /// `A*` is the greedy coverage list.
    Matrix {
        w: Arc<FeedbackMatrix>,
        optimal: RecommendationList,
    },
    /// Independent Bernoulli attractions; `A*` is the exact top-`K` of `w̄`.
    Bernoulli {
        probs: AttractionProbabilities,
        optimal: RecommendationList,
    },
}

impl Environment {
    pub fn from_matrix(w: Arc<FeedbackMatrix>, k: usize) -> Result<Self> {
        let optimal = greedy_oracle(&w, k)?;
        Ok(Environment::Matrix { w, optimal })
    }

    pub fn bernoulli(probs: AttractionProbabilities, k: usize) -> Result<Self> {
        if k == 0 || k > probs.len() {
            return Err(Error::invalid(format!(
                "list length {k} must be in 1..={}",
                probs.len()
            )));
        }
        let optimal = RecommendationList::new(top_k(probs.as_slice(), k), probs.len())?;
        Ok(Environment::Bernoulli { probs, optimal })
    }

    pub fn items(&self) -> usize {
        match self {
            Environment::Matrix { w, .. } => w.items(),
            Environment::Bernoulli { probs, .. } => probs.len(),
        }
    }

    pub fn optimal(&self) -> &RecommendationList {
        match self {
            Environment::Matrix { optimal, .. } | Environment::Bernoulli { optimal, .. } => optimal,
        }
    }

    /// Expected reward of `list` under the environment's user distribution.
    pub fn expected_reward(&self, list: &RecommendationList) -> Result<f64> {
        match self {
            Environment::Matrix { w, .. } => {
                if let Some(&e) = list.items().iter().find(|&&e| e >= w.items()) {
                    return Err(Error::IndexOutOfRange {
                        index: e,
                        len: w.items(),
                    });
                }
                Ok(w.coverage(list))
            }
            Environment::Bernoulli { probs, .. } => reward(list, probs.as_slice()),
        }
    }

    /// Draws `w_t`, shows `list` to the user and scores it against `A*`.
    pub fn step(&self, list: &RecommendationList, rng: &mut SimRng) -> Result<StepOutcome> {
        match self {
            Environment::Matrix { w, optimal } => {
                let row = w.row(rng.index(w.users()));
                score_step(list, optimal, row)
            }
            Environment::Bernoulli { probs, optimal } => {
                let row: Vec<u8> = probs.as_slice().iter().map(|&p| u8::from(rng.bernoulli(p))).collect();
                score_step(list, optimal, &row)
            }
        }
    }
}

fn score_step(list: &RecommendationList, optimal: &RecommendationList, row: &[u8]) -> Result<StepOutcome> {
    let click = simulate_click(list, row)?;
    let reward_t = reward(list, row)?;
    let best = reward(optimal, row)?;
    Ok(StepOutcome {
        click,
        regret: best - reward_t,
        reward: reward_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn list(items: &[usize], n: usize) -> RecommendationList {
        RecommendationList::new(items.to_vec(), n).unwrap()
    }

    #[test]
    fn reward_cases() {
        let a = list(&[0, 1, 2, 3], 4);
        assert_eq!(reward(&a, &[0.0; 4]).unwrap(), 0.0);
        assert_eq!(reward(&a, &[0.0, 0.3, 1.0, 0.2]).unwrap(), 1.0);
        assert_eq!(reward(&a, &[0.5; 4]).unwrap(), 0.9375);
        assert!(matches!(
            reward(&a, &[0.5; 3]),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn click_is_first_attractive() {
        let a = list(&[0, 1, 2, 3], 4);
        assert_eq!(simulate_click(&a, &[0, 1, 0, 0]).unwrap(), ClickFeedback::at(2));
        assert_eq!(simulate_click(&a, &[0, 0, 0, 0]).unwrap(), ClickFeedback::NONE);
        assert_eq!(simulate_click(&a, &[1, 1, 0, 0]).unwrap(), ClickFeedback::at(1));
        // list order, not item order, decides
        let b = list(&[3, 2, 1, 0], 4);
        assert_eq!(simulate_click(&b, &[1, 1, 0, 0]).unwrap(), ClickFeedback::at(3));
    }

    #[test]
    fn observed_weights_cases() {
        let a = list(&[5, 6, 7, 8], 10);
        assert_eq!(
            observed_weights(&a, ClickFeedback::at(2)).unwrap(),
            vec![(5, 0), (6, 1)]
        );
        assert_eq!(
            observed_weights(&a, ClickFeedback::NONE).unwrap(),
            vec![(5, 0), (6, 0), (7, 0), (8, 0)]
        );
        assert_eq!(observed_weights(&a, ClickFeedback::at(1)).unwrap(), vec![(5, 1)]);
        assert!(observed_weights(&a, ClickFeedback::at(5)).is_err());
    }

    #[test]
    fn greedy_single_pick_is_largest_column() {
        let w = FeedbackMatrix::from_rows(&[vec![0, 1, 1], vec![0, 1, 0], vec![1, 1, 0]]).unwrap();
        assert_eq!(greedy_oracle(&w, 1).unwrap().items(), &[1]);
    }

    #[test]
    fn greedy_covers_everyone() {
        let w = FeedbackMatrix::from_rows(&[vec![1, 0], vec![1, 0], vec![0, 1]]).unwrap();
        let a = greedy_oracle(&w, 2).unwrap();
        assert_eq!(a.items(), &[0, 1]);
        assert_eq!(w.coverage(&a), 1.0);
    }

    #[test]
    fn greedy_tie_break_lowest_index() {
        let w = FeedbackMatrix::from_rows(&[vec![0, 1, 1], vec![0, 1, 1]]).unwrap();
        assert_eq!(greedy_oracle(&w, 2).unwrap().items(), &[1, 0]);
        assert!(greedy_oracle(&w, 4).is_err());
    }

    #[test]
    fn attraction_probability_cases() {
        let w = FeedbackMatrix::from_rows(&[vec![1, 0, 1], vec![1, 0, 0], vec![1, 0, 1], vec![1, 0, 0]]).unwrap();
        assert_eq!(attraction_probs(&w).as_slice(), &[1.0, 0.0, 0.5]);
        let w = FeedbackMatrix::from_rows(&[vec![1, 0], vec![1, 1], vec![0, 0]]).unwrap();
        let p = attraction_probs(&w);
        assert!((p.as_slice()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.as_slice()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_validation() {
        assert!(FeedbackMatrix::new(0, 3, vec![]).is_err());
        assert!(FeedbackMatrix::new(1, 2, vec![0, 2]).is_err());
        assert!(FeedbackMatrix::new(2, 2, vec![0, 1, 1]).is_err());
        assert!(RecommendationList::new(vec![1, 1], 3).is_err());
        assert!(RecommendationList::new(vec![3], 3).is_err());
    }

    #[test]
    fn optimal_list_has_zero_regret() {
        let w =
            Arc::new(FeedbackMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0]]).unwrap());
        let env = Environment::from_matrix(w, 2).unwrap();
        let a = env.optimal().clone();
        let mut rng = SimRng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(env.step(&a, &mut rng).unwrap().regret, 0.0);
        }
    }

    #[test]
    fn missing_the_only_user_costs_one() {
        let w = Arc::new(FeedbackMatrix::from_rows(&[vec![1, 0]]).unwrap());
        let env = Environment::from_matrix(w, 1).unwrap();
        let out = env.step(&list(&[1], 2), &mut SimRng::seed_from_u64(1)).unwrap();
        assert_eq!(out.regret, 1.0);
        assert_eq!(out.click, ClickFeedback::NONE);
    }

    #[test]
    fn steps_are_deterministic() {
        let mut rng = SimRng::seed_from_u64(4);
        let rows: Vec<Vec<u8>> = (0..20)
            .map(|_| (0..6).map(|_| u8::from(rng.bernoulli(0.3))).collect())
            .collect();
        let env = Environment::from_matrix(Arc::new(FeedbackMatrix::from_rows(&rows).unwrap()), 2).unwrap();
        let a = list(&[4, 5], 6);
        let run = |seed| {
            let mut rng = SimRng::seed_from_u64(seed);
            (0..200).map(|_| env.step(&a, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn bernoulli_optimum_is_top_k() {
        let env = Environment::bernoulli(AttractionProbabilities::new(vec![0.3; 5]).unwrap(), 3).unwrap();
        assert_eq!(env.optimal().items(), &[0, 1, 2]);
        let env = Environment::bernoulli(AttractionProbabilities::new(vec![0.9, 0.1, 0.1]).unwrap(), 1).unwrap();
        assert_eq!(env.optimal().items(), &[0]);
        assert!((env.expected_reward(env.optimal()).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn mean_regret_of_fixed_list_matches_row_average() {
        let mut rng = SimRng::seed_from_u64(12);
        let rows: Vec<Vec<u8>> = (0..40)
            .map(|_| (0..8).map(|_| u8::from(rng.bernoulli(0.25))).collect())
            .collect();
        let w = Arc::new(FeedbackMatrix::from_rows(&rows).unwrap());
        let env = Environment::from_matrix(w.clone(), 3).unwrap();
        let a = list(&[5, 6, 7], 8);
        let exact = w.coverage(env.optimal()) - w.coverage(&a);
        let n = 100_000;
        let regrets: Vec<f64> = (0..n).map(|_| env.step(&a, &mut rng).unwrap().regret).collect();
        let mean = regrets.iter().sum::<f64>() / n as f64;
        let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "mean {mean} exact {exact} se {se}");
    }

    #[test]
    fn top_k_orders_and_breaks_ties() {
        assert_eq!(top_k(&[0.1, 0.5, 0.5, 0.9], 3), vec![3, 1, 2]);
        assert_eq!(top_k(&[1.0; 4], 4), vec![0, 1, 2, 3]);
    }

    fn arb_list_and_row() -> impl Strategy<Value = (Vec<usize>, Vec<u8>)> {
        (1usize..=12).prop_flat_map(|l| {
            (
                Just((0..l).collect::<Vec<_>>()).prop_shuffle(),
                1usize..=l,
                proptest::collection::vec(0u8..=1, l),
            )
                .prop_map(|(perm, k, row)| (perm[..k].to_vec(), row))
        })
    }

    proptest! {
        #[test]
        fn observation_reconstructs_row((items, row) in arb_list_and_row()) {
            let a = RecommendationList::new(items.clone(), row.len()).unwrap();
            let c = simulate_click(&a, &row).unwrap();
            let obs = observed_weights(&a, c).unwrap();
            prop_assert_eq!(obs.len(), c.observed_len(a.len()));
            for (k, (e, bit)) in obs.iter().enumerate() {
                prop_assert_eq!(*e, items[k]);
                prop_assert_eq!(*bit, row[*e]);
            }
            let r = reward(&a, &row).unwrap();
            prop_assert_eq!(r, if c.is_click() { 1.0 } else { 0.0 });
        }

        #[test]
        fn reward_is_monotone(
            w in proptest::collection::vec(0.0f64..=1.0, 6),
            bump in 0.0f64..=1.0,
            coord in 0usize..6,
        ) {
            let a = RecommendationList::new(vec![0, 2, 4, 5], 6).unwrap();
            let base = reward(&a, &w).unwrap();
            let mut w2 = w.clone();
            w2[coord] = (w2[coord] + bump).min(1.0);
            let bumped = reward(&a, &w2).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            prop_assert!(bumped >= base - 1e-15);
        }
    }
}
