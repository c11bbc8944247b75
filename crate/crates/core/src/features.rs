//! Item features from a truncated SVD of a training split of `W`.
//!
//! The rows of `W` are split at random into a training half, used only to
//! learn features, and a test half that becomes the simulated environment.
//! With `W_train ≈ U Σ Vᵀ`, item `e` gets `x_e(i) = V[e, i] Σ[i, i]`; all
//! vectors are then divided by a common factor so every norm is at most 1.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::environment::FeedbackMatrix;
use crate::error::{Error, Result};
use crate::numerics::truncated_svd;
use crate::rng::SimRng;

/// `L` feature vectors of dimension `d`, stored as the rows of an `L × d`
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemFeatures {
    matrix: DMatrix<f64>,
    scale: f64,
    degenerate: bool,
}

impl ItemFeatures {
    /// Wraps an `L × d` matrix whose rows already have norm at most 1.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_scale(matrix, 1.0)
    }

    fn with_scale(matrix: DMatrix<f64>, scale: f64) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid("features need at least one item and one dimension"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if let Some(e) = (0..matrix.nrows()).find(|&e| matrix.row(e).norm() > 1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "feature vector of item {e} has norm {} > 1",
                matrix.row(e).norm()
            )));
        }
        let degenerate = matrix.iter().all(|&v| v == 0.0);
        Ok(Self {
            matrix,
            scale,
            degenerate,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn items(&self) -> usize {
        self.matrix.nrows()
    }

    /// Factor every raw vector was divided by (`≥ 1`).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// True when every feature is zero (e.g. an all-zero training matrix).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn vector(&self, item: usize) -> Result<DVector<f64>> {
        if item >= self.items() {
            return Err(Error::IndexOutOfRange {
                index: item,
                len: self.items(),
            });
        }
        Ok(self.matrix.row(item).transpose())
    }

    /// `x_eᵀ θ` for every item.
    pub fn scores(&self, theta: &DVector<f64>) -> Vec<f64> {
        (&self.matrix * theta).data.into()
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.items()).map(|e| self.matrix.row(e).norm()).fold(0.0, f64::max)
    }

    /// CSV with header `item,f1,...,fd` and one row per item. `labels`
    /// supplies the item column; indices are used when absent.
    pub fn to_csv(&self, labels: Option<&[String]>) -> Result<String> {
        if let Some(l) = labels {
            if l.len() != self.items() {
                return Err(Error::DimensionMismatch {
                    expected: self.items(),
                    actual: l.len(),
                });
            }
        }
        let mut out = String::from("item");
        for i in 1..=self.dim() {
            write!(out, ",f{i}").unwrap();
        }
        out.push('\n');
        for e in 0..self.items() {
            match labels {
                Some(l) => out.push_str(&l[e]),
                None => write!(out, "{e}").unwrap(),
            }
            for i in 0..self.dim() {
                write!(out, ",{:.15e}", self.matrix[(e, i)] + 0.0).unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path, labels: Option<&[String]>) -> Result<()> {
        std::fs::write(path, self.to_csv(labels)?).map_err(|e| Error::io(path, e))
    }
}

/// Random half/half row split of a feedback matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSplit {
    pub train: FeedbackMatrix,
    pub test: FeedbackMatrix,
    pub split_seed: u64,
    /// Original row index of every train row.
    pub train_rows: Vec<usize>,
    /// Original row index of every test row.
    pub test_rows: Vec<usize>,
}

/// Shuffles the rows with `split_seed`; the first `⌊m/2⌋` go to training
/// and the rest to test.
pub fn split_rows(w: &FeedbackMatrix, split_seed: u64) -> Result<FeatureSplit> {
    if w.users() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 users to split, got {}",
            w.users()
        )));
    }
    let mut rng = SimRng::seed_from_u64(split_seed);
    let mut order: Vec<usize> = (0..w.users()).collect();
    rng.shuffle(&mut order);
    let (train_rows, test_rows) = order.split_at(w.users() / 2);
    Ok(FeatureSplit {
        train: w.select_rows(train_rows)?,
        test: w.select_rows(test_rows)?,
        split_seed,
        train_rows: train_rows.to_vec(),
        test_rows: test_rows.to_vec(),
    })
}

pub fn build_features(split: &FeatureSplit, d: usize) -> Result<ItemFeatures> {
    features_from_matrix(&split.train, d)
}

/// Rows of `V Σ` from the rank-`d` SVD of `train`, divided by
/// `max(1, max_e ‖x_e‖)`.
pub fn features_from_matrix(train: &FeedbackMatrix, d: usize) -> Result<ItemFeatures> {
    let max_d = train.users().min(train.items());
    if d == 0 || d > max_d {
        return Err(Error::invalid(format!(
            "feature dimension {d} must be in 1..={max_d} for a {}x{} training matrix",
            train.users(),
            train.items()
        )));
    }
    let svd = truncated_svd(&train.to_dmatrix(), d)?;
    let mut raw = svd.v.clone();
    for (i, s) in svd.s.iter().enumerate() {
        raw.column_mut(i).scale_mut(*s);
    }
    let max_norm = (0..raw.nrows()).map(|e| raw.row(e).norm()).fold(0.0, f64::max);
    let scale = max_norm.max(1.0);
    raw.unscale_mut(scale);
    let features = ItemFeatures::with_scale(raw, scale)?;
    if features.is_degenerate() {
        log::warn!("training matrix is all zeros; every item feature is zero");
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(m: usize, l: usize, p: f64, seed: u64) -> FeedbackMatrix {
        let mut rng = SimRng::seed_from_u64(seed);
        let bits = (0..m * l).map(|_| u8::from(rng.bernoulli(p))).collect();
        FeedbackMatrix::new(m, l, bits).unwrap()
    }

    #[test]
    fn split_cardinalities() {
        let w = random_matrix(4, 3, 0.5, 1);
        let s = split_rows(&w, 7).unwrap();
        assert_eq!((s.train.users(), s.test.users()), (2, 2));
        let w = random_matrix(5, 3, 0.5, 1);
        let s = split_rows(&w, 7).unwrap();
        assert_eq!((s.train.users(), s.test.users()), (2, 3));
        let mut all: Vec<usize> = s.train_rows.iter().chain(&s.test_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        for (k, &r) in s.train_rows.iter().enumerate() {
            assert_eq!(s.train.row(k), w.row(r));
        }
    }

    #[test]
    fn split_is_seeded() {
        let w = random_matrix(30, 4, 0.5, 2);
        assert_eq!(split_rows(&w, 3).unwrap(), split_rows(&w, 3).unwrap());
        assert!(split_rows(&random_matrix(1, 4, 0.5, 2), 3).is_err());
    }

    #[test]
    fn all_ones_features_scale_to_unit() {
        let train = FeedbackMatrix::new(4, 3, vec![1; 12]).unwrap();
        let f = features_from_matrix(&train, 1).unwrap();
        // raw x_e = (1/√3)·√12 = 2
        assert!((f.scale() - 2.0).abs() < 1e-9);
        for e in 0..3 {
            assert!((f.matrix()[(e, 0)] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_reconstruction() {
        let train = random_matrix(8, 5, 0.4, 3);
        let svd = truncated_svd(&train.to_dmatrix(), 5).unwrap();
        assert!(svd.residual(&train.to_dmatrix()) < 1e-8);
    }

    #[test]
    fn duplicate_columns_share_features() {
        let base = random_matrix(10, 4, 0.5, 4);
        let w = base.select_columns(&[0, 1, 2, 3, 1]).unwrap();
        let f = features_from_matrix(&w, 3).unwrap();
        for i in 0..3 {
            assert!((f.matrix()[(1, i)] - f.matrix()[(4, i)]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_train_gives_degenerate_features() {
        let train = FeedbackMatrix::new(3, 4, vec![0; 12]).unwrap();
        let f = features_from_matrix(&train, 2).unwrap();
        assert!(f.is_degenerate());
        assert_eq!(f.scale(), 1.0);
    }

    #[test]
    fn rank_too_large() {
        let train = random_matrix(3, 5, 0.5, 5);
        assert!(features_from_matrix(&train, 4).is_err());
    }

    #[test]
    fn norms_bounded_and_deterministic() {
        let train = random_matrix(40, 25, 0.3, 6);
        let a = features_from_matrix(&train, 6).unwrap();
        let b = features_from_matrix(&train, 6).unwrap();
        assert_eq!(a, b);
        assert!(a.max_norm() <= 1.0 + 1e-12);
        assert!(a.scale() >= 1.0);
    }

    #[test]
    fn csv_layout() {
        let f = ItemFeatures::new(DMatrix::from_row_slice(2, 2, &[0.5, -0.25, 0.0, 1.0])).unwrap();
        let csv = f.to_csv(None).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "item,f1,f2");
        assert_eq!(lines[1], "0,5.000000000000000e-1,-2.500000000000000e-1");
        assert_eq!(lines.len(), 3);
        let labelled = f.to_csv(Some(&["a".into(), "b".into()])).unwrap();
        assert!(labelled.lines().nth(2).unwrap().starts_with("b,"));
    }
}
