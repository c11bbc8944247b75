//! Small dense linear-algebra kernel.
//!
//! Three pieces are used by the rest of the crate:
//!
//! - [`PdMatrixInverse`]: the inverse of a regularized gram matrix, kept up
//!   to date by rank-one (Sherman-Morrison) updates. The gram matrix itself
//!   is never stored.
//! - [`sample_mvn`]: multivariate normal draws through a hand-rolled
//!   Cholesky factorization.
//! - [`truncated_svd`]: orthogonal (subspace) power iteration followed by a
//!   Rayleigh-Ritz step whose small core is diagonalized by one-sided
//!   Jacobi rotations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Oversampling added to the target rank in [`truncated_svd`].
pub const SVD_OVERSAMPLE: usize = 4;
/// Iteration cap for the subspace iteration in [`truncated_svd`].
pub const SVD_MAX_ITERS: usize = 50;
/// Convergence tolerance on singular values, relative to the largest one.
pub const SVD_TOL: f64 = 1e-9;
/// Seed of the starting block in [`truncated_svd`]; fixed so factors are a
/// function of the input alone.
const SVD_SEED: u64 = 0x05EE_D55D;

/// Inverse `M⁻¹` of a symmetric positive-definite matrix `M`, starting from
/// `M₀ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdMatrixInverse {
    inv: DMatrix<f64>,
}

impl PdMatrixInverse {
    /// `I_d`, the inverse of `M₀ = I_d`.
    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            inv: DMatrix::identity(dim, dim),
        }
    }

    /// Wraps an existing inverse. The matrix must be square, symmetric and
    /// positive definite.
    pub fn from_matrix(inv: DMatrix<f64>) -> Result<Self> {
        if !inv.is_square() || inv.nrows() == 0 {
            return Err(Error::invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                inv.nrows(),
                inv.ncols()
            )));
        }
        if inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        let n = inv.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (inv[(i, j)] - inv[(j, i)]).abs() > 1e-10 {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        cholesky(&inv)?;
        Ok(Self { inv })
    }

    pub fn dim(&self) -> usize {
        self.inv.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inv
    }

    /// Replaces `M⁻¹` by `(M + σ⁻² x xᵀ)⁻¹` in O(d²):
    ///
    /// `M⁻¹ ← M⁻¹ − (M⁻¹x)(M⁻¹x)ᵀ / (xᵀM⁻¹x + σ²)`
    ///
    /// The result is resymmetrized as `(A + Aᵀ)/2`.
    pub fn rank_one_update(&mut self, x: &DVector<f64>, sigma: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("update vector"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        let mx = &self.inv * x;
        let denom = x.dot(&mx) + sigma * sigma;
        self.inv.ger(-1.0 / denom, &mx, &mx, 1.0);
        symmetrize(&mut self.inv);
        Ok(())
    }

    /// Functional form of [`rank_one_update`](Self::rank_one_update).
    pub fn updated(&self, x: &DVector<f64>, sigma: f64) -> Result<Self> {
        let mut next = self.clone();
        next.rank_one_update(x, sigma)?;
        Ok(next)
    }

    /// `xᵀ M⁻¹ x`.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.inv * x))
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
///
/// Only the lower triangle of `a` is read. Fails with the index of the
/// first non-positive pivot.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "Cholesky needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot.is_finite() && pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(l)
}

/// Draws `mean + L z` where `L` is the Cholesky factor of `cov` and `z` is
/// a vector of independent standard normals taken from `rng` in order.
pub fn sample_mvn(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut SimRng) -> Result<DVector<f64>> {
    if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            actual: cov.nrows(),
        });
    }
    let l = cholesky(cov)?;
    let z = DVector::from_fn(mean.len(), |_, _| rng.standard_normal());
    Ok(mean + l * z)
}

/// Rank-`d` truncated SVD `A ≈ U diag(S) Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `rows × d`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// `d` singular values, non-increasing.
    pub s: DVector<f64>,
    /// `cols × d`, orthonormal columns; the largest-magnitude entry of each
    /// column is non-negative.
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }

    /// `‖A − U S Vᵀ‖_F`.
    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        (a - self.reconstruct()).norm()
    }
}

/// Best rank-`d` approximation of `a` by orthogonal power iteration.
///
/// A block of `min(d + 4, min(rows, cols))` vectors is iterated against
/// `AᵀA` until the leading `d` Ritz values move by less than `1e-9` relative
/// to the largest one, or 50 iterations have run. An all-zero matrix yields
/// zero singular values with arbitrary orthonormal `U`, `V`.
pub fn truncated_svd(a: &DMatrix<f64>, d: usize) -> Result<SvdFactors> {
    let (rows, cols) = a.shape();
    let max_rank = rows.min(cols);
    if d == 0 || d > max_rank {
        return Err(Error::invalid(format!(
            "rank {d} must be in 1..={max_rank} for a {rows}x{cols} matrix"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVD input"));
    }

    let block = (d + SVD_OVERSAMPLE).min(max_rank);
    let mut rng = SimRng::seed_from_u64(SVD_SEED);
    let mut q = DMatrix::from_fn(cols, block, |_, _| rng.standard_normal());
    orthonormalize(&mut q, &mut rng);

    let mut prev: Option<DVector<f64>> = None;
    let mut best;
    let mut iter = 0;
    loop {
        let y = a * &q;
        let mut qy = y.clone();
        orthonormalize(&mut qy, &mut rng);
        let core = qy.tr_mul(&y);
        let (core_u, s, core_v) = jacobi_svd(core);
        best = (&qy * core_u, s, &q * core_v);

        let scale = best.1[0].max(f64::MIN_POSITIVE);
        let converged = prev
            .as_ref()
            .is_some_and(|p| (0..d).all(|i| (p[i] - best.1[i]).abs() <= SVD_TOL * scale))
            || block == cols;
        iter += 1;
        if converged || iter >= SVD_MAX_ITERS {
            break;
        }
        prev = Some(best.1.clone());

        q = a.tr_mul(&qy);
        orthonormalize(&mut q, &mut rng);
    }

    let (mut u, s, v) = best;
    // Left vectors of (numerically) zero singular values get an
    // orthonormal completion.
    let cutoff = s[0] * 1e-13;
    if let Some(first_null) = (0..s.len()).find(|&i| s[i] <= cutoff) {
        complete_orthonormal(&mut u, first_null, &mut rng);
    }

    let mut u = u.columns(0, d).into_owned();
    let s = s.rows(0, d).into_owned();
    let mut v = v.columns(0, d).into_owned();
    fix_signs(&mut u, &mut v);
    Ok(SvdFactors { u, s, v })
}

/// Flips column pairs so the largest-magnitude entry of each `V` column is
/// non-negative. The first such entry wins on ties.
fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for j in 0..v.ncols() {
        let mut best = 0usize;
        for i in 1..v.nrows() {
            if v[(i, j)].abs() > v[(best, j)].abs() {
                best = i;
            }
        }
        if v[(best, j)] < 0.0 {
            v.column_mut(j).neg_mut();
            u.column_mut(j).neg_mut();
        }
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns that
/// collapse (rank deficiency) are replaced by fresh random directions.
fn orthonormalize(m: &mut DMatrix<f64>, rng: &mut SimRng) {
    let cols = m.ncols();
    for j in 0..cols {
        let mut attempts = 0;
        loop {
            let before = m.column(j).norm();
            for _ in 0..2 {
                for i in 0..j {
                    let proj = m.column(i).dot(&m.column(j));
                    let qi = m.column(i).into_owned();
                    m.column_mut(j).axpy(-proj, &qi, 1.0);
                }
            }
            let after = m.column(j).norm();
            if after > 1e-10 * before && after > 0.0 {
                m.column_mut(j).unscale_mut(after);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "could not complete an orthonormal basis");
            for r in 0..m.nrows() {
                m[(r, j)] = rng.standard_normal();
            }
        }
    }
}

/// Orthonormalizes columns `from..` of `m` against the first `from` columns,
/// which are already orthonormal.
fn complete_orthonormal(m: &mut DMatrix<f64>, from: usize, rng: &mut SimRng) {
    for j in from..m.ncols() {
        for r in 0..m.nrows() {
            m[(r, j)] = rng.standard_normal();
        }
    }
    orthonormalize(m, rng);
}

/// One-sided Jacobi SVD of a tall or square matrix `b` (`n × p`, `n ≥ p`).
///
/// Returns `(U, S, W)` with `b = U diag(S) Wᵀ`, `S` sorted non-increasing.
/// Columns of `U` for zero singular values are left as zeros.
fn jacobi_svd(mut b: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (n, p) = b.shape();
    let mut w = DMatrix::<f64>::identity(p, p);
    const EPS: f64 = 1e-15;
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let alpha = b.column(i).norm_squared();
                let beta = b.column(j).norm_squared();
                let gamma = b.column(i).dot(&b.column(j));
                if gamma == 0.0 || gamma.abs() <= EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut b, i, j, c, s);
                rotate(&mut w, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..p).map(|j| b.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let mut u = DMatrix::<f64>::zeros(n, p);
    let mut s = DVector::<f64>::zeros(p);
    let mut w_sorted = DMatrix::<f64>::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        if norms[src] > 0.0 {
            u.set_column(dst, &(b.column(src) / norms[src]));
        }
        w_sorted.set_column(dst, &w.column(src));
    }
    (u, s, w_sorted)
}

fn rotate(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let mi = m[(r, i)];
        let mj = m[(r, j)];
        m[(r, i)] = c * mi - s * mj;
        m[(r, j)] = s * mi + c * mj;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_unit(d: usize, rng: &mut SimRng) -> DVector<f64> {
        let v = DVector::from_fn(d, |_, _| rng.standard_normal());
        let n = v.norm();
        v / n
    }

    /// Independent route: accumulate the gram matrix and invert densely.
    fn direct_inverse(xs: &[DVector<f64>], d: usize, sigma: f64) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::identity(d, d);
        for x in xs {
            m += x * x.transpose() / (sigma * sigma);
        }
        m.try_inverse().expect("gram matrix is invertible")
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn update_of_identity_along_axis() {
        let mut inv = PdMatrixInverse::identity(2);
        inv.rank_one_update(&DVector::from_vec(vec![1.0, 0.0]), 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        assert!(max_abs_diff(inv.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn zero_vector_update_is_identity() {
        let mut inv = PdMatrixInverse::identity(3);
        inv.rank_one_update(&DVector::zeros(3), 1.0).unwrap();
        assert_eq!(inv, PdMatrixInverse::identity(3));
    }

    #[test]
    fn thousand_unit_updates_match_dense_inverse() {
        let d = 8;
        let mut rng = SimRng::seed_from_u64(11);
        let mut inv = PdMatrixInverse::identity(d);
        let mut xs = Vec::new();
        for _ in 0..1000 {
            let x = random_unit(d, &mut rng);
            inv.rank_one_update(&x, 1.0).unwrap();
            xs.push(x);
        }
        let oracle = direct_inverse(&xs, d, 1.0);
        assert!(max_abs_diff(inv.matrix(), &oracle) < 1e-8);
    }

    #[test]
    fn update_rejects_bad_input() {
        let mut inv = PdMatrixInverse::identity(2);
        assert!(matches!(
            inv.rank_one_update(&DVector::zeros(3), 1.0),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
        assert!(matches!(
            inv.rank_one_update(&DVector::from_vec(vec![f64::NAN, 0.0]), 1.0),
            Err(Error::NonFinite(_))
        ));
        assert!(inv.rank_one_update(&DVector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn cholesky_reports_pivot() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky(&m) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
        let err = sample_mvn(&DVector::zeros(2), &m, &mut SimRng::seed_from_u64(0)).unwrap_err();
        assert!(err.to_string().contains("pivot 1"));
    }

    #[test]
    fn mvn_scalar_moments() {
        let mut rng = SimRng::seed_from_u64(2024);
        let mean = DVector::from_vec(vec![5.0]);
        let cov = DMatrix::from_element(1, 1, 1.0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_mvn(&mean, &cov, &mut rng).unwrap()[0]).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - 5.0).abs() < 0.02, "mean {m}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn mvn_same_seed_same_draw() {
        let mean = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let a = sample_mvn(&mean, &cov, &mut SimRng::seed_from_u64(9)).unwrap();
        let b = sample_mvn(&mean, &cov, &mut SimRng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mvn_identity_off_diagonal_covariance() {
        let mut rng = SimRng::seed_from_u64(5);
        let mean = DVector::zeros(3);
        let cov = DMatrix::identity(3, 3);
        let n = 100_000;
        let mut sums = DMatrix::<f64>::zeros(3, 3);
        let mut total = DVector::<f64>::zeros(3);
        for _ in 0..n {
            let x = sample_mvn(&mean, &cov, &mut rng).unwrap();
            sums += &x * x.transpose();
            total += x;
        }
        let mu = total / n as f64;
        let cov_hat = sums / n as f64 - &mu * mu.transpose();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(cov_hat[(i, j)].abs() < 0.02, "cov[{i},{j}] = {}", cov_hat[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn mvn_mahalanobis_chi_square_mean() {
        let mut rng = SimRng::seed_from_u64(77);
        let d = 4;
        let mean = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
        let a = DMatrix::from_fn(d, d, |i, j| ((i * 3 + j * 7) % 5) as f64 * 0.3 - 0.5);
        let cov = &a * a.transpose() + DMatrix::identity(d, d);
        let prec = cov.clone().try_inverse().unwrap();
        let n = 100_000;
        let dist: Vec<f64> = (0..n)
            .map(|_| {
                let x = sample_mvn(&mean, &cov, &mut rng).unwrap() - &mean;
                x.dot(&(&prec * &x))
            })
            .collect();
        let m = dist.iter().sum::<f64>() / n as f64;
        // chi-square(d) has variance 2d
        let se = (2.0 * d as f64 / n as f64).sqrt();
        assert!((m - d as f64).abs() < 3.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn svd_all_ones_rank_one() {
        let a = DMatrix::from_element(4, 3, 1.0);
        let f = truncated_svd(&a, 1).unwrap();
        assert!((f.s[0] - 12f64.sqrt()).abs() < 1e-9);
        for e in 0..3 {
            assert!((f.v[(e, 0)] - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn svd_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let f = truncated_svd(&a, 2).unwrap();
        assert!((f.s[0] - 3.0).abs() < 1e-12);
        assert!((f.s[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn svd_full_rank_reconstructs() {
        let mut rng = SimRng::seed_from_u64(3);
        let a = DMatrix::from_fn(7, 5, |_, _| rng.standard_normal());
        let f = truncated_svd(&a, 5).unwrap();
        assert!(f.residual(&a) < 1e-8);
    }

    #[test]
    fn svd_low_rank_exact() {
        let mut rng = SimRng::seed_from_u64(4);
        let left = DMatrix::from_fn(30, 3, |_, _| rng.standard_normal());
        let right = DMatrix::from_fn(3, 12, |_, _| rng.standard_normal());
        let a = left * right;
        let f = truncated_svd(&a, 3).unwrap();
        assert!(f.residual(&a) < 1e-8);
        // asking for more than the rank still gives orthonormal factors
        let f = truncated_svd(&a, 6).unwrap();
        assert!((f.u.tr_mul(&f.u) - DMatrix::identity(6, 6)).norm() < 1e-8);
        assert!(f.s[3] < 1e-8);
    }

    #[test]
    fn svd_zero_matrix() {
        let a = DMatrix::<f64>::zeros(5, 4);
        let f = truncated_svd(&a, 2).unwrap();
        assert!(f.s.iter().all(|&s| s == 0.0));
        assert!((f.u.tr_mul(&f.u) - DMatrix::identity(2, 2)).norm() < 1e-10);
        assert!((f.v.tr_mul(&f.v) - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn svd_rejects_rank_too_large() {
        let a = DMatrix::<f64>::zeros(3, 2);
        assert!(truncated_svd(&a, 3).is_err());
        assert!(truncated_svd(&a, 0).is_err());
    }

    #[test]
    fn svd_sign_convention() {
        let mut rng = SimRng::seed_from_u64(8);
        let a = DMatrix::from_fn(10, 6, |_, _| rng.standard_normal());
        let f = truncated_svd(&a, 4).unwrap();
        for j in 0..4 {
            let col = f.v.column(j);
            let big = col
                .iter()
                .cloned()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big >= 0.0);
        }
    }

    #[test]
    fn jacobi_core_matches_reference() {
        let mut rng = SimRng::seed_from_u64(21);
        let b = DMatrix::from_fn(9, 6, |_, _| rng.standard_normal());
        let (u, s, w) = jacobi_svd(b.clone());
        let rebuilt = &u * DMatrix::from_diagonal(&s) * w.transpose();
        assert!((rebuilt - &b).norm() < 1e-12);
        let reference = b.svd(false, false).singular_values;
        let mut r: Vec<f64> = reference.iter().cloned().collect();
        r.sort_by(|x, y| y.total_cmp(x));
        for i in 0..6 {
            assert!((s[i] - r[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn incremental_inverse_tracks_direct(
            seed in any::<u64>(),
            d in 1usize..=32,
            n in 1usize..400,
            sigma_idx in 0usize..3,
        ) {
            let sigma = [0.5, 1.0, 2.0][sigma_idx];
            let mut rng = SimRng::seed_from_u64(seed);
            let mut inv = PdMatrixInverse::identity(d);
            let mut xs = Vec::with_capacity(n);
            for _ in 0..n {
                let x = random_unit(d, &mut rng);
                inv.rank_one_update(&x, sigma).unwrap();
                xs.push(x);
            }
            let oracle = direct_inverse(&xs, d, sigma);
            prop_assert!(max_abs_diff(inv.matrix(), &oracle) < 1e-8);
            prop_assert!(cholesky(inv.matrix()).is_ok());
        }

        #[test]
        fn singular_values_match_reference_20x20(seed in any::<u64>(), d in 1usize..=20) {
            let mut rng = SimRng::seed_from_u64(seed);
            let a = DMatrix::from_fn(20, 20, |_, _| rng.standard_normal());
            let f = truncated_svd(&a, d).unwrap();
            let mut reference: Vec<f64> = a.clone().svd(false, false).singular_values.iter().cloned().collect();
            reference.sort_by(|x, y| y.total_cmp(x));
            for i in 0..d {
                let rel = (f.s[i] - reference[i]).abs() / reference[i];
                prop_assert!(rel < 1e-7, "sv {} rel err {}", i, rel);
            }
            prop_assert!((f.v.tr_mul(&f.v) - DMatrix::identity(d, d)).norm() < 1e-8);
            prop_assert!((f.u.tr_mul(&f.u) - DMatrix::identity(d, d)).norm() < 1e-8);
        }
    }
}
