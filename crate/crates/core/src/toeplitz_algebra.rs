//! Finite-dimensional linear algebra on Toeplitz minors.
//!
//! The covariance operator of a stationary process restricted to any set of
//! time indices is a minor of a symmetric Toeplitz matrix. Prediction from a
//! finite window is a positive definite solve against such a minor, and the
//! same projector can be assembled from the precision side: with `L` the
//! inverse covariance, the block `-L_{A,A^c} (L_{A^c})^{-1}` reproduces
//! `(G_A)^{-1} G_{A,A^c}` through a Schur complement. This module implements
//! both assemblies plus the error operator and the covariance-warped operator
//! norm used by the risk analysis.

use crate::spectral_model::{covariance_to_spectrum, inverse_spectrum, CovarianceSequence};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Symmetric Toeplitz matrix stored by its first row.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzMatrix {
    first_row: Vec<f64>,
}

impl ToeplitzMatrix {
    pub fn new(first_row: Vec<f64>) -> Result<Self> {
        if first_row.is_empty() {
            return Err(Error::Domain("Toeplitz matrix needs at least one entry".into()));
        }
        if first_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("Toeplitz entries must be finite".into()));
        }
        Ok(Self { first_row })
    }

    /// Order-`n` covariance minor of a stationary sequence.
    pub fn from_covariance(cov: &CovarianceSequence, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("Toeplitz dimension must be positive".into()));
        }
        let first_row = (0..n).map(|k| cov.lag(k as i64)).collect::<Result<Vec<_>>>()?;
        Self::new(first_row)
    }

    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.first_row[i.abs_diff(j)])
    }

    pub fn cholesky(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.to_dense().cholesky().ok_or(Error::NotPositiveDefinite)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eig: Vec<f64> = self.to_dense().symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        eig
    }
}

/// Partition of the truncated index range `[-T, T)` around a prediction
/// window of size `K`: the window itself (most recent observed past), the
/// block to predict, and the implicit missing/future remainders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBlocks {
    window: usize,
    horizon: usize,
}

impl IndexBlocks {
    pub fn new(window: usize, horizon: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Domain("window size must be positive".into()));
        }
        if horizon < window {
            return Err(Error::HorizonTooSmall {
                horizon,
                reason: format!("must cover the window of {window}"),
            });
        }
        Ok(Self { window, horizon })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Observed indices `{-K..-1}`, ascending.
    pub fn observed(&self) -> Vec<i64> {
        (-(self.window as i64)..0).collect()
    }

    /// Blind indices `{0..K-1}`, ascending.
    pub fn blind(&self) -> Vec<i64> {
        (0..self.window as i64).collect()
    }

    /// Missing indices `{-T..-K-1}`, ascending.
    pub fn missing(&self) -> Vec<i64> {
        (-(self.horizon as i64)..-(self.window as i64)).collect()
    }

    /// Future indices `{K..T-1}`, ascending.
    pub fn future(&self) -> Vec<i64> {
        (self.window as i64..self.horizon as i64).collect()
    }
}

/// Coefficients of the best linear prediction of the blind block from the
/// observed window: column `j` applies to `(X_{-K}, ..., X_{-1})` and
/// predicts `X_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorCoefficients {
    matrix: DMatrix<f64>,
}

impl PredictorCoefficients {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Domain("predictor coefficient matrix must be square and nonempty".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("predictor coefficients must be finite".into()));
        }
        Ok(Self { matrix })
    }

    pub fn window(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.matrix.column(j).into_owned()
    }

    /// Applies the coefficients to a window ordered `X_{-K}, ..., X_{-1}`.
    pub fn apply(&self, window: &[f64]) -> Result<Vec<f64>> {
        let k = self.window();
        if window.len() != k {
            return Err(Error::WindowTooLarge { window: k, len: window.len() });
        }
        let x = DVector::from_column_slice(window);
        Ok((self.matrix.transpose() * x).iter().copied().collect())
    }
}

/// Covariance minor with rows and columns drawn from arbitrary index sets:
/// entry `(i, j) = r(|rows[i] - cols[j]|)`.
pub fn build_minor(cov: &CovarianceSequence, rows: &[i64], cols: &[i64]) -> Result<DMatrix<f64>> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Domain("index sets must be nonempty".into()));
    }
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            m[(a, b)] = cov.lag(i - j)?;
        }
    }
    Ok(m)
}

/// Solves `T x = rhs` for a positive definite Toeplitz matrix by Cholesky
/// factorization with one step of iterative refinement.
pub fn spd_solve(gamma: &ToeplitzMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rhs.nrows() != gamma.dim() {
        return Err(Error::Domain(format!(
            "rhs has {} rows, matrix has dimension {}",
            rhs.nrows(),
            gamma.dim()
        )));
    }
    spd_solve_dense(&gamma.to_dense(), rhs)
}

/// Dense symmetric positive definite solve, same refinement scheme as
/// `spd_solve`. The extra residual correction keeps relative residuals near
/// machine precision even for moderately conditioned minors.
pub fn spd_solve_dense(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mut x = chol.solve(rhs);
    let residual = rhs - a * &x;
    x += chol.solve(&residual);
    Ok(x)
}

/// Dense symmetric positive definite inverse.
fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.inverse())
}

/// Inverse of the covariance minor on `A`, assembled from the precision side:
/// on the truncated range `[-T, T)` with `L` the inverse of the full minor
/// and `M` the complement of `A`, returns `L_A - L_{AM} (L_M)^{-1} L_{MA}`.
/// The Schur identity makes this equal to `(G_A)^{-1}` up to rounding.
pub fn schur_complement_inverse(cov: &CovarianceSequence, a: &[i64], horizon: usize) -> Result<DMatrix<f64>> {
    let t = horizon as i64;
    if a.is_empty() {
        return Err(Error::Domain("index set A must be nonempty".into()));
    }
    if a.iter().any(|&i| i < -t || i >= t) {
        return Err(Error::HorizonTooSmall {
            horizon,
            reason: "A extends outside the truncated index range".into(),
        });
    }
    let range: Vec<i64> = (-t..t).collect();
    let gamma = build_minor(cov, &range, &range)?;
    let lambda = spd_inverse(&gamma)?;

    // Positions of A and of its complement M inside the range.
    let a_pos: Vec<usize> = a.iter().map(|&i| (i + t) as usize).collect();
    let in_a: Vec<bool> = {
        let mut mask = vec![false; range.len()];
        for &p in &a_pos {
            mask[p] = true;
        }
        mask
    };
    let m_pos: Vec<usize> = (0..range.len()).filter(|&p| !in_a[p]).collect();

    let lambda_a = lambda.select_rows(a_pos.iter()).select_columns(a_pos.iter());
    if m_pos.is_empty() {
        return Ok(lambda_a);
    }
    let lambda_am = lambda.select_rows(a_pos.iter()).select_columns(m_pos.iter());
    let lambda_m = lambda.select_rows(m_pos.iter()).select_columns(m_pos.iter());
    let solved = spd_solve_dense(&lambda_m, &lambda_am.transpose())?;
    let mut s = lambda_a - lambda_am * solved;
    // The result is symmetric in exact arithmetic.
    s = (&s + s.transpose()) * 0.5;
    Ok(s)
}

/// Best-prediction coefficients of the blind block from the observed window
/// for a known covariance: `(G_{O_K})^{-1} G_{O_K, B_K}`.
pub fn oracle_predictor(cov: &CovarianceSequence, window: usize) -> Result<PredictorCoefficients> {
    let blocks = IndexBlocks::new(window, window)?;
    let observed = blocks.observed();
    let blind = blocks.blind();
    let gamma_o = ToeplitzMatrix::from_covariance(cov, window)?;
    let cross = build_minor(cov, &observed, &blind)?;
    let matrix = spd_solve(&gamma_o, &cross)?;
    PredictorCoefficients::from_matrix(matrix)
}

/// Quadratic prediction-error operator restricted to `B`:
/// `G_B - G_{BA} (G_A)^{-1} G_{AB}`, the covariance of the residual when
/// `(X_j)_{j in B}` is predicted from `(X_i)_{i in A}`.
pub fn prediction_error_operator(cov: &CovarianceSequence, a: &[i64], b: &[i64]) -> Result<DMatrix<f64>> {
    if a.iter().any(|i| b.contains(i)) {
        return Err(Error::Domain("index sets A and B must be disjoint".into()));
    }
    let gamma_b = build_minor(cov, b, b)?;
    let gamma_a = build_minor(cov, a, a)?;
    let gamma_ab = build_minor(cov, a, b)?;
    let solved = spd_solve_dense(&gamma_a, &gamma_ab)?;
    let q = gamma_b - gamma_ab.transpose() * solved;
    Ok((&q + q.transpose()) * 0.5)
}

/// Coefficients predicting `(X_j)_{j in B}` from the truncated past
/// `{-T..-1}`, via the covariance route `(G_past)^{-1} G_{past, B}`.
/// Row `i` of the result applies to `X_{-T+i}`.
pub fn projector_infinite_past(cov: &CovarianceSequence, b: &[i64], horizon: usize) -> Result<DMatrix<f64>> {
    check_blind_block(b, horizon)?;
    let past: Vec<i64> = (-(horizon as i64)..0).collect();
    let gamma_past = ToeplitzMatrix::from_covariance(cov, horizon)?;
    let cross = build_minor(cov, &past, b)?;
    spd_solve(&gamma_past, &cross)
}

/// Same prediction coefficients assembled from the precision side: with `L`
/// the Toeplitz operator of the reciprocal spectrum truncated to `[-T, T)`,
/// returns the `B` columns of `-L_{past, front} (L_front)^{-1}` where `front`
/// is `[0, T)`. Agrees with `projector_infinite_past` up to a horizon error
/// that vanishes as `T` grows.
pub fn projector_via_precision(cov: &CovarianceSequence, b: &[i64], horizon: usize) -> Result<DMatrix<f64>> {
    check_blind_block(b, horizon)?;
    let t = horizon;
    let f = covariance_to_spectrum(cov, 1.0)?;
    let precision = inverse_spectrum(&f, 2 * t)?;
    let p = |lag: i64| precision.coefficients()[lag.unsigned_abs() as usize];

    // front = [0, T), past = [-T, 0); entry (i, j) = p(|index_i - index_j|).
    let l_front = DMatrix::from_fn(t, t, |i, j| p(i as i64 - j as i64));
    let l_past_front = DMatrix::from_fn(t, t, |i, j| {
        let past_idx = -(t as i64) + i as i64;
        p(j as i64 - past_idx)
    });
    let mut selector = DMatrix::zeros(t, b.len());
    for (col, &j) in b.iter().enumerate() {
        selector[(j as usize, col)] = 1.0;
    }
    let solved = spd_solve_dense(&l_front, &selector)?;
    Ok(-(l_past_front * solved))
}

fn check_blind_block(b: &[i64], horizon: usize) -> Result<()> {
    if b.is_empty() {
        return Err(Error::Domain("blind block must be nonempty".into()));
    }
    if b.iter().any(|&j| j < 0 || j >= horizon as i64) {
        return Err(Error::HorizonTooSmall {
            horizon,
            reason: "blind block extends outside [0, T)".into(),
        });
    }
    Ok(())
}

/// Operator norm of `D` in the geometry warped by the covariance: the largest
/// generalized singular value `sup { sqrt(v' G_O v) : u' G_B u = 1, v = D u }`,
/// computed from the symmetric eigenproblem of
/// `G_B^{-1/2} D' G_O D G_B^{-1/2}`. The observed and blind minors of a
/// stationary covariance coincide, so a single Toeplitz minor serves as both.
pub fn warped_operator_norm(d: &DMatrix<f64>, cov: &CovarianceSequence) -> Result<f64> {
    if d.nrows() != d.ncols() || d.nrows() == 0 {
        return Err(Error::Domain("predictor difference must be square and nonempty".into()));
    }
    let k = d.nrows();
    let gamma = ToeplitzMatrix::from_covariance(cov, k)?.to_dense();
    let eig = gamma.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let half = |pow: f64| -> DMatrix<f64> {
        let mut diag = DMatrix::zeros(k, k);
        for i in 0..k {
            diag[(i, i)] = eig.eigenvalues[i].powf(pow);
        }
        &eig.eigenvectors * diag * eig.eigenvectors.transpose()
    };
    let root_inv = half(-0.5);
    let w = &root_inv * d.transpose() * &gamma * d * &root_inv;
    let w = (&w + w.transpose()) * 0.5;
    let top = w
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l));
    Ok(top.max(0.0).sqrt())
}

/// Row-major CSV rendering of a matrix for debugging, `# n=<rows>` header
/// first, 17 significant digits per entry.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = format!("# n={}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
