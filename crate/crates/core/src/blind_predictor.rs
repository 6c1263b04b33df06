//! The fitted blind predictor and the theory it is measured against.
//!
//! Fitting solves the regularized normal equations
//! `Gamma_tilde coeff = Gamma_hat_OB` built purely from one observed path,
//! giving linear weights for the next `K` values in terms of the last `K`.
//! Alongside live the window rule `K(N)` and the explicit constants of the
//! risk bound, used as reference curves in reports.

use crate::covariance_estimation::{
    regularized_covariance_matrix, EmpiricalCovariance, ObservedPath, RegularizedCovariance,
};
use crate::toeplitz_algebra::{spd_solve, PredictorCoefficients};
use crate::{Error, Result};
use nalgebra::DMatrix;

/// A predictor fitted from data alone: no model parameters enter, only the
/// path, the window, and the configured spectral floor.
#[derive(Debug, Clone)]
pub struct BlindPredictor {
    coefficients: PredictorCoefficients,
    window: usize,
    path_len: usize,
    alpha_hat: f64,
    empirical: EmpiricalCovariance,
}

impl BlindPredictor {
    /// Estimates lags `0..2K`, regularizes, and solves
    /// `Gamma_tilde coeff = Gamma_hat_OB` column by column.
    ///
    /// A degenerate all-zero path falls through cleanly: every lag is zero,
    /// the shift becomes `floor/4`, and the predictor is identically zero.
    pub fn fit(path: &ObservedPath, window: usize, spectral_floor: f64) -> Result<Self> {
        let empirical = EmpiricalCovariance::estimate(path, window)?;
        let reg = RegularizedCovariance::regularize(empirical.clone(), spectral_floor)?;
        let gamma_tilde = regularized_covariance_matrix(&reg, window)?;
        let cross = cross_covariance(&empirical);
        let coeff = spd_solve(&gamma_tilde, &cross)?;

        // Normal-equation residual must be at machine level relative to the
        // matrix scale; anything else means the solve silently degraded.
        let scale = gamma_tilde.first_row().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        let residual = (gamma_tilde.to_dense() * &coeff - &cross).abs().max();
        if residual > 1e-10 * scale {
            return Err(Error::Verification(format!(
                "normal-equation residual {residual:.3e} exceeds 1e-10 at scale {scale:.3e}"
            )));
        }

        Ok(Self {
            coefficients: PredictorCoefficients::from_matrix(coeff)?,
            window,
            path_len: path.len(),
            alpha_hat: reg.shift(),
            empirical,
        })
    }

    pub fn coefficients(&self) -> &PredictorCoefficients {
        &self.coefficients
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn path_len(&self) -> usize {
        self.path_len
    }

    /// The diagonal shift that was applied to the empirical covariance.
    pub fn alpha_hat(&self) -> f64 {
        self.alpha_hat
    }

    /// The lag estimates `rhat(0..2K)` the fit was built from.
    pub fn empirical(&self) -> &EmpiricalCovariance {
        &self.empirical
    }

    /// Predictions for `X_0, ..., X_{K-1}` from the last `K` samples of
    /// `path`, ordered `X_{-K}, ..., X_{-1}`.
    pub fn predict(&self, path: &ObservedPath) -> Result<Vec<f64>> {
        self.coefficients.apply(path.last_window(self.window)?)
    }
}

/// Cross block `Gamma_hat_OB`: entry `(i, j)` is `rhat(K + j - i)` for row
/// `i` marking position `-K + i` and column `j` marking position `j`, so the
/// lags involved run over `1..2K-1`.
fn cross_covariance(est: &EmpiricalCovariance) -> DMatrix<f64> {
    let k = est.window();
    DMatrix::from_fn(k, k, |i, j| est.lags()[k + j - i])
}

/// Window rule `K(N) = max(1, floor((N / ln N)^{1 / (2(2s+3))}))`.
///
/// Along this rule the window grows without bound while `K log K / N`
/// vanishes, which is what the risk analysis assumes.
pub fn choose_window(n: usize, s: f64) -> Result<usize> {
    if n <= 2 {
        return Err(Error::Domain(format!("window rule needs N >= 3, got {n}")));
    }
    if !(s >= 1.0) {
        return Err(Error::Domain(format!("smoothness must be at least 1, got {s}")));
    }
    let n = n as f64;
    let exponent = 1.0 / (2.0 * (2.0 * s + 3.0));
    Ok(((n / n.ln()).powf(exponent).floor() as usize).max(1))
}

/// The explicit constants of the risk bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    /// Concentration constant `4 m' (6 m'/m^2 + 4/m + 2)`.
    pub c0: f64,
    /// Variance-term constant `C0 r4^{1/4} / sqrt(m)`.
    pub c1: f64,
    /// Bias-term constant `|1/f|_{W_{2s}} m' (1 + m'/m)`.
    pub c2: f64,
    /// Alternative bias constant base `(m'^2/m)(1 + m'/m)`.
    pub c4: f64,
    /// Gaussian fourth moment `3 r(0)^2`.
    pub r4: f64,
}

/// Evaluates the constants for a spectral band `[m, m']`, marginal variance
/// `r0`, and the numeric Sobolev norm of the inverse spectral density.
pub fn theory_constants(m: f64, m_prime: f64, r0: f64, f_inv_sobolev: f64) -> Result<TheoryConstants> {
    if !(m > 0.0) || m_prime < m {
        return Err(Error::Domain(format!("need 0 < m <= m', got m = {m}, m' = {m_prime}")));
    }
    if !(r0 > 0.0) {
        return Err(Error::Domain(format!("variance must be positive, got {r0}")));
    }
    let c0 = 4.0 * m_prime * (6.0 * m_prime / (m * m) + 4.0 / m + 2.0);
    let r4 = 3.0 * r0 * r0;
    Ok(TheoryConstants {
        c0,
        c1: c0 * r4.powf(0.25) / m.sqrt(),
        c2: f_inv_sobolev * m_prime * (1.0 + m_prime / m),
        c4: (m_prime * m_prime / m) * (1.0 + m_prime / m),
        r4,
    })
}

/// The proof of the bias lemma produces `C4 sqrt(|1/f|_{W_s})` where the
/// statement says `C2`; both candidates are reported, neither is asserted.
pub fn bias_constant_alternative(consts: &TheoryConstants, f_inv_sobolev_s: f64) -> f64 {
    consts.c4 * f_inv_sobolev_s.max(0.0).sqrt()
}

/// Upper bound `C1 K^2 sqrt(log K) / sqrt(N) + C2 / K^{(2s-1)/2}` on the
/// root of the global risk; a reference curve, not an assertion.
pub fn risk_bound(n: usize, k: usize, consts: &TheoryConstants, s: f64) -> f64 {
    let kf = k as f64;
    let variance = consts.c1 * kf * kf * kf.ln().max(0.0).sqrt() / (n as f64).sqrt();
    let bias = consts.c2 / kf.powf((2.0 * s - 1.0) / 2.0);
    variance + bias
}
