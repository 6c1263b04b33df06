//! Covariance sequences and their spectral side.
//!
//! A summable covariance sequence `r_0, r_1, ...` determines the spectral
//! density `f(t) = r_0 + 2 sum_k r_k cos(kt)` on `[0, 2*pi)`. Everything
//! downstream relies on `f` staying inside a band `[lower, upper]` with
//! `lower > 0`, so the constructors here locate the extrema numerically and
//! refuse inputs whose spectrum touches zero.

use crate::{Error, Result, DEFAULT_GRID};
use std::f64::consts::TAU;

/// Relative truncation threshold for rational models stored as finite
/// covariance sequences.
const MODEL_TRUNCATION: f64 = 1e-14;

/// Safety margin subtracted from (added to) the located spectral minimum
/// (maximum) so the stored band certainly contains the true extrema.
const EXTREMUM_MARGIN: f64 = 1e-9;

/// Autocovariances `r_0..r_support` of a stationary process, symmetric in the
/// lag, together with a bound on the squared tail mass beyond the support.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSequence {
    values: Vec<f64>,
    tail_bound: f64,
}

impl CovarianceSequence {
    /// Builds a sequence from `r_0..r_P` and a bound on `sum_{|k|>P} r_k^2`.
    ///
    /// Requires `r_0 > 0`, `|r_k| <= r_0`, and finite entries; positive
    /// definiteness of minors is checked on demand, not here.
    pub fn new(values: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("covariance sequence must contain r_0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariance values must be finite".into()));
        }
        if values[0] <= 0.0 {
            return Err(Error::Domain(format!("r_0 must be positive, got {}", values[0])));
        }
        if values.iter().any(|v| v.abs() > values[0] * (1.0 + 1e-12)) {
            return Err(Error::Domain("|r_k| must not exceed r_0".into()));
        }
        if !(tail_bound >= 0.0) || !tail_bound.is_finite() {
            return Err(Error::Domain("tail bound must be finite and nonnegative".into()));
        }
        Ok(Self { values, tail_bound })
    }

    /// White noise with variance `sigma2`.
    pub fn white(sigma2: f64) -> Result<Self> {
        Self::new(vec![sigma2], 0.0)
    }

    /// First-order moving average `X_t = e_t + theta e_{t-1}` with innovation
    /// variance `sigma2`; requires `|theta| < 1` so the spectrum stays
    /// positive.
    pub fn ma1(theta: f64, sigma2: f64) -> Result<Self> {
        if theta.abs() >= 1.0 {
            return Err(Error::Domain(format!("ma1 requires |theta| < 1, got {theta}")));
        }
        Self::new(vec![sigma2 * (1.0 + theta * theta), sigma2 * theta], 0.0)
    }

    /// First-order autoregression `X_t = phi X_{t-1} + e_t` with innovation
    /// variance `sigma2`. The geometric covariances are cut off where
    /// `|phi|^k` drops below 1e-14 and the model is the resulting finitely
    /// supported sequence itself, so lags beyond the cutoff are exactly zero.
    pub fn ar1(phi: f64, sigma2: f64) -> Result<Self> {
        if phi.abs() >= 1.0 {
            return Err(Error::Domain(format!("ar1 requires |phi| < 1, got {phi}")));
        }
        if phi == 0.0 {
            return Self::white(sigma2);
        }
        let r0 = sigma2 / (1.0 - phi * phi);
        let support = (MODEL_TRUNCATION.ln() / phi.abs().ln()).ceil() as usize;
        let values: Vec<f64> = (0..=support).map(|k| r0 * phi.powi(k as i32)).collect();
        Self::new(values, 0.0)
    }

    /// Largest stored lag.
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    pub fn variance(&self) -> f64 {
        self.values[0]
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Covariance at a signed lag. Lags beyond the support are exactly zero
    /// when the tail bound is zero and unavailable otherwise.
    pub fn lag(&self, p: i64) -> Result<f64> {
        let a = p.unsigned_abs() as usize;
        if a < self.values.len() {
            Ok(self.values[a])
        } else if self.tail_bound == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::LagOutOfRange { lag: p, support: self.max_lag() })
        }
    }

    /// Checks positive semidefiniteness of the order-`n` Toeplitz minor by
    /// attempting a Cholesky factorization.
    pub fn validate_psd(&self, n: usize) -> Result<()> {
        let gamma = crate::toeplitz_algebra::ToeplitzMatrix::from_covariance(self, n)?;
        gamma.cholesky().map(|_| ())
    }
}

/// Even real trigonometric polynomial `a_0 + 2 sum_{k>=1} a_k cos(kt)`,
/// stored by its cosine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    coeffs: Vec<f64>,
}

impl TrigPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("trigonometric polynomial needs a constant term".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let mut acc = self.coeffs[0];
        for (k, a) in self.coeffs.iter().enumerate().skip(1) {
            acc += 2.0 * a * (k as f64 * t).cos();
        }
        acc
    }

    /// Minimum over `[0, 2*pi)`: coarse scan on `grid` points, then golden
    /// section refinement inside the best few brackets. The grid must
    /// oversample the degree so no basin is missed.
    pub fn minimum(&self, grid: usize) -> f64 {
        refine_extremum(|t| self.evaluate(t), self.degree(), grid, false)
    }

    /// Maximum over `[0, 2*pi)`, same scheme as `minimum`.
    pub fn maximum(&self, grid: usize) -> f64 {
        -refine_extremum(|t| -self.evaluate(t), self.degree(), grid, false)
    }

    /// Plain grid maximum of the absolute difference with another polynomial,
    /// without refinement.
    pub fn grid_sup_abs_diff(&self, other: &TrigPolynomial, grid: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for j in 0..grid {
            let t = TAU * j as f64 / grid as f64;
            sup = sup.max((self.evaluate(t) - other.evaluate(t)).abs());
        }
        sup
    }
}

/// Locates `min f` over the period by grid scan plus golden-section
/// refinement of the best local minima. `degree` guards against an
/// undersampled grid.
fn refine_extremum<F: Fn(f64) -> f64>(f: F, degree: usize, grid: usize, _max: bool) -> f64 {
    let grid = grid.max(16).max(8 * degree.max(1));
    let h = TAU / grid as f64;
    let vals: Vec<f64> = (0..grid).map(|j| f(j as f64 * h)).collect();
    // Local minima on the periodic grid, best four retained for refinement.
    let mut minima: Vec<(f64, usize)> = (0..grid)
        .filter(|&j| {
            let prev = vals[(j + grid - 1) % grid];
            let next = vals[(j + 1) % grid];
            vals[j] <= prev && vals[j] <= next
        })
        .map(|j| (vals[j], j))
        .collect();
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    minima.truncate(4);

    let mut best = minima.first().map_or(vals[0], |&(v, _)| v);
    for &(_, j) in &minima {
        let a = (j as f64 - 1.0) * h;
        let b = (j as f64 + 1.0) * h;
        best = best.min(golden_section_min(&f, a, b));
    }
    best
}

/// Golden-section search for the minimum of a unimodal function on `[a, b]`.
fn golden_section_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(0.5 * (a + b)))
}

/// A spectral density: an even trigonometric polynomial together with the
/// certified band `[lower, upper]` containing it and a smoothness index used
/// by the theory-side window rules.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    poly: TrigPolynomial,
    lower: f64,
    upper: f64,
    sobolev_index: f64,
}

impl SpectralDensity {
    /// Certifies the band numerically from the located extrema with a 1e-9
    /// safety margin; fails with `NonPositiveSpectrum` if the margin-adjusted
    /// lower bound is not positive.
    pub fn from_polynomial(poly: TrigPolynomial, grid: usize, sobolev_index: f64) -> Result<Self> {
        let min = poly.minimum(grid);
        let max = poly.maximum(grid);
        let lower = min - EXTREMUM_MARGIN;
        let upper = max + EXTREMUM_MARGIN;
        if lower <= 0.0 {
            return Err(Error::NonPositiveSpectrum { min });
        }
        Ok(Self { poly, lower, upper, sobolev_index })
    }

    /// Assembles a density from already-known bounds (used when the band is
    /// implied analytically, e.g. for a reciprocal).
    pub fn from_parts(poly: TrigPolynomial, lower: f64, upper: f64, sobolev_index: f64) -> Result<Self> {
        if !(lower > 0.0 && upper >= lower) {
            return Err(Error::Domain(format!("invalid spectral band [{lower}, {upper}]")));
        }
        Ok(Self { poly, lower, upper, sobolev_index })
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.poly.evaluate(t)
    }

    pub fn polynomial(&self) -> &TrigPolynomial {
        &self.poly
    }

    pub fn coefficients(&self) -> &[f64] {
        self.poly.coefficients()
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    pub fn sobolev_index(&self) -> f64 {
        self.sobolev_index
    }

    /// Weighted coefficient mass `sum_{k != 0} |k|^{2 order} a_k^2`, both
    /// signs of the frequency counted.
    pub fn sobolev_norm(&self, order: f64) -> f64 {
        sobolev_norm_of(self.coefficients(), order)
    }
}

/// `sum_{k != 0} |k|^{2 order} a_k^2` for cosine coefficients `a_0..a_P`.
pub fn sobolev_norm_of(coeffs: &[f64], order: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| 2.0 * (k as f64).powf(2.0 * order) * a * a)
        .sum()
}

/// Spectral density of a covariance sequence, with the band certified on the
/// default grid.
pub fn covariance_to_spectrum(cov: &CovarianceSequence, sobolev_index: f64) -> Result<SpectralDensity> {
    covariance_to_spectrum_with_grid(cov, DEFAULT_GRID, sobolev_index)
}

pub fn covariance_to_spectrum_with_grid(
    cov: &CovarianceSequence,
    grid: usize,
    sobolev_index: f64,
) -> Result<SpectralDensity> {
    let poly = TrigPolynomial::new(cov.values().to_vec())?;
    SpectralDensity::from_polynomial(poly, grid, sobolev_index)
}

/// Covariances `r_0..r_max_lag` of a spectral density, recovered by periodic
/// quadrature on an oversampled grid. For a finitely supported density this
/// reproduces the stored coefficients to near machine precision; coefficients
/// dropped by the truncation feed the tail bound.
pub fn spectrum_to_covariance(f: &SpectralDensity, max_lag: usize) -> Result<CovarianceSequence> {
    let coeffs = fourier_cosine_coefficients(
        |t| f.evaluate(t),
        max_lag,
        quadrature_grid(f.degree(), max_lag),
    );
    let tail: f64 = f
        .coefficients()
        .iter()
        .enumerate()
        .skip(max_lag + 1)
        .map(|(_, a)| 2.0 * a * a)
        .sum();
    CovarianceSequence::new(coeffs, tail)
}

/// Cosine coefficients `b_0..b_num_coeffs` of the reciprocal `1/f`, computed
/// by quadrature. The band of the reciprocal is the reciprocal band, so no
/// fresh extremum search is needed; the smoothness index carries over.
pub fn inverse_spectrum(f: &SpectralDensity, num_coeffs: usize) -> Result<SpectralDensity> {
    let coeffs = fourier_cosine_coefficients(
        |t| 1.0 / f.evaluate(t),
        num_coeffs,
        quadrature_grid(f.degree(), num_coeffs),
    );
    let poly = TrigPolynomial::new(coeffs)?;
    SpectralDensity::from_parts(poly, 1.0 / f.upper_bound(), 1.0 / f.lower_bound(), f.sobolev_index())
}

fn quadrature_grid(degree: usize, num_coeffs: usize) -> usize {
    DEFAULT_GRID.max(8 * num_coeffs.max(1)).max(8 * degree.max(1))
}

/// Rectangle-rule cosine coefficients of a periodic function; spectrally
/// accurate because the integrand is smooth and periodic.
fn fourier_cosine_coefficients<F: Fn(f64) -> f64>(f: F, max_lag: usize, grid: usize) -> Vec<f64> {
    let h = TAU / grid as f64;
    let vals: Vec<f64> = (0..grid).map(|j| f(j as f64 * h)).collect();
    (0..=max_lag)
        .map(|k| {
            let mut acc = 0.0;
            for (j, v) in vals.iter().enumerate() {
                acc += v * (k as f64 * j as f64 * h).cos();
            }
            acc / grid as f64
        })
        .collect()
}
