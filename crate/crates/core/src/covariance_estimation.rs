//! Empirical covariance, empirical spectral density, and regularization.
//!
//! From one observed path the unbiased lag averages give `rhat(p)`, the
//! truncated cosine series gives an empirical spectral density, and a
//! diagonal shift pushes the resulting Toeplitz matrix away from
//! singularity: the shifted symbol never drops below a quarter of the
//! configured spectral floor, so the inverse stays uniformly bounded no
//! matter how rough the path was.

use crate::spectral_model::{CovarianceSequence, TrigPolynomial};
use crate::toeplitz_algebra::ToeplitzMatrix;
use crate::{Error, Result, DEFAULT_GRID};
use std::io::BufRead;
use std::path::Path;

/// Observed samples `X_{-N}, ..., X_{-1}` in time order (oldest first).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPath {
    samples: Vec<f64>,
}

impl ObservedPath {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain("a path needs at least two samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("path samples must be finite".into()));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// The `k` most recent samples, ordered `X_{-k}, ..., X_{-1}`.
    pub fn last_window(&self, k: usize) -> Result<&[f64]> {
        if k == 0 || k > self.len() {
            return Err(Error::WindowTooLarge { window: k, len: self.len() });
        }
        Ok(&self.samples[self.len() - k..])
    }

    /// Reads a single-column CSV: one sample per line, oldest first; `#`
    /// comment lines and blank lines are skipped.
    pub fn from_csv_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut samples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let value: f64 = trimmed
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: not a number: {trimmed:?}", idx + 1)))?;
            samples.push(value);
        }
        Self::new(samples)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }
}

/// Unbiased lag average `rhat(p) = (1/(N-p)) sum X_k X_{k+p}` over the
/// `N - p` available products.
pub fn empirical_autocovariance(path: &ObservedPath, p: usize) -> Result<f64> {
    let n = path.len();
    if p >= n {
        return Err(Error::LagTooLarge { lag: p, len: n });
    }
    let x = path.samples();
    let mut acc = 0.0;
    for i in 0..n - p {
        acc += x[i] * x[i + p];
    }
    Ok(acc / (n - p) as f64)
}

/// Lag averages `rhat(0..2K)` of one path, the raw material for both the
/// fitted predictor (lags to `2K-1`) and the deviation diagnostic (to `2K`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCovariance {
    r_hat: Vec<f64>,
    window: usize,
    path_len: usize,
}

impl EmpiricalCovariance {
    /// Estimates lags `0..2K` from the path; requires `2K < N`.
    pub fn estimate(path: &ObservedPath, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Domain("window must be positive".into()));
        }
        if 2 * window >= path.len() {
            return Err(Error::WindowTooLarge { window, len: path.len() });
        }
        let r_hat = (0..=2 * window)
            .map(|p| empirical_autocovariance(path, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { r_hat, window, path_len: path.len() })
    }

    /// Wraps externally supplied lag values `rhat(0..2K)`; mainly for tests
    /// and worked examples.
    pub fn from_lags(r_hat: Vec<f64>, window: usize, path_len: usize) -> Result<Self> {
        if window == 0 || r_hat.len() != 2 * window + 1 {
            return Err(Error::Domain(format!(
                "need exactly 2K+1 = {} lag values, got {}",
                2 * window + 1,
                r_hat.len()
            )));
        }
        if 2 * window >= path_len {
            return Err(Error::WindowTooLarge { window, len: path_len });
        }
        if r_hat.iter().any(|v| !v.is_finite()) || r_hat[0] < 0.0 {
            return Err(Error::Domain("invalid lag values".into()));
        }
        Ok(Self { r_hat, window, path_len })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn path_len(&self) -> usize {
        self.path_len
    }

    /// `rhat(p)` for `p <= 2K`.
    pub fn lag(&self, p: usize) -> Result<f64> {
        self.r_hat
            .get(p)
            .copied()
            .ok_or(Error::LagTooLarge { lag: p, len: self.r_hat.len() })
    }

    pub fn lags(&self) -> &[f64] {
        &self.r_hat
    }
}

/// Truncated empirical spectral density `sum_{|p| <= K} rhat(|p|) e^{ipt}` as
/// a trigonometric polynomial; it may well be negative somewhere, which is
/// exactly what the regularization shift repairs.
pub fn empirical_spectral_density(est: &EmpiricalCovariance) -> TrigPolynomial {
    let coeffs: Vec<f64> = est.r_hat[..=est.window].to_vec();
    TrigPolynomial::new(coeffs).expect("lag values are finite by construction")
}

/// Diagonal shift `-min(fhat) 1{min <= 0} + (floor/4) 1{min <= floor/4}`:
/// zero when the empirical spectrum clears a quarter of the floor, otherwise
/// exactly enough to restore that clearance.
pub fn regularization_shift(fhat_min: f64, spectral_floor: f64) -> f64 {
    let quarter = spectral_floor / 4.0;
    let mut shift = 0.0;
    if fhat_min <= 0.0 {
        shift += -fhat_min;
    }
    if fhat_min <= quarter {
        shift += quarter;
    }
    shift
}

/// Empirical covariance plus the shift that keeps the regularized symbol at
/// or above a quarter of the configured spectral floor.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedCovariance {
    base: EmpiricalCovariance,
    shift: f64,
    spectral_floor: f64,
    fhat_min: f64,
}

impl RegularizedCovariance {
    /// Locates `min fhat_K` by grid scan with local refinement and derives
    /// the shift.
    pub fn regularize(base: EmpiricalCovariance, spectral_floor: f64) -> Result<Self> {
        Self::regularize_with_grid(base, spectral_floor, DEFAULT_GRID)
    }

    pub fn regularize_with_grid(
        base: EmpiricalCovariance,
        spectral_floor: f64,
        grid: usize,
    ) -> Result<Self> {
        if !(spectral_floor > 0.0) || !spectral_floor.is_finite() {
            return Err(Error::Domain(format!("spectral floor must be positive, got {spectral_floor}")));
        }
        let fhat_min = empirical_spectral_density(&base).minimum(grid);
        let shift = regularization_shift(fhat_min, spectral_floor);
        Ok(Self { base, shift, spectral_floor, fhat_min })
    }

    pub fn base(&self) -> &EmpiricalCovariance {
        &self.base
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn spectral_floor(&self) -> f64 {
        self.spectral_floor
    }

    pub fn empirical_minimum(&self) -> f64 {
        self.fhat_min
    }
}

/// `K x K` Toeplitz matrix of the shifted symbol: first row
/// `(rhat(0) + shift, rhat(1), ..., rhat(K-1))`. Its eigenvalues sit above
/// the shifted symbol's minimum, hence above `floor/4` up to rounding.
pub fn regularized_covariance_matrix(reg: &RegularizedCovariance, k: usize) -> Result<ToeplitzMatrix> {
    if k == 0 || k > reg.base.r_hat.len() {
        return Err(Error::Domain(format!(
            "matrix order {k} outside available lags 0..{}",
            reg.base.r_hat.len() - 1
        )));
    }
    let mut first_row = reg.base.r_hat[..k].to_vec();
    first_row[0] += reg.shift;
    ToeplitzMatrix::new(first_row)
}

/// Largest absolute deviation `max_{p <= 2K} |rhat(p) - r(p)|`, the
/// concentration diagnostic.
pub fn sup_deviation(est: &EmpiricalCovariance, truth: &CovarianceSequence) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for p in 0..=2 * est.window {
        let r = truth.lag(p as i64)?;
        sup = sup.max((est.r_hat[p] - r).abs());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_simulator::{replication_seed, simulate_path, SimMethod, SimulationSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn path(samples: &[f64]) -> ObservedPath {
        ObservedPath::new(samples.to_vec()).unwrap()
    }

    #[test]
    fn autocovariance_hand_cases() {
        let constant = path(&[1.0, 1.0, 1.0, 1.0]);
        assert_relative_eq!(empirical_autocovariance(&constant, 0).unwrap(), 1.0);
        assert_relative_eq!(empirical_autocovariance(&constant, 1).unwrap(), 1.0);

        let alternating = path(&[1.0, -1.0, 1.0, -1.0]);
        assert_relative_eq!(empirical_autocovariance(&alternating, 1).unwrap(), -1.0);

        assert!(matches!(
            empirical_autocovariance(&constant, 4),
            Err(Error::LagTooLarge { .. })
        ));
    }

    #[test]
    fn autocovariance_mean_near_truth_on_simulated_paths() {
        // 20-seed average of rhat(1) against the closed-form 2/3.
        let cov = CovarianceSequence::ar1(0.5, 1.0).unwrap();
        let mut mean = 0.0;
        let seeds = 20;
        for i in 0..seeds {
            let spec = SimulationSpec::new(cov.clone(), 100_000, replication_seed(31, i), SimMethod::Auto).unwrap();
            let p = simulate_path(&spec).unwrap();
            mean += empirical_autocovariance(&p, 1).unwrap();
        }
        mean /= seeds as f64;
        assert!((mean - 2.0 / 3.0).abs() <= 0.02, "mean rhat(1) = {mean}");
    }

    #[test]
    fn spectral_density_direct_evaluations() {
        let est = EmpiricalCovariance::from_lags(vec![1.0, 0.0, 0.0], 1, 10).unwrap();
        let f = empirical_spectral_density(&est);
        assert_relative_eq!(f.evaluate(1.234), 1.0);

        let est = EmpiricalCovariance::from_lags(vec![1.0, 0.5, 0.0], 1, 10).unwrap();
        let f = empirical_spectral_density(&est);
        assert_relative_eq!(f.evaluate(0.7), 1.0 + 0.7f64.cos(), max_relative = 1e-14);
        assert!(f.minimum(DEFAULT_GRID).abs() <= 1e-12, "minimum at pi should be 0");

        let est = EmpiricalCovariance::from_lags(vec![1.0, -0.8, 0.0], 1, 10).unwrap();
        let f = empirical_spectral_density(&est);
        assert_relative_eq!(f.minimum(DEFAULT_GRID), -0.6, epsilon = 1e-12);
        assert_relative_eq!(f.evaluate(PI), 1.0 + 1.6, max_relative = 1e-14);
    }

    #[test]
    fn shift_piecewise_formula() {
        assert_relative_eq!(regularization_shift(-0.5, 1.0), 0.75);
        assert_relative_eq!(regularization_shift(1.0, 1.0), 0.0);
        assert_relative_eq!(regularization_shift(0.1, 1.0), 0.25);
    }

    #[test]
    fn regularized_matrix_identity_case() {
        let est = EmpiricalCovariance::from_lags(vec![1.0, 0.0, 0.0], 1, 10).unwrap();
        let reg = RegularizedCovariance::regularize(est, 1.0).unwrap();
        assert_eq!(reg.shift(), 0.0);
        let gamma = regularized_covariance_matrix(&reg, 2).unwrap();
        assert_eq!(gamma.first_row(), &[1.0, 0.0]);
    }

    #[test]
    fn regularized_matrix_hand_case() {
        // min fhat = 1 - 1.6 = -0.6 at floor 1: shift = 0.6 + 0.25.
        let est = EmpiricalCovariance::from_lags(vec![1.0, -0.8, 0.0], 1, 10).unwrap();
        let reg = RegularizedCovariance::regularize(est, 1.0).unwrap();
        assert_relative_eq!(reg.shift(), 0.85, epsilon = 1e-12);
        let gamma = regularized_covariance_matrix(&reg, 2).unwrap();
        assert_relative_eq!(gamma.first_row()[0], 1.85, epsilon = 1e-12);
        let eig = gamma.eigenvalues();
        assert_relative_eq!(eig[0], 1.05, epsilon = 1e-10);
        assert_relative_eq!(eig[1], 2.65, epsilon = 1e-10);
        assert!(eig[0] >= 0.25);
    }

    #[test]
    fn regularized_matrix_floor_on_random_paths() {
        // The eigenvalue floor holds on every replication, including short
        // noisy paths where the shift actually fires.
        let cov = CovarianceSequence::ma1(0.5, 1.0).unwrap();
        let floor = 0.25;
        let mut fired = 0;
        for i in 0..50 {
            let spec = SimulationSpec::new(cov.clone(), 64, replication_seed(77, i), SimMethod::Auto).unwrap();
            let p = simulate_path(&spec).unwrap();
            let est = EmpiricalCovariance::estimate(&p, 8).unwrap();
            let reg = RegularizedCovariance::regularize(est, floor).unwrap();
            if reg.shift() > 0.0 {
                fired += 1;
            }
            let gamma = regularized_covariance_matrix(&reg, 8).unwrap();
            let min_eig = gamma.eigenvalues()[0];
            assert!(min_eig >= floor / 4.0 - 1e-9, "replication {i}: min eigenvalue {min_eig}");
        }
        assert!(fired > 0, "test never exercised the shift branch");
    }

    #[test]
    fn sup_deviation_hand_cases() {
        let truth = CovarianceSequence::new(vec![1.0, 0.5, 0.5], 0.0).unwrap();
        let est = EmpiricalCovariance::from_lags(vec![1.0, 0.5, 0.5], 1, 10).unwrap();
        assert_eq!(sup_deviation(&est, &truth).unwrap(), 0.0);

        let est = EmpiricalCovariance::from_lags(vec![1.1, 0.4, 0.5], 1, 10).unwrap();
        assert_relative_eq!(sup_deviation(&est, &truth).unwrap(), 0.1, epsilon = 1e-14);
    }

    #[test]
    fn sup_deviation_needs_truth_coverage() {
        let truth = CovarianceSequence::new(vec![1.0, 0.5], 0.3).unwrap();
        let est = EmpiricalCovariance::from_lags(vec![1.0, 0.5, 0.1, 0.0, 0.0], 2, 12).unwrap();
        assert!(matches!(sup_deviation(&est, &truth), Err(Error::LagOutOfRange { .. })));
    }

    #[test]
    fn sup_deviation_median_scales_like_root_log_over_n() {
        // Order-of-magnitude band 4 sqrt(log K / N) r_0 for white noise.
        let cov = CovarianceSequence::white(1.0).unwrap();
        let n = 10_000;
        let k = 10;
        let mut devs: Vec<f64> = (0..100)
            .map(|i| {
                let spec =
                    SimulationSpec::new(cov.clone(), n, replication_seed(5, i), SimMethod::Auto).unwrap();
                let p = simulate_path(&spec).unwrap();
                let est = EmpiricalCovariance::estimate(&p, k).unwrap();
                sup_deviation(&est, &cov).unwrap()
            })
            .collect();
        devs.sort_by(f64::total_cmp);
        let median = devs[devs.len() / 2];
        let band = 4.0 * ((k as f64).ln() / n as f64).sqrt();
        assert!(median <= band, "median {median} above scaling band {band}");
        assert!(median >= band / 100.0, "median {median} implausibly small");
    }

    #[test]
    fn spectral_bound_by_deviation_sum_on_replications() {
        // Grid max of |fhat - f| never exceeds (2K+1) times the lag
        // deviation for a finitely supported truth.
        let cov = CovarianceSequence::ma1(0.5, 1.0).unwrap();
        let truth_poly = TrigPolynomial::new(vec![1.25, 0.5, 0.0, 0.0, 0.0]).unwrap();
        let k = 4;
        for i in 0..50 {
            let spec = SimulationSpec::new(cov.clone(), 512, replication_seed(13, i), SimMethod::Auto).unwrap();
            let p = simulate_path(&spec).unwrap();
            let est = EmpiricalCovariance::estimate(&p, k).unwrap();
            let fhat = empirical_spectral_density(&est);
            let sup = sup_deviation(&est, &cov).unwrap();
            let grid_gap = fhat.grid_sup_abs_diff(&truth_poly, DEFAULT_GRID);
            assert!(
                grid_gap <= (2 * k + 1) as f64 * sup + 1e-12,
                "replication {i}: gap {grid_gap} vs bound {}",
                (2 * k + 1) as f64 * sup
            );
        }
    }

    #[test]
    fn autocovariance_unbiased_at_three_sigma() {
        // Mean of rhat(1) over 2000 white-noise paths against truth 0.
        let cov = CovarianceSequence::white(1.0).unwrap();
        let reps = 2000;
        let n = 64;
        let vals: Vec<f64> = (0..reps)
            .map(|i| {
                let spec =
                    SimulationSpec::new(cov.clone(), n, replication_seed(99, i), SimMethod::Auto).unwrap();
                let p = simulate_path(&spec).unwrap();
                empirical_autocovariance(&p, 1).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean} outside 3 sigma ({se})");
    }

    #[test]
    fn csv_round_trip_skips_comments() {
        let text = "# generated path\n0.5\n-1.25\n\n3.0\n";
        let p = ObservedPath::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(p.samples(), &[0.5, -1.25, 3.0]);
        assert!(ObservedPath::from_csv_reader("1.0\nnot-a-number\n".as_bytes()).is_err());
    }

    #[test]
    fn estimate_rejects_oversized_window() {
        let p = path(&[0.1, -0.2, 0.3, 0.4, 0.5, -0.1]);
        assert!(matches!(
            EmpiricalCovariance::estimate(&p, 3),
            Err(Error::WindowTooLarge { .. })
        ));
        assert!(EmpiricalCovariance::estimate(&p, 2).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// The shift is nonnegative and restores the quarter-floor clearance
        /// whenever it fires.
        #[test]
        fn shift_restores_clearance(fhat_min in -5.0f64..5.0, floor in 1e-3f64..4.0) {
            let shift = regularization_shift(fhat_min, floor);
            prop_assert!(shift >= 0.0);
            if fhat_min <= floor / 4.0 {
                prop_assert!(fhat_min + shift >= floor / 4.0 - 1e-12);
            } else {
                prop_assert!(shift == 0.0);
            }
        }

        /// Lag averages are invariant to time reversal of the path.
        #[test]
        fn autocovariance_time_reversal(samples in proptest::collection::vec(-3.0f64..3.0, 8..40), p in 0usize..4) {
            prop_assume!(p < samples.len());
            let fwd = empirical_autocovariance(&path(&samples), p).unwrap();
            let mut rev = samples.clone();
            rev.reverse();
            let bwd = empirical_autocovariance(&path(&rev), p).unwrap();
            prop_assert!((fwd - bwd).abs() <= 1e-12);
        }
    }
}
