//! Randomized verification of the exact operator identities.
//!
//! Each trial draws a random positive trigonometric polynomial (a squared
//! moving-average symbol plus a floor, so positivity is structural), builds
//! the covariance it generates, and checks three identities against dense
//! linear algebra: the Schur-complement form of the inverse minor, the
//! duality between the prediction error operator and the precision minor,
//! and the two-sided warped-norm equivalence.

use super::fmt_float;
use crate::gaussian_simulator::replication_seed;
use crate::spectral_model::{covariance_to_spectrum, CovarianceSequence};
use crate::toeplitz_algebra::{
    build_minor, prediction_error_operator, schur_complement_inverse, warped_operator_norm,
};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest universe order the dense oracle is run at.
pub const MAX_SIZE: usize = 64;

#[derive(Debug, Clone)]
pub struct SchurReport {
    pub trials: usize,
    pub sizes: Vec<usize>,
    pub max_schur_rel_error: f64,
    pub max_duality_rel_error: f64,
    /// Largest overshoot of the warped norm outside its equivalence band.
    pub max_warped_violation: f64,
    pub pass: bool,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Draws a covariance whose spectral density is `|theta(e^it)|^2 + floor`.
fn random_covariance(rng: &mut ChaCha8Rng, degree: usize) -> CovarianceSequence {
    let theta: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut r = vec![0.0; degree + 1];
    for p in 0..=degree {
        for j in 0..=degree - p {
            r[p] += theta[j] * theta[j + p];
        }
    }
    r[0] += rng.random_range(0.05..0.5);
    CovarianceSequence::new(r, 0.0).expect("squared symbol plus floor is positive definite")
}

fn random_subset(rng: &mut ChaCha8Rng, lo: i64, hi: i64, len: usize) -> Vec<i64> {
    let mut subset = Vec::with_capacity(len);
    while subset.len() < len {
        let cand = rng.random_range(lo..hi);
        if !subset.contains(&cand) {
            subset.push(cand);
        }
    }
    subset.sort_unstable();
    subset
}

/// Runs `trials` random-identity checks over universes of the given sizes
/// and reports the worst errors seen.
pub fn schur_verify(sizes: &[usize], trials: usize, seed: u64) -> Result<SchurReport> {
    if sizes.is_empty() || trials == 0 {
        return Err(Error::Domain("need at least one size and one trial".into()));
    }
    if let Some(&bad) = sizes.iter().find(|&&s| s < 4 || s > MAX_SIZE) {
        return Err(Error::Domain(format!("sizes must lie in 4..={MAX_SIZE}, got {bad}")));
    }

    let mut max_schur = 0.0f64;
    let mut max_duality = 0.0f64;
    let mut max_warped = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed, trial as u64));
        let n = sizes[trial % sizes.len()];
        let horizon = n / 2;
        let degree = rng.random_range(1..=6);
        let cov = random_covariance(&mut rng, degree);

        // (a) Schur complement against the dense inverse of the minor.
        let a_len = rng.random_range(1..=horizon);
        let a = random_subset(&mut rng, -(horizon as i64), horizon as i64, a_len);
        let schur = schur_complement_inverse(&cov, &a, horizon)?;
        let gamma_a = build_minor(&cov, &a, &a)?;
        let dense = gamma_a
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        max_schur = max_schur.max(max_abs(&(&schur - &dense)) / max_abs(&dense).max(1e-300));

        // (b) Error-operator duality with the precision minor on A union B.
        let blind_len = rng.random_range(1..=horizon);
        let universe = random_subset(&mut rng, -(horizon as i64), horizon as i64, (horizon + blind_len).min(n));
        let (a_part, b_part) = universe.split_at(universe.len() - blind_len);
        let q = prediction_error_operator(&cov, a_part, b_part)?;
        let gamma_u = build_minor(&cov, &universe, &universe)?;
        let lambda = gamma_u.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
        let b_pos: Vec<usize> = (a_part.len()..universe.len()).collect();
        let lambda_b = lambda.select_rows(b_pos.iter()).select_columns(b_pos.iter());
        let dual = lambda_b.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
        max_duality = max_duality.max(max_abs(&(&q - &dual)) / max_abs(&dual).max(1e-300));

        // (c) Warped-norm equivalence within the spectral band.
        let spectrum = covariance_to_spectrum(&cov, 1.0)?;
        let (m, m_prime) = (spectrum.lower_bound(), spectrum.upper_bound());
        let k = rng.random_range(1..=8.min(horizon));
        let d = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        let warped = warped_operator_norm(&d, &cov)?;
        let spectral = d.clone().svd(false, false).singular_values[0];
        let lower = spectral * m / m_prime;
        let upper = spectral * m_prime / m;
        max_warped = max_warped.max(lower - warped).max(warped - upper);
    }

    let max_warped_violation = max_warped.max(0.0);
    Ok(SchurReport {
        trials,
        sizes: sizes.to_vec(),
        max_schur_rel_error: max_schur,
        max_duality_rel_error: max_duality,
        max_warped_violation,
        pass: max_schur <= 1e-8 && max_duality <= 1e-8 && max_warped_violation <= 1e-8,
    })
}

impl SchurReport {
    pub fn to_csv(&self, seed: u64) -> String {
        let sizes = self
            .sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let mut out = format!(
            "# tool: blindpred {}\n# report: schur-verify\n# sizes: {sizes}\n# seed: {seed}\n",
            env!("CARGO_PKG_VERSION")
        );
        out.push_str("trials,max_schur_rel_error,max_duality_rel_error,max_warped_violation,pass\n");
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            self.trials,
            fmt_float(self.max_schur_rel_error),
            fmt_float(self.max_duality_rel_error),
            fmt_float(self.max_warped_violation),
            self.pass
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toeplitz_algebra::ToeplitzMatrix;
    use approx::assert_relative_eq;

    #[test]
    fn random_trials_stay_at_oracle_precision() {
        let report = schur_verify(&[16, 32, 64], 200, 2024).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_schur_rel_error <= 1e-8);
        assert!(report.max_duality_rel_error <= 1e-8);
        assert!(report.max_warped_violation <= 1e-8);
    }

    #[test]
    fn identity_covariance_is_machine_exact() {
        // All three identities degenerate to trivialities for white noise.
        let cov = CovarianceSequence::white(1.0).unwrap();
        let a = vec![-3i64, 0, 2];
        let s = schur_complement_inverse(&cov, &a, 8).unwrap();
        assert!(max_abs(&(&s - &DMatrix::identity(3, 3))) <= 1e-14);
        let q = prediction_error_operator(&cov, &[-2, -1], &[0, 1]).unwrap();
        assert!(max_abs(&(&q - &DMatrix::identity(2, 2))) <= 1e-14);
    }

    #[test]
    fn two_by_two_worked_case() {
        // Gamma = [[2,1],[1,2]], A = {0}: S = Gamma_A^{-1} = 1/2.
        let cov = CovarianceSequence::new(vec![2.0, 1.0], 0.0).unwrap();
        let s = schur_complement_inverse(&cov, &[0], 1).unwrap();
        assert_relative_eq!(s[(0, 0)], 0.5, epsilon = 1e-12);
        let gamma = ToeplitzMatrix::from_covariance(&cov, 2).unwrap().to_dense();
        assert_relative_eq!(gamma[(0, 1)], 1.0);
    }

    #[test]
    fn input_validation_and_csv_shape() {
        assert!(schur_verify(&[], 10, 0).is_err());
        assert!(schur_verify(&[16], 0, 0).is_err());
        assert!(schur_verify(&[128], 10, 0).is_err());
        let report = schur_verify(&[8, 16], 20, 7).unwrap();
        let csv = report.to_csv(7);
        assert!(csv.contains("# sizes: 8 16\n"));
        assert!(csv.contains("trials,max_schur_rel_error,"));
        assert_eq!(csv, schur_verify(&[8, 16], 20, 7).unwrap().to_csv(7));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 2);
    }
}
