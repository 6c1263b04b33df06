//! Rate sweeps over the path-length grid and concentration diagnostics.

use super::{
    config_metadata, fmt_float, run_cell, theory_metadata, theory_reference, Estimate,
    ExperimentConfig, PredictorMode, WindowRule,
};
use crate::covariance_estimation::{sup_deviation, EmpiricalCovariance, ObservedPath};
use crate::gaussian_simulator::{replication_seed, CirculantEmbedding};
use crate::{Error, Result};
use rayon::prelude::*;

/// One grid point of a rate sweep, with the log-log coordinates the slope
/// is fitted on.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub n: usize,
    pub window: usize,
    pub global: Estimate,
    pub sqrt_global: f64,
    /// `ln(N / ln N)`.
    pub log_abscissa: f64,
    /// `ln sqrt(global)`.
    pub log_ordinate: f64,
    /// Standard error of the ordinate, propagated from the risk half-width.
    pub ordinate_sd: f64,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub config: ExperimentConfig,
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    /// `-(2s-1)/(2(2s+3))` under the adaptive rule; `-1/2` (pure variance
    /// decay) under a fixed window.
    pub theory_exponent: f64,
}

/// Runs global risk across a geometric grid of at least four path lengths
/// and fits the least-squares slope of `ln sqrt(risk)` against
/// `ln(N / ln N)`.
pub fn rate_sweep(config: &ExperimentConfig) -> Result<RateReport> {
    let grid = config.grid();
    if grid.len() < 4 {
        return Err(Error::Domain(format!("rate sweep needs at least 4 grid points, got {}", grid.len())));
    }
    let first_ratio = grid[1] as f64 / grid[0] as f64;
    for pair in grid.windows(2) {
        let ratio = pair[1] as f64 / pair[0] as f64;
        if (ratio / first_ratio - 1.0).abs() > 0.01 {
            return Err(Error::Domain(format!(
                "rate sweep needs a geometric grid; ratios {first_ratio} and {ratio} differ"
            )));
        }
    }

    let mut points = Vec::with_capacity(grid.len());
    for cell in 0..grid.len() {
        let result = run_cell(config, cell, PredictorMode::Blind)?;
        let g = result.global.value;
        if !(g > 0.0) {
            return Err(Error::Verification(format!(
                "global risk {g} at N = {} is not positive; no log-log fit possible",
                result.n
            )));
        }
        let nf = result.n as f64;
        points.push(RatePoint {
            n: result.n,
            window: result.window,
            global: result.global,
            sqrt_global: g.sqrt(),
            log_abscissa: (nf / nf.ln()).ln(),
            log_ordinate: g.sqrt().ln(),
            // d(ln sqrt g)/dg = 1/(2g), applied to the risk standard error.
            ordinate_sd: result.global.half_width / 1.96 / (2.0 * g),
        });
    }

    let m = points.len() as f64;
    let x_bar = points.iter().map(|p| p.log_abscissa).sum::<f64>() / m;
    let y_bar = points.iter().map(|p| p.log_ordinate).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.log_abscissa - x_bar).powi(2)).sum();
    let slope = points
        .iter()
        .map(|p| (p.log_abscissa - x_bar) * (p.log_ordinate - y_bar))
        .sum::<f64>()
        / sxx;
    let slope_var = points
        .iter()
        .map(|p| ((p.log_abscissa - x_bar) / sxx * p.ordinate_sd).powi(2))
        .sum::<f64>();
    let theory_exponent = match config.rule() {
        WindowRule::Adaptive(s) => -(2.0 * s - 1.0) / (2.0 * (2.0 * s + 3.0)),
        WindowRule::Fixed(_) => -0.5,
    };
    Ok(RateReport {
        config: config.clone(),
        points,
        slope,
        slope_se: slope_var.sqrt(),
        intercept: y_bar - slope * x_bar,
        theory_exponent,
    })
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let mut out = config_metadata(&self.config, "rate-sweep");
        if let Ok(theory) = theory_reference(self.config.model()) {
            out.push_str(&theory_metadata(&theory));
        }
        out.push_str(&format!("# slope: {}\n", fmt_float(self.slope)));
        out.push_str(&format!("# slope_se: {}\n", fmt_float(self.slope_se)));
        out.push_str(&format!("# intercept: {}\n", fmt_float(self.intercept)));
        out.push_str(&format!("# theory_exponent: {}\n", fmt_float(self.theory_exponent)));
        out.push_str("n,k,l,global,global_hw,sqrt_global,log_abscissa,log_ordinate,ordinate_sd\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.n,
                p.window,
                self.config.oracle_past(),
                fmt_float(p.global.value),
                fmt_float(p.global.half_width),
                fmt_float(p.sqrt_global),
                fmt_float(p.log_abscissa),
                fmt_float(p.log_ordinate),
                fmt_float(p.ordinate_sd)
            ));
        }
        out
    }
}

/// Concentration diagnostics at one grid point.
#[derive(Debug, Clone)]
pub struct ConcentrationPoint {
    pub n: usize,
    pub window: usize,
    pub median: f64,
    pub q90: f64,
    /// Reference bound `4 m' (sqrt((ln K + x)/N) + x/N)` at `x = ln 2`.
    pub bound_log2: f64,
    pub exceed_log2: f64,
    /// Same bound at `x = 3`.
    pub bound_x3: f64,
    pub exceed_x3: f64,
}

#[derive(Debug, Clone)]
pub struct ConcentrationReport {
    pub config: ExperimentConfig,
    pub points: Vec<ConcentrationPoint>,
    /// `(N, 4N, median(N)/median(4N))` for every quadruple present in the
    /// grid; near 2 under root-N concentration.
    pub median_ratios: Vec<(usize, usize, f64)>,
}

/// Estimates the distribution of `sup_deviation` across replications at
/// each grid point; paths here have plain length `N` since no oracle is
/// involved.
pub fn concentration_check(config: &ExperimentConfig) -> Result<ConcentrationReport> {
    let theory = theory_reference(config.model())?;
    let m_prime = theory.band_upper;
    let cov = config.model().cov();
    let mut points = Vec::new();
    for (cell, &n) in config.grid().iter().enumerate() {
        let k = config.rule().window_for(n)?;
        let embedding = CirculantEmbedding::new(cov, n)?;
        let cell_seed = replication_seed(config.master_seed(), cell as u64);
        let devs: Vec<f64> = (0..config.replications())
            .into_par_iter()
            .map(|rep| -> Result<f64> {
                let path = ObservedPath::new(embedding.sample(replication_seed(cell_seed, rep as u64)))?;
                let est = EmpiricalCovariance::estimate(&path, k)?;
                sup_deviation(&est, cov)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut sorted = devs;
        sorted.sort_by(f64::total_cmp);
        let r = sorted.len();
        let median = if r % 2 == 1 {
            sorted[r / 2]
        } else {
            0.5 * (sorted[r / 2 - 1] + sorted[r / 2])
        };
        let q90 = sorted[((0.9 * r as f64).ceil() as usize).clamp(1, r) - 1];
        let bound = |x: f64| 4.0 * m_prime * ((((k as f64).ln() + x) / n as f64).sqrt() + x / n as f64);
        let exceed = |b: f64| sorted.iter().filter(|&&d| d > b).count() as f64 / r as f64;
        let bound_log2 = bound(2.0f64.ln());
        let bound_x3 = bound(3.0);
        points.push(ConcentrationPoint {
            n,
            window: k,
            median,
            q90,
            bound_log2,
            exceed_log2: exceed(bound_log2),
            bound_x3,
            exceed_x3: exceed(bound_x3),
        });
    }

    let mut median_ratios = Vec::new();
    for small in &points {
        for large in &points {
            if large.n == 4 * small.n && large.median > 0.0 {
                median_ratios.push((small.n, large.n, small.median / large.median));
            }
        }
    }
    Ok(ConcentrationReport { config: config.clone(), points, median_ratios })
}

impl ConcentrationReport {
    pub fn to_csv(&self) -> String {
        let mut out = config_metadata(&self.config, "concentration");
        for (a, b, ratio) in &self.median_ratios {
            out.push_str(&format!("# median_ratio_{a}_{b}: {}\n", fmt_float(*ratio)));
        }
        out.push_str("n,k,median,q90,bound_log2,exceed_log2,bound_x3,exceed_x3\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.n,
                p.window,
                fmt_float(p.median),
                fmt_float(p.q90),
                fmt_float(p.bound_log2),
                fmt_float(p.exceed_log2),
                fmt_float(p.bound_x3),
                fmt_float(p.exceed_x3)
            ));
        }
        out
    }
}
