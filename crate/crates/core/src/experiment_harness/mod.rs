//! Monte Carlo estimation of the prediction risk functionals.
//!
//! One engine drives every experiment: per replication it simulates a path
//! of length `N + L`, fits the blind predictor on the `N` most recent
//! samples, and compares its predictions against two oracles built from the
//! true covariance, the `K`-window projection and the `L`-window projection
//! standing in for the infinite past. All randomness derives from
//! `(master seed, cell index, replication index)`, replications run in
//! parallel, and reductions happen in replication order, so reports are
//! bitwise reproducible at any thread count.
//!
//! Rate sweeps, concentration diagnostics, and the exact-identity checker
//! live in the submodules.

pub mod schur;
pub mod sweeps;

use crate::blind_predictor::{
    bias_constant_alternative, choose_window, risk_bound, theory_constants, BlindPredictor,
    TheoryConstants,
};
use crate::covariance_estimation::{sup_deviation, ObservedPath};
use crate::gaussian_simulator::{replication_seed, CirculantEmbedding};
use crate::model::ModelSpec;
use crate::spectral_model::inverse_spectrum;
use crate::toeplitz_algebra::{build_minor, oracle_predictor, spd_solve, ToeplitzMatrix};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Coefficients kept of `1/f` when evaluating its Sobolev norms; the models
/// here have geometrically decaying inverse symbols, so this is far past
/// convergence.
const INVERSE_COEFFS: usize = 256;

/// Shortest oracle past used when none is configured.
const DEFAULT_ORACLE_PAST: usize = 512;

/// How the prediction window is chosen per path length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowRule {
    Fixed(usize),
    /// `K(N) = max(1, floor((N/ln N)^{1/(2(2s+3))}))` with this smoothness.
    Adaptive(f64),
}

impl WindowRule {
    pub fn window_for(&self, n: usize) -> Result<usize> {
        match *self {
            WindowRule::Fixed(k) if k >= 1 => Ok(k),
            WindowRule::Fixed(k) => Err(Error::Domain(format!("window must be positive, got {k}"))),
            WindowRule::Adaptive(s) => choose_window(n, s),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            WindowRule::Fixed(k) => format!("fixed k={k}"),
            WindowRule::Adaptive(s) => format!("adaptive s={s}"),
        }
    }
}

/// A fully validated experiment: model, path lengths, window rule,
/// replication count, seed, and oracle past length.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    model: ModelSpec,
    grid: Vec<usize>,
    rule: WindowRule,
    replications: usize,
    master_seed: u64,
    oracle_past: usize,
}

impl ExperimentConfig {
    pub fn new(
        model: ModelSpec,
        grid: Vec<usize>,
        rule: WindowRule,
        replications: usize,
        master_seed: u64,
        oracle_past: Option<usize>,
    ) -> Result<Self> {
        let mut grid = grid;
        grid.sort_unstable();
        grid.dedup();
        if grid.is_empty() {
            return Err(Error::Domain("empty path-length grid".into()));
        }
        if replications < 2 {
            return Err(Error::Domain(format!("need at least 2 replications, got {replications}")));
        }
        let mut max_window = 0;
        for &n in &grid {
            let k = rule.window_for(n)?;
            if 2 * k >= n {
                return Err(Error::Domain(format!("window {k} needs 2K < N, got N = {n}")));
            }
            max_window = max_window.max(k);
        }
        let oracle_past = oracle_past.unwrap_or_else(|| DEFAULT_ORACLE_PAST.max(4 * max_window));
        if oracle_past < 4 * max_window {
            return Err(Error::Domain(format!(
                "oracle past {oracle_past} shorter than 4 max K = {}",
                4 * max_window
            )));
        }
        Ok(Self { model, grid, rule, replications, master_seed, oracle_past })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn rule(&self) -> WindowRule {
        self.rule
    }

    pub fn replications(&self) -> usize {
        self.replications
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn oracle_past(&self) -> usize {
        self.oracle_past
    }
}

/// A Monte Carlo mean with its 95 percent normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
}

fn mean_estimate(samples: &[f64]) -> Estimate {
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
    Estimate { value: mean, half_width: 1.96 * (var / r).sqrt() }
}

/// Which predictor produces the tracked predictions; the oracle substitution
/// is a debug mode that isolates the truncation error of the finite oracle
/// past.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorMode {
    Blind,
    OracleDebug,
}

/// Reference quantities derived from the true model once per experiment.
#[derive(Debug, Clone)]
pub struct TheoryReference {
    pub floor: f64,
    pub band_lower: f64,
    pub band_upper: f64,
    pub constants: TheoryConstants,
    /// The proof-side bias constant `C4 sqrt(|1/f|_{W_s})`, reported next to
    /// `C2` without endorsing either.
    pub c2_alternative: f64,
    pub sobolev_index: f64,
}

pub fn theory_reference(model: &ModelSpec) -> Result<TheoryReference> {
    let spectrum = model.spectrum()?;
    let floor = model.spectral_floor()?;
    let inverse = inverse_spectrum(&spectrum, INVERSE_COEFFS)?;
    let s = model.sobolev_index();
    let constants =
        theory_constants(floor, spectrum.upper_bound(), model.cov().variance(), inverse.sobolev_norm(2.0 * s))?;
    Ok(TheoryReference {
        floor,
        band_lower: spectrum.lower_bound(),
        band_upper: spectrum.upper_bound(),
        c2_alternative: bias_constant_alternative(&constants, inverse.sobolev_norm(s)),
        constants,
        sobolev_index: s,
    })
}

struct Replication {
    d: DVector<f64>,
    v: DVector<f64>,
    alpha: f64,
    sup_dev: f64,
}

/// Everything measured at one grid point.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub n: usize,
    pub window: usize,
    pub oracle_past: usize,
    /// Risk against the long-past oracle, per blind position `j`.
    pub pointwise: Vec<Estimate>,
    /// Largest eigenvalue of the whitened error second moment.
    pub global: Estimate,
    /// Deterministic squared gap between the `K`- and `L`-window oracles.
    pub bias_sq: Vec<f64>,
    /// Monte Carlo risk against the `K`-window oracle.
    pub variance: Vec<Estimate>,
    pub mean_alpha: Estimate,
    pub mean_sup_dev: Estimate,
    pub theorem_bound: f64,
}

fn inverse_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let scaled = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&scaled) * eig.eigenvectors.transpose())
}

/// Runs all replications of one grid cell and reduces them in replication
/// order.
pub fn run_cell(config: &ExperimentConfig, cell: usize, mode: PredictorMode) -> Result<CellResult> {
    let n = *config
        .grid
        .get(cell)
        .ok_or_else(|| Error::Domain(format!("cell {cell} outside grid")))?;
    let k = config.rule.window_for(n)?;
    let l = config.oracle_past;
    let cov = config.model.cov();
    let theory = theory_reference(&config.model)?;
    let floor = theory.floor;

    // Truth-side structures, once per cell.
    let blind: Vec<i64> = (0..k as i64).collect();
    let observed_l: Vec<i64> = (-(l as i64)..0).collect();
    let gamma_l = ToeplitzMatrix::from_covariance(cov, l)?;
    let coeff_l = spd_solve(&gamma_l, &build_minor(cov, &observed_l, &blind)?)?;
    let oracle_k = oracle_predictor(cov, k)?;
    let whitener = inverse_sqrt(&build_minor(cov, &blind, &blind)?)?;

    // Exact bias: the long-window oracle minus the short one, as a single
    // coefficient vector over the length-L past.
    let gamma_l_dense = gamma_l.to_dense();
    let mut bias_sq = Vec::with_capacity(k);
    for j in 0..k {
        let mut w = coeff_l.column(j).clone_owned();
        for i in 0..k {
            w[l - k + i] -= oracle_k.matrix()[(i, j)];
        }
        bias_sq.push(((&gamma_l_dense * &w).dot(&w)).max(0.0));
    }

    let embedding = CirculantEmbedding::new(cov, n + l)?;
    let cell_seed = replication_seed(config.master_seed, cell as u64);
    let replications: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|rep| -> Result<Replication> {
            let full = embedding.sample(replication_seed(cell_seed, rep as u64));
            let observed = ObservedPath::new(full[l..].to_vec())?;
            let fit = BlindPredictor::fit(&observed, k, floor)?;

            // Hard floor on the regularized matrix, every replication.
            let mut first_row = fit.empirical().lags()[..k].to_vec();
            first_row[0] += fit.alpha_hat();
            let min_eig = ToeplitzMatrix::new(first_row)?.eigenvalues()[0];
            if min_eig < floor / 4.0 - 1e-9 {
                return Err(Error::Verification(format!(
                    "replication {rep}: min eigenvalue {min_eig} below floor/4 = {}",
                    floor / 4.0
                )));
            }

            let window_k = observed.last_window(k)?;
            let y_oracle_k = oracle_k.apply(window_k)?;
            let predicted = match mode {
                PredictorMode::Blind => fit.predict(&observed)?,
                PredictorMode::OracleDebug => y_oracle_k.clone(),
            };
            let window_l = &full[n..];
            let y_oracle_l: Vec<f64> = (0..k)
                .map(|j| (0..l).map(|i| coeff_l[(i, j)] * window_l[i]).sum())
                .collect();

            let d = DVector::from_iterator(k, predicted.iter().zip(&y_oracle_l).map(|(a, b)| a - b));
            let v = DVector::from_iterator(k, predicted.iter().zip(&y_oracle_k).map(|(a, b)| a - b));
            let sup_dev = sup_deviation(fit.empirical(), cov)?;
            Ok(Replication { d, v, alpha: fit.alpha_hat(), sup_dev })
        })
        .collect::<Result<Vec<_>>>()?;

    let r = config.replications;
    let pointwise: Vec<Estimate> = (0..k)
        .map(|j| mean_estimate(&replications.iter().map(|o| o.d[j] * o.d[j]).collect::<Vec<_>>()))
        .collect();
    let variance: Vec<Estimate> = (0..k)
        .map(|j| mean_estimate(&replications.iter().map(|o| o.v[j] * o.v[j]).collect::<Vec<_>>()))
        .collect();
    let mean_alpha = mean_estimate(&replications.iter().map(|o| o.alpha).collect::<Vec<_>>());
    let mean_sup_dev = mean_estimate(&replications.iter().map(|o| o.sup_dev).collect::<Vec<_>>());

    // Whitened second moment and its top eigendirection; projecting each
    // replication on that direction recovers the eigenvalue as a plain mean
    // and yields its half-width.
    let mut second_moment = DMatrix::<f64>::zeros(k, k);
    for o in &replications {
        second_moment += &o.d * o.d.transpose();
    }
    second_moment /= r as f64;
    let whitened = {
        let w = &whitener * second_moment * &whitener;
        (w.transpose() + &w) * 0.5
    };
    let eig = whitened.symmetric_eigen();
    let top = (0..k).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    let direction = eig.eigenvectors.column(top).clone_owned();
    let projected: Vec<f64> = replications
        .iter()
        .map(|o| {
            let p = direction.dot(&(&whitener * &o.d));
            p * p
        })
        .collect();
    let global = mean_estimate(&projected);

    let result = CellResult {
        n,
        window: k,
        oracle_past: l,
        pointwise,
        global,
        bias_sq,
        variance,
        mean_alpha,
        mean_sup_dev,
        theorem_bound: risk_bound(n, k, &theory.constants, theory.sobolev_index),
    };

    // The supremum dominates the X_0 direction: fail loudly if the sample
    // versions ever disagree beyond Monte Carlo slack.
    let r0 = cov.variance();
    let slack = 3.0 * (result.pointwise[0].half_width + r0 * result.global.half_width);
    if result.pointwise[0].value > r0 * result.global.value + slack + 1e-12 {
        return Err(Error::Verification(format!(
            "pointwise {} exceeds r0 * global {} beyond slack {slack}",
            result.pointwise[0].value,
            r0 * result.global.value
        )));
    }
    Ok(result)
}

/// Pointwise risk rows for one blind position across the grid.
pub fn pointwise_risk(config: &ExperimentConfig, target: usize) -> Result<Vec<(usize, Estimate)>> {
    pointwise_risk_with_mode(config, target, PredictorMode::Blind)
}

pub fn pointwise_risk_with_mode(
    config: &ExperimentConfig,
    target: usize,
    mode: PredictorMode,
) -> Result<Vec<(usize, Estimate)>> {
    let mut rows = Vec::new();
    for cell in 0..config.grid.len() {
        let result = run_cell(config, cell, mode)?;
        let estimate = *result
            .pointwise
            .get(target)
            .ok_or_else(|| Error::Domain(format!("target {target} outside blind block")))?;
        rows.push((result.n, estimate));
    }
    Ok(rows)
}

/// Global risk (whitened supremum) across the grid.
pub fn global_risk(config: &ExperimentConfig) -> Result<Vec<(usize, Estimate)>> {
    (0..config.grid.len())
        .map(|cell| run_cell(config, cell, PredictorMode::Blind).map(|r| (r.n, r.global)))
        .collect()
}

/// Deterministic bias and Monte Carlo variance terms per grid point.
pub fn bias_variance_split(config: &ExperimentConfig) -> Result<Vec<(usize, Vec<f64>, Vec<Estimate>)>> {
    (0..config.grid.len())
        .map(|cell| run_cell(config, cell, PredictorMode::Blind).map(|r| (r.n, r.bias_sq, r.variance)))
        .collect()
}

/// The full per-grid-point risk table.
#[derive(Debug, Clone)]
pub struct RiskReport {
    pub config: ExperimentConfig,
    pub theory: TheoryReference,
    pub rows: Vec<CellResult>,
}

pub fn risk_report(config: &ExperimentConfig) -> Result<RiskReport> {
    let theory = theory_reference(config.model())?;
    let rows = (0..config.grid.len())
        .map(|cell| run_cell(config, cell, PredictorMode::Blind))
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskReport { config: config.clone(), theory, rows })
}

pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn config_metadata(config: &ExperimentConfig, report: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# tool: blindpred {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# report: {report}\n"));
    out.push_str(&format!("# model: {}\n", config.model.label()));
    out.push_str(&format!("# rule: {}\n", config.rule.describe()));
    out.push_str(&format!("# replications: {}\n", config.replications));
    out.push_str(&format!("# master_seed: {}\n", config.master_seed));
    out.push_str(&format!("# oracle_past: {}\n", config.oracle_past));
    out
}

pub(crate) fn theory_metadata(theory: &TheoryReference) -> String {
    let c = &theory.constants;
    [
        format!("# floor_m: {}\n", fmt_float(theory.floor)),
        format!(
            "# band: m={} m_prime={}\n",
            fmt_float(theory.band_lower),
            fmt_float(theory.band_upper)
        ),
        format!(
            "# constants: c0={} c1={} c2={} c2_alt={} c4={} r4={}\n",
            fmt_float(c.c0),
            fmt_float(c.c1),
            fmt_float(c.c2),
            fmt_float(theory.c2_alternative),
            fmt_float(c.c4),
            fmt_float(c.r4)
        ),
    ]
    .concat()
}

impl RiskReport {
    pub fn to_csv(&self) -> String {
        let mut out = config_metadata(&self.config, "risk");
        out.push_str(&theory_metadata(&self.theory));
        out.push_str(
            "n,k,l,pointwise,pointwise_hw,global,global_hw,bias_sq,bias_sq_hw,variance,variance_hw,\
             mean_alpha,mean_alpha_hw,mean_sup_dev,mean_sup_dev_hw,theorem_bound,theorem_bound_hw\n",
        );
        for row in &self.rows {
            let cells = [
                row.pointwise[0].value,
                row.pointwise[0].half_width,
                row.global.value,
                row.global.half_width,
                row.bias_sq[0],
                0.0,
                row.variance[0].value,
                row.variance[0].half_width,
                row.mean_alpha.value,
                row.mean_alpha.half_width,
                row.mean_sup_dev.value,
                row.mean_sup_dev.half_width,
                row.theorem_bound,
                0.0,
            ];
            out.push_str(&format!("{},{},{}", row.n, row.window, row.oracle_past));
            for c in cells {
                out.push(',');
                out.push_str(&fmt_float(c));
            }
            out.push('\n');
        }
        out
    }
}
