//! Command-line harness: simulation, blind fitting, and the Monte Carlo
//! experiment suite, all emitting CSV with `#`-prefixed metadata.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when an
//! assertion-style verification fails (eigenvalue floor, identity checks).

use blindpred::blind_predictor::BlindPredictor;
use blindpred::covariance_estimation::{empirical_spectral_density, EmpiricalCovariance, ObservedPath};
use blindpred::experiment_harness::schur::schur_verify;
use blindpred::experiment_harness::sweeps::{concentration_check, rate_sweep};
use blindpred::experiment_harness::{risk_report, ExperimentConfig, WindowRule};
use blindpred::gaussian_simulator::{simulate_path, SimMethod, SimulationSpec};
use blindpred::model::ModelSpec;
use blindpred::toeplitz_algebra::matrix_to_csv;
use blindpred::{Error, Result, DEFAULT_GRID};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "blindpred",
    version,
    about = "Blind linear prediction of stationary Gaussian time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one path from a model and write it as a single-column CSV.
    Simulate {
        /// Model file or inline spec such as "ar1 phi=0.6" or "r_0=1 r_1=0.5".
        #[arg(long)]
        model: String,
        /// Path length.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// auto, circulant-embedding, or dense-cholesky.
        #[arg(long, default_value = "auto")]
        method: String,
        /// Output CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the blind predictor on a path CSV and serialize its coefficients.
    Predict {
        /// Single-column CSV of observations, oldest first.
        #[arg(long)]
        path: PathBuf,
        /// Fixed prediction window.
        #[arg(long)]
        k: Option<usize>,
        /// Window rule "s=<s>" applied to the path length when --k is absent.
        #[arg(long = "k-rule")]
        k_rule: Option<String>,
        /// Spectral floor m for the regularizer.
        #[arg(long)]
        floor: Option<f64>,
        /// Model supplying the floor when --floor is absent.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo risk table across a grid of path lengths.
    Risk(RunArgs),
    /// Global-risk sweep over a geometric grid with a log-log slope fit.
    RateSweep(RunArgs),
    /// Concentration diagnostics for the lag-deviation supremum.
    Concentration(RunArgs),
    /// Randomized checks of the exact operator identities.
    SchurVerify {
        /// Comma-separated universe sizes, each between 4 and 64.
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Model file or inline spec such as "ar1 phi=0.6" or "r_0=1 r_1=0.5".
    #[arg(long)]
    model: String,
    /// Single path length; alternative to --grid.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated path lengths.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<usize>,
    /// Fixed prediction window.
    #[arg(long)]
    k: Option<usize>,
    /// Window rule "s=<s>" (default: the model's smoothness index).
    #[arg(long = "k-rule")]
    k_rule: Option<String>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oracle past length L; default max(512, 4 max K).
    #[arg(long = "oracle-past")]
    oracle_past: Option<usize>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rule(k: Option<usize>, k_rule: Option<&str>, default_s: f64) -> Result<WindowRule> {
    match (k, k_rule) {
        (Some(_), Some(_)) => Err(Error::Parse("use either --k or --k-rule, not both".into())),
        (Some(k), None) => Ok(WindowRule::Fixed(k)),
        (None, Some(rule)) => {
            let s = rule
                .strip_prefix("s=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("expected --k-rule s=<s>, got {rule:?}")))?;
            Ok(WindowRule::Adaptive(s))
        }
        (None, None) => Ok(WindowRule::Adaptive(default_s)),
    }
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let model = ModelSpec::load(&args.model)?;
    let grid = if !args.grid.is_empty() {
        args.grid.clone()
    } else if let Some(n) = args.n {
        vec![n]
    } else {
        return Err(Error::Parse("provide --n or --grid".into()));
    };
    let rule = parse_rule(args.k, args.k_rule.as_deref(), model.sobolev_index())?;
    ExperimentConfig::new(model, grid, rule, args.reps, args.seed, args.oracle_past)
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { model, n, seed, method, out } => {
            let model = ModelSpec::load(&model)?;
            let method: SimMethod = method.parse()?;
            let spec = SimulationSpec::new(model.cov().clone(), n, seed, method)?;
            let path = simulate_path(&spec)?;
            let mut csv = format!(
                "# tool: blindpred {}\n# report: simulate\n# model: {}\n# n: {n}\n# seed: {seed}\n# method: {method}\n# column: value\n",
                env!("CARGO_PKG_VERSION"),
                model.label()
            );
            for v in path.samples() {
                csv.push_str(&format!("{v:.16e}\n"));
            }
            emit(out.as_ref(), &csv)
        }
        Command::Predict { path, k, k_rule, floor, model, out } => {
            let observed = ObservedPath::from_csv_file(&path)?;
            let model = model.as_deref().map(ModelSpec::load).transpose()?;
            let default_s = model.as_ref().map_or(1.0, |m| m.sobolev_index());
            let window = match parse_rule(k, k_rule.as_deref(), default_s)? {
                WindowRule::Fixed(k) => k,
                rule => rule.window_for(observed.len())?,
            };
            let (floor, floor_source) = match (floor, &model) {
                (Some(m), _) => (m, "flag"),
                (None, Some(model)) => (model.spectral_floor()?, "model"),
                (None, None) => {
                    // Data heuristic: the empirical spectrum's minimum,
                    // floored at a fraction of the marginal variance.
                    let est = EmpiricalCovariance::estimate(&observed, window)?;
                    let min = empirical_spectral_density(&est).minimum(DEFAULT_GRID);
                    (min.max(1e-3 * est.lags()[0]), "data-heuristic")
                }
            };
            let fitted = BlindPredictor::fit(&observed, window, floor)?;
            let predictions = fitted
                .predict(&observed)?
                .iter()
                .map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>()
                .join(",");
            let mut csv = format!(
                "# tool: blindpred {}\n# report: predict\n# input: {}\n# path_n: {}\n# window_k: {window}\n",
                env!("CARGO_PKG_VERSION"),
                path.display(),
                observed.len()
            );
            csv.push_str(&format!("# floor_m: {floor:.16e} ({floor_source})\n"));
            csv.push_str(&format!("# alpha_hat: {:.16e}\n", fitted.alpha_hat()));
            csv.push_str(&format!("# predictions: {predictions}\n"));
            csv.push_str(&matrix_to_csv(fitted.coefficients().matrix()));
            emit(out.as_ref(), &csv)
        }
        Command::Risk(args) => {
            let report = risk_report(&build_config(&args)?)?;
            emit(args.out.as_ref(), &report.to_csv())
        }
        Command::RateSweep(args) => {
            let report = rate_sweep(&build_config(&args)?)?;
            emit(args.out.as_ref(), &report.to_csv())
        }
        Command::Concentration(args) => {
            let report = concentration_check(&build_config(&args)?)?;
            emit(args.out.as_ref(), &report.to_csv())
        }
        Command::SchurVerify { sizes, trials, seed, out } => {
            let report = schur_verify(&sizes, trials, seed)?;
            emit(out.as_ref(), &report.to_csv(seed))?;
            if !report.pass {
                return Err(Error::Verification(format!(
                    "identity checks failed: schur {:.3e}, duality {:.3e}, warped {:.3e}",
                    report.max_schur_rel_error,
                    report.max_duality_rel_error,
                    report.max_warped_violation
                )));
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        let code = if matches!(err, Error::Verification(_)) { 2 } else { 1 };
        std::process::exit(code);
    }
}
