//! Command-line surface: `simulate`, `estimate` and `sweep`.
//!
//! Exit codes are a stable contract: 0 success, 1 usage error, 2 data or
//! parse error, 3 numerical failure. The seed comes from `--seed`, falling
//! back to the `LOCOV_SEED` environment variable, then to 0.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::covmodel::{ModelError, NoiseDistribution, ReturnMatrix};
use crate::experiment::{
    run_experiment, scaling_sweep, BasisSpec, EstimateError, Estimator, ExperimentError,
    ExperimentOutput, SigmaSpec, TrialConfig,
};
use crate::minvar::{portfolio_risk, MinVarError};
use crate::report::{
    write_json, write_scaling_csv, write_spread_csv, write_trials_csv, write_weights_csv,
    EstimateEcho, EstimateSummaryDoc, Manifest, RunBlock, ScalingDoc, SimulateEcho,
    SimulateSummaryDoc, SweepEcho,
};
use crate::voting::LocovError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_SEED: u64 = 0;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) | CliError::Numerical(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(err: ExperimentError) -> Self {
        match err {
            ExperimentError::InvalidConfig(_)
            | ExperimentError::GridTooShort(_)
            | ExperimentError::GridNotIncreasing
            | ExperimentError::GridTooNarrow
            | ExperimentError::GridPointTooSmall { .. } => CliError::Usage(err.to_string()),
            ExperimentError::DegenerateTruth(_)
            | ExperimentError::InvalidModel(_)
            | ExperimentError::SweepPointUnsolvable { .. } => CliError::Numerical(err.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Data(format!("CSV error: {err}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Data(format!("I/O error: {err}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "locov",
    version,
    about = "Minimum-variance portfolios: closed-form solver, LoCoV voting estimators and a Monte Carlo error harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run Monte Carlo trials and write error summaries and spread tables
    Simulate(SimulateArgs),
    /// Estimate portfolio weights from a CSV of asset returns
    Estimate(EstimateArgs),
    /// Sweep the sample size and fit the weight-error decay slope
    Sweep(SweepArgs),
}

/// Named experiment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// p=30, variances 1..30, identity basis, n in {30, 3000}, sample estimator
    Fig1,
    /// Like fig1 with a Haar-random basis
    Fig2,
    /// Identity covariance at n=p=30, sample vs locov2
    Fig3,
    /// Diagonal covariance (variances 1..30) at n=p=30, sample vs locov2
    Fig4,
    /// Haar-rotated covariance (variances 1..30) at n=p=30, sample vs locov2
    Fig5,
}

struct PresetSpec {
    p: usize,
    n_values: Vec<usize>,
    sigma: SigmaSpec,
    basis: BasisSpec,
    trials: usize,
    estimators: Vec<Estimator>,
}

impl Preset {
    fn spec(self) -> PresetSpec {
        let ramp = SigmaSpec::Linspace { lo: 1.0, hi: 30.0 };
        let comparison = vec![Estimator::Sample, Estimator::Locov2];
        match self {
            Preset::Fig1 => PresetSpec {
                p: 30,
                n_values: vec![30, 3000],
                sigma: ramp,
                basis: BasisSpec::Identity,
                trials: 300,
                estimators: vec![Estimator::Sample],
            },
            Preset::Fig2 => PresetSpec {
                p: 30,
                n_values: vec![30, 3000],
                sigma: ramp,
                basis: BasisSpec::Haar,
                trials: 300,
                estimators: vec![Estimator::Sample],
            },
            Preset::Fig3 => PresetSpec {
                p: 30,
                n_values: vec![30],
                sigma: SigmaSpec::Identity,
                basis: BasisSpec::Identity,
                trials: 300,
                estimators: comparison,
            },
            Preset::Fig4 => PresetSpec {
                p: 30,
                n_values: vec![30],
                sigma: ramp,
                basis: BasisSpec::Identity,
                trials: 300,
                estimators: comparison,
            },
            Preset::Fig5 => PresetSpec {
                p: 30,
                n_values: vec![30],
                sigma: ramp,
                basis: BasisSpec::Haar,
                trials: 300,
                estimators: comparison,
            },
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Experiment preset; explicit flags override individual fields
    #[arg(long)]
    preset: Option<Preset>,
    /// Number of assets
    #[arg(long)]
    p: Option<usize>,
    /// Number of return samples per trial
    #[arg(long)]
    n: Option<usize>,
    /// Number of Monte Carlo trials
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed (falls back to LOCOV_SEED, then 0)
    #[arg(long, env = "LOCOV_SEED")]
    seed: Option<u64>,
    /// Variance spectrum: identity | linspace:LO:HI | list:V1,V2,...
    #[arg(long)]
    sigma: Option<SigmaSpec>,
    /// Basis: identity | haar
    #[arg(long)]
    basis: Option<BasisSpec>,
    /// Noise law: gaussian | rademacher | uniform
    #[arg(long)]
    noise: Option<NoiseDistribution>,
    /// Estimators: sample,locov2,locovk:<k>,locovk-rm:<k>
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<Estimator>>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Exit nonzero if any estimator's failure rate reaches this fraction
    #[arg(long, default_value_t = 0.1)]
    fail_threshold: f64,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// CSV of returns: rows are time samples, columns are assets
    input: PathBuf,
    /// Estimator: sample | locov2 | locovk:<k> | locovk-rm:<k>
    #[arg(long, default_value = "sample")]
    estimator: Estimator,
    /// Master seed (only subset voting draws randomness)
    #[arg(long, env = "LOCOV_SEED")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Number of assets
    #[arg(long, default_value_t = 30)]
    p: usize,
    /// Comma-separated sample sizes, strictly increasing, spanning a decade
    #[arg(long, value_delimiter = ',', required = true)]
    n_grid: Vec<usize>,
    /// Trials per grid point
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Master seed (falls back to LOCOV_SEED, then 0)
    #[arg(long, env = "LOCOV_SEED")]
    seed: Option<u64>,
    /// Variance spectrum: identity | linspace:LO:HI | list:V1,V2,...
    #[arg(long, default_value = "identity")]
    sigma: SigmaSpec,
    /// Basis: identity | haar
    #[arg(long, default_value = "identity")]
    basis: BasisSpec,
    /// Noise law: gaussian | rademacher | uniform
    #[arg(long, default_value = "gaussian")]
    noise: NoiseDistribution,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Parse `std::env::args` and run; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Run with explicit arguments (first element is the program name).
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Estimate(args) => run_estimate(args),
        Command::Sweep(args) => run_sweep(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let preset = args.preset.map(Preset::spec);
    let p = args.p.or_else(|| preset.as_ref().map(|s| s.p)).unwrap_or(30);
    let n_values = match args.n {
        Some(n) => vec![n],
        None => preset
            .as_ref()
            .map(|s| s.n_values.clone())
            .unwrap_or_else(|| vec![30]),
    };
    let trials = args
        .trials
        .or_else(|| preset.as_ref().map(|s| s.trials))
        .unwrap_or(300);
    let sigma = args
        .sigma
        .or_else(|| preset.as_ref().map(|s| s.sigma.clone()))
        .unwrap_or(SigmaSpec::Identity);
    let basis = args
        .basis
        .or_else(|| preset.as_ref().map(|s| s.basis))
        .unwrap_or(BasisSpec::Identity);
    let noise = args.noise.unwrap_or(NoiseDistribution::Gaussian);
    let estimators = args
        .estimators
        .or_else(|| preset.as_ref().map(|s| s.estimators.clone()))
        .unwrap_or_else(|| vec![Estimator::Sample]);
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    if !(args.fail_threshold > 0.0 && args.fail_threshold <= 1.0) {
        return Err(CliError::Usage(format!(
            "--fail-threshold must be in (0, 1], got {}",
            args.fail_threshold
        )));
    }

    let mut runs: Vec<(usize, ExperimentOutput)> = Vec::new();
    for &n in &n_values {
        let config = TrialConfig {
            p,
            n,
            sigma: sigma.clone(),
            basis,
            noise,
            trials,
            seed,
            estimators: estimators.clone(),
        };
        runs.push((n, run_experiment(&config)?));
    }

    let echo = SimulateEcho {
        p,
        n_values: n_values.clone(),
        sigma: sigma.to_string(),
        basis: basis.to_string(),
        noise: noise.to_string(),
        trials,
        estimators: estimators.iter().map(|e| e.to_string()).collect(),
        fail_threshold: args.fail_threshold,
    };
    let manifest = Manifest::new("simulate", seed, echo);

    std::fs::create_dir_all(&args.out)?;
    write_trials_csv(&args.out.join("trials.csv"), &runs)?;
    write_spread_csv(&args.out.join("spread.csv"), &runs)?;
    let doc = SimulateSummaryDoc {
        runs: runs
            .iter()
            .map(|(n, output)| RunBlock {
                n: *n,
                summaries: output.summaries.clone(),
            })
            .collect(),
        manifest: manifest.clone(),
    };
    write_json(&args.out.join("summary.json"), &doc)?;
    write_json(&args.out.join("manifest.json"), &manifest.stamped())?;

    let mut worst: Option<(usize, Estimator, f64)> = None;
    for (n, output) in &runs {
        for summary in &output.summaries {
            let rate = summary.failed_trials as f64 / trials as f64;
            println!(
                "n={n} {est}: mean|w_err|={abs:.4} mse={mse:.4} risk_underestimated={freq:.2} failed={failed}/{trials}",
                est = summary.estimator,
                abs = summary.mean_abs_error,
                mse = summary.mse,
                freq = summary.risk_underestimate_freq,
                failed = summary.failed_trials,
            );
            if worst.is_none_or(|(_, _, r)| rate > r) {
                worst = Some((*n, summary.estimator, rate));
            }
        }
    }
    println!("wrote summary.json, trials.csv, spread.csv to {}", args.out.display());

    if let Some((n, estimator, rate)) = worst {
        if rate >= args.fail_threshold {
            return Err(CliError::Numerical(format!(
                "estimator '{estimator}' at n={n} failed in {:.1}% of trials (threshold {:.1}%)",
                rate * 100.0,
                args.fail_threshold * 100.0
            )));
        }
    }
    Ok(())
}

fn run_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let table = read_returns_csv(&args.input)?;
    let centered = table.returns.center().map_err(|err| match err {
        ModelError::TooFewSamples { .. } => {
            CliError::Data(format!("{}: {err}", args.input.display()))
        }
        other => CliError::Data(other.to_string()),
    })?;
    let sample_cov = centered.sample_covariance();

    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let mut rng = crate::experiment::estimator_stream(seed, args.estimator, 0);
    let (estimate, _) = args
        .estimator
        .estimate(&sample_cov, &mut rng)
        .map_err(|err| classify_estimate_error(err, args.estimator))?;
    let risk = portfolio_risk(&estimate.weights, &sample_cov)
        .expect("dimensions match by construction")
        .value();

    let echo = EstimateEcho {
        input: args.input.display().to_string(),
        estimator: args.estimator.to_string(),
    };
    let manifest = Manifest::new("estimate", seed, echo);

    std::fs::create_dir_all(&args.out)?;
    write_weights_csv(
        &args.out.join("weights.csv"),
        &table.asset_names,
        &estimate.weights,
    )?;
    let doc = EstimateSummaryDoc {
        n_samples: centered.n_samples(),
        n_assets: centered.dim(),
        in_sample_risk: risk,
        skipped_subproblems: estimate.skipped_subproblems,
        manifest: manifest.clone(),
    };
    write_json(&args.out.join("summary.json"), &doc)?;
    write_json(&args.out.join("manifest.json"), &manifest.stamped())?;

    println!(
        "{est} weights for {p} assets over {n} samples: in-sample risk {risk:.6e}, {skipped} sub-problem(s) skipped",
        est = args.estimator,
        p = centered.dim(),
        n = centered.n_samples(),
        skipped = estimate.skipped_subproblems,
    );
    println!("wrote weights.csv, summary.json to {}", args.out.display());
    Ok(())
}

fn classify_estimate_error(err: EstimateError, estimator: Estimator) -> CliError {
    match err {
        EstimateError::MinVar(MinVarError::NonInvertible { .. }) => CliError::Numerical(format!(
            "sample covariance is singular for the '{estimator}' estimator ({err}); try --estimator locov2"
        )),
        EstimateError::Voting(LocovError::InvalidSubsetSize { .. })
        | EstimateError::Voting(LocovError::InvalidRepetitions { .. }) => {
            CliError::Usage(err.to_string())
        }
        other => CliError::Numerical(other.to_string()),
    }
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let config = TrialConfig {
        p: args.p,
        n: *args.n_grid.first().unwrap_or(&1),
        sigma: args.sigma.clone(),
        basis: args.basis,
        noise: args.noise,
        trials: args.trials,
        seed,
        estimators: vec![Estimator::Sample],
    };
    let fit = scaling_sweep(&config, &args.n_grid)?;

    let echo = SweepEcho {
        p: args.p,
        n_grid: args.n_grid.clone(),
        sigma: args.sigma.to_string(),
        basis: args.basis.to_string(),
        noise: args.noise.to_string(),
        trials: args.trials,
    };
    let manifest = Manifest::new("sweep", seed, echo);

    std::fs::create_dir_all(&args.out)?;
    write_scaling_csv(&args.out.join("scaling.csv"), &fit)?;
    let doc = ScalingDoc {
        manifest: manifest.clone(),
        fit: fit.clone(),
    };
    write_json(&args.out.join("scaling.json"), &doc)?;
    write_json(&args.out.join("manifest.json"), &manifest.stamped())?;

    println!(
        "log-log slope {slope:.4} +/- {stderr:.4} over n={grid:?}",
        slope = fit.loglog_slope,
        stderr = fit.slope_stderr,
        grid = fit.n_grid,
    );
    println!("wrote scaling.json, scaling.csv to {}", args.out.display());
    Ok(())
}

/// Returns parsed from CSV plus asset names (header row or `asset_<i>`).
#[derive(Debug)]
struct ReturnsTable {
    returns: ReturnMatrix,
    asset_names: Vec<String>,
}

/// Read an `n x p` return matrix. Rows are time samples, columns assets; a
/// non-numeric first row is treated as a header. Errors carry 1-based
/// row/column locations.
fn read_returns_csv(path: &Path) -> Result<ReturnsTable, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|err| CliError::Data(format!("{}: {err}", path.display())))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut asset_names: Option<Vec<String>> = None;
    for (idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|err| CliError::Data(format!("{}: {err}", path.display())))?;
        let file_row = idx + 1;
        let mut parsed = Vec::with_capacity(record.len());
        let mut bad_cell: Option<(usize, String)> = None;
        for (col, cell) in record.iter().enumerate() {
            // Non-finite cells ("nan", "inf") are rejected like any other
            // non-numeric value.
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push(v),
                _ => {
                    bad_cell = Some((col + 1, cell.to_string()));
                    break;
                }
            }
        }
        match bad_cell {
            None => rows.push(parsed),
            Some((col, cell)) => {
                if idx == 0 {
                    // Non-numeric first row: header.
                    asset_names = Some(record.iter().map(|c| c.to_string()).collect());
                } else {
                    return Err(CliError::Data(format!(
                        "{}: row {file_row}, column {col}: cannot parse '{cell}' as a number",
                        path.display()
                    )));
                }
            }
        }
    }

    if rows.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least 2 data rows, found {}",
            path.display(),
            rows.len()
        )));
    }
    let p = rows[0].len();
    if p < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least 2 asset columns, found {p}",
            path.display()
        )));
    }
    if let Some(names) = &asset_names {
        if names.len() != p {
            return Err(CliError::Data(format!(
                "{}: header has {} columns but data rows have {p}",
                path.display(),
                names.len()
            )));
        }
    }

    let n = rows.len();
    let matrix = DMatrix::from_fn(n, p, |r, c| rows[r][c]);
    Ok(ReturnsTable {
        returns: ReturnMatrix::new(matrix),
        asset_names: asset_names
            .unwrap_or_else(|| (0..p).map(|i| format!("asset_{i}")).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp_csv(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    #[test]
    fn csv_reader_accepts_headerless_numeric_input() {
        let file = write_temp_csv("1,2\n3,4\n5,6\n");
        let table = read_returns_csv(file.path()).unwrap();
        assert_eq!(table.returns.n_samples(), 3);
        assert_eq!(table.returns.dim(), 2);
        assert_eq!(table.asset_names, vec!["asset_0", "asset_1"]);
    }

    #[test]
    fn csv_reader_detects_header_row() {
        let file = write_temp_csv("alpha,beta\n1,2\n3,4\n");
        let table = read_returns_csv(file.path()).unwrap();
        assert_eq!(table.asset_names, vec!["alpha", "beta"]);
        assert_eq!(table.returns.n_samples(), 2);
    }

    #[test]
    fn csv_reader_locates_bad_cells() {
        let file = write_temp_csv("1,2\n3,oops\n");
        let err = read_returns_csv(file.path()).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("row 2"), "{message}");
        assert!(message.contains("column 2"), "{message}");
        assert_eq!(err.exit_code(), EXIT_DATA);
    }

    #[test]
    fn csv_reader_rejects_non_finite_cells() {
        for cell in ["nan", "inf", "-inf"] {
            let file = write_temp_csv(&format!("1,2\n3,{cell}\n5,6\n"));
            let err = read_returns_csv(file.path()).unwrap_err();
            assert_eq!(err.exit_code(), EXIT_DATA, "{cell} accepted");
        }
    }

    #[test]
    fn csv_reader_rejects_ragged_rows() {
        let file = write_temp_csv("1,2\n3\n");
        let err = read_returns_csv(file.path()).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_DATA);
    }

    #[test]
    fn csv_reader_enforces_minimum_shape() {
        let file = write_temp_csv("1,2\n");
        assert_eq!(read_returns_csv(file.path()).unwrap_err().exit_code(), EXIT_DATA);
        let file = write_temp_csv("1\n2\n3\n");
        assert_eq!(read_returns_csv(file.path()).unwrap_err().exit_code(), EXIT_DATA);
    }

    #[test]
    fn experiment_errors_map_to_exit_codes() {
        let usage: CliError = ExperimentError::GridTooShort(2).into();
        assert_eq!(usage.exit_code(), EXIT_USAGE);
        let numerical: CliError = ExperimentError::SweepPointUnsolvable {
            n: 60,
            failed: 30,
            trials: 100,
            limit: 10.0,
        }
        .into();
        assert_eq!(numerical.exit_code(), EXIT_NUMERICAL);
    }

    #[test]
    fn presets_pin_the_reference_settings() {
        let fig1 = Preset::Fig1.spec();
        assert_eq!(fig1.p, 30);
        assert_eq!(fig1.n_values, vec![30, 3000]);
        assert_eq!(fig1.trials, 300);
        assert_eq!(fig1.estimators, vec![Estimator::Sample]);
        assert_eq!(fig1.sigma, SigmaSpec::Linspace { lo: 1.0, hi: 30.0 });

        let fig5 = Preset::Fig5.spec();
        assert_eq!(fig5.basis, BasisSpec::Haar);
        assert_eq!(fig5.estimators, vec![Estimator::Sample, Estimator::Locov2]);
        assert_eq!(fig5.n_values, vec![30]);
    }
}
