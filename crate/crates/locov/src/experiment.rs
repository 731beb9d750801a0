//! Monte Carlo harness for estimator error statistics and scaling fits.
//!
//! A [`TrialConfig`] fixes a ground-truth model, a sample size and a set of
//! estimators. Every trial draws a fresh return matrix from a substream keyed
//! by `(seed, trial)`, forms the sample covariance and runs each estimator
//! with its own `(seed, estimator, trial)` stream, so results are identical
//! for any execution order or parallelism degree. Aggregation is a
//! deterministic fold in trial order.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::covmodel::{
    sample_haar_orthogonal, CovarianceMatrix, NoiseDistribution, SpectralModel,
};
use crate::minvar::{
    free_optimal_weight, normalize, optimal_risk, portfolio_risk, MinVarError, PortfolioWeight,
};
use crate::stream::substream;
use crate::voting::{locov2, locovk_with_repetitions, LocovError, SubsetUpdate, VotingEstimate};

/// Band constant for the free-weight error bound
/// `||S_hat - S||_2 <= C * ||S||_2 * (sd_max / sd_min) * sqrt(p / n)`.
pub const FREE_WEIGHT_BAND_CONSTANT: f64 = 10.0;

/// A sweep point fails if more than this fraction of trials is unsolvable.
pub const SWEEP_FAILURE_LIMIT: f64 = 0.10;

const STREAM_BASIS: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_ESTIMATOR_BASE: u64 = 2;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ground-truth portfolio is degenerate: {0}")]
    DegenerateTruth(#[from] MinVarError),
    #[error("invalid ground-truth model: {0}")]
    InvalidModel(#[from] crate::covmodel::ModelError),
    #[error("scaling grid needs at least 3 points, got {0}")]
    GridTooShort(usize),
    #[error("scaling grid must be strictly increasing")]
    GridNotIncreasing,
    #[error("scaling grid must span at least one decade (max/min >= 10)")]
    GridTooNarrow,
    #[error("scaling grid point n={n} is below 2p={min}; sweeps need n >= 2p")]
    GridPointTooSmall { n: usize, min: usize },
    #[error(
        "sweep point n={n}: {failed} of {trials} trials unsolvable, above the {limit:.0}% limit"
    )]
    SweepPointUnsolvable {
        n: usize,
        failed: usize,
        trials: usize,
        limit: f64,
    },
}

/// Eigenvalue (variance) spectrum of the ground-truth covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    /// All variances one.
    Identity,
    /// Variances equally spaced from `lo` to `hi` inclusive.
    Linspace { lo: f64, hi: f64 },
    /// Explicit variance list; its length must equal `p`.
    List(Vec<f64>),
}

impl SigmaSpec {
    pub fn variances(&self, p: usize) -> Result<Vec<f64>, ExperimentError> {
        if p < 2 {
            return Err(ExperimentError::InvalidConfig(format!(
                "need at least 2 assets, got p = {p}"
            )));
        }
        match self {
            SigmaSpec::Identity => Ok(vec![1.0; p]),
            SigmaSpec::Linspace { lo, hi } => {
                let valid = lo.is_finite() && hi.is_finite() && *lo > 0.0 && *hi > 0.0;
                if !valid {
                    return Err(ExperimentError::InvalidConfig(format!(
                        "linspace variances must be positive, got {lo}..{hi}"
                    )));
                }
                let step = (hi - lo) / (p - 1) as f64;
                Ok((0..p).map(|k| lo + step * k as f64).collect())
            }
            SigmaSpec::List(values) => {
                if values.len() != p {
                    return Err(ExperimentError::InvalidConfig(format!(
                        "sigma list has {} entries but p = {p}",
                        values.len()
                    )));
                }
                if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
                    return Err(ExperimentError::InvalidConfig(format!(
                        "sigma list entries must be positive, got {bad}"
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

impl std::fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigmaSpec::Identity => f.write_str("identity"),
            SigmaSpec::Linspace { lo, hi } => write!(f, "linspace:{lo}:{hi}"),
            SigmaSpec::List(values) => {
                f.write_str("list:")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::str::FromStr for SigmaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "identity" {
            return Ok(SigmaSpec::Identity);
        }
        if let Some(rest) = s.strip_prefix("linspace:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(format!("expected linspace:LO:HI, got '{s}'"));
            }
            let lo = parts[0]
                .parse::<f64>()
                .map_err(|e| format!("bad linspace lower bound '{}': {e}", parts[0]))?;
            let hi = parts[1]
                .parse::<f64>()
                .map_err(|e| format!("bad linspace upper bound '{}': {e}", parts[1]))?;
            return Ok(SigmaSpec::Linspace { lo, hi });
        }
        if let Some(rest) = s.strip_prefix("list:") {
            let values = rest
                .split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| format!("bad sigma list entry '{v}': {e}"))
                })
                .collect::<Result<Vec<f64>, String>>()?;
            if values.is_empty() {
                return Err("sigma list must not be empty".to_string());
            }
            return Ok(SigmaSpec::List(values));
        }
        Err(format!(
            "unknown sigma spec '{s}' (expected identity, linspace:LO:HI or list:V1,V2,...)"
        ))
    }
}

/// Orthogonal basis of the ground-truth covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSpec {
    Identity,
    /// One Haar-distributed orthogonal matrix, drawn once per configuration.
    Haar,
}

impl std::fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisSpec::Identity => f.write_str("identity"),
            BasisSpec::Haar => f.write_str("haar"),
        }
    }
}

impl std::str::FromStr for BasisSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(BasisSpec::Identity),
            "haar" => Ok(BasisSpec::Haar),
            other => Err(format!(
                "unknown basis spec '{other}' (expected identity or haar)"
            )),
        }
    }
}

/// Portfolio estimators the harness can benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Closed-form solve on the full sample covariance.
    Sample,
    /// Pair voting.
    Locov2,
    /// Random `k`-subset voting with the half-blend ledger update.
    LocovK { k: usize },
    /// Random `k`-subset voting with running-mean ledger updates.
    LocovKRunningMean { k: usize },
}

impl Estimator {
    /// Distinct stream tag per estimator, mixed into trial substreams.
    fn stream_tag(self) -> u64 {
        match self {
            Estimator::Sample => 0,
            Estimator::Locov2 => 1,
            Estimator::LocovK { k } => ((k as u64) << 2) | 2,
            Estimator::LocovKRunningMean { k } => ((k as u64) << 2) | 3,
        }
    }

    /// Run the estimator on a sample covariance. The returned free-weight
    /// sum is populated only for [`Estimator::Sample`], where the optimal
    /// risk identity ties it to the weights.
    pub fn estimate<R: rand::Rng + ?Sized>(
        self,
        cov: &CovarianceMatrix,
        rng: &mut R,
    ) -> Result<(VotingEstimate, Option<f64>), EstimateError> {
        match self {
            Estimator::Sample => {
                let free = free_optimal_weight(cov)?;
                let weights = normalize(&free)?;
                Ok((
                    VotingEstimate {
                        weights,
                        skipped_subproblems: 0,
                    },
                    Some(free.signed_sum()),
                ))
            }
            Estimator::Locov2 => Ok((locov2(cov)?, None)),
            Estimator::LocovK { k } => Ok((
                locovk_with_repetitions(cov, k, cov.dim(), SubsetUpdate::HalfBlend, rng)?,
                None,
            )),
            Estimator::LocovKRunningMean { k } => Ok((
                locovk_with_repetitions(cov, k, cov.dim(), SubsetUpdate::RunningMean, rng)?,
                None,
            )),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Estimator::Sample => f.write_str("sample"),
            Estimator::Locov2 => f.write_str("locov2"),
            Estimator::LocovK { k } => write!(f, "locovk:{k}"),
            Estimator::LocovKRunningMean { k } => write!(f, "locovk-rm:{k}"),
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sample" => return Ok(Estimator::Sample),
            "locov2" => return Ok(Estimator::Locov2),
            _ => {}
        }
        for (prefix, running_mean) in [("locovk:", false), ("locovk-rm:", true)] {
            if let Some(rest) = s.strip_prefix(prefix) {
                let k = rest
                    .parse::<usize>()
                    .map_err(|e| format!("bad subset size '{rest}': {e}"))?;
                return Ok(if running_mean {
                    Estimator::LocovKRunningMean { k }
                } else {
                    Estimator::LocovK { k }
                });
            }
        }
        Err(format!(
            "unknown estimator '{s}' (expected sample, locov2, locovk:<k> or locovk-rm:<k>)"
        ))
    }
}

impl Serialize for Estimator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    MinVar(#[from] MinVarError),
    #[error(transparent)]
    Voting(#[from] LocovError),
}

/// One Monte Carlo experiment: ground truth, sampling regime, trial count
/// and the estimators to benchmark.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub p: usize,
    pub n: usize,
    pub sigma: SigmaSpec,
    pub basis: BasisSpec,
    pub noise: NoiseDistribution,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.p < 2 {
            return Err(ExperimentError::InvalidConfig(format!(
                "need at least 2 assets, got p = {}",
                self.p
            )));
        }
        if self.n < 1 {
            return Err(ExperimentError::InvalidConfig(
                "need at least one sample row".to_string(),
            ));
        }
        if self.trials < 1 {
            return Err(ExperimentError::InvalidConfig(
                "need at least one trial".to_string(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(ExperimentError::InvalidConfig(
                "estimator set must not be empty".to_string(),
            ));
        }
        for (pos, est) in self.estimators.iter().enumerate() {
            if self.estimators[..pos].contains(est) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "estimator '{est}' listed twice"
                )));
            }
            if let Estimator::LocovK { k } | Estimator::LocovKRunningMean { k } = est {
                if *k < 3 || *k > self.p {
                    return Err(ExperimentError::InvalidConfig(format!(
                        "estimator '{est}' needs 3 <= k <= p = {}",
                        self.p
                    )));
                }
            }
        }
        self.sigma.variances(self.p)?;
        Ok(())
    }

    /// Materialize the ground-truth model. The Haar basis, when requested,
    /// is drawn once from the basis substream of this configuration's seed.
    pub fn model(&self) -> Result<SpectralModel, ExperimentError> {
        let variances = self.sigma.variances(self.p)?;
        let model = match self.basis {
            BasisSpec::Identity => SpectralModel::from_variances(&variances)?,
            BasisSpec::Haar => {
                let basis =
                    sample_haar_orthogonal(self.p, &mut substream(self.seed, STREAM_BASIS, 0));
                SpectralModel::with_basis(&variances, basis)?
            }
        };
        Ok(model)
    }
}

/// Random stream an estimator uses in a given trial.
pub fn estimator_stream(seed: u64, estimator: Estimator, trial: u64) -> rand_chacha::ChaCha8Rng {
    substream(seed, STREAM_ESTIMATOR_BASE + estimator.stream_tag(), trial)
}

/// Successful per-trial estimator output.
#[derive(Debug, Clone)]
pub struct EstimateRecord {
    pub weights: PortfolioWeight,
    /// In-sample variance of the weights under the trial's sample covariance.
    pub sample_risk: f64,
    /// Variance of the weights under the true covariance.
    pub oracle_risk: f64,
    /// Estimated minus true weights, per asset.
    pub weight_error: DVector<f64>,
    pub skipped_subproblems: usize,
    /// Signed sum of the free weight, for the sample estimator only.
    pub free_signed_sum: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum TrialOutcome {
    Estimate(EstimateRecord),
    Failed { reason: String },
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub estimator: Estimator,
    pub outcome: TrialOutcome,
}

/// Aggregated error statistics for one estimator, against the analytic truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub estimator: Estimator,
    pub per_asset_mean_error: Vec<f64>,
    pub per_asset_std_error: Vec<f64>,
    /// Mean over trials and assets of the squared weight error.
    pub mse: f64,
    /// Mean over trials of the per-trial mean absolute weight error.
    pub mean_abs_error: f64,
    /// Fraction of trials whose in-sample risk is strictly below the truth.
    pub risk_underestimate_freq: f64,
    pub successful_trials: usize,
    pub failed_trials: usize,
    pub true_weights: Vec<f64>,
    pub true_risk: f64,
}

/// Full output of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub true_weights: PortfolioWeight,
    pub true_risk: f64,
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<ErrorSummary>,
}

impl ExperimentOutput {
    pub fn summary(&self, estimator: Estimator) -> Option<&ErrorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }
}

/// Run all trials of a configuration and aggregate per-estimator summaries.
///
/// Solver failures inside a trial are recorded as flagged records, never
/// silently dropped; configuration problems fail fast.
pub fn run_experiment(config: &TrialConfig) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let model = config.model()?;
    let truth = model.covariance();
    let true_free = free_optimal_weight(&truth)?;
    let true_weights = normalize(&true_free)?;
    let true_risk = optimal_risk(&true_free)?.value();

    let records: Vec<TrialRecord> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &model, &truth, &true_weights, trial))
        .flatten()
        .collect();

    let summaries = config
        .estimators
        .iter()
        .map(|&estimator| summarize(&records, estimator, &true_weights, true_risk))
        .collect();

    Ok(ExperimentOutput {
        true_weights,
        true_risk,
        records,
        summaries,
    })
}

fn run_trial(
    config: &TrialConfig,
    model: &SpectralModel,
    truth: &CovarianceMatrix,
    true_weights: &PortfolioWeight,
    trial: usize,
) -> Vec<TrialRecord> {
    let mut noise_rng = substream(config.seed, STREAM_NOISE, trial as u64);
    let returns = model.sample_returns(config.n, config.noise, &mut noise_rng);
    let sample_cov = returns.sample_covariance();

    config
        .estimators
        .iter()
        .map(|&estimator| {
            let mut rng = estimator_stream(config.seed, estimator, trial as u64);
            let outcome = match estimator.estimate(&sample_cov, &mut rng) {
                Ok((estimate, free_signed_sum)) => {
                    let sample_risk = portfolio_risk(&estimate.weights, &sample_cov)
                        .expect("dimensions match by construction")
                        .value();
                    let oracle_risk = portfolio_risk(&estimate.weights, truth)
                        .expect("dimensions match by construction")
                        .value();
                    TrialOutcome::Estimate(EstimateRecord {
                        weight_error: estimate.weights.values() - true_weights.values(),
                        sample_risk,
                        oracle_risk,
                        skipped_subproblems: estimate.skipped_subproblems,
                        free_signed_sum,
                        weights: estimate.weights,
                    })
                }
                Err(err) => TrialOutcome::Failed {
                    reason: err.to_string(),
                },
            };
            TrialRecord {
                trial_id: trial,
                estimator,
                outcome,
            }
        })
        .collect()
}

fn summarize(
    records: &[TrialRecord],
    estimator: Estimator,
    true_weights: &PortfolioWeight,
    true_risk: f64,
) -> ErrorSummary {
    let p = true_weights.len();
    let mut successful = 0usize;
    let mut failed = 0usize;
    let mut mean_error = vec![0.0; p];
    let mut sq_error = vec![0.0; p];
    let mut mse_acc = 0.0;
    let mut abs_acc = 0.0;
    let mut underestimates = 0usize;

    for record in records.iter().filter(|r| r.estimator == estimator) {
        match &record.outcome {
            TrialOutcome::Estimate(est) => {
                successful += 1;
                let mut trial_sq = 0.0;
                let mut trial_abs = 0.0;
                for k in 0..p {
                    let e = est.weight_error[k];
                    mean_error[k] += e;
                    sq_error[k] += e * e;
                    trial_sq += e * e;
                    trial_abs += e.abs();
                }
                mse_acc += trial_sq / p as f64;
                abs_acc += trial_abs / p as f64;
                if est.sample_risk < true_risk {
                    underestimates += 1;
                }
            }
            TrialOutcome::Failed { .. } => failed += 1,
        }
    }

    let count = successful as f64;
    let (per_asset_mean_error, per_asset_std_error, mse, mean_abs_error, freq) = if successful > 0
    {
        let means: Vec<f64> = mean_error.iter().map(|s| s / count).collect();
        let stds: Vec<f64> = sq_error
            .iter()
            .zip(&means)
            .map(|(sq, m)| {
                if successful > 1 {
                    ((sq - count * m * m) / (count - 1.0)).max(0.0).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        (
            means,
            stds,
            mse_acc / count,
            abs_acc / count,
            underestimates as f64 / count,
        )
    } else {
        (vec![f64::NAN; p], vec![f64::NAN; p], f64::NAN, f64::NAN, 0.0)
    };

    ErrorSummary {
        estimator,
        per_asset_mean_error,
        per_asset_std_error,
        mse,
        mean_abs_error,
        risk_underestimate_freq: freq,
        successful_trials: successful,
        failed_trials: failed,
        true_weights: true_weights.values().iter().cloned().collect(),
        true_risk,
    }
}

/// Pairwise comparison report across the configured estimators.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub output: ExperimentOutput,
    pub win_rates: Vec<WinRate>,
}

/// Fraction of trials (both estimators solvable) in which `a`'s mean
/// absolute weight error was strictly below `b`'s.
#[derive(Debug, Clone, Serialize)]
pub struct WinRate {
    pub a: Estimator,
    pub b: Estimator,
    pub a_win_rate: f64,
    pub compared_trials: usize,
}

/// Run the experiment and rank estimators by pairwise win rate.
pub fn compare_estimators(config: &TrialConfig) -> Result<ComparisonReport, ExperimentError> {
    if config.estimators.len() < 2 {
        return Err(ExperimentError::InvalidConfig(
            "estimator comparison needs at least 2 estimators".to_string(),
        ));
    }
    let output = run_experiment(config)?;

    let mean_abs = |record: &TrialRecord| match &record.outcome {
        TrialOutcome::Estimate(est) => {
            Some(est.weight_error.iter().map(|e| e.abs()).sum::<f64>() / est.weight_error.len() as f64)
        }
        TrialOutcome::Failed { .. } => None,
    };
    let per_trial: Vec<Vec<Option<f64>>> = config
        .estimators
        .iter()
        .map(|&est| {
            output
                .records
                .iter()
                .filter(|r| r.estimator == est)
                .map(mean_abs)
                .collect()
        })
        .collect();

    let mut win_rates = Vec::new();
    for (ia, &a) in config.estimators.iter().enumerate() {
        for (ib, &b) in config.estimators.iter().enumerate() {
            if ia == ib {
                continue;
            }
            let mut wins = 0usize;
            let mut compared = 0usize;
            for (ea, eb) in per_trial[ia].iter().zip(&per_trial[ib]) {
                if let (Some(ea), Some(eb)) = (ea, eb) {
                    compared += 1;
                    if ea < eb {
                        wins += 1;
                    }
                }
            }
            win_rates.push(WinRate {
                a,
                b,
                a_win_rate: if compared > 0 {
                    wins as f64 / compared as f64
                } else {
                    f64::NAN
                },
                compared_trials: compared,
            });
        }
    }

    Ok(ComparisonReport { output, win_rates })
}

/// Median error of the sample estimator across a sample-size grid, with a
/// log-log least-squares slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub n_grid: Vec<usize>,
    /// Per grid point: median over trials of the mean absolute weight error.
    pub median_errors: Vec<f64>,
    pub loglog_slope: f64,
    pub slope_stderr: f64,
    /// Per grid point: fraction of solvable trials inside the free-weight
    /// error band with constant [`FREE_WEIGHT_BAND_CONSTANT`].
    pub free_weight_band_fraction: Vec<f64>,
    pub band_constant: f64,
    pub trials_per_point: usize,
    pub failed_per_point: Vec<usize>,
}

/// Sweep the sample estimator over `n_grid` and fit the error-decay slope.
///
/// The grid must hold at least three strictly increasing points spanning a
/// decade, all at least `2p` so the unsolvable-trial rate stays negligible.
/// Only the sample estimator is swept; `config.estimators` is ignored.
pub fn scaling_sweep(
    config: &TrialConfig,
    n_grid: &[usize],
) -> Result<ScalingFit, ExperimentError> {
    if n_grid.len() < 3 {
        return Err(ExperimentError::GridTooShort(n_grid.len()));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::GridNotIncreasing);
    }
    let (lo, hi) = (n_grid[0], n_grid[n_grid.len() - 1]);
    if hi < 10 * lo {
        return Err(ExperimentError::GridTooNarrow);
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 2 * config.p) {
        return Err(ExperimentError::GridPointTooSmall {
            n,
            min: 2 * config.p,
        });
    }

    let base = TrialConfig {
        estimators: vec![Estimator::Sample],
        ..config.clone()
    };
    base.validate()?;
    let model = base.model()?;
    let true_free = free_optimal_weight(&model.covariance())?;
    let free_norm = true_free.values().norm();
    let sd_ratio = model.sd_ratio();

    let mut median_errors = Vec::with_capacity(n_grid.len());
    let mut band_fractions = Vec::with_capacity(n_grid.len());
    let mut failed_per_point = Vec::with_capacity(n_grid.len());

    for &n in n_grid {
        let point_config = TrialConfig { n, ..base.clone() };
        let output = run_experiment(&point_config)?;

        let mut errors = Vec::with_capacity(point_config.trials);
        let mut in_band = 0usize;
        let mut failed = 0usize;
        let band = FREE_WEIGHT_BAND_CONSTANT
            * free_norm
            * sd_ratio
            * (point_config.p as f64 / n as f64).sqrt();
        for record in &output.records {
            match &record.outcome {
                TrialOutcome::Estimate(est) => {
                    errors.push(
                        est.weight_error.iter().map(|e| e.abs()).sum::<f64>()
                            / point_config.p as f64,
                    );
                    let signed_sum = est
                        .free_signed_sum
                        .expect("sample estimator records its free-weight sum");
                    let free_error =
                        (est.weights.values() * signed_sum - true_free.values()).norm();
                    if free_error <= band {
                        in_band += 1;
                    }
                }
                TrialOutcome::Failed { .. } => failed += 1,
            }
        }
        if (failed as f64) > SWEEP_FAILURE_LIMIT * point_config.trials as f64 {
            return Err(ExperimentError::SweepPointUnsolvable {
                n,
                failed,
                trials: point_config.trials,
                limit: SWEEP_FAILURE_LIMIT * 100.0,
            });
        }
        median_errors.push(median(&mut errors));
        band_fractions.push(in_band as f64 / errors.len().max(1) as f64);
        failed_per_point.push(failed);
    }

    let xs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = median_errors.iter().map(|&e| e.ln()).collect();
    let (loglog_slope, slope_stderr) = fit_line_slope(&xs, &ys);

    Ok(ScalingFit {
        n_grid: n_grid.to_vec(),
        median_errors,
        loglog_slope,
        slope_stderr,
        free_weight_band_fraction: band_fractions,
        band_constant: FREE_WEIGHT_BAND_CONSTANT,
        trials_per_point: config.trials,
        failed_per_point,
    })
}

fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    values.sort_by(|a, b| a.partial_cmp(b).expect("errors are finite"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Least-squares slope of `y` on `x` with its standard error.
fn fit_line_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let stderr = (rss / dof / sxx).sqrt();
    (slope, stderr)
}
