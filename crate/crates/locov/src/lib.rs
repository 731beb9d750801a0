//! Minimum-variance portfolios from noisy covariance estimates.
//!
//! When the number of assets `p` is comparable to the number of return
//! samples `n`, the sample covariance carries enough noise that the
//! closed-form minimum-variance weights become unreliable: their error decays
//! only like `sqrt(p / n)`, and the in-sample risk systematically
//! underestimates the true risk. This crate provides
//!
//! - the closed-form solver (free optimal weight, normalized portfolio
//!   weight, minimum risk) in [`minvar`],
//! - synthetic ground-truth covariance models, Haar-random bases and return
//!   sampling in [`covmodel`],
//! - the LoCoV family of low dimension covariance voting estimators in
//!   [`voting`], which solve many small sub-portfolio problems (whose
//!   feature-to-sample ratio `k/n` stays small) and aggregate their relative
//!   weights by uniform voting,
//! - a reproducible Monte Carlo harness with error summaries, estimator
//!   comparisons and error-scaling fits in [`experiment`],
//! - the `locov` command-line tool in [`cli`].
//!
//! The `examples/` directory holds one runnable walkthrough per capability;
//! start with `closed_form` and `voting_estimators`.

pub mod cli;
pub mod covmodel;
pub mod experiment;
pub mod minvar;
pub mod report;
pub mod stream;
pub mod voting;

pub use covmodel::{
    sample_haar_orthogonal, CovarianceMatrix, ModelError, NoiseDistribution, ReturnMatrix,
    SpectralModel,
};
pub use experiment::{
    compare_estimators, run_experiment, scaling_sweep, BasisSpec, ComparisonReport, ErrorSummary,
    Estimator, ExperimentError, ExperimentOutput, ScalingFit, SigmaSpec, TrialConfig,
};
pub use minvar::{
    free_optimal_weight, normalize, optimal_risk, portfolio_risk, FreeWeight, MinVarError,
    PortfolioWeight, RiskValue,
};
pub use stream::substream;
pub use voting::{
    locov2, locovk, locovk_running_mean, locovk_with_repetitions, subproblem_weights, LocovError,
    SubsetUpdate, VoteLedger, VotingEstimate,
};
