//! Plot-ready output files: CSV tables and JSON documents.
//!
//! Every number lands in CSV with 17 significant digits so a re-read is
//! lossless; JSON floats use the shortest exact representation. All files are
//! deterministic for a fixed configuration — the run timestamp lives only in
//! `manifest.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::experiment::{ErrorSummary, ExperimentOutput, ScalingFit, TrialOutcome};
use crate::minvar::PortfolioWeight;

/// Render a float with 17 significant digits (lossless round-trip).
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Configuration echo plus provenance; accompanies every output set.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config: C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &str, seed: u64, config: C) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            timestamp: None,
        }
    }

    /// Copy with the current wall-clock time attached (for `manifest.json`).
    pub fn stamped(&self) -> Manifest<C>
    where
        C: Clone,
    {
        Manifest {
            timestamp: Some(chrono::Utc::now().to_rfc3339()),
            ..self.clone()
        }
    }
}

/// Echoed `simulate` parameters, in flag syntax so a run is easy to repeat.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateEcho {
    pub p: usize,
    pub n_values: Vec<usize>,
    pub sigma: String,
    pub basis: String,
    pub noise: String,
    pub trials: usize,
    pub estimators: Vec<String>,
    pub fail_threshold: f64,
}

/// Echoed `estimate` parameters.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateEcho {
    pub input: String,
    pub estimator: String,
}

/// Echoed `sweep` parameters.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEcho {
    pub p: usize,
    pub n_grid: Vec<usize>,
    pub sigma: String,
    pub basis: String,
    pub noise: String,
    pub trials: usize,
}

#[derive(Debug, Serialize)]
pub struct SimulateSummaryDoc {
    pub manifest: Manifest<SimulateEcho>,
    pub runs: Vec<RunBlock>,
}

/// Per-sample-size block of a simulate summary.
#[derive(Debug, Serialize)]
pub struct RunBlock {
    pub n: usize,
    pub summaries: Vec<ErrorSummary>,
}

#[derive(Debug, Serialize)]
pub struct EstimateSummaryDoc {
    pub manifest: Manifest<EstimateEcho>,
    pub n_samples: usize,
    pub n_assets: usize,
    pub in_sample_risk: f64,
    pub skipped_subproblems: usize,
}

#[derive(Debug, Serialize)]
pub struct ScalingDoc {
    pub manifest: Manifest<SweepEcho>,
    #[serde(flatten)]
    pub fit: ScalingFit,
}

pub fn write_json<D: Serialize>(path: &Path, doc: &D) -> std::io::Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut writer, doc)?;
    writer.write_all(b"\n")?;
    writer.flush()
}

/// One row per (sample size, trial, estimator), scalars only; the per-asset
/// view lives in the spread table.
pub fn write_trials_csv(
    path: &Path,
    runs: &[(usize, ExperimentOutput)],
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "n",
        "trial_id",
        "estimator",
        "status",
        "sample_risk",
        "oracle_risk",
        "mean_abs_error",
        "skipped_subproblems",
        "failure_reason",
    ])?;
    for (n, output) in runs {
        for record in &output.records {
            match &record.outcome {
                TrialOutcome::Estimate(est) => {
                    let p = est.weight_error.len() as f64;
                    let mean_abs = est.weight_error.iter().map(|e| e.abs()).sum::<f64>() / p;
                    writer.write_record([
                        n.to_string(),
                        record.trial_id.to_string(),
                        record.estimator.to_string(),
                        "ok".to_string(),
                        format_float(est.sample_risk),
                        format_float(est.oracle_risk),
                        format_float(mean_abs),
                        est.skipped_subproblems.to_string(),
                        String::new(),
                    ])?;
                }
                TrialOutcome::Failed { reason } => {
                    writer.write_record([
                        n.to_string(),
                        record.trial_id.to_string(),
                        record.estimator.to_string(),
                        "failed".to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        reason.clone(),
                    ])?;
                }
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Per-asset weight spread table: true weight plus each estimator's mean and
/// standard deviation across trials.
pub fn write_spread_csv(
    path: &Path,
    runs: &[(usize, ExperimentOutput)],
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "n",
        "estimator",
        "asset_index",
        "true_weight",
        "mean_est_weight",
        "std_est_weight",
    ])?;
    for (n, output) in runs {
        for summary in &output.summaries {
            for asset in 0..summary.true_weights.len() {
                let true_weight = summary.true_weights[asset];
                writer.write_record([
                    n.to_string(),
                    summary.estimator.to_string(),
                    asset.to_string(),
                    format_float(true_weight),
                    format_float(true_weight + summary.per_asset_mean_error[asset]),
                    format_float(summary.per_asset_std_error[asset]),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// `asset,weight` table for an estimated portfolio.
pub fn write_weights_csv(
    path: &Path,
    asset_names: &[String],
    weights: &PortfolioWeight,
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["asset", "weight"])?;
    for (name, weight) in asset_names.iter().zip(weights.values().iter()) {
        writer.write_record([name.clone(), format_float(*weight)])?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-grid-point median-error table of a scaling sweep.
pub fn write_scaling_csv(path: &Path, fit: &ScalingFit) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "n",
        "median_error",
        "free_weight_band_fraction",
        "failed_trials",
    ])?;
    for (i, &n) in fit.n_grid.iter().enumerate() {
        writer.write_record([
            n.to_string(),
            format_float(fit.median_errors[i]),
            format_float(fit.free_weight_band_fraction[i]),
            fit.failed_per_point[i].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_lossless() {
        for x in [
            0.1,
            1.0 / 3.0,
            -7.25e-13,
            123456.789,
            f64::MIN_POSITIVE,
            0.625,
        ] {
            let rendered = format_float(x);
            assert_eq!(rendered.parse::<f64>().unwrap(), x, "{rendered}");
        }
    }
}
