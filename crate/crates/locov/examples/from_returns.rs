// Estimating a portfolio from raw return observations.
//
// The ingestion path used by `locov estimate`: wrap the observations,
// center each column, form the sample covariance with divisor n, and run
// an estimator. Here the returns carry a planted factor structure so the
// pair votes have something to disagree about.
//
// Run with: cargo run --example from_returns

use locov::{
    free_optimal_weight, locov2, normalize, portfolio_risk, substream, NoiseDistribution,
    ReturnMatrix, SpectralModel,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Synthesize 48 observations of 8 assets; in practice these rows come
    // from a CSV of historical returns.
    let variances = [0.5, 0.8, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0];
    let model = SpectralModel::from_variances(&variances)?;
    let mut rng = substream(99, 0, 0);
    let synthetic = model.sample_returns(48, NoiseDistribution::Gaussian, &mut rng);

    let observations = ReturnMatrix::new(synthetic.matrix().clone());
    let centered = observations.center()?;
    let sample_cov = centered.sample_covariance();

    let sample = normalize(&free_optimal_weight(&sample_cov)?)?;
    let voted = locov2(&sample_cov)?;

    println!(
        "{} observations of {} assets (feature-to-sample ratio {:.2})\n",
        centered.n_samples(),
        centered.dim(),
        centered.dim() as f64 / centered.n_samples() as f64
    );
    println!("{:<8} {:>10} {:>10}", "asset", "sample", "locov2");
    for k in 0..centered.dim() {
        println!(
            "asset_{k:<2} {:>+10.4} {:>+10.4}",
            sample.values()[k],
            voted.weights.values()[k],
        );
    }
    println!(
        "\nin-sample risk: sample {:.5}, locov2 {:.5} ({} pair votes skipped)",
        portfolio_risk(&sample, &sample_cov)?.value(),
        portfolio_risk(&voted.weights, &sample_cov)?.value(),
        voted.skipped_subproblems,
    );
    Ok(())
}
