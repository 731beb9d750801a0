// Weight-error decay of the sample estimator.
//
// Sweeps the sample size at fixed p, records the median weight error per
// point and fits the log-log slope, which sits near -1/2: the error decays
// like sqrt(p/n). Also reports how often the free-weight error stays inside
// the condition-scaled sqrt(p/n) band.
//
// Run with: cargo run --example error_scaling

use locov::{scaling_sweep, BasisSpec, Estimator, NoiseDistribution, SigmaSpec, TrialConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = TrialConfig {
        p: 30,
        n: 60,
        sigma: SigmaSpec::Linspace { lo: 1.0, hi: 30.0 },
        basis: BasisSpec::Identity,
        noise: NoiseDistribution::Gaussian,
        trials: 200,
        seed: 5,
        estimators: vec![Estimator::Sample],
    };
    let grid = [60, 120, 240, 480, 960, 1920, 3840];
    let fit = scaling_sweep(&config, &grid)?;

    println!("median weight error of the sample estimator, p = {}:", config.p);
    println!("{:>6} {:>14} {:>10} {:>14}", "n", "median error", "p/n", "in band");
    for (i, &n) in fit.n_grid.iter().enumerate() {
        println!(
            "{n:>6} {:>14.5} {:>10.4} {:>13.1}%",
            fit.median_errors[i],
            config.p as f64 / n as f64,
            fit.free_weight_band_fraction[i] * 100.0,
        );
    }
    println!(
        "\nlog-log slope {:.3} +/- {:.3} (sqrt(p/n) decay corresponds to -0.5)",
        fit.loglog_slope, fit.slope_stderr,
    );
    Ok(())
}
