// Haar-random orthogonal matrices and synthetic return sampling.
//
// Draws an orthogonal basis by sign-corrected QR, checks its orthogonality
// residual, then realizes returns X = N D P and compares the sample
// covariance X'X/n against the ground truth as n grows.
//
// Run with: cargo run --example haar_sampling

use locov::{sample_haar_orthogonal, substream, NoiseDistribution, SpectralModel};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = 6;
    let mut rng = substream(7, 0, 0);
    let basis = sample_haar_orthogonal(p, &mut rng);

    let gram = basis.transpose() * &basis;
    let residual = (&gram - DMatrix::identity(p, p))
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    println!("Haar draw at p={p}: max |P'P - I| = {residual:.2e}, det = {:+.6}", basis.determinant());

    let variances: Vec<f64> = (1..=p).map(|k| k as f64).collect();
    let model = SpectralModel::with_basis(&variances, basis)?;
    let truth = model.covariance();

    println!("\nsample covariance error vs sample count (max entry deviation):");
    for n in [30, 300, 3000, 30_000] {
        let returns = model.sample_returns(n, NoiseDistribution::Gaussian, &mut rng);
        let sampled = returns.sample_covariance();
        let deviation = (sampled.matrix() - truth.matrix())
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        println!("  n = {n:>6}: {deviation:.4}  (p/n = {:.4})", p as f64 / n as f64);
    }
    Ok(())
}
