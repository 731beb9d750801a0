// Closed-form minimum-variance portfolios.
//
// Builds a diagonal and a dense covariance, solves for the optimal weights
// and shows the risk identity: the minimum portfolio variance equals the
// reciprocal of the free weight's sum.
//
// Run with: cargo run --example closed_form

use locov::{
    free_optimal_weight, normalize, optimal_risk, portfolio_risk, sample_haar_orthogonal,
    substream, SpectralModel,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Independent assets with variances 1..5: weights follow the inverse
    // variances exactly.
    let variances = [1.0, 2.0, 3.0, 4.0, 5.0];
    let diagonal = SpectralModel::from_variances(&variances)?.covariance();
    let free = free_optimal_weight(&diagonal)?;
    let weights = normalize(&free)?;
    let risk = optimal_risk(&free)?;

    println!("diagonal covariance, variances {variances:?}");
    for (k, w) in weights.values().iter().enumerate() {
        println!("  asset {k}: weight {w:+.4} (variance {})", variances[k]);
    }
    println!("  minimum risk {:.6} = 1 / {:.6}", risk.value(), free.signed_sum());

    // The same spectrum rotated by a Haar-random orthogonal basis: the
    // closed form handles any symmetric positive-definite covariance, and
    // negative (short) positions appear naturally.
    let basis = sample_haar_orthogonal(5, &mut substream(42, 0, 0));
    let dense = SpectralModel::with_basis(&variances, basis)?.covariance();
    let free = free_optimal_weight(&dense)?;
    let weights = normalize(&free)?;

    println!("\nsame spectrum under a Haar-random basis");
    for (k, w) in weights.values().iter().enumerate() {
        println!("  asset {k}: weight {w:+.4}");
    }
    let closed = optimal_risk(&free)?.value();
    let direct = portfolio_risk(&weights, &dense)?.value();
    println!("  risk via 1/sum(S) {closed:.6}, via w'Sigma w {direct:.6}");
    Ok(())
}
