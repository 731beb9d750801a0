//! Closed-form solver against the independent KKT oracle, plus its
//! invariants as property tests.

mod common;

use common::{kkt_minimum_variance, max_abs_diff, random_spd};
use locov::{
    free_optimal_weight, normalize, optimal_risk, portfolio_risk, substream, PortfolioWeight,
    SpectralModel,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn normalized_weights_match_kkt_oracle() {
    for case in 0..20 {
        let p = 2 + (case as usize % 8);
        let cov = random_spd(p, 1000 + case);
        let ours = normalize(&free_optimal_weight(&cov).unwrap()).unwrap();
        let oracle = kkt_minimum_variance(&cov);
        assert!(
            max_abs_diff(ours.values(), &oracle) <= 1e-8,
            "case {case}: deviation {}",
            max_abs_diff(ours.values(), &oracle)
        );
    }
}

#[test]
fn five_asset_solve_matches_oracle_up_to_normalization() {
    let cov = random_spd(5, 42);
    let free = free_optimal_weight(&cov).unwrap();
    let oracle = kkt_minimum_variance(&cov);
    // The free weight is the oracle weight times the free-weight sum.
    let rescaled = &oracle * free.signed_sum();
    assert!(max_abs_diff(free.values(), &rescaled) <= 1e-8 * free.values().norm());
}

fn spd_strategy() -> impl Strategy<Value = (usize, u64)> {
    (2usize..8, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Any feasible perturbation of the optimum cannot reduce the risk.
    #[test]
    fn optimality_over_the_constraint_plane((p, seed) in spd_strategy()) {
        let cov = random_spd(p, seed);
        let free = free_optimal_weight(&cov).unwrap();
        let w_star = normalize(&free).unwrap();
        let best = optimal_risk(&free).unwrap().value();
        let mut rng = substream(seed, 0xfeed, 0);
        for _ in 0..8 {
            let mut direction = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
            let mean = direction.sum() / p as f64;
            for k in 0..p {
                direction[k] -= mean;
            }
            let t: f64 = rng.random_range(-2.0..2.0);
            let w = PortfolioWeight::new(w_star.values() + direction * t).unwrap();
            let risk = portfolio_risk(&w, &cov).unwrap().value();
            prop_assert!(risk >= best - 1e-10);
        }
    }

    // portfolio_risk(normalize(S), Sigma) equals 1 / sum(S).
    #[test]
    fn risk_identity_holds((p, seed) in spd_strategy()) {
        let cov = random_spd(p, seed);
        let free = free_optimal_weight(&cov).unwrap();
        let w = normalize(&free).unwrap();
        let direct = portfolio_risk(&w, &cov).unwrap().value();
        let closed = optimal_risk(&free).unwrap().value();
        prop_assert!((direct - closed).abs() <= 1e-9 * closed.abs());
    }

    // Scaling the covariance leaves weights unchanged and scales the risk.
    #[test]
    fn scale_covariance((p, seed) in spd_strategy(), exponent in -3.0f64..3.0) {
        let scale = 10f64.powf(exponent);
        let cov = random_spd(p, seed);
        let scaled = locov::CovarianceMatrix::new(cov.matrix() * scale).unwrap();

        let free = free_optimal_weight(&cov).unwrap();
        let free_scaled = free_optimal_weight(&scaled).unwrap();
        let w = normalize(&free).unwrap();
        let w_scaled = normalize(&free_scaled).unwrap();
        prop_assert!(max_abs_diff(w.values(), w_scaled.values()) <= 1e-10);

        let risk = optimal_risk(&free).unwrap().value();
        let risk_scaled = optimal_risk(&free_scaled).unwrap().value();
        prop_assert!((risk_scaled - scale * risk).abs() <= 1e-9 * (scale * risk).abs());
    }

    // On a diagonal covariance the weights follow the inverse variances.
    #[test]
    fn diagonal_law(seed in any::<u64>(), p in 2usize..9) {
        let mut rng = substream(seed, 0xd1a6, 0);
        let variances: Vec<f64> = (0..p).map(|_| rng.random_range(0.2..9.0)).collect();
        let cov = SpectralModel::from_variances(&variances).unwrap().covariance();
        let w = normalize(&free_optimal_weight(&cov).unwrap()).unwrap();
        let total: f64 = variances.iter().map(|v| 1.0 / v).sum();
        for (weight, variance) in w.values().iter().zip(&variances) {
            let expected = (1.0 / variance) / total;
            prop_assert!((weight - expected).abs() <= 1e-12);
        }
    }
}
