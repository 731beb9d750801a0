//! Voting estimators against the KKT oracle and their invariants.

mod common;

use common::{kkt_minimum_variance, max_abs_diff, random_spd};
use locov::{
    locov2, locovk, locovk_running_mean, subproblem_weights, substream, CovarianceMatrix,
    SpectralModel,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn three_asset_subproblem_matches_kkt_oracle() {
    for case in 0..12 {
        let cov = random_spd(6, 2000 + case);
        let index_set = [5usize, 0, 3];
        let votes = subproblem_weights(&cov, &index_set).unwrap();
        let block = cov.principal_submatrix(&index_set);
        let oracle = kkt_minimum_variance(&block);
        assert!(
            max_abs_diff(&votes, &oracle) <= 1e-8,
            "case {case}: deviation {}",
            max_abs_diff(&votes, &oracle)
        );
    }
}

#[test]
fn locov2_is_exactly_permutation_equivariant() {
    let cov = random_spd(6, 77);
    let perm: Vec<usize> = vec![3, 0, 5, 1, 4, 2];
    let mut permuted = DMatrix::zeros(6, 6);
    for (a, &i) in perm.iter().enumerate() {
        for (b, &j) in perm.iter().enumerate() {
            permuted[(a, b)] = cov.matrix()[(i, j)];
        }
    }
    let permuted = CovarianceMatrix::new(permuted).unwrap();

    let base = locov2(&cov).unwrap();
    let shuffled = locov2(&permuted).unwrap();
    for (a, &i) in perm.iter().enumerate() {
        // Summation order differs between the two runs, so agreement is
        // exact only up to round-off.
        assert!(
            (shuffled.weights.values()[a] - base.weights.values()[i]).abs() <= 1e-13,
            "asset {i} moved under permutation"
        );
    }
}

#[test]
fn locovk_mean_weights_track_asset_labels_under_permutation() {
    // The subset-voting scan is position-dependent (votes are taken as the
    // scan proceeds and the half-blend favors recent updates), so relabeled
    // runs agree in the mean only up to a small positional bias, measured
    // around 1e-2 at p = 5. The check below compares per-asset means over
    // many independent seeds at 3 standard errors plus that allowance; a
    // label-handling bug would miss by the weight spread itself (~1e-1).
    const POSITIONAL_BIAS_ALLOWANCE: f64 = 0.03;

    let p = 5;
    let cov = random_spd(p, 501);
    let perm: Vec<usize> = vec![2, 4, 0, 3, 1];
    let mut permuted = DMatrix::zeros(p, p);
    for (a, &i) in perm.iter().enumerate() {
        for (b, &j) in perm.iter().enumerate() {
            permuted[(a, b)] = cov.matrix()[(i, j)];
        }
    }
    let permuted = CovarianceMatrix::new(permuted).unwrap();

    let seeds = 300;
    let mut diffs: Vec<Vec<f64>> = (0..p).map(|_| Vec::with_capacity(seeds)).collect();
    for s in 0..seeds {
        let base = locovk(&cov, 3, &mut substream(s as u64, 0xbeef, 0)).unwrap();
        let shuffled = locovk(&permuted, 3, &mut substream(s as u64, 0xbeef, 1)).unwrap();
        for (a, &i) in perm.iter().enumerate() {
            diffs[a].push(shuffled.weights.values()[a] - base.weights.values()[i]);
        }
    }
    for (a, samples) in diffs.iter().enumerate() {
        let m = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / m;
        let var = samples.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (m - 1.0);
        let stderr = (var / m).sqrt();
        assert!(
            mean.abs() <= 3.0 * stderr + POSITIONAL_BIAS_ALLOWANCE,
            "asset {a}: mean diff {mean:.3e} exceeds 3 SE {:.3e} plus allowance",
            3.0 * stderr
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn voting_outputs_sum_to_one(seed in any::<u64>(), p in 4usize..9) {
        let cov = random_spd(p, seed);
        let pair = locov2(&cov).unwrap();
        prop_assert!((pair.weights.values().sum() - 1.0).abs() <= 1e-10);
        let subset = locovk(&cov, 3, &mut substream(seed, 0xcafe, 0)).unwrap();
        prop_assert!((subset.weights.values().sum() - 1.0).abs() <= 1e-10);
        let running = locovk_running_mean(&cov, 4.min(p), &mut substream(seed, 0xcafe, 1)).unwrap();
        prop_assert!((running.weights.values().sum() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn locov2_is_scale_invariant(seed in any::<u64>(), p in 2usize..8, exponent in -3.0f64..3.0) {
        let scale = 10f64.powf(exponent);
        let cov = random_spd(p, seed);
        let scaled = CovarianceMatrix::new(cov.matrix() * scale).unwrap();
        let base = locov2(&cov).unwrap();
        let rescaled = locov2(&scaled).unwrap();
        prop_assert!(
            max_abs_diff(base.weights.values(), rescaled.weights.values()) <= 1e-10
        );
    }

    // Hand trace on exactly diagonal covariances:
    // V_i = (1/p) (1/2 + sum_{j != i} sigma_j^2 / (sigma_i^2 + sigma_j^2)).
    #[test]
    fn locov2_diagonal_closed_form(seed in any::<u64>(), p in 2usize..9) {
        let mut rng = substream(seed, 0xd1a7, 0);
        let variances: Vec<f64> = (0..p).map(|_| rng.random_range(0.2..9.0)).collect();
        let cov = SpectralModel::from_variances(&variances).unwrap().covariance();
        let estimate = locov2(&cov).unwrap();

        let mut votes = DVector::zeros(p);
        for i in 0..p {
            let mut acc = 0.5;
            for j in 0..p {
                if j != i {
                    acc += variances[j] / (variances[i] + variances[j]);
                }
            }
            votes[i] = acc / p as f64;
        }
        let total: f64 = votes.sum();
        for i in 0..p {
            prop_assert!((estimate.weights.values()[i] - votes[i] / total).abs() <= 1e-12);
        }
    }
}
