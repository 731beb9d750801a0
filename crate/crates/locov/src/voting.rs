//! LoCoV: low dimension covariance voting estimators.
//!
//! At feature-to-sample ratios near one, the full sample covariance is too
//! noisy for a reliable minimum-variance solve, but every small principal
//! block is still accurate (a `k x k` block keeps ratio `k/n`). LoCoV solves
//! many such sub-portfolio problems and lets their relative weights vote.
//!
//! `locov2` scans all asset pairs: the pair weights fill a relative-weight
//! ledger `U` (initialized to one half on the diagonal), each asset's vote is
//! its row mean, and the vote vector is normalized to sum one. `locovk`
//! generalizes to random `k`-subsets: `U` starts at `1/k` everywhere and each
//! sub-solve blends its weights into `U` by halves (or by an exact running
//! mean in the `_running_mean` variant).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::covmodel::CovarianceMatrix;
use crate::minvar::{free_optimal_weight, normalize, FreeWeight, MinVarError, PortfolioWeight};

/// How often a degenerate sub-block is redrawn before the vote is skipped.
pub const SINGULAR_RESAMPLE_LIMIT: usize = 10;

#[derive(Debug, Error)]
pub enum LocovError {
    #[error("voting needs at least 2 assets, got {0}")]
    DimensionTooSmall(usize),
    #[error("subset size k={k} must satisfy 3 <= k <= p={p}")]
    InvalidSubsetSize { k: usize, p: usize },
    #[error("repetition count {repetitions} must be between 1 and p={p}")]
    InvalidRepetitions { repetitions: usize, p: usize },
    #[error("every pair containing asset {asset} is singular; it received no votes")]
    DegenerateAsset { asset: usize },
    #[error("vote sum {signed_sum:.3e} is too close to zero to normalize")]
    AmbiguousVote { signed_sum: f64 },
}

#[derive(Debug, Error)]
pub enum SubproblemError {
    #[error("index set must hold at least 2 distinct in-range asset indices")]
    BadIndexSet,
    #[error("sub-covariance block yields no usable vote (singular or ambiguous)")]
    DegenerateBlock,
}

/// Solve the sub-portfolio problem on the principal block at `index_set` and
/// return its normalized weights (summing to one), ordered like `index_set`.
///
/// All votes share the sum-one scale; feeding raw free weights into the
/// ledger would let each sub-problem's inverse risk set its own vote size.
pub fn subproblem_weights(
    cov: &CovarianceMatrix,
    index_set: &[usize],
) -> Result<DVector<f64>, SubproblemError> {
    if index_set.len() < 2 {
        return Err(SubproblemError::BadIndexSet);
    }
    for (pos, &i) in index_set.iter().enumerate() {
        if i >= cov.dim() || index_set[..pos].contains(&i) {
            return Err(SubproblemError::BadIndexSet);
        }
    }
    let block = cov.principal_submatrix(index_set);
    let free = free_optimal_weight(&block).map_err(|_| SubproblemError::DegenerateBlock)?;
    let weights = normalize(&free).map_err(|_| SubproblemError::DegenerateBlock)?;
    Ok(weights.values().clone())
}

/// The `p x p` relative-weight ledger `U`: row `i` accumulates the weights
/// asset `i` received from sub-problem solutions.
#[derive(Debug, Clone)]
pub struct VoteLedger {
    entries: DMatrix<f64>,
    counts: DMatrix<u32>,
}

impl VoteLedger {
    /// Pair-voting initialization: `U = I / 2`.
    pub fn pair_voting(p: usize) -> Self {
        Self {
            entries: DMatrix::identity(p, p) * 0.5,
            counts: DMatrix::from_element(p, p, 1),
        }
    }

    /// Subset-voting initialization: every entry `1/k`.
    pub fn subset_voting(p: usize, k: usize) -> Self {
        Self {
            entries: DMatrix::from_element(p, p, 1.0 / k as f64),
            counts: DMatrix::from_element(p, p, 1),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Overwrite an entry (pair voting writes each slot exactly once).
    pub fn set(&mut self, i: usize, j: usize, weight: f64) {
        self.entries[(i, j)] = weight;
        self.counts[(i, j)] += 1;
    }

    /// Replace an entry by the average of its old value and the new weight.
    pub fn half_blend(&mut self, i: usize, j: usize, weight: f64) {
        self.entries[(i, j)] = 0.5 * weight + 0.5 * self.entries[(i, j)];
        self.counts[(i, j)] += 1;
    }

    /// Replace an entry by the exact running mean of every weight it has
    /// seen, counting the initialization as one observation.
    pub fn running_mean(&mut self, i: usize, j: usize, weight: f64) {
        let count = self.counts[(i, j)] as f64;
        self.entries[(i, j)] = (self.entries[(i, j)] * count + weight) / (count + 1.0);
        self.counts[(i, j)] += 1;
    }

    /// Uniform vote for asset `i`: the mean of row `i`.
    pub fn row_mean(&self, i: usize) -> f64 {
        self.entries.row(i).sum() / self.dim() as f64
    }
}

/// A voted portfolio estimate plus how many sub-problem votes were skipped
/// as degenerate.
#[derive(Debug, Clone)]
pub struct VotingEstimate {
    pub weights: PortfolioWeight,
    pub skipped_subproblems: usize,
}

/// Pair voting over all `p(p-1)/2` two-asset sub-problems. Deterministic.
///
/// Singular pairs are skipped (their ledger slots keep the initialization)
/// and counted in the returned estimate; an asset whose every pair is
/// singular is reported as degenerate.
pub fn locov2(cov: &CovarianceMatrix) -> Result<VotingEstimate, LocovError> {
    let p = cov.dim();
    if p < 2 {
        return Err(LocovError::DimensionTooSmall(p));
    }
    let mut ledger = VoteLedger::pair_voting(p);
    let mut votes_per_asset = vec![0usize; p];
    let mut skipped = 0usize;
    let mut votes = DVector::zeros(p);
    for i in 0..p {
        for j in (i + 1)..p {
            match subproblem_weights(cov, &[i, j]) {
                Ok(u) => {
                    ledger.set(i, j, u[0]);
                    ledger.set(j, i, u[1]);
                    votes_per_asset[i] += 1;
                    votes_per_asset[j] += 1;
                }
                Err(SubproblemError::DegenerateBlock) => skipped += 1,
                Err(SubproblemError::BadIndexSet) => unreachable!("pair indices are valid"),
            }
        }
        // Row i is complete once its own pair scan finishes: earlier outer
        // iterations already filled columns below the diagonal.
        votes[i] = ledger.row_mean(i);
    }
    if let Some(asset) = votes_per_asset.iter().position(|&c| c == 0) {
        return Err(LocovError::DegenerateAsset { asset });
    }
    normalize_votes(votes, skipped)
}

/// Ledger update rule for subset voting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetUpdate {
    /// Half old value, half new weight (the default rule).
    HalfBlend,
    /// Exact running mean over all weights an entry has received.
    RunningMean,
}

/// Random `k`-subset voting with the default half-blend ledger update and
/// `p` repetitions per asset. Deterministic given the random stream.
pub fn locovk<R: Rng + ?Sized>(
    cov: &CovarianceMatrix,
    k: usize,
    rng: &mut R,
) -> Result<VotingEstimate, LocovError> {
    locovk_with_repetitions(cov, k, cov.dim(), SubsetUpdate::HalfBlend, rng)
}

/// Like [`locovk`] but every ledger entry keeps the exact running mean of
/// all weights ever assigned to it.
pub fn locovk_running_mean<R: Rng + ?Sized>(
    cov: &CovarianceMatrix,
    k: usize,
    rng: &mut R,
) -> Result<VotingEstimate, LocovError> {
    locovk_with_repetitions(cov, k, cov.dim(), SubsetUpdate::RunningMean, rng)
}

/// Subset voting with an explicit repetition count (at most `p`: repetition
/// `j` writes ledger column `j` of the asset's row) and update rule.
pub fn locovk_with_repetitions<R: Rng + ?Sized>(
    cov: &CovarianceMatrix,
    k: usize,
    repetitions: usize,
    update: SubsetUpdate,
    rng: &mut R,
) -> Result<VotingEstimate, LocovError> {
    let p = cov.dim();
    if p < 2 {
        return Err(LocovError::DimensionTooSmall(p));
    }
    if k < 3 || k > p {
        return Err(LocovError::InvalidSubsetSize { k, p });
    }
    if repetitions == 0 || repetitions > p {
        return Err(LocovError::InvalidRepetitions { repetitions, p });
    }
    let mut ledger = VoteLedger::subset_voting(p, k);
    let mut skipped = 0usize;
    let mut votes = DVector::zeros(p);
    let mut index_set = Vec::with_capacity(k);
    for i in 0..p {
        for rep in 0..repetitions {
            let mut vote = None;
            for _ in 0..=SINGULAR_RESAMPLE_LIMIT {
                draw_index_set(i, k, p, rng, &mut index_set);
                match subproblem_weights(cov, &index_set) {
                    Ok(u) => {
                        vote = Some(u);
                        break;
                    }
                    Err(SubproblemError::DegenerateBlock) => continue,
                    Err(SubproblemError::BadIndexSet) => unreachable!("drawn indices are valid"),
                }
            }
            match vote {
                Some(u) => {
                    apply_update(&mut ledger, i, rep, u[0], update);
                    for t in 1..k {
                        apply_update(&mut ledger, index_set[t], i, u[t], update);
                    }
                }
                // Retries exhausted: this draw leaves the ledger untouched.
                None => skipped += 1,
            }
        }
        // Vote as soon as asset i's repetitions finish; neighbor updates
        // landing in row i during later outer iterations do not re-vote.
        votes[i] = ledger.row_mean(i);
    }
    normalize_votes(votes, skipped)
}

fn apply_update(ledger: &mut VoteLedger, i: usize, j: usize, weight: f64, update: SubsetUpdate) {
    match update {
        SubsetUpdate::HalfBlend => ledger.half_blend(i, j, weight),
        SubsetUpdate::RunningMean => ledger.running_mean(i, j, weight),
    }
}

/// Fill `out` with `{i, l_1, .., l_{k-1}}` where the `l`s are drawn uniformly
/// without replacement from the other assets.
fn draw_index_set<R: Rng + ?Sized>(
    i: usize,
    k: usize,
    p: usize,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    out.push(i);
    for idx in rand::seq::index::sample(rng, p - 1, k - 1) {
        // Map 0..p-1 onto {0..p} \ {i}.
        out.push(if idx < i { idx } else { idx + 1 });
    }
}

fn normalize_votes(votes: DVector<f64>, skipped: usize) -> Result<VotingEstimate, LocovError> {
    let free = FreeWeight::from_values(votes);
    match normalize(&free) {
        Ok(weights) => Ok(VotingEstimate {
            weights,
            skipped_subproblems: skipped,
        }),
        Err(MinVarError::AmbiguousPortfolio { signed_sum }) => {
            Err(LocovError::AmbiguousVote { signed_sum })
        }
        Err(other) => unreachable!("vote normalization cannot fail with {other}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covmodel::SpectralModel;
    use crate::stream::substream;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn diag_cov(variances: &[f64]) -> CovarianceMatrix {
        SpectralModel::from_variances(variances).unwrap().covariance()
    }

    #[test]
    fn pair_subproblem_on_equal_variances_splits_evenly() {
        let u = subproblem_weights(&diag_cov(&[1.0, 1.0, 5.0]), &[0, 1]).unwrap();
        assert_eq!(u.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn pair_subproblem_matches_inverse_variance_rule() {
        let u = subproblem_weights(&diag_cov(&[1.0, 3.0]), &[0, 1]).unwrap();
        assert_abs_diff_eq!(u[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn subproblem_rejects_bad_index_sets() {
        let cov = diag_cov(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            subproblem_weights(&cov, &[1]),
            Err(SubproblemError::BadIndexSet)
        ));
        assert!(matches!(
            subproblem_weights(&cov, &[0, 0]),
            Err(SubproblemError::BadIndexSet)
        ));
        assert!(matches!(
            subproblem_weights(&cov, &[0, 7]),
            Err(SubproblemError::BadIndexSet)
        ));
    }

    #[test]
    fn subproblem_signals_skip_on_singular_block() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let cov = CovarianceMatrix::new(m).unwrap();
        assert!(matches!(
            subproblem_weights(&cov, &[0, 1]),
            Err(SubproblemError::DegenerateBlock)
        ));
    }

    #[test]
    fn ledger_update_arithmetic() {
        let ledger = VoteLedger::subset_voting(2, 3);
        let a = ledger.value(0, 1);

        // A single half-blend equals a single running-mean step.
        let mut blended = ledger.clone();
        blended.half_blend(0, 1, 0.9);
        let mut averaged = ledger.clone();
        averaged.running_mean(0, 1, 0.9);
        assert_abs_diff_eq!(blended.value(0, 1), (a + 0.9) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(averaged.value(0, 1), blended.value(0, 1), epsilon = 1e-15);

        // Two updates diverge: running mean weighs all three values equally,
        // half blending overweights the most recent.
        let (u1, u2) = (0.9, 0.3);
        blended.half_blend(0, 1, u2);
        averaged.running_mean(0, 1, u2);
        assert_abs_diff_eq!(
            averaged.value(0, 1),
            (a + u1 + u2) / 3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            blended.value(0, 1),
            0.25 * a + 0.25 * u1 + 0.5 * u2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn locov2_identity_votes_uniform() {
        for p in [2usize, 5, 30] {
            let ones = vec![1.0; p];
            let estimate = locov2(&diag_cov(&ones)).unwrap();
            for k in 0..p {
                assert_abs_diff_eq!(
                    estimate.weights.values()[k],
                    1.0 / p as f64,
                    epsilon = 1e-12
                );
            }
            assert_eq!(estimate.skipped_subproblems, 0);
        }
    }

    #[test]
    fn locov2_hand_trace_on_two_assets() {
        // Pair vote (0.75, 0.25); with the half initialization on the
        // diagonal the votes become (0.625, 0.375) after row means.
        let estimate = locov2(&diag_cov(&[1.0, 3.0])).unwrap();
        assert_abs_diff_eq!(estimate.weights.values()[0], 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(estimate.weights.values()[1], 0.375, epsilon = 1e-12);
    }

    #[test]
    fn locov2_skips_singular_pairs_and_reports_them() {
        // Assets 0 and 1 are perfectly correlated: that pair is singular,
        // every other pair still votes.
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let cov = CovarianceMatrix::new(m).unwrap();
        let estimate = locov2(&cov).unwrap();
        assert_eq!(estimate.skipped_subproblems, 1);
        assert_abs_diff_eq!(estimate.weights.values().sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn locov2_reports_fully_degenerate_assets() {
        // Two identical assets: the single pair is singular.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let cov = CovarianceMatrix::new(m).unwrap();
        assert!(matches!(
            locov2(&cov),
            Err(LocovError::DegenerateAsset { asset: 0 })
        ));
    }

    #[test]
    fn locovk_identity_votes_uniform_for_any_seed() {
        let cov = diag_cov(&[1.0; 8]);
        for seed in 0..5 {
            let estimate = locovk(&cov, 3, &mut substream(seed, 95, 0)).unwrap();
            for k in 0..8 {
                assert_abs_diff_eq!(
                    estimate.weights.values()[k],
                    0.125,
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn locovk_running_mean_identity_matches_plain() {
        let cov = diag_cov(&[1.0; 6]);
        let plain = locovk(&cov, 3, &mut substream(2, 95, 1)).unwrap();
        let running = locovk_running_mean(&cov, 3, &mut substream(2, 95, 1)).unwrap();
        for k in 0..6 {
            assert_abs_diff_eq!(
                plain.weights.values()[k],
                running.weights.values()[k],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn locovk_with_full_subset_is_seed_independent() {
        // k = p forces every index set to cover all assets.
        let variances = [1.0, 2.0, 3.0, 4.0];
        let cov = diag_cov(&variances);
        let a = locovk(&cov, 4, &mut substream(1, 95, 2)).unwrap();
        let b = locovk(&cov, 4, &mut substream(99, 95, 3)).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(
                a.weights.values()[k],
                b.weights.values()[k],
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn locovk_full_subset_subsolves_return_sample_weights() {
        let cov = diag_cov(&[1.0, 2.0, 3.0, 4.0]);
        let full = normalize(&free_optimal_weight(&cov).unwrap()).unwrap();
        let mut index_set: Vec<usize> = (0..4).collect();
        // Any rotation of the index set maps the same weights back to assets.
        index_set.rotate_left(2);
        let u = subproblem_weights(&cov, &index_set).unwrap();
        for (pos, &asset) in index_set.iter().enumerate() {
            assert_abs_diff_eq!(u[pos], full.values()[asset], epsilon = 1e-12);
        }
    }

    #[test]
    fn locovk_rejects_bad_subset_sizes() {
        let cov = diag_cov(&[1.0, 2.0, 3.0, 4.0]);
        let mut rng = substream(0, 95, 4);
        assert!(matches!(
            locovk(&cov, 2, &mut rng),
            Err(LocovError::InvalidSubsetSize { .. })
        ));
        assert!(matches!(
            locovk(&cov, 5, &mut rng),
            Err(LocovError::InvalidSubsetSize { .. })
        ));
        assert!(matches!(
            locovk_with_repetitions(&cov, 3, 9, SubsetUpdate::HalfBlend, &mut rng),
            Err(LocovError::InvalidRepetitions { .. })
        ));
    }

    #[test]
    fn locovk_is_reproducible_for_fixed_seed() {
        let variances: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let cov = diag_cov(&variances);
        let a = locovk(&cov, 4, &mut substream(21, 95, 5)).unwrap();
        let b = locovk(&cov, 4, &mut substream(21, 95, 5)).unwrap();
        assert_eq!(a.weights.values(), b.weights.values());
    }

    #[test]
    fn drawn_index_sets_are_valid_and_label_uniform() {
        let (p, k, i) = (9usize, 4usize, 3usize);
        let mut rng = substream(8, 96, 0);
        let mut counts = vec![0usize; p];
        let mut set = Vec::new();
        let draws = 20_000;
        for _ in 0..draws {
            draw_index_set(i, k, p, &mut rng, &mut set);
            assert_eq!(set[0], i);
            assert_eq!(set.len(), k);
            for (pos, &l) in set.iter().enumerate() {
                assert!(l < p);
                assert!(!set[..pos].contains(&l));
            }
            for &l in &set[1..] {
                counts[l] += 1;
            }
        }
        assert_eq!(counts[i], 0);
        // Each other asset appears with probability (k-1)/(p-1).
        let expected = draws as f64 * (k - 1) as f64 / (p - 1) as f64;
        let stderr = (expected * (1.0 - (k - 1) as f64 / (p - 1) as f64)).sqrt();
        for (l, &c) in counts.iter().enumerate() {
            if l != i {
                assert!(
                    (c as f64 - expected).abs() <= 4.0 * stderr,
                    "asset {l} drawn {c} times, expected {expected:.0}"
                );
            }
        }
    }

    #[test]
    fn locov2_scans_pairs_exactly_once() {
        // On a diagonal covariance the ledger rows obey the closed form
        // V_i = (1/p) (1/2 + sum_{j != i} sigma_j^2 / (sigma_i^2 + sigma_j^2)).
        let variances = [2.0, 5.0, 7.0];
        let cov = diag_cov(&variances);
        let estimate = locov2(&cov).unwrap();
        let p = variances.len();
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
            assert_abs_diff_eq!(
                estimate.weights.values()[i],
                votes[i] / total,
                epsilon = 1e-12
            );
        }
    }
}
