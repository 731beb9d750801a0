//! Shared test fixtures: an independent constrained-QP oracle and random
//! SPD matrix generators.

#![allow(dead_code)]

use locov::{sample_haar_orthogonal, substream, CovarianceMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Equality-constrained quadratic-programming oracle.
///
/// Minimizes `w' Sigma w` subject to `1'w = 1` by assembling the KKT system
///
/// ```text
/// [ 2 Sigma   -1 ] [ w      ]   [ 0 ]
/// [ 1'         0 ] [ lambda ] = [ 1 ]
/// ```
///
/// and solving it with a generic LU factorization. This never touches the
/// SPD solve path used by the library.
pub fn kkt_minimum_variance(cov: &CovarianceMatrix) -> DVector<f64> {
    let p = cov.dim();
    let mut kkt = DMatrix::zeros(p + 1, p + 1);
    for i in 0..p {
        for j in 0..p {
            kkt[(i, j)] = 2.0 * cov.matrix()[(i, j)];
        }
        kkt[(i, p)] = -1.0;
        kkt[(p, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(p + 1);
    rhs[p] = 1.0;
    let solution = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
    solution.rows(0, p).into_owned()
}

/// Random well-conditioned SPD matrix: Haar basis, eigenvalues uniform in
/// `[0.3, 4.0]`.
pub fn random_spd(p: usize, seed: u64) -> CovarianceMatrix {
    random_spd_with_range(p, seed, 0.3, 4.0)
}

pub fn random_spd_with_range(p: usize, seed: u64, lo: f64, hi: f64) -> CovarianceMatrix {
    let mut rng = substream(seed, 0xa11ce, 0);
    let basis = sample_haar_orthogonal(p, &mut rng);
    let mut scaled = basis.clone();
    for k in 0..p {
        let eigenvalue = rng.random_range(lo..hi);
        for j in 0..p {
            scaled[(k, j)] *= eigenvalue;
        }
    }
    CovarianceMatrix::new(basis.transpose() * scaled).expect("symmetric by construction")
}

/// Largest absolute difference between two vectors.
pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}
