//! Ground-truth covariance models and synthetic return sampling.
//!
//! A [`SpectralModel`] fixes the true covariance through its factorization
//! `Sigma = P' D^2 P` (orthogonal basis `P`, positive eigen standard
//! deviations on the diagonal of `D`). Synthetic asset returns are realized
//! as `X = N D P` with `N` an `n x p` matrix of i.i.d. standardized noise,
//! and the sample covariance is `X' X / n` (divisor `n`, not `n - 1`).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Max allowed deviation of `P'P` from the identity for an orthogonal basis.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

/// Relative symmetry tolerance for covariance entries.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// A covariance counts as invertible only if its smallest eigenvalue exceeds
/// this fraction of the largest. Scale-free by construction.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("eigen standard deviation {index} must be positive, got {value}")]
    NonPositiveEigenSd { index: usize, value: f64 },
    #[error("basis is {rows}x{cols}, expected {dim}x{dim}")]
    BasisShape { rows: usize, cols: usize, dim: usize },
    #[error("basis is not orthogonal: max |P'P - I| entry is {max_deviation:.3e}")]
    NotOrthogonal { max_deviation: f64 },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i},{j}): deviation {deviation:.3e}")]
    NotSymmetric { i: usize, j: usize, deviation: f64 },
    #[error("need at least {required} return rows, got {actual}")]
    TooFewSamples { required: usize, actual: usize },
}

/// Noise law for the entries of the raw return-driver matrix `N`.
///
/// Every variant is standardized to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseDistribution {
    Gaussian,
    /// Symmetric `+1`/`-1` coin flips.
    Rademacher,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
}

impl NoiseDistribution {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseDistribution::Gaussian => Distribution::<f64>::sample(&StandardNormal, rng),
            NoiseDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseDistribution::Uniform => {
                let half_width = 3.0_f64.sqrt();
                rng.random_range(-half_width..half_width)
            }
        }
    }
}

impl std::fmt::Display for NoiseDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            NoiseDistribution::Gaussian => "gaussian",
            NoiseDistribution::Rademacher => "rademacher",
            NoiseDistribution::Uniform => "uniform",
        };
        f.write_str(tag)
    }
}

impl std::str::FromStr for NoiseDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(NoiseDistribution::Gaussian),
            "rademacher" => Ok(NoiseDistribution::Rademacher),
            "uniform" => Ok(NoiseDistribution::Uniform),
            other => Err(format!(
                "unknown noise distribution '{other}' (expected gaussian, rademacher or uniform)"
            )),
        }
    }
}

/// Ground-truth covariance factorization: eigen standard deviations plus an
/// orthogonal basis.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    eigen_sds: DVector<f64>,
    basis: DMatrix<f64>,
}

impl SpectralModel {
    /// Build a model from eigen standard deviations and an orthogonal basis.
    pub fn new(eigen_sds: DVector<f64>, basis: DMatrix<f64>) -> Result<Self, ModelError> {
        let dim = eigen_sds.len();
        if dim < 2 {
            return Err(ModelError::DimensionTooSmall(dim));
        }
        for (index, &value) in eigen_sds.iter().enumerate() {
            let valid = value.is_finite() && value > 0.0;
            if !valid {
                return Err(ModelError::NonPositiveEigenSd { index, value });
            }
        }
        if basis.nrows() != dim || basis.ncols() != dim {
            return Err(ModelError::BasisShape {
                rows: basis.nrows(),
                cols: basis.ncols(),
                dim,
            });
        }
        let gram = basis.transpose() * &basis;
        let max_deviation = (&gram - DMatrix::identity(dim, dim))
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        if max_deviation > ORTHOGONALITY_TOLERANCE {
            return Err(ModelError::NotOrthogonal { max_deviation });
        }
        Ok(Self { eigen_sds, basis })
    }

    /// Diagonal model: variances on the diagonal, identity basis.
    pub fn from_variances(variances: &[f64]) -> Result<Self, ModelError> {
        let p = variances.len();
        Self::new(
            DVector::from_iterator(p, variances.iter().map(|v| v.sqrt())),
            DMatrix::identity(p, p),
        )
    }

    /// Model with the given variances and an explicit orthogonal basis.
    pub fn with_basis(variances: &[f64], basis: DMatrix<f64>) -> Result<Self, ModelError> {
        let p = variances.len();
        Self::new(
            DVector::from_iterator(p, variances.iter().map(|v| v.sqrt())),
            basis,
        )
    }

    pub fn dim(&self) -> usize {
        self.eigen_sds.len()
    }

    pub fn eigen_sds(&self) -> &DVector<f64> {
        &self.eigen_sds
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Ratio of the largest to the smallest eigen standard deviation.
    pub fn sd_ratio(&self) -> f64 {
        let max = self.eigen_sds.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.eigen_sds.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// The true covariance `P' D^2 P`.
    pub fn covariance(&self) -> CovarianceMatrix {
        let p = self.dim();
        let mut scaled = self.basis.clone();
        // D^2 P scales row k of P by sigma_k^2.
        for k in 0..p {
            let s2 = self.eigen_sds[k] * self.eigen_sds[k];
            for j in 0..p {
                scaled[(k, j)] *= s2;
            }
        }
        CovarianceMatrix::from_spd_product(self.basis.transpose() * scaled)
    }

    /// Draw an `n x p` return matrix `X = N D P` with i.i.d. standardized
    /// noise entries. The output is population-centered, not sample-centered.
    pub fn sample_returns<R: Rng + ?Sized>(
        &self,
        n: usize,
        noise: NoiseDistribution,
        rng: &mut R,
    ) -> ReturnMatrix {
        assert!(n >= 1, "need at least one return row");
        let p = self.dim();
        // Row-major fill so the draw order is explicit and stable.
        let mut driver = DMatrix::zeros(n, p);
        for r in 0..n {
            for c in 0..p {
                driver[(r, c)] = noise.draw(rng) * self.eigen_sds[c];
            }
        }
        ReturnMatrix {
            entries: driver * &self.basis,
            centered: false,
        }
    }
}

/// Symmetric positive semi-definite `p x p` covariance matrix (true or
/// sampled).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validate a square, symmetric matrix as a covariance.
    ///
    /// Stores the symmetrized form `(M + M') / 2`, so round-off asymmetry in
    /// the input never leaks into downstream solves. Asymmetry beyond
    /// [`SYMMETRY_TOLERANCE`] (relative to the largest entry) is rejected.
    pub fn new(entries: DMatrix<f64>) -> Result<Self, ModelError> {
        if entries.nrows() != entries.ncols() {
            return Err(ModelError::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let scale = entries.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        let p = entries.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let deviation = (entries[(i, j)] - entries[(j, i)]).abs();
                if deviation > SYMMETRY_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
                    return Err(ModelError::NotSymmetric { i, j, deviation });
                }
            }
        }
        Ok(Self::from_spd_product(entries))
    }

    /// Wrap a product that is symmetric by construction (`X'X`, `P'D^2P`),
    /// symmetrizing away the last-bit round-off.
    fn from_spd_product(entries: DMatrix<f64>) -> Self {
        let sym = (&entries + entries.transpose()) * 0.5;
        Self { entries: sym }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Smallest and largest eigenvalue.
    pub fn eigenvalue_range(&self) -> (f64, f64) {
        let eigs = self.entries.symmetric_eigenvalues();
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &e in eigs.iter() {
            min = min.min(e);
            max = max.max(e);
        }
        (min, max)
    }

    /// Whether the matrix clears the relative degeneracy threshold
    /// [`DEGENERACY_TOLERANCE`].
    pub fn is_invertible(&self) -> bool {
        let (min, max) = self.eigenvalue_range();
        max > 0.0 && min > DEGENERACY_TOLERANCE * max
    }

    /// Extract the principal sub-matrix on `indices` (in the given order).
    ///
    /// Callers must pass in-range indices; repeated indices produce a
    /// singular block that downstream solvers reject.
    pub fn principal_submatrix(&self, indices: &[usize]) -> CovarianceMatrix {
        let k = indices.len();
        let mut block = DMatrix::zeros(k, k);
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                block[(a, b)] = self.entries[(i, j)];
            }
        }
        CovarianceMatrix { entries: block }
    }
}

/// An `n x p` matrix of asset returns: rows are time samples, columns assets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    entries: DMatrix<f64>,
    centered: bool,
}

impl ReturnMatrix {
    /// Wrap raw observations. The data is treated as not sample-centered;
    /// call [`ReturnMatrix::center`] before covariance estimation if the
    /// column means are unknown.
    pub fn new(entries: DMatrix<f64>) -> Self {
        Self {
            entries,
            centered: false,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Subtract each column's mean. Requires at least two rows.
    pub fn center(&self) -> Result<ReturnMatrix, ModelError> {
        let n = self.n_samples();
        if n < 2 {
            return Err(ModelError::TooFewSamples {
                required: 2,
                actual: n,
            });
        }
        let mut centered = self.entries.clone();
        for c in 0..self.dim() {
            let mean = centered.column(c).sum() / n as f64;
            for r in 0..n {
                centered[(r, c)] -= mean;
            }
        }
        Ok(ReturnMatrix {
            entries: centered,
            centered: true,
        })
    }

    /// The sample covariance `X' X / n`. Divisor is the sample count `n`.
    pub fn sample_covariance(&self) -> CovarianceMatrix {
        let n = self.n_samples() as f64;
        CovarianceMatrix::from_spd_product(self.entries.transpose() * &self.entries / n)
    }
}

/// Draw a `p x p` orthogonal matrix distributed by the Haar measure.
///
/// QR factorization of an i.i.d. standard Gaussian matrix, with the sign of
/// each diagonal entry of `R` absorbed into the corresponding column of `Q`.
/// The sign correction makes the map exactly Haar.
pub fn sample_haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(p >= 1, "dimension must be positive");
    let mut gaussian = DMatrix::zeros(p, p);
    for r in 0..p {
        for c in 0..p {
            gaussian[(r, c)] = Distribution::<f64>::sample(&StandardNormal, rng);
        }
    }
    let (mut q, r) = gaussian.qr().unpack();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}
