//! Closed-form minimum-variance portfolio solver.
//!
//! For an invertible covariance `Sigma`, the minimizer of `w' Sigma w`
//! subject to `w' 1 = 1` is obtained from the free (non-normalized) optimal
//! weight `S = Sigma^{-1} 1`: the optimal portfolio weight is `S / sum(S)`
//! and the minimum portfolio risk is `1 / sum(S)`. Shorting is allowed; the
//! only constraint is that weights sum to one.

use nalgebra::{Cholesky, DVector};
use thiserror::Error;

use crate::covmodel::{CovarianceMatrix, DEGENERACY_TOLERANCE};

/// The free-weight sum is treated as zero below
/// `NORMALIZATION_TOLERANCE * ||S||_2 * p`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Weight vectors must sum to one within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MinVarError {
    #[error(
        "covariance is numerically singular (relative smallest eigenvalue {relative_min:.3e}, \
         condition estimate {condition:.3e})"
    )]
    NonInvertible { relative_min: f64, condition: f64 },
    #[error("free weight sum {signed_sum:.3e} is too close to zero to define a portfolio")]
    AmbiguousPortfolio { signed_sum: f64 },
    #[error("dimension mismatch: weight has {weight} entries, covariance is {covariance}-dimensional")]
    DimensionMismatch { weight: usize, covariance: usize },
    #[error("weights sum to {sum} instead of 1")]
    NotNormalized { sum: f64 },
}

/// Unnormalized solution `S = Sigma^{-1} 1` together with its signed sum.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeWeight {
    values: DVector<f64>,
    signed_sum: f64,
}

impl FreeWeight {
    /// Wrap raw values, computing the signed sum.
    pub fn from_values(values: DVector<f64>) -> Self {
        let signed_sum = values.sum();
        Self { values, signed_sum }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn signed_sum(&self) -> f64 {
        self.signed_sum
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn ambiguity_threshold(&self) -> f64 {
        NORMALIZATION_TOLERANCE * self.values.norm() * self.len() as f64
    }
}

/// Portfolio weights summing to one. Entries may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeight {
    values: DVector<f64>,
}

impl PortfolioWeight {
    /// Validate that the entries sum to one within [`WEIGHT_SUM_TOLERANCE`].
    pub fn new(values: DVector<f64>) -> Result<Self, MinVarError> {
        let sum = values.sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(MinVarError::NotNormalized { sum });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Portfolio variance, in units of squared return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskValue(f64);

impl RiskValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Solve `Sigma S = 1` by SPD factorization.
///
/// Refuses near-singular input: the smallest eigenvalue must exceed
/// [`DEGENERACY_TOLERANCE`] times the largest. No explicit inverse is formed.
pub fn free_optimal_weight(cov: &CovarianceMatrix) -> Result<FreeWeight, MinVarError> {
    let (min_eig, max_eig) = cov.eigenvalue_range();
    let well_conditioned = max_eig > 0.0 && min_eig > DEGENERACY_TOLERANCE * max_eig;
    if !well_conditioned {
        let relative_min = if max_eig > 0.0 { min_eig / max_eig } else { 0.0 };
        let condition = if min_eig > 0.0 {
            max_eig / min_eig
        } else {
            f64::INFINITY
        };
        return Err(MinVarError::NonInvertible {
            relative_min,
            condition,
        });
    }
    let factor = Cholesky::new(cov.matrix().clone()).ok_or(MinVarError::NonInvertible {
        relative_min: min_eig / max_eig,
        condition: max_eig / min_eig,
    })?;
    let ones = DVector::from_element(cov.dim(), 1.0);
    Ok(FreeWeight::from_values(factor.solve(&ones)))
}

/// Scale a free weight to sum one, preserving its direction.
pub fn normalize(free: &FreeWeight) -> Result<PortfolioWeight, MinVarError> {
    if free.signed_sum.abs() <= free.ambiguity_threshold() {
        return Err(MinVarError::AmbiguousPortfolio {
            signed_sum: free.signed_sum,
        });
    }
    Ok(PortfolioWeight {
        values: free.values() / free.signed_sum,
    })
}

/// Minimum portfolio risk `1 / sum(S)`.
///
/// A valid SPD solve yields a positive sum; a non-positive one signals
/// numerical breakdown and is rejected like the ambiguous case.
pub fn optimal_risk(free: &FreeWeight) -> Result<RiskValue, MinVarError> {
    if free.signed_sum <= free.ambiguity_threshold() {
        return Err(MinVarError::AmbiguousPortfolio {
            signed_sum: free.signed_sum,
        });
    }
    Ok(RiskValue(1.0 / free.signed_sum))
}

/// Evaluate the variance `w' Sigma w` of any weight vector under any
/// covariance.
pub fn portfolio_risk(
    weight: &PortfolioWeight,
    cov: &CovarianceMatrix,
) -> Result<RiskValue, MinVarError> {
    if weight.len() != cov.dim() {
        return Err(MinVarError::DimensionMismatch {
            weight: weight.len(),
            covariance: cov.dim(),
        });
    }
    let image = cov.matrix() * weight.values();
    Ok(RiskValue(weight.values().dot(&image)))
}
