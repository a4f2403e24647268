//! Eigenvalue counting and eigenvalue computation.

mod dense;
mod ldl;

use crate::assembly::OperatorMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest dimension accepted by the dense eigenvalue path.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("factorization hit a singular pivot near energy {energy} after retries")]
    SingularShift { energy: f64 },
    #[error("matrix dimension {n} exceeds the dense limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("eigenvalue bisection stalled")]
    NoConvergence,
}

/// Counting data on an energy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingProfile {
    pub energies: Vec<f64>,
    pub counts: Vec<usize>,
    /// Matrix dimension the counts refer to.
    pub n: usize,
}

/// Tie guard added to the requested energy so eigenvalues within rounding
/// distance of `E` count as `<= E` (the counting function is a distribution
/// function, right-continuous).
pub fn tie_guard(scale: f64) -> f64 {
    1e-12 * scale.max(1.0)
}

/// #{eigenvalues <= E} via the inertia of a block LDL^H factorization of
/// `A - (E + tau) I`. A singular pivot triggers up to three retries with the
/// shift nudged by `+10 tau` each time.
pub fn count_at_or_below(a: &OperatorMatrix, energy: f64) -> Result<usize, SpectralError> {
    let tau = tie_guard(a.scale());
    let mut sigma = energy + tau;
    for _ in 0..4 {
        let counted = match a {
            OperatorMatrix::Real(m) => ldl::count_below(m, sigma),
            OperatorMatrix::Complex(m) => ldl::count_below(m, sigma),
        };
        match counted {
            Ok(c) => return Ok(c),
            Err(_) => sigma += 10.0 * tau,
        }
    }
    Err(SpectralError::SingularShift { energy })
}

/// Counts on a strictly increasing grid, one factorization per energy.
pub fn counting_profile(
    a: &OperatorMatrix,
    e_grid: &[f64],
) -> Result<CountingProfile, SpectralError> {
    assert!(
        e_grid.windows(2).all(|w| w[0] < w[1]),
        "energy grid must be strictly increasing"
    );
    let mut counts = Vec::with_capacity(e_grid.len());
    for &e in e_grid {
        let c = count_at_or_below(a, e)?;
        if let Some(&prev) = counts.last() {
            assert!(c >= prev, "counting profile must be nondecreasing");
        }
        counts.push(c);
    }
    Ok(CountingProfile {
        energies: e_grid.to_vec(),
        counts,
        n: a.n(),
    })
}

/// All eigenvalues in ascending order via the in-house dense solver
/// (Householder reduction plus Sturm bisection).
pub fn eigenvalues_dense(a: &OperatorMatrix) -> Result<Vec<f64>, SpectralError> {
    eigenvalues_dense_with_limit(a, DENSE_LIMIT)
}

pub fn eigenvalues_dense_with_limit(
    a: &OperatorMatrix,
    limit: usize,
) -> Result<Vec<f64>, SpectralError> {
    let n = a.n();
    if n > limit {
        return Err(SpectralError::TooLarge { n, limit });
    }
    let eig = match a {
        OperatorMatrix::Real(m) => dense::eigenvalues_full(m.to_dense(), n),
        OperatorMatrix::Complex(m) => dense::eigenvalues_full(m.to_dense(), n),
    };
    eig.map_err(|_| SpectralError::NoConvergence)
}
