//! Tail-exponent extraction from IDS data: the double-log transform of the
//! counting mean near the bottom of the spectrum, fitted by least squares.
//! For a tail `N(E) ~ exp(-c E^{-beta})` the fitted slope estimates `-beta`,
//! with the constant `c` moving only the intercept.

use crate::ids::IdsEstimate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LifshitzError {
    #[error("too few usable tail points: {usable} usable, {dropped_empty} empty-tail, {dropped_regime} outside the asymptotic regime")]
    TooFewPoints {
        usable: usize,
        dropped_empty: usize,
        dropped_regime: usize,
    },
    #[error("degenerate regression design: all abscissae equal")]
    DegenerateDesign,
    #[error("fits are not comparable: {0}")]
    IncomparableRuns(String),
}

/// Value of the counting function just above the spectral bottom. Under the
/// normalization to `inf spectrum = 0` this is zero; spectral mass observed
/// at negative energies marks the normalization as suspect instead of
/// producing a nonzero estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N0Estimate {
    pub value: f64,
    pub suspect: bool,
    pub detail: Option<String>,
}

const NEGATIVE_MASS_FLOOR: f64 = -1e-8;

pub fn estimate_n0plus(ids: &IdsEstimate) -> N0Estimate {
    for (i, &e) in ids.e_grid.iter().enumerate() {
        if e < NEGATIVE_MASS_FLOOR && ids.mean[i] > 0.0 {
            return N0Estimate {
                value: 0.0,
                suspect: true,
                detail: Some(format!(
                    "counting mass {} observed at energy {e} below zero; \
                     the spectrum does not look normalized",
                    ids.mean[i]
                )),
            };
        }
    }
    N0Estimate { value: 0.0, suspect: false, detail: None }
}

/// Reasons for dropping window points from the tail transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DropTally {
    /// `N - N0 <= 0`: no spectral mass observed yet at that energy.
    pub empty_tail: usize,
    /// `N - N0 >= 1/e`: the inner logarithm is no longer bounded away
    /// from zero.
    pub outside_regime: usize,
}

/// Transform the window points to `(log E, log |log (N - N0)|)`.
pub fn tail_points(
    ids: &IdsEstimate,
    n0plus: f64,
    window: (f64, f64),
) -> Result<(Vec<(f64, f64)>, DropTally), LifshitzError> {
    let regime_cap = (-1.0f64).exp();
    let mut points = Vec::new();
    let mut tally = DropTally::default();
    for (i, &e) in ids.e_grid.iter().enumerate() {
        if e < window.0 || e > window.1 || e <= 0.0 {
            continue;
        }
        let mass = ids.mean[i] - n0plus;
        // subnormal masses have too few significant bits for the double
        // logarithm; treat them as empty
        if mass < f64::MIN_POSITIVE {
            tally.empty_tail += 1;
            continue;
        }
        if mass >= regime_cap {
            tally.outside_regime += 1;
            continue;
        }
        points.push((e.ln(), mass.ln().abs().ln()));
    }
    if points.len() < 4 {
        return Err(LifshitzError::TooFewPoints {
            usable: points.len(),
            dropped_empty: tally.empty_tail,
            dropped_regime: tally.outside_regime,
        });
    }
    Ok((points, tally))
}

/// Double-log tail regression result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifshitzFit {
    pub d: u32,
    pub window: (f64, f64),
    pub points: Vec<(f64, f64)>,
    pub dropped_empty: usize,
    pub dropped_regime: usize,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub n0plus: f64,
    pub n0_suspect: bool,
}

/// Ordinary least squares of the transformed points; the slope estimates
/// the tail exponent.
pub fn fit_exponent(
    d: u32,
    window: (f64, f64),
    points: Vec<(f64, f64)>,
    tally: DropTally,
    n0: &N0Estimate,
) -> Result<LifshitzFit, LifshitzError> {
    let n = points.len() as f64;
    assert!(points.len() >= 2, "need at least two points");
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LifshitzError::DegenerateDesign);
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let dof = points.len().saturating_sub(2);
    let slope_stderr = if dof > 0 {
        (ssr / dof as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LifshitzFit {
        d,
        window,
        residual_rms: (ssr / n).sqrt(),
        slope,
        slope_stderr,
        intercept,
        points,
        dropped_empty: tally.empty_tail,
        dropped_regime: tally.outside_regime,
        n0plus: n0.value,
        n0_suspect: n0.suspect,
    })
}

/// Full pipeline from an IDS estimate to the fitted exponent.
pub fn fit_from_ids(
    ids: &IdsEstimate,
    d: u32,
    window: (f64, f64),
) -> Result<LifshitzFit, LifshitzError> {
    let n0 = estimate_n0plus(ids);
    let (points, tally) = tail_points(ids, n0.value, window)?;
    fit_exponent(d, window, points, tally, &n0)
}

/// One pairwise comparison of fitted exponents at different fiber
/// dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub fiber_a: u32,
    pub fiber_b: u32,
    pub slope_a: f64,
    pub slope_b: f64,
    pub difference: f64,
    pub combined_stderr: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DIndependenceReport {
    pub theory: f64,
    pub tolerance: f64,
    pub pairs: Vec<ExponentPair>,
    pub all_consistent: bool,
}

/// Compare fitted exponents across fiber dimensions: the tail exponent of
/// the model family depends on the spatial dimension only.
pub fn d_independence(
    fits: &[(u32, &LifshitzFit)],
    tolerance: f64,
) -> Result<DIndependenceReport, LifshitzError> {
    if fits.len() < 2 {
        return Err(LifshitzError::IncomparableRuns(
            "need at least two fits".into(),
        ));
    }
    let d = fits[0].1.d;
    let window = fits[0].1.window;
    for (_, f) in fits {
        if f.d != d {
            return Err(LifshitzError::IncomparableRuns(format!(
                "spatial dimensions differ: {} vs {}",
                d, f.d
            )));
        }
        if (f.window.0 - window.0).abs() > 1e-12 || (f.window.1 - window.1).abs() > 1e-12 {
            return Err(LifshitzError::IncomparableRuns(
                "fit windows differ".into(),
            ));
        }
    }
    let theory = -(d as f64) / 2.0;
    let mut pairs = Vec::new();
    let mut all_consistent = true;
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            let (da, fa) = fits[i];
            let (db, fb) = fits[j];
            let difference = (fa.slope - fb.slope).abs();
            let combined_stderr =
                (fa.slope_stderr.powi(2) + fb.slope_stderr.powi(2)).sqrt();
            let consistent = difference <= tolerance;
            all_consistent &= consistent;
            pairs.push(ExponentPair {
                fiber_a: da,
                fiber_b: db,
                slope_a: fa.slope,
                slope_b: fb.slope,
                difference,
                combined_stderr,
                consistent,
            });
        }
    }
    Ok(DIndependenceReport {
        theory,
        tolerance,
        pairs,
        all_consistent,
    })
}
