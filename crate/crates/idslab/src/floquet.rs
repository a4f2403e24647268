//! Band structure over the Brillouin zone, band-minimum analysis, the
//! quadratic pinch check at the bottom of the spectrum, and the
//! Floquet-integral density of states of periodic approximations.

use crate::assembly::{assemble_floquet_cell, AssemblyError};
use crate::ids::IdsEstimate;
use crate::model::{DisorderRealization, ValidatedSpec};
use crate::spectral::{count_at_or_below, eigenvalues_dense, SpectralError};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FloquetError {
    #[error("momentum grid too coarse: need at least 8 points per axis, got {0}")]
    GridTooCoarse(usize),
    #[error("lowest band is flat across the zone (variation below 1e-10)")]
    FlatBand,
    #[error("pinch radius leaves no sample points")]
    EmptyNeighborhood,
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Half-width of the Brillouin zone of the `(2k+1) Z^d` lattice.
pub fn zone_halfwidth(k: u32) -> f64 {
    PI / (2 * k + 1) as f64
}

/// Wrap a momentum component into the zone `[-w, w)`.
fn wrap_component(t: f64, half: f64) -> f64 {
    let width = 2.0 * half;
    let mut x = (t + half) % width;
    if x < 0.0 {
        x += width;
    }
    x - half
}

pub fn wrap_theta(theta: &[f64], k: u32) -> Vec<f64> {
    let half = zone_halfwidth(k);
    theta.iter().map(|&t| wrap_component(t, half)).collect()
}

/// Momentum grid over the zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub d: u32,
    pub k: u32,
    pub per_axis: usize,
    pub points: Vec<Vec<f64>>,
}

impl ThetaGrid {
    /// Uniform midpoint grid: symmetric about zero, no duplicated torus
    /// boundary point.
    pub fn midpoint(d: u32, k: u32, per_axis: usize) -> Self {
        let half = zone_halfwidth(k);
        let step = 2.0 * half / per_axis as f64;
        let axis: Vec<f64> = (0..per_axis)
            .map(|i| -half + (i as f64 + 0.5) * step)
            .collect();
        let mut points = Vec::with_capacity(per_axis.pow(d));
        match d {
            1 => {
                for &t in &axis {
                    points.push(vec![t]);
                }
            }
            _ => {
                for &a in &axis {
                    for &b in &axis {
                        points.push(vec![a, b]);
                    }
                }
            }
        }
        ThetaGrid { d, k, per_axis, points }
    }

    pub fn explicit(d: u32, k: u32, points: Vec<Vec<f64>>) -> Self {
        ThetaGrid { d, k, per_axis: points.len(), points }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * zone_halfwidth(self.k) / self.per_axis as f64
    }
}

/// Band energies on a momentum grid, ascending in the band index at each
/// momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub k: u32,
    pub d: u32,
    pub grid: ThetaGrid,
    /// `bands[t][j]` = j-th band energy at grid point t.
    pub bands: Vec<Vec<f64>>,
    pub j_max: usize,
    pub mesh_m: u32,
    /// Estimated Lipschitz constant from neighbor increments.
    pub lipschitz_estimate: f64,
    /// Grid points whose neighbor increment exceeds 3x the median (possible
    /// band crossing; refine before trusting local fits there).
    pub crossing_flags: Vec<bool>,
    /// Largest observed |E_j(theta) - E_j(-theta)|.
    pub conjugation_asymmetry: f64,
}

impl BandStructure {
    pub fn lowest(&self) -> impl Iterator<Item = f64> + '_ {
        self.bands.iter().map(|b| b[0])
    }

    pub fn spectral_width(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &self.bands {
            for &v in row {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (hi - lo).max(0.0)
    }

    /// CSV rows `(theta components..., j, energy)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for axis in 0..self.d {
            out.push_str(&format!("theta{}", axis + 1));
            out.push(',');
        }
        out.push_str("j,energy\n");
        for (t, row) in self.bands.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                for c in &self.grid.points[t] {
                    out.push_str(&format!("{c},"));
                }
                out.push_str(&format!("{j},{e}\n"));
            }
        }
        out
    }
}

/// Evaluate band energies at arbitrary momenta; implemented by the model
/// fibers and by synthetic closures in tests.
pub trait BandFunction: Sync {
    /// Ascending band energies at `theta` (at least the lowest).
    fn eval_bands(&self, theta: &[f64]) -> Result<Vec<f64>, FloquetError>;

    fn eval_lowest(&self, theta: &[f64]) -> Result<f64, FloquetError> {
        Ok(self.eval_bands(theta)?[0])
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> BandFunction for F {
    fn eval_bands(&self, theta: &[f64]) -> Result<Vec<f64>, FloquetError> {
        Ok(vec![self(theta)])
    }
}

/// Fibers of the disorder-free background at supercell order zero.
pub struct ModelBands<'a> {
    pub spec: &'a ValidatedSpec,
    pub mesh_m: u32,
    pub j_max: usize,
}

impl BandFunction for ModelBands<'_> {
    fn eval_bands(&self, theta: &[f64]) -> Result<Vec<f64>, FloquetError> {
        let theta = wrap_theta(theta, 0);
        let cell = assemble_floquet_cell(self.spec, None, 0, &theta, self.mesh_m)?;
        let mut eig = eigenvalues_dense(&cell)?;
        eig.truncate(self.j_max + 1);
        Ok(eig)
    }
}

/// Band structure of the (possibly disordered) operator at supercell order
/// `k` on a uniform midpoint grid.
pub fn band_structure(
    spec: &ValidatedSpec,
    real: Option<&DisorderRealization>,
    k: u32,
    per_axis: usize,
    j_max: usize,
    m: u32,
) -> Result<BandStructure, FloquetError> {
    if per_axis < 8 {
        return Err(FloquetError::GridTooCoarse(per_axis));
    }
    let grid = ThetaGrid::midpoint(spec.d, k, per_axis);
    let mut bands = Vec::with_capacity(grid.points.len());
    for theta in &grid.points {
        let cell = assemble_floquet_cell(spec, real, k, theta, m)?;
        let mut eig = eigenvalues_dense(&cell)?;
        eig.truncate(j_max + 1);
        bands.push(eig);
    }

    // neighbor increments along the first axis ordering
    let mut increments = Vec::new();
    let stride = if spec.d == 1 { 1 } else { per_axis };
    for t in 0..bands.len() {
        let next = t + stride;
        if next < bands.len() {
            let mut inc = 0.0f64;
            for (a, b) in bands[t].iter().zip(&bands[next]) {
                inc = inc.max((a - b).abs());
            }
            increments.push(inc);
        }
    }
    let spacing = grid.spacing();
    let lipschitz_estimate = increments.iter().cloned().fold(0.0, f64::max) / spacing;
    let mut sorted = increments.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
    let mut crossing_flags = vec![false; bands.len()];
    for (t, inc) in increments.iter().enumerate() {
        if *inc > 3.0 * median && median > 0.0 {
            crossing_flags[t] = true;
        }
    }

    // conjugation symmetry: the midpoint grid maps -theta to the mirrored
    // index on each axis
    let mut asym = 0.0f64;
    for (t, row) in bands.iter().enumerate() {
        let mirrored = mirror_index(t, spec.d, per_axis);
        for (a, b) in row.iter().zip(&bands[mirrored]) {
            asym = asym.max((a - b).abs());
        }
    }

    Ok(BandStructure {
        k,
        d: spec.d,
        grid,
        bands,
        j_max,
        mesh_m: m,
        lipschitz_estimate,
        crossing_flags,
        conjugation_asymmetry: asym,
    })
}

fn mirror_index(t: usize, d: u32, per_axis: usize) -> usize {
    match d {
        1 => per_axis - 1 - t,
        _ => {
            let (a, b) = (t / per_axis, t % per_axis);
            (per_axis - 1 - a) * per_axis + (per_axis - 1 - b)
        }
    }
}

/// One located band minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMinimum {
    pub theta: Vec<f64>,
    pub energy: f64,
    /// Number of bands meeting the bottom at this momentum.
    pub degeneracy: usize,
    /// Diagonal quadratic coefficients of the local fit
    /// `E0(theta) - E_min ~ sum_a c_a (theta_a - theta0_a)^2`.
    pub quad_coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMinimaReport {
    pub e_min: f64,
    pub minima: Vec<BandMinimum>,
    pub m0: usize,
    /// Largest number of bands touching the bottom over all minima.
    pub n0: usize,
    pub spectral_width: f64,
}

fn torus_distance(a: &[f64], b: &[f64], k: u32) -> f64 {
    let half = zone_halfwidth(k);
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = wrap_component(x - y, half);
        acc += d * d;
    }
    acc.sqrt()
}

/// Find all minima of the lowest band: grid candidates within the cluster
/// tolerance of the grid minimum, locally refined by repeated subdivision,
/// then merged on the torus.
pub fn locate_minima(
    band: &BandStructure,
    f: &dyn BandFunction,
    refine_levels: u32,
) -> Result<BandMinimaReport, FloquetError> {
    let e0: Vec<f64> = band.lowest().collect();
    let grid_min = e0.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid_max = e0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if grid_max - grid_min < 1e-10 {
        return Err(FloquetError::FlatBand);
    }
    let width = band.spectral_width();
    let cluster_tol = 1e-6 * width;
    let spacing = band.grid.spacing();
    let k = band.k;

    // candidate grid points near the bottom, clustered on the torus
    let mut candidates: Vec<(Vec<f64>, f64)> = band
        .grid
        .points
        .iter()
        .zip(&e0)
        .filter(|(_, &e)| e <= grid_min + cluster_tol)
        .map(|(t, &e)| (t.clone(), e))
        .collect();
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut clusters: Vec<(Vec<f64>, f64)> = Vec::new();
    for (theta, e) in candidates {
        if clusters
            .iter()
            .all(|(t, _)| torus_distance(t, &theta, k) > 1.5 * spacing)
        {
            clusters.push((theta, e));
        }
    }

    // local refinement: subdivide a shrinking window around each cluster
    let d = band.d as usize;
    let mut refined: Vec<(Vec<f64>, f64, Vec<(Vec<f64>, f64)>)> = Vec::new();
    for (center, energy) in clusters {
        let mut c = center;
        let mut e_c = energy;
        let mut w = spacing;
        let mut last_samples = Vec::new();
        for _ in 0..refine_levels {
            let mut samples = Vec::new();
            let pts_per_axis = 9usize;
            let step = 2.0 * w / (pts_per_axis - 1) as f64;
            let offsets: Vec<f64> = (0..pts_per_axis)
                .map(|i| -w + i as f64 * step)
                .collect();
            let mut eval_at = |theta: Vec<f64>| -> Result<(), FloquetError> {
                let wrapped = wrap_theta(&theta, k);
                let e = f.eval_lowest(&wrapped)?;
                samples.push((wrapped, e));
                Ok(())
            };
            match d {
                1 => {
                    for &o in &offsets {
                        eval_at(vec![c[0] + o])?;
                    }
                }
                _ => {
                    for &oa in &offsets {
                        for &ob in &offsets {
                            eval_at(vec![c[0] + oa, c[1] + ob])?;
                        }
                    }
                }
            }
            let best = samples
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty samples");
            c = best.0.clone();
            e_c = best.1;
            last_samples = samples;
            w /= 4.0;
        }
        refined.push((c, e_c, last_samples));
    }

    // merge refined minima that collapsed onto each other
    refined.sort_by(|a, b| a.1.total_cmp(&b.1));
    let final_window = spacing / 4f64.powi(refine_levels.max(1) as i32 - 1);
    let mut kept: Vec<(Vec<f64>, f64, Vec<(Vec<f64>, f64)>)> = Vec::new();
    for r in refined {
        if kept
            .iter()
            .all(|(t, _, _)| torus_distance(t, &r.0, k) > 2.0 * final_window)
        {
            kept.push(r);
        }
    }
    let e_min = kept
        .iter()
        .map(|(_, e, _)| *e)
        .fold(f64::INFINITY, f64::min);

    let deg_tol = 1e-6 * width;
    let mut minima = Vec::new();
    for (theta, energy, samples) in &kept {
        let all_bands = f.eval_bands(theta)?;
        let degeneracy = all_bands
            .iter()
            .filter(|&&e| e <= e_min + deg_tol)
            .count()
            .max(1);
        // diagonal least-squares quadratic through the last refinement
        // window: one coefficient per axis
        let mut quad = vec![0.0f64; d];
        for axis in 0..d {
            let mut num = 0.0;
            let mut den = 0.0;
            for (t, e) in samples {
                let delta = wrap_component(t[axis] - theta[axis], zone_halfwidth(k));
                let mut other = 0.0;
                for a2 in 0..d {
                    if a2 != axis {
                        other +=
                            wrap_component(t[a2] - theta[a2], zone_halfwidth(k)).abs();
                    }
                }
                // only samples varying along this axis
                if other < 1e-14 && delta.abs() > 1e-14 {
                    num += (e - energy) * delta * delta;
                    den += delta * delta * delta * delta;
                }
            }
            quad[axis] = if den > 0.0 { num / den } else { 0.0 };
        }
        minima.push(BandMinimum {
            theta: theta.clone(),
            energy: *energy,
            degeneracy,
            quad_coeffs: quad,
        });
    }
    minima.sort_by(|a, b| a.theta[0].total_cmp(&b.theta[0]));
    let m0 = minima.len();
    let n0 = minima.iter().map(|m| m.degeneracy).max().unwrap_or(1);
    Ok(BandMinimaReport {
        e_min,
        minima,
        m0,
        n0,
        spectral_width: width,
    })
}

/// Result of the quadratic pinch check at one minimum: over the punctured
/// ball of radius `delta`, `C_lower` is the smallest observed ratio
/// `(E0(theta) - E0(theta0)) / |theta - theta0|^2`, and `upper_ok` states
/// whether the increment stays below `(1 + 0.05) |theta - theta0|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchCheck {
    pub theta0: Vec<f64>,
    pub c_lower: f64,
    pub upper_ok: bool,
    pub margin: f64,
}

/// Discretization allowance on the upper pinch constant.
pub const PINCH_UPPER_ALLOWANCE: f64 = 0.05;

pub fn nondegeneracy_check(
    f: &dyn BandFunction,
    report: &BandMinimaReport,
    delta: f64,
) -> Result<Vec<PinchCheck>, FloquetError> {
    if !(delta > 0.0) {
        return Err(FloquetError::EmptyNeighborhood);
    }
    let per_axis = 33usize;
    let mut out = Vec::new();
    for minimum in &report.minima {
        let d = minimum.theta.len();
        let e0 = f.eval_lowest(&minimum.theta)?;
        let step = 2.0 * delta / (per_axis - 1) as f64;
        let offsets: Vec<f64> = (0..per_axis)
            .map(|i| -delta + i as f64 * step)
            .collect();
        let mut points: Vec<Vec<f64>> = Vec::new();
        match d {
            1 => {
                for &o in &offsets {
                    points.push(vec![o]);
                }
            }
            _ => {
                for &oa in &offsets {
                    for &ob in &offsets {
                        points.push(vec![oa, ob]);
                    }
                }
            }
        }
        let mut c_lower = f64::INFINITY;
        let mut upper_ok = true;
        let mut margin = f64::INFINITY;
        let mut seen = false;
        for offset in points {
            let r2: f64 = offset.iter().map(|x| x * x).sum();
            let r = r2.sqrt();
            if r < 0.75 * step || r > delta {
                continue;
            }
            seen = true;
            let theta: Vec<f64> = minimum
                .theta
                .iter()
                .zip(&offset)
                .map(|(a, b)| a + b)
                .collect();
            let de = f.eval_lowest(&theta)? - e0;
            c_lower = c_lower.min(de / r2);
            let cap = (1.0 + PINCH_UPPER_ALLOWANCE) * r2;
            if de > cap {
                upper_ok = false;
            }
            margin = margin.min(cap - de);
        }
        if !seen {
            return Err(FloquetError::EmptyNeighborhood);
        }
        out.push(PinchCheck {
            theta0: minimum.theta.clone(),
            c_lower,
            upper_ok,
            margin,
        });
    }
    Ok(out)
}

/// Reference cosine dispersion centered at `theta0`.
pub fn reference_dispersion(theta: &[f64], theta0: &[f64]) -> f64 {
    theta
        .iter()
        .zip(theta0)
        .map(|(t, t0)| 1.0 - (t - t0).cos())
        .sum()
}

/// Minimum of the lowest band of the disorder-free background, refined well
/// below the 1e-8 normalization tolerance.
pub fn background_band_minimum(spec: &ValidatedSpec, m: u32) -> Result<f64, FloquetError> {
    let bands = band_structure(spec, None, 0, 32, 0, m)?;
    let f = ModelBands { spec, mesh_m: m, j_max: 0 };
    match locate_minima(&bands, &f, 6) {
        Ok(report) => Ok(report.e_min),
        Err(FloquetError::FlatBand) => {
            // flat lowest band: any grid value is the minimum
            Ok(bands.lowest().fold(f64::INFINITY, f64::min))
        }
        Err(e) => Err(e),
    }
}

/// Density of states of the periodic approximation at supercell order `k`:
/// the per-unit-volume momentum average of the counting function of the
/// supercell fibers, with the disorder configuration `real` on `C_k`
/// repeated periodically.
pub fn periodic_ids(
    spec: &ValidatedSpec,
    k: u32,
    real: &DisorderRealization,
    e_grid: &[f64],
    theta_per_axis: usize,
    m: u32,
) -> Result<IdsEstimate, FloquetError> {
    let grid = ThetaGrid::midpoint(spec.d, k, theta_per_axis);
    let volume = (2 * k + 1).pow(spec.d) as f64;
    let mut sums = vec![0.0f64; e_grid.len()];
    for theta in &grid.points {
        let cell = assemble_floquet_cell(spec, Some(real), k, theta, m)?;
        for (i, &e) in e_grid.iter().enumerate() {
            sums[i] += count_at_or_below(&cell, e)? as f64;
        }
    }
    let mean: Vec<f64> = sums
        .iter()
        .map(|s| s / (grid.points.len() as f64 * volume))
        .collect();
    Ok(IdsEstimate {
        e_grid: e_grid.to_vec(),
        stderr: vec![0.0; e_grid.len()],
        mean,
        n_realizations: 1,
        box_l: k as i64,
        mesh_m: m,
        spec_hash: spec.hash(),
        master_seed: real.master_seed,
        budget_exhausted: false,
        estimator: format!("floquet-cell-k{k}"),
    })
}
