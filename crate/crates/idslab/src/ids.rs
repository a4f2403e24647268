//! Monte-Carlo estimation of the integrated density of states by
//! finite-box eigenvalue counting, plus finite-size and
//! periodic-approximation convergence studies.

use crate::assembly::{assemble_box, AssemblyError, OperatorMatrix};
use crate::floquet::{periodic_ids, FloquetError};
use crate::model::{sample_realization, BoxDiscretization, BoxIndex, ValidatedSpec};
use crate::spectral::{count_at_or_below, counting_profile, SpectralError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdsError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error("energy grids do not match between the study and its reference")]
    GridMismatch,
}

/// Monte-Carlo IDS curve with per-energy standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsEstimate {
    pub e_grid: Vec<f64>,
    /// Counting mean per unit volume.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_realizations: u32,
    pub box_l: i64,
    pub mesh_m: u32,
    pub spec_hash: String,
    pub master_seed: u64,
    /// Set when a wall-time cap stopped the run early; `n_realizations`
    /// then records the completed count.
    pub budget_exhausted: bool,
    pub estimator: String,
}

impl IdsEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy,mean,stderr\n");
        for i in 0..self.e_grid.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.e_grid[i], self.mean[i], self.stderr[i]
            ));
        }
        out
    }
}

/// Monte-Carlo budget.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarlo {
    pub n_realizations: u32,
    pub master_seed: u64,
    /// Optional wall-time cap; when hit, the estimate is returned from the
    /// realizations completed so far with `budget_exhausted` set.
    pub budget: Option<Duration>,
}

fn realization_counts(
    spec: &ValidatedSpec,
    disc: &BoxDiscretization,
    e_grid: &[f64],
    master_seed: u64,
    index: u64,
    retry_base: u64,
) -> Result<Vec<f64>, IdsError> {
    let run = |idx: u64| -> Result<Vec<f64>, IdsError> {
        let real = sample_realization(spec, disc.box_index(spec.d), master_seed, idx);
        let a = assemble_box(spec, disc, &real)?;
        let profile = counting_profile(&a, e_grid)?;
        let volume = (2 * disc.l + 1).pow(spec.d) as f64;
        Ok(profile.counts.iter().map(|&c| c as f64 / volume).collect())
    };
    match run(index) {
        Ok(v) => Ok(v),
        Err(IdsError::Spectral(SpectralError::SingularShift { .. })) => {
            // one retry with a fresh sub-stream; dropping the realization
            // silently would bias the estimator
            run(retry_base + index)
        }
        Err(e) => Err(e),
    }
}

fn aggregate(
    e_grid: &[f64],
    per_realization: &[Vec<f64>],
    disc: &BoxDiscretization,
    spec: &ValidatedSpec,
    mc: &MonteCarlo,
    budget_exhausted: bool,
    estimator: &str,
) -> IdsEstimate {
    let n = per_realization.len().max(1);
    let mut mean = vec![0.0f64; e_grid.len()];
    for row in per_realization {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut stderr = vec![0.0f64; e_grid.len()];
    if per_realization.len() > 1 {
        for row in per_realization {
            for (s, (v, m)) in stderr.iter_mut().zip(row.iter().zip(&mean)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stderr {
            *s = (*s / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
        }
    }
    IdsEstimate {
        e_grid: e_grid.to_vec(),
        mean,
        stderr,
        n_realizations: per_realization.len() as u32,
        box_l: disc.l,
        mesh_m: disc.m,
        spec_hash: spec.hash(),
        master_seed: mc.master_seed,
        budget_exhausted,
        estimator: estimator.to_string(),
    }
}

/// Estimate the IDS on `e_grid` by averaging Dirichlet-box counting over
/// disorder realizations. Counts are normalized by the box volume
/// `(2L+1)^d`. Deterministic in `(spec, disc, grid, mc)` regardless of the
/// worker count.
pub fn empirical_ids(
    spec: &ValidatedSpec,
    disc: &BoxDiscretization,
    e_grid: &[f64],
    mc: &MonteCarlo,
) -> Result<IdsEstimate, IdsError> {
    let retry_base = mc.n_realizations as u64;
    let rows: Vec<Vec<f64>>;
    let mut exhausted = false;
    match mc.budget {
        None => {
            rows = (0..mc.n_realizations as u64)
                .into_par_iter()
                .map(|r| realization_counts(spec, disc, e_grid, mc.master_seed, r, retry_base))
                .collect::<Result<Vec<_>, _>>()?;
        }
        Some(cap) => {
            let start = Instant::now();
            let mut acc = Vec::new();
            for r in 0..mc.n_realizations as u64 {
                acc.push(realization_counts(
                    spec,
                    disc,
                    e_grid,
                    mc.master_seed,
                    r,
                    retry_base,
                )?);
                if start.elapsed() > cap && (r + 1) < mc.n_realizations as u64 {
                    exhausted = true;
                    break;
                }
            }
            rows = acc;
        }
    }
    Ok(aggregate(e_grid, &rows, disc, spec, mc, exhausted, "dirichlet-box"))
}

/// Single-energy estimates across box sizes, with successive differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub l: i64,
    pub mean: f64,
    pub stderr: f64,
    /// |mean - previous mean|, absent on the first row.
    pub diff_prev: Option<f64>,
}

pub fn finite_size_study(
    spec: &ValidatedSpec,
    ls: &[i64],
    m: u32,
    e_star: f64,
    mc: &MonteCarlo,
) -> Result<Vec<SizeRow>, IdsError> {
    let mut rows: Vec<SizeRow> = Vec::with_capacity(ls.len());
    for &l in ls {
        let disc = BoxDiscretization::new(l, m);
        let est = empirical_ids(spec, &disc, &[e_star], mc)?;
        let diff_prev = rows.last().map(|prev: &SizeRow| (est.mean[0] - prev.mean).abs());
        rows.push(SizeRow {
            l,
            mean: est.mean[0],
            stderr: est.stderr[0],
            diff_prev,
        });
    }
    Ok(rows)
}

/// One `(k, E)` cell of the periodic-approximation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: u32,
    pub energy: f64,
    pub mean: f64,
    pub stderr: f64,
    pub ref_mean: f64,
    pub ref_stderr: f64,
    pub deviation: f64,
}

/// Average the periodic-approximation IDS over disorder on `C_k` for each
/// `k` and report deviations from a large-box reference on the same grid.
pub fn approximation_convergence(
    spec: &ValidatedSpec,
    ks: &[u32],
    e_grid: &[f64],
    theta_per_axis: usize,
    m: u32,
    mc: &MonteCarlo,
    reference: &IdsEstimate,
) -> Result<Vec<ConvergenceRow>, IdsError> {
    if reference.e_grid != e_grid {
        return Err(IdsError::GridMismatch);
    }
    let mut out = Vec::new();
    for &k in ks {
        let rows: Vec<Vec<f64>> = (0..mc.n_realizations as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<f64>, IdsError> {
                let real =
                    sample_realization(spec, BoxIndex::new(k as i64, spec.d), mc.master_seed, r);
                let est = periodic_ids(spec, k, &real, e_grid, theta_per_axis, m)?;
                Ok(est.mean)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = rows.len() as f64;
        for (i, &e) in e_grid.iter().enumerate() {
            let mean = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            let var = if rows.len() > 1 {
                rows.iter().map(|r| (r[i] - mean) * (r[i] - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            out.push(ConvergenceRow {
                k,
                energy: e,
                mean,
                stderr: (var / n).sqrt(),
                ref_mean: reference.mean[i],
                ref_stderr: reference.stderr[i],
                deviation: (mean - reference.mean[i]).abs(),
            });
        }
    }
    Ok(out)
}

/// Exact counting additivity of the block-diagonal concatenation.
pub fn direct_sum_check(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    e_grid: &[f64],
) -> Result<bool, IdsError> {
    let sum = a.direct_sum(b);
    for &e in e_grid {
        let lhs = count_at_or_below(&sum, e)?;
        let rhs = count_at_or_below(a, e)? + count_at_or_below(b, e)?;
        if lhs != rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::BandedHermitian;
    use crate::model::{preset_models, validate_spec, DisorderLaw, ModelSpec};

    fn preset(name: &str) -> ValidatedSpec {
        let spec = preset_models()
            .into_iter()
            .find(|(n, _)| *n == name)
            .unwrap()
            .1;
        validate_spec(spec).unwrap()
    }

    fn mc(n: u32, seed: u64) -> MonteCarlo {
        MonteCarlo { n_realizations: n, master_seed: seed, budget: None }
    }

    #[test]
    fn weyl_law_small_box() {
        let spec = preset("free-d1");
        let disc = BoxDiscretization::new(25, 8);
        let e_grid: Vec<f64> = (0..8).map(|i| 0.5 + i as f64 * 0.5).collect();
        let est = empirical_ids(&spec, &disc, &e_grid, &mc(1, 0)).unwrap();
        for (i, &e) in e_grid.iter().enumerate() {
            let expected = e.sqrt() / std::f64::consts::PI;
            assert!(
                (est.mean[i] - expected).abs() <= 0.05,
                "E={e}: {} vs {expected}",
                est.mean[i]
            );
        }
    }

    #[test]
    fn mean_is_monotone_and_bounded() {
        let spec = preset("lattice-anderson-d1");
        let disc = BoxDiscretization::new(100, 1);
        let e_grid: Vec<f64> = (0..12).map(|i| 0.25 * i as f64).collect();
        let est = empirical_ids(&spec, &disc, &e_grid, &mc(8, 3)).unwrap();
        for w in est.mean.windows(2) {
            assert!(w[0] <= w[1] + 1e-15);
        }
        assert!(est.mean.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        assert!(est.stderr.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn seed_stability_across_worker_counts() {
        let spec = preset("lattice-anderson-d1");
        let disc = BoxDiscretization::new(60, 1);
        let e_grid = vec![0.3, 0.9, 1.7];
        let a = empirical_ids(&spec, &disc, &e_grid, &mc(12, 99)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| empirical_ids(&spec, &disc, &e_grid, &mc(12, 99)).unwrap());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn disorder_monotonicity_pointwise() {
        let base = preset("lattice-anderson-d1");
        let all_on = validate_spec(ModelSpec {
            nu: vec![DisorderLaw::Bernoulli { p: 1.0, amplitude: 1.0 }],
            ..base.spec().clone()
        })
        .unwrap();
        let all_off = validate_spec(ModelSpec {
            nu: vec![DisorderLaw::Bernoulli { p: 0.0, amplitude: 1.0 }],
            ..base.spec().clone()
        })
        .unwrap();
        let disc = BoxDiscretization::new(80, 1);
        let e_grid: Vec<f64> = (0..10).map(|i| 0.25 * i as f64).collect();
        let hi = empirical_ids(&all_on, &disc, &e_grid, &mc(1, 5)).unwrap();
        let lo = empirical_ids(&all_off, &disc, &e_grid, &mc(1, 5)).unwrap();
        for i in 0..e_grid.len() {
            assert!(hi.mean[i] <= lo.mean[i] + 1e-15);
        }
    }

    #[test]
    fn free_case_boundary_error_shrinks_with_l() {
        let spec = preset("free-d1");
        let truth = (2.0f64).sqrt() / std::f64::consts::PI;
        let rows = finite_size_study(&spec, &[10, 20, 40], 8, 2.0, &mc(1, 0)).unwrap();
        let errs: Vec<f64> = rows.iter().map(|r| (r.mean - truth).abs()).collect();
        assert!(errs[1] <= errs[0] + 1e-3);
        assert!(errs[2] <= errs[1] + 1e-3);
        assert!(rows[0].diff_prev.is_none());
        assert!(rows[1].diff_prev.is_some());
    }

    #[test]
    fn stderr_scales_like_inverse_sqrt_n() {
        let spec = preset("lattice-anderson-d1");
        let disc = BoxDiscretization::new(40, 1);
        let small = empirical_ids(&spec, &disc, &[0.5], &mc(32, 7)).unwrap();
        let large = empirical_ids(&spec, &disc, &[0.5], &mc(128, 7)).unwrap();
        let ratio = large.stderr[0] / small.stderr[0];
        assert!(
            (0.3..=0.85).contains(&ratio),
            "stderr ratio {ratio} not near 0.5"
        );
    }

    #[test]
    fn single_l_study_has_one_row() {
        let spec = preset("lattice-anderson-d1");
        let rows = finite_size_study(&spec, &[20], 1, 0.5, &mc(2, 1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].diff_prev.is_none());
    }

    #[test]
    fn constant_disorder_is_k_independent() {
        // Bernoulli(p=1) freezes every coupling at the amplitude, so the
        // periodic approximation is the same one-period operator for any k.
        let base = preset("lattice-anderson-d1");
        let frozen = validate_spec(ModelSpec {
            nu: vec![DisorderLaw::Bernoulli { p: 1.0, amplitude: 0.6 }],
            ..base.spec().clone()
        })
        .unwrap();
        let e_grid = vec![0.37, 0.91, 1.63];
        // matched total momentum count: per-k points x cell size constant
        let mut means: Vec<Vec<f64>> = Vec::new();
        for (k, pts) in [(0u32, 18usize), (1, 6), (4, 2)] {
            let real = sample_realization(&frozen, BoxIndex::new(k as i64, 1), 0, 0);
            let est = periodic_ids(&frozen, k, &real, &e_grid, pts, 1).unwrap();
            means.push(est.mean);
        }
        for i in 0..e_grid.len() {
            assert!((means[0][i] - means[1][i]).abs() <= 1e-10);
            assert!((means[0][i] - means[2][i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn free_continuum_periodic_ids_matches_weyl() {
        let spec = preset("free-d1");
        let e_grid = vec![0.5, 1.0, 2.0, 4.0];
        let real = sample_realization(&spec, BoxIndex::new(2, 1), 0, 0);
        let est = periodic_ids(&spec, 2, &real, &e_grid, 64, 20).unwrap();
        for (i, &e) in e_grid.iter().enumerate() {
            let expected = e.sqrt() / std::f64::consts::PI;
            assert!(
                (est.mean[i] - expected).abs() <= 0.01,
                "E={e}: {} vs {expected}",
                est.mean[i]
            );
        }
    }

    #[test]
    fn convergence_study_smoke() {
        let spec = preset("lattice-anderson-d1");
        let e_grid = vec![0.4, 1.0];
        let disc = BoxDiscretization::new(400, 1);
        let reference = empirical_ids(&spec, &disc, &e_grid, &mc(20, 21)).unwrap();
        let rows =
            approximation_convergence(&spec, &[1, 3], &e_grid, 32, 1, &mc(20, 22), &reference)
                .unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert!(row.deviation.is_finite());
            assert!(row.stderr >= 0.0);
        }
    }

    #[test]
    fn grid_mismatch_is_detected() {
        let spec = preset("lattice-anderson-d1");
        let disc = BoxDiscretization::new(20, 1);
        let reference = empirical_ids(&spec, &disc, &[0.5], &mc(2, 0)).unwrap();
        let err = approximation_convergence(&spec, &[1], &[0.6], 16, 1, &mc(2, 0), &reference);
        assert!(matches!(err, Err(IdsError::GridMismatch)));
    }

    #[test]
    fn direct_sum_additivity() {
        let a = OperatorMatrix::Real(BandedHermitian::from_entries(1, &[(0, 0, 1.0)]));
        let b = OperatorMatrix::Real(BandedHermitian::from_entries(1, &[(0, 0, 2.0)]));
        assert!(direct_sum_check(&a, &b, &[1.5]).unwrap());
        assert!(direct_sum_check(&a, &a, &[0.5, 1.5, 2.5]).unwrap());

        let mut state = 0x77u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let tri = |n: usize, rnd: &mut dyn FnMut() -> f64| {
            let mut entries = Vec::new();
            for i in 0..n {
                entries.push((i, i, rnd()));
                if i > 0 {
                    entries.push((i, i - 1, rnd()));
                }
            }
            OperatorMatrix::Real(BandedHermitian::from_entries(n, &entries))
        };
        let x = tri(50, &mut rnd);
        let y = tri(50, &mut rnd);
        let grid: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64).collect();
        assert!(direct_sum_check(&x, &y, &grid).unwrap());
    }

    #[test]
    fn budget_cap_returns_partial_results() {
        let spec = preset("lattice-anderson-d1");
        let disc = BoxDiscretization::new(2000, 1);
        let est = empirical_ids(
            &spec,
            &disc,
            &[0.5],
            &MonteCarlo {
                n_realizations: 100_000,
                master_seed: 1,
                budget: Some(Duration::from_millis(50)),
            },
        )
        .unwrap();
        assert!(est.budget_exhausted);
        assert!(est.n_realizations < 100_000);
        assert!(est.n_realizations >= 1);
    }
}
