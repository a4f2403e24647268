//! Quick scan of the low-energy tail and the periodic-approximation error
//! for the shipped presets. Useful for picking fit windows before a long
//! run.

use idslab::model::{preset, validate_spec, BoxDiscretization};
use idslab::{
    approximation_convergence, empirical_ids, fit_from_ids, spectral_shift, MonteCarlo,
};

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn main() {
    let t0 = std::time::Instant::now();

    // 1d lattice tail
    {
        let spec = validate_spec(preset("lattice-anderson-d1").unwrap()).unwrap();
        let mesh = BoxDiscretization::new(25_000, 1);
        let (shifted, e0) = spectral_shift(&spec, &mesh).unwrap();
        println!("# lattice-anderson-d1: band bottom {e0:.3e}");
        let grid = log_grid(0.003, 0.05, 24);
        let mc = MonteCarlo { n_realizations: 200, master_seed: 20240601, budget: None };
        let ids = empirical_ids(&shifted, &mesh, &grid, &mc).unwrap();
        for (e, (m, s)) in grid.iter().zip(ids.mean.iter().zip(&ids.stderr)) {
            println!("E={e:.5}  N={m:.3e}  err={s:.1e}");
        }
        match fit_from_ids(&ids, 1, (0.003, 0.05)) {
            Ok(fit) => println!(
                "lattice d1 slope = {:.4} +- {:.4}  (used {}, empty {}, regime {})  [{:.1?}]",
                fit.slope,
                fit.slope_stderr,
                fit.points.len(),
                fit.dropped_empty,
                fit.dropped_regime,
                t0.elapsed()
            ),
            Err(e) => println!("fit failed: {e}"),
        }
    }

    // continuum D=1 vs D=2 tails
    for (name, d_fiber) in [("scalar-anderson-d1", 1u32), ("hl-D2", 2)] {
        let t = std::time::Instant::now();
        let spec = validate_spec(preset(name).unwrap()).unwrap();
        let mesh = BoxDiscretization::new(2000, 6);
        let (shifted, e0) = spectral_shift(&spec, &mesh).unwrap();
        println!("# {name}: band bottom {e0:.3e}");
        let grid = log_grid(0.05, 1.0, 28);
        let mc = MonteCarlo { n_realizations: 100, master_seed: 777, budget: None };
        let ids = empirical_ids(&shifted, &mesh, &grid, &mc).unwrap();
        for (e, m) in grid.iter().zip(ids.mean.iter()) {
            println!("E={e:.4}  N={m:.4e}");
        }
        for window in [(0.09, 0.6), (0.12, 0.8), (0.15, 1.0)] {
            match fit_from_ids(&ids, 1, window) {
                Ok(fit) => println!(
                    "{name} (D={d_fiber}) window {window:?}: slope {:.4} +- {:.4} ({} pts) [{:.1?}]",
                    fit.slope,
                    fit.slope_stderr,
                    fit.points.len(),
                    t.elapsed()
                ),
                Err(e) => println!("{name} window {window:?}: {e}"),
            }
        }
    }

    // periodic approximation deviations
    {
        let t = std::time::Instant::now();
        let spec = validate_spec(preset("lattice-anderson-d1").unwrap()).unwrap();
        let mesh = BoxDiscretization::new(25_000, 1);
        let (shifted, _) = spectral_shift(&spec, &mesh).unwrap();
        let energies = vec![0.1, 0.3, 0.6, 1.0, 1.5];
        let mc_ref = MonteCarlo { n_realizations: 200, master_seed: 31, budget: None };
        let reference = empirical_ids(&shifted, &mesh, &energies, &mc_ref).unwrap();
        let mc = MonteCarlo { n_realizations: 200, master_seed: 32, budget: None };
        let rows =
            approximation_convergence(&shifted, &[2, 4, 8], &energies, 64, 1, &mc, &reference)
                .unwrap();
        for r in &rows {
            println!(
                "k={} E={:.2}: mean={:.5} dev={:.2e} err={:.1e} ref_err={:.1e}",
                r.k, r.energy, r.mean, r.deviation, r.stderr, r.ref_stderr
            );
        }
        println!("compare-k done [{:.1?}]", t.elapsed());
    }
}
