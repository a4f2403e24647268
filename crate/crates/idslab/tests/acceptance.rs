//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with the measured quantity next to its threshold.
//!
//! Run with `cargo test -p idslab --test acceptance -- --nocapture`.

use idslab::model::{
    preset, sample_realization, spectral_shift, validate_spec, BoxDiscretization, BoxIndex,
    CellField, Cube, DisorderLaw, ModelKind, ModelSpec, Profile, ValidatedSpec,
};
use idslab::{
    approximation_convergence, assemble_box, band_structure, count_at_or_below, counting_profile,
    d_independence, empirical_ids, eigenvalues_dense, fit_from_ids, locate_minima,
    nondegeneracy_check, BandedHermitian, IdsEstimate, LifshitzFit, ModelBands, MonteCarlo,
    OperatorMatrix,
};

fn validated(name: &str) -> ValidatedSpec {
    validate_spec(preset(name).unwrap()).unwrap()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

struct Rng(u64);

impl Rng {
    fn unit(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
    fn sym(&mut self) -> f64 {
        self.unit() * 2.0 - 1.0
    }
}

fn free_continuum(fiber: u32) -> ValidatedSpec {
    let dd = fiber as usize;
    validate_spec(ModelSpec {
        d: 1,
        fiber,
        kind: ModelKind::Continuum,
        w: CellField {
            points_per_axis: 1,
            values: vec![0.0; dd * dd],
        },
        v: (0..dd)
            .map(|_| Profile {
                field: CellField::constant(1.0),
                subcube: Cube { lo: vec![-0.5], hi: vec![0.5] },
            })
            .collect(),
        nu: (0..dd)
            .map(|_| DisorderLaw::Bernoulli { p: 0.0, amplitude: 1.0 })
            .collect(),
        shift: 0.0,
    })
    .unwrap()
}

/// 200 random real block-tridiagonal matrices (n <= 400, block sizes 1..8),
/// 20 energies each: the inertia count must equal the dense-oracle count in
/// every single case.
#[test]
fn criterion_01_inertia_matches_dense_oracle() {
    let start = std::time::Instant::now();
    let mut rng = Rng(0x1d51ab01);
    let mut cases = 0usize;
    for _ in 0..200 {
        let n = 50 + (rng.unit() * 350.0) as usize;
        let block = 1 + (rng.unit() * 7.99) as usize;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, rng.sym() * 2.0));
            for j in i.saturating_sub(block)..i {
                entries.push((i, j, rng.sym()));
            }
        }
        let a = OperatorMatrix::Real(BandedHermitian::from_entries(n, &entries));
        let eig = eigenvalues_dense(&a).unwrap();
        let tau = 1e-12 * a.scale().max(1.0);
        for _ in 0..20 {
            let e = -5.0 + rng.unit() * 10.0;
            let oracle = eig.iter().filter(|&&x| x < e + tau).count();
            let counted = count_at_or_below(&a, e).unwrap();
            assert_eq!(counted, oracle, "n={n} block={block} E={e}");
            cases += 1;
        }
    }
    assert_eq!(cases, 4000);
    let dt = start.elapsed();
    assert!(dt.as_secs() < 60, "took {dt:.1?}");
    println!("[PASS] criterion 01 inertia-oracle equivalence: 4000/4000 exact in {dt:.1?}");
}

/// Free Dirichlet spectrum at n = 500: every eigenvalue matches the
/// closed form (4/h^2) sin^2(j pi / (2(n+1))) to relative 1e-10.
#[test]
fn criterion_02_free_dirichlet_spectrum() {
    let spec = free_continuum(1);
    // L = 83, m = 3: interior count 3*167 - 1 = 500
    let disc = BoxDiscretization::new(83, 3);
    let real = sample_realization(&spec, BoxIndex::new(83, 1), 0, 0);
    let a = assemble_box(&spec, &disc, &real).unwrap();
    assert_eq!(a.n(), 500);
    let eig = eigenvalues_dense(&a).unwrap();
    let h = 1.0 / 3.0;
    let n = 500usize;
    let mut worst = 0.0f64;
    for (j, lam) in eig.iter().enumerate() {
        let exact = 4.0 / (h * h)
            * ((j + 1) as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0)))
                .sin()
                .powi(2);
        worst = worst.max((lam - exact).abs() / exact);
    }
    assert!(worst <= 1e-10, "worst relative error {worst:.3e}");
    println!("[PASS] criterion 02 free Dirichlet spectrum: worst relative error {worst:.2e} <= 1e-10");
}

fn weyl_run(fiber: u32) -> (IdsEstimate, Vec<usize>) {
    let spec = free_continuum(fiber);
    let disc = BoxDiscretization::new(100, 20);
    let grid = lin_grid(0.5, 4.0, 50);
    let mc = MonteCarlo { n_realizations: 1, master_seed: 7, budget: None };
    let est = empirical_ids(&spec, &disc, &grid, &mc).unwrap();
    // raw integer counts for the fiber-doubling check
    let real = sample_realization(&spec, BoxIndex::new(100, 1), 7, 0);
    let a = assemble_box(&spec, &disc, &real).unwrap();
    let profile = counting_profile(&a, &grid).unwrap();
    (est, profile.counts)
}

/// Weyl law for the free continuum operator: sup |N(E) - sqrt(E)/pi|
/// over 50 energies in [0.5, 4] at L = 100, m = 20 stays below 0.02.
#[test]
fn criterion_03_weyl_law() {
    let start = std::time::Instant::now();
    let (est, _) = weyl_run(1);
    let mut sup = 0.0f64;
    for (i, &e) in est.e_grid.iter().enumerate() {
        sup = sup.max((est.mean[i] - e.sqrt() / std::f64::consts::PI).abs());
    }
    let dt = start.elapsed();
    assert!(sup <= 0.02, "sup deviation {sup:.4}");
    assert!(dt.as_secs() < 120, "took {dt:.1?}");
    println!("[PASS] criterion 03 Weyl law: sup|N - sqrt(E)/pi| = {sup:.4} <= 0.02 in {dt:.1?}");
}

/// Doubling the fiber dimension of the free operator doubles every raw
/// count exactly.
#[test]
fn criterion_04_fiber_doubling() {
    let (_, counts1) = weyl_run(1);
    let (_, counts2) = weyl_run(2);
    for (c1, c2) in counts1.iter().zip(&counts2) {
        assert_eq!(2 * c1, *c2);
    }
    println!("[PASS] criterion 04 fiber doubling: counts exactly doubled at all 50 energies");
}

/// Free lattice band equals 1 - cos(theta) on the grid to 1e-12;
/// conjugation symmetry on the two-channel preset holds to 1e-10.
#[test]
fn criterion_05_floquet_exactness() {
    let lattice = validate_spec(ModelSpec {
        nu: vec![DisorderLaw::Bernoulli { p: 0.0, amplitude: 1.0 }],
        ..preset("lattice-anderson-d1").unwrap()
    })
    .unwrap();
    let band = band_structure(&lattice, None, 0, 64, 0, 1).unwrap();
    let mut worst = 0.0f64;
    for (t, row) in band.bands.iter().enumerate() {
        let theta = band.grid.points[t][0];
        worst = worst.max((row[0] - (1.0 - theta.cos())).abs());
    }
    assert!(worst <= 1e-12, "band error {worst:.3e}");

    let two_channel = validated("hl-D2");
    let band2 = band_structure(&two_channel, None, 0, 32, 3, 8).unwrap();
    assert!(
        band2.conjugation_asymmetry <= 1e-10,
        "asymmetry {:.3e}",
        band2.conjugation_asymmetry
    );
    println!(
        "[PASS] criterion 05 Floquet exactness: band error {worst:.2e} <= 1e-12, conjugation asymmetry {:.2e} <= 1e-10",
        band2.conjugation_asymmetry
    );
}

/// Quadratic pinch at the bottom of the spectrum for the normalized
/// two-channel preset: C_lower >= 0.1 and the upper bound holds with the
/// 5 percent discretization allowance at radius 0.3.
#[test]
fn criterion_06_band_minimum_pinch() {
    let spec = validated("hl-D2");
    let mesh = BoxDiscretization::new(0, 8);
    let (shifted, _) = spectral_shift(&spec, &mesh).unwrap();
    let band = band_structure(&shifted, None, 0, 32, 1, 8).unwrap();
    let f = ModelBands { spec: &shifted, mesh_m: 8, j_max: 1 };
    let report = locate_minima(&band, &f, 4).unwrap();
    let checks = nondegeneracy_check(&f, &report, 0.3).unwrap();
    for check in &checks {
        assert!(check.c_lower >= 0.1, "C_lower = {}", check.c_lower);
        assert!(check.upper_ok, "upper bound violated, margin {}", check.margin);
    }
    println!(
        "[PASS] criterion 06 band minimum pinch: C_lower = {:.3} >= 0.1, upper bound ok (allowance 0.05)",
        checks[0].c_lower
    );
}

fn lifshitz_lattice_run() -> (IdsEstimate, LifshitzFit) {
    let spec = validated("lattice-anderson-d1");
    let mesh = BoxDiscretization::new(25_000, 1); // 50 001 sites
    let (shifted, _) = spectral_shift(&spec, &mesh).unwrap();
    let grid = log_grid(0.003, 0.05, 24);
    let mc = MonteCarlo { n_realizations: 200, master_seed: 20240601, budget: None };
    let ids = empirical_ids(&shifted, &mesh, &grid, &mc).unwrap();
    let fit = fit_from_ids(&ids, 1, (0.003, 0.05)).unwrap();
    (ids, fit)
}

/// Tail exponent of the 1d lattice model with Bernoulli(1/2, 1) coupling:
/// 5e4 sites, 200 realizations, window [0.003, 0.05]; the fitted slope
/// must land within 0.15 of -1/2.
#[test]
fn criterion_07_lifshitz_exponent_lattice_d1() {
    let start = std::time::Instant::now();
    let (_, fit) = lifshitz_lattice_run();
    let dt = start.elapsed();
    let err = (fit.slope + 0.5).abs();
    assert!(
        err <= 0.15,
        "slope {} +- {} (|err| = {err:.3})",
        fit.slope,
        fit.slope_stderr
    );
    assert!(dt.as_secs() < 600, "took {dt:.1?}");
    println!(
        "[PASS] criterion 07 lattice tail exponent: slope {:.4} +- {:.4}, |slope + 0.5| = {err:.3} <= 0.15 in {dt:.1?}",
        fit.slope, fit.slope_stderr
    );
}

fn d_comparison_fit(name: &str, window: (f64, f64)) -> LifshitzFit {
    let spec = validated(name);
    let mesh = BoxDiscretization::new(2000, 6);
    let (shifted, _) = spectral_shift(&spec, &mesh).unwrap();
    let grid = log_grid(window.0, window.1, 22);
    let mc = MonteCarlo { n_realizations: 100, master_seed: 777, budget: None };
    let ids = empirical_ids(&shifted, &mesh, &grid, &mc).unwrap();
    fit_from_ids(&ids, 1, window).unwrap()
}

/// The fitted tail exponent of the quasi-one-dimensional continuum model
/// does not depend on the fiber dimension: matched windows at D = 1 and
/// D = 2 agree within 0.2 and both land within 0.25 of -1/2.
#[test]
fn criterion_08_fiber_independence_of_exponent() {
    let start = std::time::Instant::now();
    let window = (0.09, 0.6);
    let fit1 = d_comparison_fit("scalar-anderson-d1", window);
    let fit2 = d_comparison_fit("hl-D2", window);
    let report = d_independence(&[(1, &fit1), (2, &fit2)], 0.2).unwrap();
    let dt = start.elapsed();
    let diff = report.pairs[0].difference;
    assert!(diff <= 0.2, "|slope_D1 - slope_D2| = {diff:.3}");
    for (d_fiber, fit) in [(1, &fit1), (2, &fit2)] {
        assert!(
            (fit.slope + 0.5).abs() <= 0.25,
            "D={d_fiber} slope {} too far from -0.5",
            fit.slope
        );
    }
    assert!(dt.as_secs() < 1200, "took {dt:.1?}");
    println!(
        "[PASS] criterion 08 fiber independence: slopes {:.4} (D=1) vs {:.4} (D=2), diff {diff:.3} <= 0.2, both within 0.25 of -0.5 in {dt:.1?}",
        fit1.slope, fit2.slope
    );
}

/// Periodic approximations approach the large-box reference: at five test
/// energies the k = 8 deviation does not exceed the k = 2 deviation by
/// more than two combined standard errors.
#[test]
fn criterion_09_periodic_approximation_convergence() {
    let spec = validated("lattice-anderson-d1");
    let mesh = BoxDiscretization::new(25_000, 1);
    let (shifted, _) = spectral_shift(&spec, &mesh).unwrap();
    let energies = vec![0.1, 0.3, 0.6, 1.0, 1.5];
    let mc_ref = MonteCarlo { n_realizations: 200, master_seed: 31, budget: None };
    let reference = empirical_ids(&shifted, &mesh, &energies, &mc_ref).unwrap();
    let mc = MonteCarlo { n_realizations: 200, master_seed: 32, budget: None };
    let rows = approximation_convergence(&shifted, &[2, 4, 8], &energies, 64, 1, &mc, &reference)
        .unwrap();
    for (i, &e) in energies.iter().enumerate() {
        let at = |k: u32| rows.iter().find(|r| r.k == k && r.energy == e).unwrap();
        let r2 = at(2);
        let r8 = at(8);
        let combined = (r2.stderr.powi(2) + r8.stderr.powi(2)
            + 2.0 * reference.stderr[i].powi(2))
        .sqrt();
        assert!(
            r8.deviation <= r2.deviation + 2.0 * combined,
            "E={e}: dev(k=8)={:.3e} vs dev(k=2)={:.3e} + 2*{:.3e}",
            r8.deviation,
            r2.deviation,
            combined
        );
    }
    println!(
        "[PASS] criterion 09 periodic approximation convergence: deviation(k=8) <= deviation(k=2) + 2 sigma at all 5 energies"
    );
}

/// Re-running the Weyl-law and tail pipelines with the same seeds and a
/// different worker count reproduces the artifacts byte for byte.
#[test]
fn criterion_10_determinism() {
    let (ids_a, _) = weyl_run(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(2)
        .build()
        .unwrap();
    let (ids_b, _) = pool.install(|| weyl_run(1));
    assert_eq!(
        serde_json::to_string(&ids_a).unwrap(),
        serde_json::to_string(&ids_b).unwrap()
    );

    let (tail_ids_a, fit_a) = lifshitz_lattice_run();
    let (tail_ids_b, fit_b) = pool.install(lifshitz_lattice_run);
    assert_eq!(
        serde_json::to_string(&tail_ids_a).unwrap(),
        serde_json::to_string(&tail_ids_b).unwrap()
    );
    assert_eq!(
        serde_json::to_string(&fit_a).unwrap(),
        serde_json::to_string(&fit_b).unwrap()
    );
    println!("[PASS] criterion 10 determinism: repeated runs are byte-identical across worker counts");
}
