//! Property tests for the counting, assembly, sampling, and tail-transform
//! invariants.

use idslab::model::{
    preset, sample_realization, validate_spec, BoxIndex, CellField, Cube, DisorderLaw, ModelKind,
    ModelSpec, Profile,
};
use idslab::{
    assemble_floquet_cell, count_at_or_below, counting_profile, direct_sum_check, fit_from_ids,
    BandedHermitian, IdsEstimate, OperatorMatrix,
};
use proptest::prelude::*;

fn banded_real(seed: u64, n: usize, bw: usize) -> OperatorMatrix {
    let mut state = seed | 1;
    let mut rnd = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut entries = Vec::new();
    for i in 0..n {
        entries.push((i, i, rnd() * 2.0));
        for j in i.saturating_sub(bw)..i {
            entries.push((i, j, rnd()));
        }
    }
    OperatorMatrix::Real(BandedHermitian::from_entries(n, &entries))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counting_profile_is_monotone_and_bounded(
        seed in any::<u64>(),
        n in 4usize..80,
        bw in 1usize..5,
        lo in -4.0f64..0.0,
        step in 0.05f64..0.5,
    ) {
        let a = banded_real(seed, n, bw);
        let grid: Vec<f64> = (0..12).map(|i| lo + step * i as f64).collect();
        let profile = counting_profile(&a, &grid).unwrap();
        prop_assert!(profile.counts.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(*profile.counts.last().unwrap() <= n);
    }

    #[test]
    fn count_commutes_with_diagonal_shift(
        seed in any::<u64>(),
        n in 4usize..60,
        c in -8.0f64..8.0,
        e in -3.0f64..3.0,
    ) {
        let a = banded_real(seed, n, 2);
        let shifted = match &a {
            OperatorMatrix::Real(m) => {
                let mut entries = Vec::new();
                for k in 0..=m.bandwidth() {
                    for (col, &v) in m.band(k).iter().enumerate() {
                        let v = if k == 0 { v + c } else { v };
                        entries.push((col + k, col, v));
                    }
                }
                OperatorMatrix::Real(BandedHermitian::from_entries(n, &entries))
            }
            _ => unreachable!(),
        };
        prop_assert_eq!(
            count_at_or_below(&a, e).unwrap(),
            count_at_or_below(&shifted, e + c).unwrap()
        );
    }

    #[test]
    fn floquet_cells_are_hermitian_exactly(
        theta in -0.6f64..0.6,
        k in 0u32..3,
        m in 2u32..6,
    ) {
        let spec = validate_spec(preset("hl-D2").unwrap()).unwrap();
        let theta = theta / (2.0 * k as f64 + 1.0);
        let a = assemble_floquet_cell(&spec, None, k, &[theta], m).unwrap();
        let OperatorMatrix::Complex(c) = &a else { panic!() };
        let dense = c.to_dense();
        let n = c.n();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(dense[i * n + j], dense[j * n + i].conj());
            }
        }
    }

    #[test]
    fn synthetic_tail_slope_recovers_exponent(
        c in 0.05f64..20.0,
        beta in 0.2f64..2.5,
    ) {
        let grid: Vec<f64> = (0..24)
            .map(|i| 1e-3 * (0.05f64 / 1e-3).powf(i as f64 / 23.0))
            .collect();
        let mean: Vec<f64> = grid.iter().map(|&e| (-c * e.powf(-beta)).exp()).collect();
        let ids = IdsEstimate {
            e_grid: grid.clone(),
            mean,
            stderr: vec![0.0; grid.len()],
            n_realizations: 1,
            box_l: 0,
            mesh_m: 1,
            spec_hash: "prop".into(),
            master_seed: 0,
            budget_exhausted: false,
            estimator: "synthetic".into(),
        };
        match fit_from_ids(&ids, 1, (1e-3, 0.05)) {
            Ok(fit) => prop_assert!((fit.slope + beta).abs() <= 1e-9),
            Err(_) => {
                // a point survives the transform iff its mass is a normal
                // float (exponent below ~708) and at most 1/e (exponent >= 1)
                let usable = grid
                    .iter()
                    .filter(|&&e| {
                        let t = c * e.powf(-beta);
                        (1.0..708.0).contains(&t)
                    })
                    .count();
                prop_assert!(usable < 5, "fit failed with {usable} clean points");
            }
        }
    }

    #[test]
    fn realization_values_stay_in_support(
        master_seed in any::<u64>(),
        index in 0u64..1000,
        p in 0.0f64..1.0,
        amplitude in 0.01f64..5.0,
    ) {
        let spec = validate_spec(ModelSpec {
            d: 1,
            fiber: 1,
            kind: ModelKind::Lattice,
            w: CellField::constant(0.0),
            v: vec![Profile {
                field: CellField::constant(1.0),
                subcube: Cube { lo: vec![-0.5], hi: vec![0.5] },
            }],
            nu: vec![DisorderLaw::Bernoulli { p, amplitude }],
            shift: 0.0,
        })
        .unwrap();
        let bx = BoxIndex::new(30, 1);
        let a = sample_realization(&spec, bx, master_seed, index);
        let b = sample_realization(&spec, bx, master_seed, index);
        prop_assert_eq!(a.values(), b.values());
        prop_assert!(a.values().iter().all(|&x| x == 0.0 || x == amplitude));
    }

    #[test]
    fn direct_sum_counts_are_additive(
        seed_a in any::<u64>(),
        seed_b in any::<u64>(),
        na in 3usize..40,
        nb in 3usize..40,
    ) {
        let a = banded_real(seed_a, na, 2);
        let b = banded_real(seed_b, nb, 3);
        let grid: Vec<f64> = (0..10).map(|i| -3.0 + 0.6 * i as f64).collect();
        prop_assert!(direct_sum_check(&a, &b, &grid).unwrap());
    }
}
