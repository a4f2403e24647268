//! Named model presets used by the command line and the test suites.

use super::{CellField, Cube, DisorderLaw, ModelKind, ModelSpec, Profile};

fn bump_profile() -> Profile {
    // 1.5 on the middle half of the unit cell.
    Profile {
        field: CellField {
            points_per_axis: 4,
            values: vec![0.0, 1.5, 1.5, 0.0],
        },
        subcube: Cube { lo: vec![-0.25], hi: vec![0.25] },
    }
}

fn cell_indicator(d: u32) -> Profile {
    Profile {
        field: CellField::constant(1.0),
        subcube: Cube { lo: vec![-0.5; d as usize], hi: vec![0.5; d as usize] },
    }
}

fn bernoulli(p: f64) -> DisorderLaw {
    DisorderLaw::Bernoulli { p, amplitude: 1.0 }
}

/// Built-in models, keyed by name.
pub fn preset_models() -> Vec<(&'static str, ModelSpec)> {
    let free_d1 = ModelSpec {
        d: 1,
        fiber: 1,
        kind: ModelKind::Continuum,
        w: CellField::constant(0.0),
        v: vec![bump_profile()],
        nu: vec![bernoulli(0.0)],
        shift: 0.0,
    };

    let scalar_anderson_d1 = ModelSpec {
        d: 1,
        fiber: 1,
        kind: ModelKind::Continuum,
        w: CellField::constant(0.0),
        v: vec![cell_indicator(1)],
        nu: vec![bernoulli(0.5)],
        shift: 0.0,
    };

    // Two coupled channels over one spatial dimension: constant symmetric
    // off-diagonal background, full-cell couplings on both channels. The
    // per-channel probability makes the joint per-cell suppression event
    // (1-p)^2 = 1/2, the same as the scalar preset, so tail curves of the
    // two presets are comparable at matched volumes.
    let p2 = 1.0 - 0.5f64.sqrt();
    let hl_d2 = ModelSpec {
        d: 1,
        fiber: 2,
        kind: ModelKind::Continuum,
        w: CellField {
            points_per_axis: 1,
            values: vec![0.0, 1.0, 1.0, 0.0],
        },
        v: vec![cell_indicator(1), cell_indicator(1)],
        nu: vec![bernoulli(p2), bernoulli(p2)],
        shift: 0.0,
    };

    let lattice_anderson_d1 = ModelSpec {
        d: 1,
        fiber: 1,
        kind: ModelKind::Lattice,
        w: CellField::constant(0.0),
        v: vec![cell_indicator(1)],
        nu: vec![bernoulli(0.5)],
        shift: 0.0,
    };

    let lattice_anderson_d2 = ModelSpec {
        d: 2,
        fiber: 1,
        kind: ModelKind::Lattice,
        w: CellField::constant(0.0),
        v: vec![cell_indicator(2)],
        nu: vec![bernoulli(0.5)],
        shift: 0.0,
    };

    vec![
        ("free-d1", free_d1),
        ("scalar-anderson-d1", scalar_anderson_d1),
        ("hl-D2", hl_d2),
        ("lattice-anderson-d1", lattice_anderson_d1),
        ("lattice-anderson-d2", lattice_anderson_d2),
    ]
}

/// Look up a preset by name.
pub fn preset(name: &str) -> Option<ModelSpec> {
    preset_models()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, spec)| spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_spec;

    #[test]
    fn all_presets_validate() {
        for (name, spec) in preset_models() {
            validate_spec(spec).unwrap_or_else(|e| panic!("preset {name}: {e}"));
        }
    }

    #[test]
    fn free_preset_has_no_disorder() {
        let spec = preset("free-d1").unwrap();
        assert_eq!(spec.d, 1);
        assert_eq!(spec.fiber, 1);
        assert!(spec.w.values.iter().all(|&x| x == 0.0));
        assert_eq!(spec.nu[0], DisorderLaw::Bernoulli { p: 0.0, amplitude: 1.0 });
    }

    #[test]
    fn two_channel_preset_shape() {
        let spec = preset("hl-D2").unwrap();
        assert_eq!((spec.d, spec.fiber), (1, 2));
        assert_eq!(spec.w.values, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(spec.v[0].field.values, vec![1.0]);
        assert_eq!(spec.v[1].field.values, vec![1.0]);
    }

    #[test]
    fn lattice_presets_are_lattice_kind() {
        for name in ["lattice-anderson-d1", "lattice-anderson-d2"] {
            let spec = preset(name).unwrap();
            assert_eq!(spec.kind, ModelKind::Lattice);
        }
    }
}
