//! Operator family description: spatial dimension `d`, fiber dimension `D`,
//! periodic background `W`, single-site profiles `V_i`, and the per-channel
//! disorder laws, together with hypothesis validation and spectral
//! normalization.

mod presets;
mod sample;

pub use presets::{preset, preset_models};
pub use sample::{sample_realization, DisorderRealization};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Relative asymmetry tolerated in the background samples before rejection.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("background sample {index} is asymmetric (relative asymmetry {asym:.3e})")]
    AsymmetricW { index: usize, asym: f64 },
    #[error("profile {channel} has a negative sample ({value:.3e})")]
    NegativeProfile { channel: usize, value: f64 },
    #[error("profile {channel}: no declared subcube on which the samples reach 1")]
    SubcubeViolated { channel: usize },
    #[error("disorder law {channel} is degenerate: {reason}")]
    DegenerateLaw { channel: usize, reason: String },
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("band minimum search did not converge during spectral normalization")]
    FloquetFailure,
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Continuum,
    Lattice,
}

/// Scalar samples on a uniform grid of the unit cell `[-1/2, 1/2)^d`,
/// interpreted as piecewise constant on the sample subcells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellField {
    pub points_per_axis: usize,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn constant(value: f64) -> Self {
        CellField { points_per_axis: 1, values: vec![value] }
    }

    fn expected_len(&self, d: u32, block: usize) -> usize {
        self.points_per_axis.pow(d) * block
    }

    /// Subcell index of a unit-cell coordinate `u in [-1/2, 1/2]`.
    fn bin(&self, u: f64) -> usize {
        let g = self.points_per_axis;
        let idx = ((u + 0.5) * g as f64).floor() as isize;
        idx.clamp(0, g as isize - 1) as usize
    }

    fn flat_index(&self, u: &[f64]) -> usize {
        let g = self.points_per_axis;
        let mut idx = 0;
        for &c in u {
            idx = idx * g + self.bin(c);
        }
        idx
    }

    /// Sample a scalar field at unit-cell coordinates.
    pub fn at(&self, u: &[f64]) -> f64 {
        self.values[self.flat_index(u)]
    }

    /// Sample a `D x D` matrix field (row-major blocks) at unit-cell coordinates.
    pub fn matrix_at(&self, u: &[f64], fiber: usize) -> &[f64] {
        let base = self.flat_index(u) * fiber * fiber;
        &self.values[base..base + fiber * fiber]
    }

    fn center(&self, axis_index: usize) -> f64 {
        -0.5 + (axis_index as f64 + 0.5) / self.points_per_axis as f64
    }
}

/// Axis-aligned cube inside the unit cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// One single-site profile with the declared cube on which it reaches 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    #[serde(flatten)]
    pub field: CellField,
    pub subcube: Cube,
}

/// Bounded disorder laws supported by the sampler. All three families keep
/// zero in their support and carry enough small-coupling mass for the
/// double-log tail condition, so no numerical tail test is run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum DisorderLaw {
    Bernoulli { p: f64, amplitude: f64 },
    Uniform { upper: f64 },
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
}

impl DisorderLaw {
    /// Supremum of the support.
    pub fn sup(&self) -> f64 {
        match self {
            DisorderLaw::Bernoulli { amplitude, .. } => *amplitude,
            DisorderLaw::Uniform { upper } => *upper,
            DisorderLaw::Discrete { atoms, .. } => {
                atoms.iter().cloned().fold(0.0, f64::max)
            }
        }
    }

    /// Map a uniform variate in `[0,1)` to a draw from the law.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            DisorderLaw::Bernoulli { p, amplitude } => {
                if u < *p {
                    *amplitude
                } else {
                    0.0
                }
            }
            DisorderLaw::Uniform { upper } => u * upper,
            DisorderLaw::Discrete { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let target = u * total;
                let mut acc = 0.0;
                for (a, w) in atoms.iter().zip(weights) {
                    acc += w;
                    if target < acc {
                        return *a;
                    }
                }
                *atoms.last().unwrap()
            }
        }
    }

    fn check(&self, channel: usize) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::DegenerateLaw {
            channel,
            reason: reason.to_string(),
        };
        match self {
            DisorderLaw::Bernoulli { p, amplitude } => {
                if !p.is_finite() || !(0.0..=1.0).contains(p) {
                    return Err(bad("Bernoulli probability outside [0, 1]"));
                }
                if !amplitude.is_finite() || *amplitude <= 0.0 {
                    return Err(bad("support reduced to {0}: amplitude must be positive"));
                }
            }
            DisorderLaw::Uniform { upper } => {
                if !upper.is_finite() || *upper <= 0.0 {
                    return Err(bad("support reduced to {0}: upper bound must be positive"));
                }
            }
            DisorderLaw::Discrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(bad("atom and weight lists must be nonempty and equal length"));
                }
                if atoms.iter().any(|a| !a.is_finite() || *a < 0.0) {
                    return Err(bad("atoms must be finite and nonnegative"));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
                    || weights.iter().sum::<f64>() <= 0.0
                {
                    return Err(bad("weights must be nonnegative with positive total"));
                }
                if !atoms.iter().any(|a| *a == 0.0) {
                    return Err(bad("zero must be an atom"));
                }
                if atoms.iter().cloned().fold(0.0, f64::max) <= 0.0 {
                    return Err(bad("support reduced to {0}: need a positive atom"));
                }
            }
        }
        Ok(())
    }
}

/// Full description of the operator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d: u32,
    #[serde(rename = "D")]
    pub fiber: u32,
    pub kind: ModelKind,
    /// Background potential: `D x D` symmetric matrix samples, row-major.
    pub w: CellField,
    /// One profile per fiber channel.
    pub v: Vec<Profile>,
    /// One disorder law per fiber channel.
    pub nu: Vec<DisorderLaw>,
    /// Cumulative spectral normalization added to the background diagonal.
    #[serde(default)]
    pub shift: f64,
}

impl ModelSpec {
    pub fn from_json(bytes: &[u8]) -> Result<ModelSpec, ModelError> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn load(path: &std::path::Path) -> Result<ModelSpec, ModelError> {
        ModelSpec::from_json(&std::fs::read(path)?)
    }
}

/// A spec that passed `validate_spec`: background symmetrized, profile and
/// law hypotheses checked, support suprema recorded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedSpec {
    spec: ModelSpec,
    sup_support: Vec<f64>,
}

impl ValidatedSpec {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// `s_i = sup support(nu_i)` per channel.
    pub fn sup_support(&self) -> &[f64] {
        &self.sup_support
    }

    /// Stable content digest of the validated spec (16 hex chars).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.spec).expect("spec serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }
}

impl std::ops::Deref for ValidatedSpec {
    type Target = ModelSpec;
    fn deref(&self) -> &ModelSpec {
        &self.spec
    }
}

/// Check the model hypotheses against the samples and return the spec with
/// the background symmetrized.
pub fn validate_spec(mut spec: ModelSpec) -> Result<ValidatedSpec, ModelError> {
    if spec.d == 0 || spec.d > 2 {
        return Err(ModelError::Malformed(format!(
            "spatial dimension {} not supported (d must be 1 or 2)",
            spec.d
        )));
    }
    if spec.fiber == 0 {
        return Err(ModelError::Malformed("fiber dimension must be >= 1".into()));
    }
    let dd = spec.fiber as usize;
    if spec.v.len() != dd || spec.nu.len() != dd {
        return Err(ModelError::Malformed(format!(
            "expected {} profiles and laws, got {} and {}",
            dd,
            spec.v.len(),
            spec.nu.len()
        )));
    }
    if spec.kind == ModelKind::Lattice {
        if spec.w.points_per_axis != 1 || spec.v.iter().any(|p| p.field.points_per_axis != 1) {
            return Err(ModelError::Malformed(
                "lattice potentials are single site samples (points_per_axis = 1)".into(),
            ));
        }
    }

    // Background: symmetrize each sample, reject past the tolerance.
    if spec.w.points_per_axis == 0 {
        return Err(ModelError::Malformed("background grid is empty".into()));
    }
    let n_cells = spec.w.points_per_axis.pow(spec.d);
    if spec.w.values.len() != spec.w.expected_len(spec.d, dd * dd) {
        return Err(ModelError::Malformed(format!(
            "background has {} values, expected {}",
            spec.w.values.len(),
            spec.w.expected_len(spec.d, dd * dd)
        )));
    }
    for cell in 0..n_cells {
        let block = &mut spec.w.values[cell * dd * dd..(cell + 1) * dd * dd];
        let mag = block.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if block.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::Malformed("background sample is not finite".into()));
        }
        let mut asym = 0.0f64;
        for i in 0..dd {
            for j in 0..i {
                asym = asym.max((block[i * dd + j] - block[j * dd + i]).abs());
            }
        }
        let rel = if mag > 0.0 { asym / mag } else { 0.0 };
        if rel > SYMMETRY_TOL {
            return Err(ModelError::AsymmetricW { index: cell, asym: rel });
        }
        for i in 0..dd {
            for j in 0..i {
                let s = 0.5 * (block[i * dd + j] + block[j * dd + i]);
                block[i * dd + j] = s;
                block[j * dd + i] = s;
            }
        }
    }

    // Profiles: nonnegative samples; the declared subcube must be covered by
    // samples that reach 1.
    for (channel, profile) in spec.v.iter().enumerate() {
        if profile.field.values.len() != profile.field.expected_len(spec.d, 1) {
            return Err(ModelError::Malformed(format!(
                "profile {channel} has {} values, expected {}",
                profile.field.values.len(),
                profile.field.expected_len(spec.d, 1)
            )));
        }
        for &x in &profile.field.values {
            if !x.is_finite() || x < 0.0 {
                return Err(ModelError::NegativeProfile { channel, value: x });
            }
        }
        let cube = &profile.subcube;
        if cube.lo.len() != spec.d as usize || cube.hi.len() != spec.d as usize {
            return Err(ModelError::Malformed(format!(
                "profile {channel} subcube dimension mismatch"
            )));
        }
        let proper = cube
            .lo
            .iter()
            .zip(&cube.hi)
            .all(|(l, h)| l.is_finite() && h.is_finite() && *l >= -0.5 && *h <= 0.5 && h > l);
        if !proper {
            return Err(ModelError::SubcubeViolated { channel });
        }
        if !subcube_reaches_one(&profile.field, cube, spec.d) {
            return Err(ModelError::SubcubeViolated { channel });
        }
    }

    // Disorder laws.
    let mut sup_support = Vec::with_capacity(dd);
    for (channel, law) in spec.nu.iter().enumerate() {
        law.check(channel)?;
        sup_support.push(law.sup());
    }

    Ok(ValidatedSpec { spec, sup_support })
}

/// True when every sample subcell whose center lies in `cube` carries a
/// value `>= 1`, and at least one does.
fn subcube_reaches_one(field: &CellField, cube: &Cube, d: u32) -> bool {
    let g = field.points_per_axis;
    let n_cells = g.pow(d);
    let mut covered = false;
    for flat in 0..n_cells {
        let mut rem = flat;
        let mut inside = true;
        for axis in 0..d as usize {
            let stride = g.pow(d - 1 - axis as u32);
            let idx = rem / stride;
            rem %= stride;
            let c = field.center(idx);
            if c < cube.lo[axis] || c > cube.hi[axis] {
                inside = false;
            }
        }
        if inside {
            covered = true;
            if field.values[flat] < 1.0 {
                return false;
            }
        }
    }
    covered
}

/// Finite box `C_L ∩ Z^d`: the index set of disorder sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxIndex {
    pub l: i64,
    pub d: u32,
}

impl BoxIndex {
    pub fn new(l: i64, d: u32) -> Self {
        assert!(l >= 0 && (1..=2).contains(&d));
        BoxIndex { l, d }
    }

    pub fn side(&self) -> i64 {
        2 * self.l + 1
    }

    pub fn sites(&self) -> usize {
        (self.side() as usize).pow(self.d)
    }

    /// Row-major site index of a coordinate (first axis slowest).
    pub fn index(&self, coord: [i64; 2]) -> usize {
        let side = self.side();
        let mut idx = 0usize;
        for axis in 0..self.d as usize {
            let c = coord[axis];
            debug_assert!(c.abs() <= self.l);
            idx = idx * side as usize + (c + self.l) as usize;
        }
        idx
    }

    pub fn coord(&self, mut idx: usize) -> [i64; 2] {
        let side = self.side() as usize;
        let mut coord = [0i64; 2];
        for axis in (0..self.d as usize).rev() {
            coord[axis] = (idx % side) as i64 - self.l;
            idx /= side;
        }
        coord
    }
}

/// Mesh bookkeeping for a finite box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxDiscretization {
    /// Box half-width index: the box side is `2L+1`.
    pub l: i64,
    /// Mesh points per unit length (1 for lattice models).
    pub m: u32,
}

impl BoxDiscretization {
    pub fn new(l: i64, m: u32) -> Self {
        assert!(l >= 0 && m >= 1);
        BoxDiscretization { l, m }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn box_index(&self, d: u32) -> BoxIndex {
        BoxIndex::new(self.l, d)
    }

    /// Interior grid points per axis for the Dirichlet continuum box.
    pub fn interior_per_axis(&self) -> usize {
        (self.m as usize) * (2 * self.l as usize + 1) - 1
    }

    /// Total scalar unknowns of the assembled finite-volume operator.
    pub fn n_sites(&self, spec: &ModelSpec) -> usize {
        let per_axis = match spec.kind {
            ModelKind::Continuum => self.interior_per_axis(),
            ModelKind::Lattice => 2 * self.l as usize + 1,
        };
        spec.fiber as usize * per_axis.pow(spec.d)
    }
}

/// Normalize the spectrum of the disorder-free operator to start at zero:
/// computes the bottom of the lowest band over the Brillouin zone at mesh
/// `m`, and returns the spec with the background shifted accordingly
/// together with the located band bottom.
pub fn spectral_shift(
    spec: &ValidatedSpec,
    mesh: &BoxDiscretization,
) -> Result<(ValidatedSpec, f64), ModelError> {
    let e_bottom = crate::floquet::background_band_minimum(spec, mesh.m)
        .map_err(|_| ModelError::FloquetFailure)?;
    let mut shifted = spec.spec.clone();
    let dd = shifted.fiber as usize;
    let n_cells = shifted.w.points_per_axis.pow(shifted.d);
    for cell in 0..n_cells {
        for i in 0..dd {
            shifted.w.values[cell * dd * dd + i * dd + i] -= e_bottom;
        }
    }
    shifted.shift += -e_bottom;
    let validated = validate_spec(shifted).expect("shifted spec stays valid");
    Ok((validated, e_bottom))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_profile(values: Vec<f64>, lo: f64, hi: f64) -> Profile {
        Profile {
            field: CellField { points_per_axis: values.len(), values },
            subcube: Cube { lo: vec![lo], hi: vec![hi] },
        }
    }

    fn basic_spec() -> ModelSpec {
        ModelSpec {
            d: 1,
            fiber: 1,
            kind: ModelKind::Continuum,
            w: CellField::constant(0.0),
            v: vec![simple_profile(vec![0.0, 1.5, 1.5, 0.0], -0.25, 0.25)],
            nu: vec![DisorderLaw::Bernoulli { p: 0.5, amplitude: 1.0 }],
            shift: 0.0,
        }
    }

    #[test]
    fn indicator_profile_with_bernoulli_validates() {
        let spec = basic_spec();
        let v = validate_spec(spec).unwrap();
        assert_eq!(v.sup_support(), &[1.0]);
    }

    #[test]
    fn asymmetric_background_is_rejected() {
        let mut spec = basic_spec();
        spec.fiber = 2;
        spec.w = CellField {
            points_per_axis: 1,
            values: vec![0.0, 1.0, 1.0 + 1e-3, 0.0],
        };
        spec.v = vec![
            simple_profile(vec![1.5], -0.25, 0.25),
            simple_profile(vec![1.5], -0.25, 0.25),
        ];
        spec.nu = vec![
            DisorderLaw::Bernoulli { p: 0.5, amplitude: 1.0 },
            DisorderLaw::Bernoulli { p: 0.5, amplitude: 1.0 },
        ];
        match validate_spec(spec) {
            Err(ModelError::AsymmetricW { .. }) => {}
            other => panic!("expected AsymmetricW, got {other:?}"),
        }
    }

    #[test]
    fn sub_threshold_profile_is_rejected() {
        let mut spec = basic_spec();
        spec.v = vec![simple_profile(vec![0.5], -0.25, 0.25)];
        match validate_spec(spec) {
            Err(ModelError::SubcubeViolated { channel: 0 }) => {}
            other => panic!("expected SubcubeViolated, got {other:?}"),
        }
    }

    #[test]
    fn whole_cell_indicator_satisfies_the_subcube_condition() {
        let mut spec = basic_spec();
        spec.v = vec![simple_profile(vec![1.0], -0.5, 0.5)];
        validate_spec(spec).unwrap();
    }

    #[test]
    fn degenerate_laws_are_rejected() {
        let mut spec = basic_spec();
        spec.nu = vec![DisorderLaw::Bernoulli { p: 0.5, amplitude: 0.0 }];
        assert!(matches!(
            validate_spec(spec),
            Err(ModelError::DegenerateLaw { channel: 0, .. })
        ));

        let mut spec = basic_spec();
        spec.nu = vec![DisorderLaw::Discrete { atoms: vec![0.5, 1.0], weights: vec![0.5, 0.5] }];
        assert!(matches!(validate_spec(spec), Err(ModelError::DegenerateLaw { .. })));
    }

    #[test]
    fn edge_bernoulli_parameters_validate() {
        // Both degenerate-probability edges must stay usable: p = 0 drives
        // the disorder-free presets, p = 1 the monotonicity checks.
        for p in [0.0, 1.0] {
            let mut spec = basic_spec();
            spec.nu = vec![DisorderLaw::Bernoulli { p, amplitude: 1.0 }];
            validate_spec(spec).unwrap();
        }
    }

    #[test]
    fn validation_symmetrizes_small_asymmetry() {
        let mut spec = basic_spec();
        spec.fiber = 2;
        spec.w = CellField {
            points_per_axis: 1,
            values: vec![0.0, 1.0, 1.0 + 1e-14, 0.0],
        };
        spec.v = vec![
            simple_profile(vec![1.5], -0.25, 0.25),
            simple_profile(vec![1.5], -0.25, 0.25),
        ];
        spec.nu = vec![
            DisorderLaw::Bernoulli { p: 0.5, amplitude: 1.0 },
            DisorderLaw::Bernoulli { p: 0.5, amplitude: 1.0 },
        ];
        let v = validate_spec(spec).unwrap();
        assert_eq!(v.w.values[1], v.w.values[2]);
    }

    #[test]
    fn box_index_roundtrip() {
        let bx = BoxIndex::new(3, 2);
        for idx in 0..bx.sites() {
            assert_eq!(bx.index(bx.coord(idx)), idx);
        }
    }

    #[test]
    fn model_json_roundtrip() {
        let spec = basic_spec();
        let bytes = serde_json::to_vec(&spec).unwrap();
        let back = ModelSpec::from_json(&bytes).unwrap();
        assert_eq!(spec, back);
    }
}
