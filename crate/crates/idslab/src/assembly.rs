//! Assembly of finite-volume operators as banded Hermitian matrices:
//! Dirichlet boxes, quasi-periodic supercells, and lattice models.
//!
//! Storage keeps the lower triangle only, so symmetry (Hermiticity) holds by
//! construction. Supercells with wrap-around bonds are assembled in a folded
//! site order (0, N-1, 1, N-2, ...) which turns the cyclic coupling pattern
//! into a band of twice the open-boundary width; spectra and inertia are
//! unchanged under the symmetric permutation.

use crate::model::{BoxDiscretization, DisorderRealization, ModelKind, ValidatedSpec};
use crate::scalar::Scalar;
use num_complex::Complex64;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("mesh too coarse: need at least 2 points per unit length, got {m}")]
    MeshTooCoarse { m: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("quasimomentum component {theta} outside the zone [-{half:.6}, {half:.6}]")]
    ThetaOutOfZone { theta: f64, half: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Hermitian matrix stored by sub-diagonals: `bands[k][i] = A[i+k, i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedHermitian<T: Scalar> {
    n: usize,
    bw: usize,
    bands: Vec<Vec<T>>,
    scale: f64,
}

impl<T: Scalar> BandedHermitian<T> {
    /// Accumulate lower-triangle entries `(row, col, value)` with `row >= col`.
    pub fn from_entries(n: usize, entries: &[(usize, usize, T)]) -> Self {
        let bw = entries.iter().map(|&(r, c, _)| r - c).max().unwrap_or(0);
        let mut bands: Vec<Vec<T>> = (0..=bw).map(|k| vec![T::ZERO; n - k]).collect();
        for &(r, c, v) in entries {
            debug_assert!(r >= c && r < n);
            bands[r - c][c] = bands[r - c][c] + v;
        }
        // Hermitian diagonal is real; drop rounding residue from conjugate
        // pairs that accumulated onto the same slot.
        for v in &mut bands[0] {
            *v = T::from_re(v.re());
        }
        let mut scale = 0.0f64;
        for band in &bands {
            for v in band {
                scale = scale.max(v.abs());
            }
        }
        BandedHermitian { n, bw, bands, scale }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Largest entry magnitude (cached).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Entry `A[i, j]`, any `i, j`.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (r, c, conj) = if i >= j { (i, j, false) } else { (j, i, true) };
        let k = r - c;
        if k > self.bw {
            return T::ZERO;
        }
        let v = self.bands[k][c];
        if conj {
            v.conj()
        } else {
            v
        }
    }

    pub fn band(&self, k: usize) -> &[T] {
        &self.bands[k]
    }

    /// Dense row-major copy (both triangles).
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.n;
        let mut a = vec![T::ZERO; n * n];
        for k in 0..=self.bw {
            for c in 0..n - k {
                let v = self.bands[k][c];
                a[(c + k) * n + c] = v;
                a[c * n + (c + k)] = v.conj();
            }
        }
        a
    }

    /// Block-diagonal concatenation.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        let bw = self.bw.max(other.bw);
        let mut bands: Vec<Vec<T>> = (0..=bw).map(|k| vec![T::ZERO; n - k]).collect();
        for k in 0..=self.bw {
            for c in 0..self.n - k {
                bands[k][c] = self.bands[k][c];
            }
        }
        for k in 0..=other.bw {
            for c in 0..other.n - k {
                bands[k][self.n + c] = other.bands[k][c];
            }
        }
        BandedHermitian {
            n,
            bw,
            bands,
            scale: self.scale.max(other.scale),
        }
    }

    /// Upper Gershgorin bound on the spectrum.
    pub fn gershgorin_upper(&self) -> f64 {
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut row = self.bands[0][i].re();
            for k in 1..=self.bw {
                if i >= k {
                    row += self.bands[k][i - k].abs();
                }
                if i + k < self.n {
                    row += self.bands[k][i].abs();
                }
            }
            hi = hi.max(row);
        }
        hi
    }

    /// Coordinate-list debug dump: `row col re im` with 17 significant digits.
    pub fn write_coo<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=(i + self.bw).min(self.n - 1) {
                let v = self.get(i, j);
                if v != T::ZERO {
                    writeln!(out, "{} {} {:.16e} {:.16e}", i, j, v.re(), v.im())?;
                }
            }
        }
        Ok(())
    }
}

/// Assembled finite-volume operator; real symmetric or complex Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorMatrix {
    Real(BandedHermitian<f64>),
    Complex(BandedHermitian<Complex64>),
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        match self {
            OperatorMatrix::Real(a) => a.n(),
            OperatorMatrix::Complex(a) => a.n(),
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            OperatorMatrix::Real(a) => a.scale(),
            OperatorMatrix::Complex(a) => a.scale(),
        }
    }

    pub fn bandwidth(&self) -> usize {
        match self {
            OperatorMatrix::Real(a) => a.bandwidth(),
            OperatorMatrix::Complex(a) => a.bandwidth(),
        }
    }

    pub fn gershgorin_upper(&self) -> f64 {
        match self {
            OperatorMatrix::Real(a) => a.gershgorin_upper(),
            OperatorMatrix::Complex(a) => a.gershgorin_upper(),
        }
    }

    pub fn direct_sum(&self, other: &OperatorMatrix) -> OperatorMatrix {
        match (self, other) {
            (OperatorMatrix::Real(a), OperatorMatrix::Real(b)) => {
                OperatorMatrix::Real(a.direct_sum(b))
            }
            (a, b) => OperatorMatrix::Complex(a.to_complex().direct_sum(&b.to_complex())),
        }
    }

    pub fn to_complex(&self) -> BandedHermitian<Complex64> {
        match self {
            OperatorMatrix::Complex(a) => a.clone(),
            OperatorMatrix::Real(a) => {
                let entries: Vec<(usize, usize, Complex64)> = (0..=a.bandwidth())
                    .flat_map(|k| {
                        let band = a.band(k);
                        band.iter()
                            .enumerate()
                            .map(move |(c, &v)| (c + k, c, Complex64::new(v, 0.0)))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                BandedHermitian::from_entries(a.n(), &entries)
            }
        }
    }

    pub fn write_coo<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        match self {
            OperatorMatrix::Real(a) => a.write_coo(out),
            OperatorMatrix::Complex(a) => a.write_coo(out),
        }
    }
}

/// Boundary condition of the lattice box assembly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Periodic,
}

/// Site ordering: identity for open boundaries, folded for cyclic axes.
struct GridOrder {
    dims: Vec<usize>,
    fold: Vec<bool>,
    fiber: usize,
}

impl GridOrder {
    fn pos(&self, axis: usize, i: usize) -> usize {
        let n = self.dims[axis];
        if !self.fold[axis] {
            i
        } else if 2 * i < n {
            2 * i
        } else {
            2 * (n - 1 - i) + 1
        }
    }

    fn index(&self, coords: &[usize], channel: usize) -> usize {
        let mut idx = 0usize;
        for (axis, &c) in coords.iter().enumerate() {
            idx = idx * self.dims[axis] + self.pos(axis, c);
        }
        idx * self.fiber + channel
    }

    fn n(&self) -> usize {
        self.dims.iter().product::<usize>() * self.fiber
    }
}

/// Entry sink normalizing Hermitian pairs to lower-triangle storage.
struct EntrySink<T: Scalar> {
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> EntrySink<T> {
    fn new() -> Self {
        EntrySink { entries: Vec::new() }
    }

    /// Add `A[r, c] += v` together with its Hermitian partner.
    fn pair(&mut self, r: usize, c: usize, v: T) {
        if r == c {
            self.entries.push((r, c, T::from_re(2.0 * v.re())));
        } else if r > c {
            self.entries.push((r, c, v));
        } else {
            self.entries.push((c, r, v.conj()));
        }
    }

    /// Add a diagonal value `A[i, i] += v`.
    fn diag(&mut self, i: usize, v: f64) {
        self.entries.push((i, i, T::from_re(v)));
    }

    /// Add the lower triangle of a Hermitian block at scalar offset `base`.
    fn block_lower(&mut self, base: usize, dim: usize, block: &[f64]) {
        for i in 0..dim {
            for j in 0..=i {
                let v = block[i * dim + j];
                if v != 0.0 {
                    self.entries.push((base + i, base + j, T::from_re(v)));
                }
            }
        }
    }
}

fn check_realization(
    spec: &ValidatedSpec,
    real: &DisorderRealization,
    expected_l: i64,
) -> Result<(), AssemblyError> {
    if real.box_index.l != expected_l
        || real.box_index.d != spec.d
        || real.fiber != spec.fiber
    {
        return Err(AssemblyError::DimensionMismatch(format!(
            "realization on box l={} d={} fiber={}, expected l={} d={} fiber={}",
            real.box_index.l, real.box_index.d, real.fiber, expected_l, spec.d, spec.fiber
        )));
    }
    Ok(())
}

/// Dirichlet restriction of the operator to the box `C_L`, assembled with
/// second-order central differences (continuum) or hopping terms (lattice).
pub fn assemble_box(
    spec: &ValidatedSpec,
    disc: &BoxDiscretization,
    real: &DisorderRealization,
) -> Result<OperatorMatrix, AssemblyError> {
    check_realization(spec, real, disc.l)?;
    match spec.kind {
        ModelKind::Continuum => continuum_box(spec, disc, real),
        ModelKind::Lattice => lattice_box(spec, disc, real, BoundaryCondition::Dirichlet),
    }
}

fn continuum_box(
    spec: &ValidatedSpec,
    disc: &BoxDiscretization,
    real: &DisorderRealization,
) -> Result<OperatorMatrix, AssemblyError> {
    if disc.m < 2 {
        return Err(AssemblyError::MeshTooCoarse { m: disc.m });
    }
    if spec.d != 1 {
        return Err(AssemblyError::Unsupported(
            "continuum assembly covers d = 1".into(),
        ));
    }
    let dd = spec.fiber as usize;
    let h = disc.spacing();
    let inv_h2 = 1.0 / (h * h);
    let n_pts = disc.interior_per_axis();
    let left = -(2.0 * disc.l as f64 + 1.0) / 2.0;

    let mut sink: EntrySink<f64> = EntrySink::new();
    for j in 0..n_pts {
        let x = left + (j as f64 + 1.0) * h;
        let cell = x.round();
        let u = [x - cell];
        let base = j * dd;
        // kinetic diagonal + periodic background
        let w = spec.w.matrix_at(&u, dd);
        for a in 0..dd {
            sink.diag(base + a, 2.0 * inv_h2);
        }
        sink.block_lower(base, dd, w);
        // single-site disorder: only the cell containing x contributes
        let site = real.box_index.index([cell as i64, 0]);
        for a in 0..dd {
            let coupling = real.value(site, a) * spec.v[a].field.at(&u);
            if coupling != 0.0 {
                sink.diag(base + a, coupling);
            }
        }
        // hop to the next interior point
        if j + 1 < n_pts {
            for a in 0..dd {
                sink.pair((j + 1) * dd + a, base + a, -inv_h2);
            }
        }
    }
    Ok(OperatorMatrix::Real(BandedHermitian::from_entries(
        n_pts * dd,
        &sink.entries,
    )))
}

fn lattice_box(
    spec: &ValidatedSpec,
    disc: &BoxDiscretization,
    real: &DisorderRealization,
    bc: BoundaryCondition,
) -> Result<OperatorMatrix, AssemblyError> {
    let dd = spec.fiber as usize;
    let d = spec.d as usize;
    let side = (2 * disc.l + 1) as usize;
    let fold = bc == BoundaryCondition::Periodic && side > 2;
    let order = GridOrder {
        dims: vec![side; d],
        fold: vec![fold; d],
        fiber: dd,
    };
    let origin = [0.0; 2];
    let w = spec.w.matrix_at(&origin[..d], dd);
    let v0: Vec<f64> = (0..dd).map(|a| spec.v[a].field.at(&origin[..d])).collect();

    let mut sink: EntrySink<f64> = EntrySink::new();
    let mut coords = vec![0usize; d];
    for site in 0..order.dims.iter().product::<usize>() {
        let mut rem = site;
        for axis in (0..d).rev() {
            coords[axis] = rem % side;
            rem /= side;
        }
        let base = order.index(&coords, 0);
        for a in 0..dd {
            sink.diag(base + a, d as f64);
        }
        sink.block_lower(base, dd, w);
        let box_site = {
            let mut c = [0i64; 2];
            for axis in 0..d {
                c[axis] = coords[axis] as i64 - disc.l;
            }
            real.box_index.index(c)
        };
        for a in 0..dd {
            let coupling = real.value(box_site, a) * v0[a];
            if coupling != 0.0 {
                sink.diag(base + a, coupling);
            }
        }
        // forward hops
        for axis in 0..d {
            let next = coords[axis] + 1;
            if next < side {
                let mut nc = coords.clone();
                nc[axis] = next;
                let nbase = order.index(&nc, 0);
                for a in 0..dd {
                    sink.pair(nbase + a, base + a, -0.5);
                }
            } else if bc == BoundaryCondition::Periodic && side > 1 {
                let mut nc = coords.clone();
                nc[axis] = 0;
                let nbase = order.index(&nc, 0);
                for a in 0..dd {
                    sink.pair(nbase + a, base + a, -0.5);
                }
            } else if bc == BoundaryCondition::Periodic {
                // single site ring: both wrap bonds land on the diagonal
                for a in 0..dd {
                    sink.pair(base + a, base + a, -0.5);
                }
            }
        }
    }
    Ok(OperatorMatrix::Real(BandedHermitian::from_entries(
        order.n(),
        &sink.entries,
    )))
}

/// Scalar tight-binding model with on-site couplings from `real`:
/// kinetic term `d - (1/2) sum of neighbor hops`, plus the diagonal disorder.
pub fn assemble_lattice_anderson(
    d: u32,
    law_sup: f64,
    disc: &BoxDiscretization,
    real: &DisorderRealization,
    bc: BoundaryCondition,
) -> Result<OperatorMatrix, AssemblyError> {
    if real.box_index.d != d || real.fiber != 1 || real.box_index.l != disc.l {
        return Err(AssemblyError::DimensionMismatch(format!(
            "realization shape (l={}, d={}, fiber={}) does not match (l={}, d={}, fiber=1)",
            real.box_index.l, real.box_index.d, real.fiber, disc.l, d
        )));
    }
    if real.values().iter().any(|&x| x < 0.0 || x > law_sup) {
        return Err(AssemblyError::DimensionMismatch(
            "realization values leave the declared support".into(),
        ));
    }
    let dd = 1usize;
    let side = (2 * disc.l + 1) as usize;
    let fold = bc == BoundaryCondition::Periodic && side > 2;
    let order = GridOrder {
        dims: vec![side; d as usize],
        fold: vec![fold; d as usize],
        fiber: dd,
    };
    let mut sink: EntrySink<f64> = EntrySink::new();
    let mut coords = vec![0usize; d as usize];
    for site in 0..order.dims.iter().product::<usize>() {
        let mut rem = site;
        for axis in (0..d as usize).rev() {
            coords[axis] = rem % side;
            rem /= side;
        }
        let idx = order.index(&coords, 0);
        let mut c = [0i64; 2];
        for axis in 0..d as usize {
            c[axis] = coords[axis] as i64 - disc.l;
        }
        sink.diag(idx, d as f64 + real.value(real.box_index.index(c), 0));
        for axis in 0..d as usize {
            let next = coords[axis] + 1;
            if next < side {
                let mut nc = coords.clone();
                nc[axis] = next;
                sink.pair(order.index(&nc, 0), idx, -0.5);
            } else if bc == BoundaryCondition::Periodic && side > 1 {
                let mut nc = coords.clone();
                nc[axis] = 0;
                sink.pair(order.index(&nc, 0), idx, -0.5);
            } else if bc == BoundaryCondition::Periodic {
                sink.pair(idx, idx, -0.5);
            }
        }
    }
    Ok(OperatorMatrix::Real(BandedHermitian::from_entries(
        order.n(),
        &sink.entries,
    )))
}

/// Supercell fiber at quasimomentum `theta`: the operator on `C_k` with
/// boundary values twisted by `exp(i (2k+1) theta_j)` along each axis.
/// `real = None` gives the fiber of the disorder-free background.
pub fn assemble_floquet_cell(
    spec: &ValidatedSpec,
    real: Option<&DisorderRealization>,
    k: u32,
    theta: &[f64],
    m: u32,
) -> Result<OperatorMatrix, AssemblyError> {
    if theta.len() != spec.d as usize {
        return Err(AssemblyError::DimensionMismatch(format!(
            "theta has {} components, d = {}",
            theta.len(),
            spec.d
        )));
    }
    let period = (2 * k + 1) as f64;
    let half = std::f64::consts::PI / period;
    for &t in theta {
        if t.abs() > half + 1e-12 {
            return Err(AssemblyError::ThetaOutOfZone { theta: t, half });
        }
    }
    if let Some(r) = real {
        check_realization(spec, r, k as i64)?;
    }
    match spec.kind {
        ModelKind::Continuum => continuum_cell(spec, real, k, theta, m),
        ModelKind::Lattice => lattice_cell(spec, real, k, theta),
    }
}

fn continuum_cell(
    spec: &ValidatedSpec,
    real: Option<&DisorderRealization>,
    k: u32,
    theta: &[f64],
    m: u32,
) -> Result<OperatorMatrix, AssemblyError> {
    if m < 2 {
        return Err(AssemblyError::MeshTooCoarse { m });
    }
    if spec.d != 1 {
        return Err(AssemblyError::Unsupported(
            "continuum assembly covers d = 1".into(),
        ));
    }
    let dd = spec.fiber as usize;
    let h = 1.0 / m as f64;
    let inv_h2 = 1.0 / (h * h);
    let side = (2 * k + 1) as usize;
    let n_pts = m as usize * side;
    let left = -(side as f64) / 2.0;
    let phase = Complex64::from_polar(1.0, side as f64 * theta[0]);
    let order = GridOrder {
        dims: vec![n_pts],
        fold: vec![n_pts > 2],
        fiber: dd,
    };

    let mut sink: EntrySink<Complex64> = EntrySink::new();
    for j in 0..n_pts {
        let x = left + j as f64 * h;
        // the torus edge point belongs to the outermost cell of the period
        let cell = x.round().clamp(-(k as f64), k as f64);
        let u = [x - cell];
        let base = order.index(&[j], 0);
        let w = spec.w.matrix_at(&u, dd);
        for a in 0..dd {
            sink.diag(base + a, 2.0 * inv_h2);
        }
        sink.block_lower(base, dd, w);
        if let Some(r) = real {
            let site = r.box_index.index([cell as i64, 0]);
            for a in 0..dd {
                let coupling = r.value(site, a) * spec.v[a].field.at(&u);
                if coupling != 0.0 {
                    sink.diag(base + a, coupling);
                }
            }
        }
        let (nj, hop) = if j + 1 < n_pts {
            (j + 1, Complex64::new(-inv_h2, 0.0))
        } else {
            (0, -phase.scale(inv_h2))
        };
        let nbase = order.index(&[nj], 0);
        for a in 0..dd {
            // row = the point whose stencil references the neighbor
            sink.pair(nbase + a, base + a, hop);
        }
    }
    Ok(OperatorMatrix::Complex(BandedHermitian::from_entries(
        order.n(),
        &sink.entries,
    )))
}

fn lattice_cell(
    spec: &ValidatedSpec,
    real: Option<&DisorderRealization>,
    k: u32,
    theta: &[f64],
) -> Result<OperatorMatrix, AssemblyError> {
    let dd = spec.fiber as usize;
    let d = spec.d as usize;
    let side = (2 * k + 1) as usize;
    let order = GridOrder {
        dims: vec![side; d],
        fold: vec![side > 2; d],
        fiber: dd,
    };
    let origin = [0.0; 2];
    let w = spec.w.matrix_at(&origin[..d], dd);
    let v0: Vec<f64> = (0..dd).map(|a| spec.v[a].field.at(&origin[..d])).collect();

    let mut sink: EntrySink<Complex64> = EntrySink::new();
    let mut coords = vec![0usize; d];
    for site in 0..order.dims.iter().product::<usize>() {
        let mut rem = site;
        for axis in (0..d).rev() {
            coords[axis] = rem % side;
            rem /= side;
        }
        let base = order.index(&coords, 0);
        for a in 0..dd {
            sink.diag(base + a, d as f64);
        }
        sink.block_lower(base, dd, w);
        if let Some(r) = real {
            let mut c = [0i64; 2];
            for axis in 0..d {
                c[axis] = coords[axis] as i64 - k as i64;
            }
            let site_idx = r.box_index.index(c);
            for a in 0..dd {
                let coupling = r.value(site_idx, a) * v0[a];
                if coupling != 0.0 {
                    sink.diag(base + a, coupling);
                }
            }
        }
        for axis in 0..d {
            let phase = Complex64::from_polar(1.0, side as f64 * theta[axis]);
            let next = coords[axis] + 1;
            let (nc_axis, hop) = if next < side {
                (next, Complex64::new(-0.5, 0.0))
            } else {
                (0, -phase.scale(0.5))
            };
            if side == 1 {
                for a in 0..dd {
                    sink.pair(base + a, base + a, hop);
                }
            } else {
                let mut nc = coords.clone();
                nc[axis] = nc_axis;
                let nbase = order.index(&nc, 0);
                for a in 0..dd {
                    sink.pair(nbase + a, base + a, hop);
                }
            }
        }
    }
    Ok(OperatorMatrix::Complex(BandedHermitian::from_entries(
        order.n(),
        &sink.entries,
    )))
}
