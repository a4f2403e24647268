//! Numerical toolkit for the integrated density of states of disordered
//! quasi-one-dimensional operators: finite-volume eigenvalue counting by
//! inertia, Bloch band analysis of the periodic background, Monte-Carlo IDS
//! curves, and tail-exponent extraction near the bottom of the spectrum.

pub mod assembly;
pub mod floquet;
pub mod ids;
pub mod lifshitz;
pub mod model;
pub mod scalar;
pub mod spectral;

pub use assembly::{
    assemble_box, assemble_floquet_cell, assemble_lattice_anderson, AssemblyError,
    BandedHermitian, BoundaryCondition, OperatorMatrix,
};
pub use floquet::{
    band_structure, locate_minima, nondegeneracy_check, periodic_ids, reference_dispersion,
    BandFunction, BandMinimaReport, BandStructure, FloquetError, ModelBands, PinchCheck,
    ThetaGrid,
};
pub use ids::{
    approximation_convergence, direct_sum_check, empirical_ids, finite_size_study,
    ConvergenceRow, IdsError, IdsEstimate, MonteCarlo, SizeRow,
};
pub use lifshitz::{
    d_independence, estimate_n0plus, fit_exponent, fit_from_ids, tail_points,
    DIndependenceReport, LifshitzError, LifshitzFit, N0Estimate,
};
pub use model::{
    preset_models, sample_realization, spectral_shift, validate_spec, BoxDiscretization,
    BoxIndex, DisorderLaw, DisorderRealization, ModelError, ModelKind, ModelSpec, ValidatedSpec,
};
pub use spectral::{count_at_or_below, counting_profile, eigenvalues_dense, CountingProfile,
    SpectralError};
