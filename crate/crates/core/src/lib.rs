//! Numerical kernel for the compressible parabolic-hyperbolic
//! Ericksen–Leslie liquid-crystal system on the 2-torus.
//!
//! The crate provides the periodic grid and its spectral/finite-difference
//! calculus, the Leslie constitutive laws with their admissibility
//! conditions, the energy and dissipation functionals with their audit
//! machinery, a sharp Fourier-cutoff mollifier, and an operator-split time
//! integrator with an optional per-step fixed-point solve. Everything is
//! deterministic; randomness only enters through explicitly seeded
//! generators for initial data.
//!
//! The crate is `no_std` (with `alloc`); IO, configuration and the command
//! line live in the companion `leslie-flow` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod calculus;
pub mod constitutive;
pub mod energy;
mod error;
mod fft;
pub mod grid;
pub mod mollifier;
pub mod solver;
pub mod state;
pub mod synth;

pub use calculus::{inner_product, sobolev_norm, sobolev_norm_sq, Scheme, S_MAX};
pub use constitutive::{
    corotational_rate, director_force, flow_tensors, kinematic_transport, lagrange_gamma,
    residuals, stresses, CoefficientFlags, FlowTensors, LeslieCoefficients, RawCoefficients,
    Stresses, SystemResiduals, DEFAULT_VACUUM_FLOOR,
};
pub use energy::{
    constraint_residuals, constraint_residuals_of, density_bound_check, dissipation, energy,
    energy_law_audit, l2_dissipation, l2_energy, AuditReport, ConstraintResiduals,
    DensityBoundCertificate, DissipationBreakdown, EnergyBreakdown, DENSITY_BOUND_RTOL,
};
pub use error::{Error, Result};
pub use grid::{Field, Grid2D, ScalarField, TensorField2, VectorField};
pub use mollifier::SpectralTruncation;
pub use solver::{
    e_tilde_of, make_initial, picard_step, run, step, DiagnosticsConfig, InitialCondition,
    NullSink, PicardConfig, RecordEntry, RunOutcome, RunSink, RunSummary, SolverConfig,
    Splitting, StepReport,
};
pub use state::{normalize_director, project_tangent, State};
