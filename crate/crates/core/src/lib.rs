//! Numerical core for an idealized electrostatic MEMS device: a clamped
//! elastic beam over a ground plate, coupled to the electrostatic potential
//! in the gap. The potential problem is solved on a fixed rectangle after
//! transforming away the moving boundary; setting the aspect ratio to zero
//! yields the small-aspect-ratio limit model with source `lambda/(1+u)^2`.
//!
//! Modules:
//! - [`grid`]: uniform grids, finite differences, quadrature, Sobolev norms
//! - [`linalg`]: banded LU with partial pivoting
//! - [`beam`]: clamped fourth-order beam operator and mechanical energy
//! - [`poisson`]: transformed potential problem, traces, forces, energies
//! - [`stationary`]: Newton solvers for stationary states and pull-in search
//! - [`evolution`]: semi-implicit time integration with quench detection

pub mod beam;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod linalg;
pub mod poisson;
pub mod stationary;

pub use beam::{
    apply_beam_operator, assemble_beam_matrix, check_admissible, mechanical_energy, BeamMatrix,
    DeflectionProfile, ModelParams,
};
pub use error::{Error, Result};
pub use grid::{
    derivative_1d, integrate_1d, integrate_rect, sobolev_norm, GridFunction1D, GridFunction2D,
    IntervalGrid, RectGrid,
};
pub use poisson::{
    compute_coefficients, compute_g_eps, electrostatic_energy, energy_identity_residual,
    reconstruct_psi_fields, solve_phi, trace_gamma, EllipticCoefficients, PotentialSolution,
};
pub use stationary::{
    find_pullin_threshold, solve_coupled_stationary, solve_limit_constrained,
    solve_limit_stationary, verify_minimizer, NewtonOptions, PullInReport, StationarySolution,
};
pub use evolution::{
    advance_hyperbolic, advance_parabolic, compare_evolutions, run_evolution, EvolutionComparison,
    EvolutionState, TrajectoryRecord,
};
