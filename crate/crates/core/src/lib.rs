//! Viscosity solutions of the anisotropic eikonal equation
//! `a1sq (∂u/∂x1)^2 + a2sq (∂u/∂x2)^2 = 1`, `u = 0` on the boundary, computed
//! from the linear diffusion-reaction problem
//! `alpha^2 div(A grad v) - v = 0`, `v = 1` on the boundary, through
//! `u = -alpha ln v`.
//!
//! The crate builds structured triangulations ([`mesh`]), assembles
//! Lagrange P1-P3 discretizations ([`fem`]), solves the resulting SPD
//! systems ([`solver`]), checks the discrete maximum principle and sweeps
//! `alpha = 2^-k` ([`driver`]), and validates against the exact anisotropic
//! distance ([`oracle`]).

pub mod cli;
pub mod driver;
pub mod element;
pub mod fem;
pub mod mesh;
pub mod numfmt;
pub mod oracle;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod vtk;

pub use driver::{
    alpha_from_k, alpha_sweep, check_monotone, cross_section, cross_section_to, diagonal_extent,
    solve_v, transform_u, AlphaMode, DriverError, LinearSolver, Problem, RunConfig, SolveResult,
    SweepResult,
};
pub use fem::{assemble, element_matrices, CoefficientField, FeSpace};
pub use mesh::{build_lshape, build_rect, DomainSpec, Mesh};
pub use oracle::{error_norms, exact_u, BoundaryPolygon, ErrorReport};
pub use solver::{solve_spd, SolverConfig};
