//! Simplified weak Galerkin (SWG) solver for the 2D stationary Stokes
//! equations
//!
//! ```text
//!     -Δu + ∇p = f,   div u = 0   in Ω,        u = g on ∂Ω,
//! ```
//!
//! discretized on arbitrary polygonal meshes with one velocity value per edge
//! midpoint and one pressure value per cell. The discrete velocity space has
//! no interior unknowns; stability comes from a stabilizer that penalizes the
//! mismatch between a trace and its least-squares linear extension, scaled by
//! a parameter `kappa`.
//!
//! On uniform square grids the assembled system coincides entry for entry
//! with a 7-point finite difference scheme (5-point for `kappa = 4`), which
//! this crate also builds directly from stencils as an independent route.
//!
//! Crate layout:
//! - [`mesh`]: polygonal meshes, structured/perturbed generators, JSON i/o.
//! - [`element`]: per-cell operators and the closed-form element matrices.
//! - [`assembly`]: dof numbering, global saddle-point system, Dirichlet data.
//! - [`stencil`]: the finite difference twin and the equivalence check.
//! - [`solver`]: projected MINRES plus a dense direct oracle.
//! - [`analysis`]: discrete error norms and convergence tables.
//! - [`cases`]: manufactured solutions and the lid-driven cavity setup.
//! - [`run`]: experiment orchestration shared by the CLI and the web demo.

pub mod analysis;
pub mod assembly;
pub mod cases;
pub mod element;
pub mod mesh;
pub mod output;
pub mod run;
pub mod solver;
pub mod sparse;
pub mod stencil;

pub use assembly::{assemble, lift_solution, number_dofs, BoundaryData, DofMap, SaddleSystem};
pub use element::QuadratureRule;
pub use mesh::{
    build_perturbed_quad_mesh, build_uniform_rect_mesh, load_mesh, validate_mesh, PolygonalMesh,
    Rect,
};
pub use solver::{direct_solve_dense, solve_saddle, Solution, SolveReport};
