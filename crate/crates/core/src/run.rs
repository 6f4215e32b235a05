//! Experiment orchestration shared by the command-line front end and the
//! browser demo: build a mesh, assemble (or stencil-build) the system, solve,
//! lift, and measure errors.

use crate::analysis::{self, AnalysisError, ConvergenceTable, ErrorReport};
use crate::assembly::{assemble, lift_solution, AssemblyError, BoundaryData, SaddleSystem};
use crate::cases::{cavity_bc, StokesCase};
use crate::element::QuadratureRule;
use crate::mesh::{build_perturbed_quad_mesh, build_uniform_rect_mesh, MeshError, PolygonalMesh};
use crate::solver::{solve_saddle, Solution, SolveError, SolveReport};
use crate::stencil::{build_fd_system, StencilError};
use thiserror::Error;

/// Which route builds the linear system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Assemble element matrices over the mesh (any polygonal mesh).
    Swg,
    /// Build the stencil form directly (uniform square grids only).
    Fd,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "swg" => Some(Mode::Swg),
            "fd" => Some(Mode::Fd),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Swg => "swg",
            Mode::Fd => "fd",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("solver did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("fd mode requires a uniform rectangular grid")]
    FdNeedsGrid,
}

/// One completed solve: the mesh it ran on, the assembled system, and the
/// lifted solution.
pub struct CaseRun {
    pub mesh: PolygonalMesh,
    pub system: SaddleSystem,
    pub bc: BoundaryData,
    pub solution: Solution,
    pub report: SolveReport,
}

/// Default iteration cap: 20 times the system dimension.
pub fn default_maxit(dim: usize) -> usize {
    20 * dim
}

fn solve_lifted(
    system: SaddleSystem,
    bc: BoundaryData,
    mesh: PolygonalMesh,
    tol: f64,
    maxit: Option<usize>,
) -> Result<CaseRun, RunError> {
    let maxit = maxit.unwrap_or_else(|| default_maxit(system.dof_map.dim()));
    let (raw, report) = solve_saddle(&system, tol, maxit)?;
    if !report.converged {
        return Err(RunError::NotConverged {
            iterations: report.iterations,
            residual: report.relative_residual,
        });
    }
    let solution = lift_solution(&system, &raw, &bc);
    Ok(CaseRun {
        mesh,
        system,
        bc,
        solution,
        report,
    })
}

/// Solves `case` on the n-by-n grid over its own domain.
pub fn run_case(
    case: &StokesCase,
    n: usize,
    kappa: f64,
    mode: Mode,
    rule: QuadratureRule,
    tol: f64,
    maxit: Option<usize>,
) -> Result<CaseRun, RunError> {
    let mesh = build_uniform_rect_mesh(n, case.domain)?;
    let bc = case.boundary_data(&mesh);
    let system = match mode {
        Mode::Swg => assemble(&mesh, kappa, &case.f1, &case.f2, &bc, rule)?,
        Mode::Fd => build_fd_system(n, case.domain, kappa, &case.f1, &case.f2, &bc)?,
    };
    solve_lifted(system, bc, mesh, tol, maxit)
}

/// Solves `case` on a perturbed quadrilateral mesh (always the assembled
/// route; stencils do not exist off the grid).
pub fn run_case_perturbed(
    case: &StokesCase,
    n: usize,
    amplitude: f64,
    seed: u64,
    kappa: f64,
    rule: QuadratureRule,
    tol: f64,
    maxit: Option<usize>,
) -> Result<CaseRun, RunError> {
    let mesh = build_perturbed_quad_mesh(n, case.domain, amplitude, seed)?;
    let bc = case.boundary_data(&mesh);
    let system = assemble(&mesh, kappa, &case.f1, &case.f2, &bc, rule)?;
    solve_lifted(system, bc, mesh, tol, maxit)
}

/// Solves `case` on a caller-supplied mesh.
pub fn run_case_on_mesh(
    case: &StokesCase,
    mesh: PolygonalMesh,
    kappa: f64,
    rule: QuadratureRule,
    tol: f64,
    maxit: Option<usize>,
) -> Result<CaseRun, RunError> {
    let bc = case.boundary_data(&mesh);
    let system = assemble(&mesh, kappa, &case.f1, &case.f2, &bc, rule)?;
    solve_lifted(system, bc, mesh, tol, maxit)
}

/// Lid-driven cavity on the unit square: `f = 0`, unit lid velocity on the
/// top boundary.
pub fn run_cavity(
    n: usize,
    kappa: f64,
    mode: Mode,
    tol: f64,
    maxit: Option<usize>,
) -> Result<CaseRun, RunError> {
    let domain = crate::mesh::Rect::unit();
    let mesh = build_uniform_rect_mesh(n, domain)?;
    let bc = cavity_bc(&mesh);
    let zero = |_: f64, _: f64| 0.0;
    let system = match mode {
        Mode::Swg => assemble(&mesh, kappa, &zero, &zero, &bc, QuadratureRule::PolyDeg2)?,
        Mode::Fd => build_fd_system(n, domain, kappa, &zero, &zero, &bc)?,
    };
    solve_lifted(system, bc, mesh, tol, maxit)
}

/// Full error report of a solved case against its exact solution. Requires a
/// uniform square grid for the grid-indexed norms.
pub fn error_report(case: &StokesCase, run: &CaseRun, kappa: f64) -> Result<ErrorReport, RunError> {
    let mesh = &run.mesh;
    let sol = &run.solution;
    let gu = case.grad_u;
    let gv = case.grad_v;
    let report = ErrorReport {
        l2_u: analysis::l2_velocity_error(mesh, &sol.u, &case.u)?,
        h1_u: analysis::h1_cellcenter_error(mesh, &sol.u, &|x, y| gu(x, y))?,
        l2_v: analysis::l2_velocity_error(mesh, &sol.v, &case.v)?,
        h1_v: analysis::h1_cellcenter_error(mesh, &sol.v, &|x, y| gv(x, y))?,
        l2_p: analysis::l2_pressure_error(mesh, &sol.p, &case.p)?,
        l2_s: analysis::s_extension_l2_error(mesh, sol, &case.u, &case.v)?,
        tribar: trace_error_triple_bar(case, run, kappa)?,
        div_max: analysis::divergence_residual(mesh, sol)?,
    };
    Ok(report)
}

/// Triple-bar norm of the trace error (exact midpoint values minus computed
/// traces); works on any mesh.
pub fn trace_error_triple_bar(
    case: &StokesCase,
    run: &CaseRun,
    kappa: f64,
) -> Result<f64, RunError> {
    let mesh = &run.mesh;
    let err_u: Vec<f64> = mesh
        .edges
        .iter()
        .map(|e| (case.u)(e.midpoint[0], e.midpoint[1]) - run.solution.u[e.id as usize])
        .collect();
    let err_v: Vec<f64> = mesh
        .edges
        .iter()
        .map(|e| (case.v)(e.midpoint[0], e.midpoint[1]) - run.solution.v[e.id as usize])
        .collect();
    Ok(analysis::triple_bar_norm(mesh, &err_u, &err_v, kappa)?)
}

/// Runs `case` for every n in `ns` and collects the errors.
pub fn convergence_table(
    case: &StokesCase,
    ns: &[usize],
    kappa: f64,
    mode: Mode,
    rule: QuadratureRule,
    tol: f64,
    maxit: Option<usize>,
) -> Result<ConvergenceTable, RunError> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let run = run_case(case, n, kappa, mode, rule, tol, maxit)?;
        let report = error_report(case, &run, kappa)?;
        rows.push((n, report));
    }
    Ok(ConvergenceTable { rows })
}

/// Cell-centered velocity by evaluating each cell's linear extension at the
/// centroid (the constant coefficient of the extension).
pub fn cell_centered_velocity(
    mesh: &PolygonalMesh,
    solution: &Solution,
) -> Result<Vec<[f64; 2]>, RunError> {
    let mut out = Vec::with_capacity(mesh.cells.len());
    for cell in &mesh.cells {
        let geom = crate::element::element_geometry(cell, mesh).map_err(AnalysisError::from)?;
        let u: Vec<f64> = cell
            .edges
            .iter()
            .map(|ce| solution.u[ce.edge as usize])
            .collect();
        let v: Vec<f64> = cell
            .edges
            .iter()
            .map(|ce| solution.v[ce.edge as usize])
            .collect();
        let eu = crate::element::extension_coefficients(&geom, &u).map_err(AnalysisError::from)?;
        let ev = crate::element::extension_coefficients(&geom, &v).map_err(AnalysisError::from)?;
        out.push([eu.alpha0, ev.alpha0]);
    }
    Ok(out)
}

/// Outcome of the linear patch test on one mesh.
#[derive(Clone, Copy, Debug)]
pub struct PatchOutcome {
    pub max_trace_error: f64,
    pub max_pressure: f64,
}

impl PatchOutcome {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_trace_error <= tol && self.max_pressure <= tol
    }
}

/// Solves the linear patch problem on the given run and measures the worst
/// trace and pressure deviation from the exact field.
pub fn patch_outcome(case: &StokesCase, run: &CaseRun) -> PatchOutcome {
    let mesh = &run.mesh;
    let mut max_trace_error = 0.0f64;
    for e in &mesh.edges {
        let eu = (case.u)(e.midpoint[0], e.midpoint[1]) - run.solution.u[e.id as usize];
        let ev = (case.v)(e.midpoint[0], e.midpoint[1]) - run.solution.v[e.id as usize];
        max_trace_error = max_trace_error.max(eu.abs()).max(ev.abs());
    }
    let max_pressure = run.solution.p.iter().fold(0.0f64, |m, &p| m.max(p.abs()));
    PatchOutcome {
        max_trace_error,
        max_pressure,
    }
}
