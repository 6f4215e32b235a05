//! Browser bindings for the Stokes solver. Three interactive operations are
//! exposed to JavaScript: solve the lid-driven cavity and return per-cell
//! fields for rendering, run a manufactured-solution convergence study, and
//! evaluate the finite difference stencil weights for a given stabilization
//! parameter. All heavy lifting happens in the core crate; this layer only
//! flattens results into plain `Float64Array`-compatible buffers.
//!
//! Build with `wasm-pack build crates/web --target web` and serve
//! `crates/web/www/` next to the generated `pkg/` directory.

use swg_stokes::analysis::divergence_residual;
use swg_stokes::cases;
use swg_stokes::element::QuadratureRule;
use swg_stokes::run::{cell_centered_velocity, convergence_table, run_case, run_cavity, Mode};
use wasm_bindgen::prelude::*;

/// Per-cell solution fields of a cavity solve on an n-by-n grid, row-major
/// from the bottom-left cell.
#[wasm_bindgen]
pub struct CavityField {
    n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    pressure: Vec<f64>,
    iterations: usize,
    divergence: f64,
}

#[wasm_bindgen]
impl CavityField {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell-centered horizontal velocity, row-major.
    #[wasm_bindgen(getter)]
    pub fn u(&self) -> Vec<f64> {
        self.u.clone()
    }

    /// Cell-centered vertical velocity, row-major.
    #[wasm_bindgen(getter)]
    pub fn v(&self) -> Vec<f64> {
        self.v.clone()
    }

    /// Cell pressures (area-weighted zero mean), row-major.
    #[wasm_bindgen(getter)]
    pub fn pressure(&self) -> Vec<f64> {
        self.pressure.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Largest per-cell weak divergence (local mass-conservation defect).
    #[wasm_bindgen(getter)]
    pub fn divergence(&self) -> f64 {
        self.divergence
    }
}

pub fn cavity_field(n: usize, kappa: f64) -> Result<CavityField, String> {
    let run = run_cavity(n, kappa, Mode::Swg, 1e-10, None).map_err(|e| e.to_string())?;
    let vel = cell_centered_velocity(&run.mesh, &run.solution).map_err(|e| e.to_string())?;
    let divergence = divergence_residual(&run.mesh, &run.solution).map_err(|e| e.to_string())?;
    Ok(CavityField {
        n,
        u: vel.iter().map(|v| v[0]).collect(),
        v: vel.iter().map(|v| v[1]).collect(),
        pressure: run.solution.p,
        iterations: run.report.iterations,
        divergence,
    })
}

/// Solves the lid-driven cavity on an n-by-n grid.
#[wasm_bindgen]
pub fn solve_cavity(n: usize, kappa: f64) -> Result<CavityField, JsError> {
    cavity_field(n, kappa).map_err(|e| JsError::new(&e))
}

/// Convergence study rows, flattened as
/// `[n, u_l2, u_h1, v_l2, v_h1, p_l2, ...]` for n = 8, 16, ..., n_max.
/// `case` selects the manufactured solution: 1 or 2.
pub fn convergence_rows(case: u32, n_max: usize, kappa: f64) -> Result<Vec<f64>, String> {
    let case = match case {
        1 => cases::case1(),
        2 => cases::case2(),
        other => return Err(format!("unknown case {other}")),
    };
    let mut ns = vec![];
    let mut n = 8;
    while n <= n_max {
        ns.push(n);
        n *= 2;
    }
    let table = convergence_table(&case, &ns, kappa, Mode::Fd, QuadratureRule::Fd, 1e-10, None)
        .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(6 * table.rows.len());
    for (n, r) in &table.rows {
        out.extend_from_slice(&[*n as f64, r.l2_u, r.h1_u, r.l2_v, r.h1_v, r.l2_p]);
    }
    Ok(out)
}

/// See [`convergence_rows`].
#[wasm_bindgen]
pub fn run_convergence(case: u32, n_max: usize, kappa: f64) -> Result<Vec<f64>, JsError> {
    convergence_rows(case, n_max, kappa).map_err(|e| JsError::new(&e))
}

/// Stencil weights `[c1, c2, c3, c4]` of the 7-point scheme for `kappa`
/// (`[0, 4, 0, -1]` at kappa = 4, the 5-point scheme).
#[wasm_bindgen]
pub fn stencil_weights(kappa: f64) -> Vec<f64> {
    let w = swg_stokes::stencil::stencil_weights(kappa);
    vec![w.c1, w.c2, w.c3, w.c4]
}

/// Manufactured-solution fields for side-by-side rendering: per-cell
/// `[u, v, p, u_exact, v_exact, p_exact]`, flattened row-major.
pub fn case_fields(case: u32, n: usize, kappa: f64) -> Result<Vec<f64>, String> {
    let case = match case {
        1 => cases::case1(),
        2 => cases::case2(),
        other => return Err(format!("unknown case {other}")),
    };
    let run = run_case(
        &case,
        n,
        kappa,
        Mode::Swg,
        QuadratureRule::PolyDeg2,
        1e-10,
        None,
    )
    .map_err(|e| e.to_string())?;
    let vel = cell_centered_velocity(&run.mesh, &run.solution).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(6 * run.mesh.cells.len());
    for cell in &run.mesh.cells {
        let [cx, cy] = cell.centroid;
        let id = cell.id as usize;
        out.extend_from_slice(&[
            vel[id][0],
            vel[id][1],
            run.solution.p[id],
            (case.u)(cx, cy),
            (case.v)(cx, cy),
            (case.p)(cx, cy),
        ]);
    }
    Ok(out)
}

/// See [`case_fields`].
#[wasm_bindgen]
pub fn solve_case_fields(case: u32, n: usize, kappa: f64) -> Result<Vec<f64>, JsError> {
    case_fields(case, n, kappa).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cavity_field_shapes_and_sanity() {
        let field = cavity_field(8, 4.0).unwrap();
        assert_eq!(field.u.len(), 64);
        assert_eq!(field.v.len(), 64);
        assert_eq!(field.pressure.len(), 64);
        assert!(field.divergence < 1e-8);
        assert!(field.u.iter().all(|x| x.is_finite()));
        // The lid drags the top row of cells to the right.
        let top_u_mean: f64 = field.u[56..].iter().sum::<f64>() / 8.0;
        assert!(top_u_mean > 0.1, "top row mean u = {top_u_mean}");
    }

    #[test]
    fn convergence_rows_shape() {
        let rows = convergence_rows(2, 16, 4.0).unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0], 8.0);
        assert_eq!(rows[6], 16.0);
        // Errors shrink under refinement.
        assert!(rows[7] < rows[1]);
    }

    #[test]
    fn stencil_weights_at_4_are_five_point() {
        assert_eq!(stencil_weights(4.0), vec![0.0, 4.0, 0.0, -1.0]);
    }

    #[test]
    fn case_fields_shape() {
        let fields = case_fields(1, 4, 4.0).unwrap();
        assert_eq!(fields.len(), 6 * 16);
        assert!(fields.iter().all(|x| x.is_finite()));
    }
}
