//! Discrete error norms and convergence bookkeeping.
//!
//! The grid norms mirror the reference tables exactly: for a velocity
//! component `w` on an n-by-n square grid with spacing `h`,
//!
//! ```text
//!   |w_b - w|_0^2 = sum over all edge midpoints  of h^2 (w_e - w(mid))^2,
//!   |w_b - w|_1^2 = sum over all cell centers of
//!                     h^2 [ (w_E - w_W)/h - dw/dx ]^2
//!                   + h^2 [ (w_N - w_S)/h - dw/dy ]^2,
//!   |p_h - p|_0^2 = sum over all cell centers of h^2 (p_T - p(center))^2,
//! ```
//!
//! where E/W/N/S are the four edge values of the cell. They require a uniform
//! square grid; general polygonal meshes use the mesh-free measures instead:
//! the L2 norm of the linear extension of the trace error, the triple-bar
//! norm `(sum |T| |grad_w e|^2 + kappa S(e,e))^(1/2)`, and the maximal
//! per-cell weak divergence.

use crate::element::{
    element_geometry, extension_coefficients, integrate_poly_deg2, stabilizer_matrix,
    weak_divergence, weak_gradient, GeometryError,
};
use crate::mesh::{GridInfo, PolygonalMesh};
use crate::solver::Solution;
use crate::stencil::GridIndexer;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("grid norm requires a uniform rectangular mesh")]
    NotGridMesh,
    #[error("grid norm requires square cells (hx = {hx}, hy = {hy})")]
    NotSquareCells { hx: f64, hy: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn square_grid(mesh: &PolygonalMesh) -> Result<GridInfo, AnalysisError> {
    let grid = mesh.grid.ok_or(AnalysisError::NotGridMesh)?;
    if !grid.is_square() {
        return Err(AnalysisError::NotSquareCells {
            hx: grid.hx,
            hy: grid.hy,
        });
    }
    Ok(grid)
}

/// Edge-midpoint L2 error of one velocity component over all edges
/// (boundary included).
pub fn l2_velocity_error(
    mesh: &PolygonalMesh,
    trace: &[f64],
    exact: &dyn Fn(f64, f64) -> f64,
) -> Result<f64, AnalysisError> {
    let grid = square_grid(mesh)?;
    let h2 = grid.hx * grid.hx;
    let mut sum = 0.0;
    for edge in &mesh.edges {
        let d = trace[edge.id as usize] - exact(edge.midpoint[0], edge.midpoint[1]);
        sum += h2 * d * d;
    }
    Ok(sum.sqrt())
}

/// Cell-centered difference-quotient H1 error of one velocity component.
pub fn h1_cellcenter_error(
    mesh: &PolygonalMesh,
    trace: &[f64],
    exact_grad: &dyn Fn(f64, f64) -> [f64; 2],
) -> Result<f64, AnalysisError> {
    let grid = square_grid(mesh)?;
    let (n, h) = (grid.n, grid.hx);
    let ix = GridIndexer::new(n);
    let mut sum = 0.0;
    for j in 1..=n {
        for i in 1..=n {
            let c = &mesh.cells[ix.cell(i, j) as usize];
            let g = exact_grad(c.centroid[0], c.centroid[1]);
            let dqx =
                (trace[ix.vedge(i, j) as usize] - trace[ix.vedge(i - 1, j) as usize]) / h - g[0];
            let dqy =
                (trace[ix.hedge(i, j) as usize] - trace[ix.hedge(i, j - 1) as usize]) / h - g[1];
            sum += h * h * (dqx * dqx + dqy * dqy);
        }
    }
    Ok(sum.sqrt())
}

/// Cell-centered L2 pressure error.
pub fn l2_pressure_error(
    mesh: &PolygonalMesh,
    pressure: &[f64],
    exact: &dyn Fn(f64, f64) -> f64,
) -> Result<f64, AnalysisError> {
    let grid = square_grid(mesh)?;
    let h2 = grid.hx * grid.hx;
    let mut sum = 0.0;
    for cell in &mesh.cells {
        let d = pressure[cell.id as usize] - exact(cell.centroid[0], cell.centroid[1]);
        sum += h2 * d * d;
    }
    Ok(sum.sqrt())
}

/// L2 norm over the domain of the linear extension of the velocity trace
/// error, `( sum_T int_T |s(err_u)|^2 + |s(err_v)|^2 )^(1/2)`. The reference
/// trace is the exact solution sampled at edge midpoints. Valid on any
/// polygonal mesh; the quadrature is exact for the quadratic integrand.
pub fn s_extension_l2_error(
    mesh: &PolygonalMesh,
    solution: &Solution,
    exact_u: &dyn Fn(f64, f64) -> f64,
    exact_v: &dyn Fn(f64, f64) -> f64,
) -> Result<f64, AnalysisError> {
    let mut sum = 0.0;
    for cell in &mesh.cells {
        let geom = element_geometry(cell, mesh)?;
        for (exact, trace) in [(exact_u, &solution.u), (exact_v, &solution.v)] {
            let err: Vec<f64> = cell
                .edges
                .iter()
                .enumerate()
                .map(|(li, ce)| {
                    let mp = geom.midpoint(li);
                    exact(mp[0], mp[1]) - trace[ce.edge as usize]
                })
                .collect();
            let ext = extension_coefficients(&geom, &err)?;
            let squared = |x: f64, y: f64| {
                let s = ext.eval(geom.ref_point, x, y);
                s * s
            };
            sum += integrate_poly_deg2(&geom, &squared);
        }
    }
    Ok(sum.max(0.0).sqrt())
}

/// Triple-bar norm of a velocity trace pair:
/// `( sum_T |T| |grad_w u|^2 + |T| |grad_w v|^2 + kappa S_T(u,u) + kappa S_T(v,v) )^{1/2}`.
pub fn triple_bar_norm(
    mesh: &PolygonalMesh,
    trace_u: &[f64],
    trace_v: &[f64],
    kappa: f64,
) -> Result<f64, AnalysisError> {
    let mut sum = 0.0;
    for cell in &mesh.cells {
        let geom = element_geometry(cell, mesh)?;
        let a = stabilizer_matrix(&geom);
        for trace in [trace_u, trace_v] {
            let local: Vec<f64> = cell
                .edges
                .iter()
                .map(|ce| trace[ce.edge as usize])
                .collect();
            let g = weak_gradient(&geom, &local);
            sum += geom.area * (g[0] * g[0] + g[1] * g[1]);
            let mut stab = 0.0;
            for i in 0..geom.n_edges {
                for j in 0..geom.n_edges {
                    stab += local[i] * a[(i, j)] * local[j];
                }
            }
            sum += kappa * stab;
        }
    }
    Ok(sum.max(0.0).sqrt())
}

/// Largest per-cell weak divergence of a solution, boundary traces included.
pub fn divergence_residual(
    mesh: &PolygonalMesh,
    solution: &Solution,
) -> Result<f64, AnalysisError> {
    let mut worst = 0.0f64;
    for cell in &mesh.cells {
        let geom = element_geometry(cell, mesh)?;
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
        worst = worst.max(weak_divergence(&geom, &u, &v).abs());
    }
    Ok(worst)
}

/// Errors of one solve against the exact solution. The grid norms require a
/// uniform square mesh; the extension, triple-bar and divergence measures work
/// on any mesh.
#[derive(Clone, Copy, Debug)]
pub struct ErrorReport {
    pub l2_u: f64,
    pub h1_u: f64,
    pub l2_v: f64,
    pub h1_v: f64,
    pub l2_p: f64,
    pub l2_s: f64,
    pub tribar: f64,
    pub div_max: f64,
}

/// Per-refinement errors with observed orders `r_k = log2(e_{k-1} / e_k)`,
/// defined only between successive doublings of n.
#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<(usize, ErrorReport)>,
}

impl ConvergenceTable {
    /// Observed order between row `k-1` and row `k` for the metric selected
    /// by `field`; `None` for the first row or when n does not double.
    pub fn orders(&self, field: impl Fn(&ErrorReport) -> f64) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(k, (n, report))| {
                if k == 0 {
                    return None;
                }
                let (n_prev, prev) = &self.rows[k - 1];
                if *n != 2 * n_prev {
                    return None;
                }
                Some((field(prev) / field(report)).log2())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_rect_mesh, Rect};
    use proptest::prelude::*;

    fn trace_of(mesh: &PolygonalMesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        mesh.edges
            .iter()
            .map(|e| f(e.midpoint[0], e.midpoint[1]))
            .collect()
    }

    #[test]
    fn l2_velocity_zero_and_offset() {
        let mesh = build_uniform_rect_mesh(4, Rect::unit()).unwrap();
        let exact = |x: f64, y: f64| x * y;
        let trace = trace_of(&mesh, exact);
        assert_eq!(l2_velocity_error(&mesh, &trace, &exact).unwrap(), 0.0);

        let delta = 0.37;
        let shifted: Vec<f64> = trace.iter().map(|t| t + delta).collect();
        let k = mesh.edges.len() as f64;
        let expect = delta * 0.25 * k.sqrt();
        let got = l2_velocity_error(&mesh, &shifted, &exact).unwrap();
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn h1_exact_for_linear_fields() {
        let mesh = build_uniform_rect_mesh(5, Rect::unit()).unwrap();
        let trace = trace_of(&mesh, |x, y| 2.0 * x - 3.0 * y + 1.0);
        let err = h1_cellcenter_error(&mesh, &trace, &|_, _| [2.0, -3.0]).unwrap();
        assert!(err < 1e-13);
    }

    #[test]
    fn grid_norms_match_independent_loops_on_n4() {
        // Brute-force reimplementation of the grid-indexed sums, written the
        // long way round with explicit coordinates.
        let n = 4usize;
        let mesh = build_uniform_rect_mesh(n, Rect::unit()).unwrap();
        let h = 1.0 / n as f64;
        let w = |x: f64, y: f64| (x * 2.1).sin() * (y - 0.3);
        let wx = |x: f64, y: f64| 2.1 * (x * 2.1).cos() * (y - 0.3);
        let wy = |x: f64, _: f64| (x * 2.1).sin();
        let trace = trace_of(&mesh, |x, y| w(x, y) + 0.01 * (x * 17.0).sin());
        let ix = GridIndexer::new(n);

        let mut brute_l2 = 0.0;
        for i in 0..=n {
            for j in 1..=n {
                let (x, y) = (i as f64 * h, (j as f64 - 0.5) * h);
                let d = trace[ix.vedge(i, j) as usize] - w(x, y);
                brute_l2 += h * h * d * d;
            }
        }
        for i in 1..=n {
            for j in 0..=n {
                let (x, y) = ((i as f64 - 0.5) * h, j as f64 * h);
                let d = trace[ix.hedge(i, j) as usize] - w(x, y);
                brute_l2 += h * h * d * d;
            }
        }
        let got = l2_velocity_error(&mesh, &trace, &w).unwrap();
        assert!((got - brute_l2.sqrt()).abs() < 1e-14);

        let mut brute_h1 = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                let (x, y) = ((i as f64 - 0.5) * h, (j as f64 - 0.5) * h);
                let dx = (trace[ix.vedge(i, j) as usize] - trace[ix.vedge(i - 1, j) as usize]) / h
                    - wx(x, y);
                let dy = (trace[ix.hedge(i, j) as usize] - trace[ix.hedge(i, j - 1) as usize]) / h
                    - wy(x, y);
                brute_h1 += h * h * (dx * dx + dy * dy);
            }
        }
        let got = h1_cellcenter_error(&mesh, &trace, &|x, y| [wx(x, y), wy(x, y)]).unwrap();
        assert!((got - brute_h1.sqrt()).abs() < 1e-14);

        let p: Vec<f64> = mesh
            .cells
            .iter()
            .map(|c| w(c.centroid[0], c.centroid[1]) + 0.05)
            .collect();
        let mut brute_p = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                let (x, y) = ((i as f64 - 0.5) * h, (j as f64 - 0.5) * h);
                let d = p[ix.cell(i, j) as usize] - w(x, y);
                brute_p += h * h * d * d;
            }
        }
        let got = l2_pressure_error(&mesh, &p, &w).unwrap();
        assert!((got - brute_p.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn grid_norms_reject_polygonal_meshes() {
        let mesh = crate::mesh::build_perturbed_quad_mesh(3, Rect::unit(), 0.1, 1).unwrap();
        let trace = vec![0.0; mesh.edges.len()];
        assert!(matches!(
            l2_velocity_error(&mesh, &trace, &|_, _| 0.0),
            Err(AnalysisError::NotGridMesh)
        ));
    }

    #[test]
    fn s_extension_error_examples() {
        let mesh = build_uniform_rect_mesh(1, Rect::unit()).unwrap();
        // Zero trace error.
        let exact_u = |x: f64, _: f64| x;
        let exact_v = |_: f64, y: f64| -y;
        let sol = Solution {
            u: trace_of(&mesh, exact_u),
            v: trace_of(&mesh, exact_v),
            p: vec![0.0],
        };
        let err = s_extension_l2_error(&mesh, &sol, &exact_u, &exact_v).unwrap();
        assert!(err < 1e-14);

        // Trace error (0, 1, 1/2, 1/2) on (left, right, bottom, top) extends
        // to 1/2 + (x - xT); its squared integral over the unit square is
        // 1/4 + 1/12.
        let mut u = trace_of(&mesh, exact_u);
        let cell = &mesh.cells[0];
        for ce in &cell.edges {
            let e = &mesh.edges[ce.edge as usize];
            let err_val = if e.normal[0] == 1.0 {
                // vertical edge: left has midpoint x = 0
                if e.midpoint[0] < 0.5 {
                    0.0
                } else {
                    1.0
                }
            } else {
                0.5
            };
            u[ce.edge as usize] = exact_u(e.midpoint[0], e.midpoint[1]) - err_val;
        }
        let sol = Solution {
            u,
            v: trace_of(&mesh, exact_v),
            p: vec![0.0],
        };
        let err = s_extension_l2_error(&mesh, &sol, &exact_u, &exact_v).unwrap();
        let expect = (0.25f64 + 1.0 / 12.0).sqrt();
        assert!((err - expect).abs() < 1e-14, "got {err}, expect {expect}");
    }

    #[test]
    fn triple_bar_examples() {
        let mesh = build_uniform_rect_mesh(3, Rect::unit()).unwrap();
        let zero = vec![0.0; mesh.edges.len()];
        assert_eq!(triple_bar_norm(&mesh, &zero, &zero, 4.0).unwrap(), 0.0);

        // Linear trace on a one-cell mesh: only the gradient part contributes.
        let mesh = build_uniform_rect_mesh(1, Rect::unit()).unwrap();
        let trace = trace_of(&mesh, |x, y| 3.0 * x - y);
        let zero = vec![0.0; mesh.edges.len()];
        let norm = triple_bar_norm(&mesh, &trace, &zero, 7.0).unwrap();
        let expect = (9.0f64 + 1.0).sqrt(); // |T| * |grad|^2 with |T| = 1
        assert!((norm - expect).abs() < 1e-12);
    }

    #[test]
    fn divergence_residual_routes_agree() {
        let mesh = crate::mesh::build_perturbed_quad_mesh(3, Rect::unit(), 0.1, 9).unwrap();
        let sol = Solution {
            u: trace_of(&mesh, |x, y| (x * y).cos()),
            v: trace_of(&mesh, |x, y| x - y * y),
            p: vec![0.0; mesh.cells.len()],
        };
        let got = divergence_residual(&mesh, &sol).unwrap();
        // Brute-force flux sum per cell.
        let mut brute = 0.0f64;
        for cell in &mesh.cells {
            let mut flux = 0.0;
            for ce in &cell.edges {
                let e = &mesh.edges[ce.edge as usize];
                let n = mesh.outward_normal(*ce);
                flux +=
                    (sol.u[ce.edge as usize] * n[0] + sol.v[ce.edge as usize] * n[1]) * e.length;
            }
            brute = brute.max((flux / cell.area).abs());
        }
        assert!((got - brute).abs() < 1e-14);
        assert!(got > 0.0);

        // A linear divergence-free field has vanishing weak divergence.
        let sol = Solution {
            u: trace_of(&mesh, |x, y| x + y),
            v: trace_of(&mesh, |x, y| x - y),
            p: vec![0.0; mesh.cells.len()],
        };
        assert!(divergence_residual(&mesh, &sol).unwrap() < 1e-13);
    }

    #[test]
    fn table_orders_only_between_doublings() {
        let report = |e: f64| ErrorReport {
            l2_u: e,
            h1_u: e,
            l2_v: e,
            h1_v: e,
            l2_p: e,
            l2_s: e,
            tribar: e,
            div_max: 0.0,
        };
        let table = ConvergenceTable {
            rows: vec![(4, report(1.0)), (8, report(0.25)), (12, report(0.1))],
        };
        let orders = table.orders(|r| r.l2_u);
        assert_eq!(orders[0], None);
        assert!((orders[1].unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(orders[2], None);
    }

    proptest! {
        #[test]
        fn prop_norms_are_absolutely_homogeneous(lambda in -4.0f64..4.0) {
            let mesh = build_uniform_rect_mesh(3, Rect::unit()).unwrap();
            let base = trace_of(&mesh, |x, y| (3.0 * x).sin() + y * y);
            let scaled: Vec<f64> = base.iter().map(|b| lambda * b).collect();
            let zerof = |_: f64, _: f64| 0.0;
            let zerog = |_: f64, _: f64| [0.0, 0.0];

            let l2 = l2_velocity_error(&mesh, &base, &zerof).unwrap();
            let l2s = l2_velocity_error(&mesh, &scaled, &zerof).unwrap();
            prop_assert!((l2s - lambda.abs() * l2).abs() < 1e-12 * (1.0 + l2s));

            let h1 = h1_cellcenter_error(&mesh, &base, &zerog).unwrap();
            let h1s = h1_cellcenter_error(&mesh, &scaled, &zerog).unwrap();
            prop_assert!((h1s - lambda.abs() * h1).abs() < 1e-11 * (1.0 + h1s));

            let tb = triple_bar_norm(&mesh, &base, &base, 4.0).unwrap();
            let tbs = triple_bar_norm(&mesh, &scaled, &scaled, 4.0).unwrap();
            prop_assert!((tbs - lambda.abs() * tb).abs() < 1e-11 * (1.0 + tbs));
            // Norm positivity: a nonzero trace has a strictly positive norm.
            prop_assert!(tb > 0.0);
        }
    }
}
