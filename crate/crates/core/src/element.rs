//! Per-element operators for the simplified weak Galerkin discretization.
//!
//! A field on a polygonal element carries one value per edge midpoint. From
//! those trace values this module builds:
//!
//! - the least-squares linear extension `s(u) = a0 + a1 (x - xT) + a2 (y - yT)`
//!   fitted at edge midpoints with edge-length weights,
//! - the weak gradient `(1/|T|) sum_i u_i |e_i| n_i` (constant per cell),
//! - the weak divergence of a vector trace,
//! - the stabilizer matrix `A = h^{-1} (E - E M (M^t E M)^{-1} M^t E)`, which
//!   penalizes the midpoint mismatch between a trace and its linear extension,
//! - the gradient matrix `B`, `b_ij = (n_i . n_j) |e_i||e_j| / |T|`,
//! - the divergence coupling vectors `Q1_i = |e_i| n_ix`, `Q2_i = |e_i| n_iy`,
//! - edge-length-weighted load vectors `F_j = int_T f s(w_j)` for the basis
//!   trace `w_j` of each edge.
//!
//! Here `M` is the N-by-3 matrix with rows `(1, x_i - xT, y_i - yT)` over the
//! edge midpoints and `E = diag(|e_i|)`. The reference point is the cell
//! centroid, which keeps `M^t E M` well conditioned; `h` is the cell diameter
//! (longest edge). All operations are pure functions of their inputs.

use crate::mesh::{Cell, PolygonalMesh};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("edge midpoints are degenerate (rank(M) < 3, condition estimate {cond:.3e})")]
    DegenerateMidpoints { cond: f64 },
    #[error("quadrature rule {rule:?} requires an axis-aligned rectangular cell")]
    RuleNeedsRectangle { rule: QuadratureRule },
}

/// Quadrature rules for the element load vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Centroid-fan triangulation with a 3-point edge-midpoint rule per
    /// triangle; exact for quadratic integrands on any convex polygon.
    /// The default everywhere.
    PolyDeg2,
    /// Axis-aligned rectangles only: Simpson along the basis edge's normal
    /// direction, midpoint tangentially.
    SimpsonMid,
    /// Axis-aligned rectangles only: `F_j = (|T|/4) f(midpoint of e_j)`, so a
    /// two-element row sum yields `(h^2/2) f` on square grids. Used when the
    /// assembled system must match the finite difference form entry for entry.
    Fd,
}

impl QuadratureRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "poly-deg2" => Some(QuadratureRule::PolyDeg2),
            "simpson-mid" => Some(QuadratureRule::SimpsonMid),
            "fd" => Some(QuadratureRule::Fd),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QuadratureRule::PolyDeg2 => "poly-deg2",
            QuadratureRule::SimpsonMid => "simpson-mid",
            QuadratureRule::Fd => "fd",
        }
    }
}

/// Geometric data of one element, in the cell's edge order.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub n_edges: usize,
    /// Rows `(1, x_i - xT, y_i - yT)` over edge midpoints.
    pub m: Vec<[f64; 3]>,
    pub edge_len: Vec<f64>,
    /// Outward unit normals.
    pub normals: Vec<[f64; 2]>,
    pub area: f64,
    pub ref_point: [f64; 2],
    pub diameter_h: f64,
    /// Counterclockwise corner coordinates (needed for quadrature).
    pub corners: Vec<[f64; 2]>,
    mtem_inv: [[f64; 3]; 3],
    cond: f64,
}

/// Coefficients of the linear extension `a0 + a1 (x - xT) + a2 (y - yT)`.
#[derive(Clone, Copy, Debug)]
pub struct LinearExtension {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl LinearExtension {
    pub fn eval(&self, ref_point: [f64; 2], x: f64, y: f64) -> f64 {
        self.alpha0 + self.alpha1 * (x - ref_point[0]) + self.alpha2 * (y - ref_point[1])
    }
}

/// The dense per-element blocks. `a` and `b` are exactly symmetric as stored;
/// the velocity block of the discrete system is `kappa * a + b` for both
/// velocity components.
#[derive(Clone, Debug)]
pub struct ElementMatrices {
    pub kappa: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q1: DVector<f64>,
    pub q2: DVector<f64>,
    /// 3-by-N extension coefficients per basis trace; column `j` holds the
    /// coefficients of `s(w_j)`.
    pub d: DMatrix<f64>,
    pub f1: DVector<f64>,
    pub f2: DVector<f64>,
}

impl ElementMatrices {
    /// `kappa * A + B`, shared by both velocity components.
    pub fn velocity_block(&self) -> DMatrix<f64> {
        let n = self.a.nrows();
        DMatrix::from_fn(n, n, |i, j| self.kappa * self.a[(i, j)] + self.b[(i, j)])
    }
}

const COND_LIMIT: f64 = 1e12;

/// Extracts the element geometry of `cell`, with the centroid as reference
/// point. Fails if the edge midpoints are (numerically) collinear.
pub fn element_geometry(
    cell: &Cell,
    mesh: &PolygonalMesh,
) -> Result<ElementGeometry, GeometryError> {
    let n = cell.edges.len();
    let mut midpoints = Vec::with_capacity(n);
    let mut edge_len = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for &ce in &cell.edges {
        let edge = &mesh.edges[ce.edge as usize];
        midpoints.push(edge.midpoint);
        edge_len.push(edge.length);
        normals.push(mesh.outward_normal(ce));
    }
    let corners = cell
        .vertices
        .iter()
        .map(|&v| {
            let v = &mesh.vertices[v as usize];
            [v.x, v.y]
        })
        .collect();
    ElementGeometry::from_parts(
        midpoints,
        edge_len,
        normals,
        cell.area,
        cell.centroid,
        cell.diameter_h,
        corners,
    )
}

impl ElementGeometry {
    /// Builds the geometry from raw data (used directly in tests and by
    /// trace-error evaluation on standalone elements).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        midpoints: Vec<[f64; 2]>,
        edge_len: Vec<f64>,
        normals: Vec<[f64; 2]>,
        area: f64,
        ref_point: [f64; 2],
        diameter_h: f64,
        corners: Vec<[f64; 2]>,
    ) -> Result<Self, GeometryError> {
        let n = midpoints.len();
        let m: Vec<[f64; 3]> = midpoints
            .iter()
            .map(|p| [1.0, p[0] - ref_point[0], p[1] - ref_point[1]])
            .collect();
        // M^t E M, a symmetric 3x3 system.
        let mut g = [[0.0f64; 3]; 3];
        for i in 0..n {
            let w = edge_len[i];
            for r in 0..3 {
                for c in 0..3 {
                    g[r][c] += w * m[i][r] * m[i][c];
                }
            }
        }
        let (inv, cond) = invert_3x3(&g);
        let inv = match inv {
            Some(inv) if cond <= COND_LIMIT => inv,
            _ => return Err(GeometryError::DegenerateMidpoints { cond }),
        };
        Ok(ElementGeometry {
            n_edges: n,
            m,
            edge_len,
            normals,
            area,
            ref_point,
            diameter_h,
            corners,
            mtem_inv: inv,
            cond,
        })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.cond
    }

    /// Midpoint of edge `i` in absolute coordinates.
    pub fn midpoint(&self, i: usize) -> [f64; 2] {
        [
            self.ref_point[0] + self.m[i][1],
            self.ref_point[1] + self.m[i][2],
        ]
    }

    fn is_axis_aligned_rectangle(&self) -> bool {
        self.n_edges == 4
            && self.normals.iter().all(|n| {
                (n[0].abs() - 1.0).abs() < 1e-12 && n[1].abs() < 1e-12
                    || (n[1].abs() - 1.0).abs() < 1e-12 && n[0].abs() < 1e-12
            })
    }
}

/// Inverse by adjugate plus an infinity-norm condition estimate.
fn invert_3x3(g: &[[f64; 3]; 3]) -> (Option<[[f64; 3]; 3]>, f64) {
    let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
        - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    if det == 0.0 || !det.is_finite() {
        return (None, f64::INFINITY);
    }
    let mut adj = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            // Cofactor of (c, r) lands at (r, c) of the inverse.
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            adj[r][c] = (g[r1][c1] * g[r2][c2] - g[r1][c2] * g[r2][c1]) / det;
        }
    }
    let norm = |m: &[[f64; 3]; 3]| {
        (0..3)
            .map(|r| m[r].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
    };
    let cond = norm(g) * norm(&adj);
    (Some(adj), cond)
}

fn apply_3x3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Solves `(M^t E M) alpha = M^t E trace` for the linear extension of a trace.
pub fn extension_coefficients(
    geom: &ElementGeometry,
    trace: &[f64],
) -> Result<LinearExtension, GeometryError> {
    assert_eq!(trace.len(), geom.n_edges);
    let mut rhs = [0.0f64; 3];
    for i in 0..geom.n_edges {
        let w = geom.edge_len[i] * trace[i];
        rhs[0] += w * geom.m[i][0];
        rhs[1] += w * geom.m[i][1];
        rhs[2] += w * geom.m[i][2];
    }
    let alpha = apply_3x3(&geom.mtem_inv, rhs);
    Ok(LinearExtension {
        alpha0: alpha[0],
        alpha1: alpha[1],
        alpha2: alpha[2],
    })
}

/// Weak gradient of a scalar trace: `(1/|T|) sum_i u_i |e_i| n_i`.
pub fn weak_gradient(geom: &ElementGeometry, trace: &[f64]) -> [f64; 2] {
    let mut g = [0.0f64, 0.0f64];
    for i in 0..geom.n_edges {
        let w = trace[i] * geom.edge_len[i];
        g[0] += w * geom.normals[i][0];
        g[1] += w * geom.normals[i][1];
    }
    [g[0] / geom.area, g[1] / geom.area]
}

/// Weak divergence of a vector trace: `(1/|T|) sum_i (u_i, v_i) . n_i |e_i|`.
pub fn weak_divergence(geom: &ElementGeometry, trace_u: &[f64], trace_v: &[f64]) -> f64 {
    let mut flux = 0.0;
    for i in 0..geom.n_edges {
        flux +=
            (trace_u[i] * geom.normals[i][0] + trace_v[i] * geom.normals[i][1]) * geom.edge_len[i];
    }
    flux / geom.area
}

/// Extension coefficients of every basis trace: column `j` of the returned
/// 3-by-N matrix solves for the trace that is 1 on edge `j` and 0 elsewhere.
pub fn extension_matrix(geom: &ElementGeometry) -> DMatrix<f64> {
    let n = geom.n_edges;
    let mut d = DMatrix::zeros(3, n);
    for j in 0..n {
        let rhs = [
            geom.edge_len[j] * geom.m[j][0],
            geom.edge_len[j] * geom.m[j][1],
            geom.edge_len[j] * geom.m[j][2],
        ];
        let col = apply_3x3(&geom.mtem_inv, rhs);
        d[(0, j)] = col[0];
        d[(1, j)] = col[1];
        d[(2, j)] = col[2];
    }
    d
}

/// Stabilizer matrix `A = h^{-1} (E - E M (M^t E M)^{-1} M^t E)`.
/// Symmetric positive semidefinite; kills every linear trace (`A M = 0`).
pub fn stabilizer_matrix(geom: &ElementGeometry) -> DMatrix<f64> {
    let n = geom.n_edges;
    let h_inv = 1.0 / geom.diameter_h;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            // Quadratic form m_i^t (M^t E M)^{-1} m_j.
            let sm = apply_3x3(&geom.mtem_inv, geom.m[j]);
            let q = geom.m[i][0] * sm[0] + geom.m[i][1] * sm[1] + geom.m[i][2] * sm[2];
            let delta = if i == j { geom.edge_len[i] } else { 0.0 };
            let val = h_inv * (delta - geom.edge_len[i] * geom.edge_len[j] * q);
            a[(i, j)] = val;
            a[(j, i)] = val;
        }
    }
    a
}

/// Gradient matrix `B`, `b_ij = (n_i . n_j) |e_i||e_j| / |T|`. Equals `G G^t`
/// for `G` the row stack of `|e_i| n_i / sqrt(|T|)`, so it is symmetric
/// positive semidefinite of rank at most 2, and `B 1 = 0` by polygon closure.
pub fn gradient_matrix(geom: &ElementGeometry) -> DMatrix<f64> {
    let n = geom.n_edges;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let dot =
                geom.normals[i][0] * geom.normals[j][0] + geom.normals[i][1] * geom.normals[j][1];
            let val = dot * geom.edge_len[i] * geom.edge_len[j] / geom.area;
            b[(i, j)] = val;
            b[(j, i)] = val;
        }
    }
    b
}

/// Divergence coupling vectors `Q1_i = |e_i| n_ix`, `Q2_i = |e_i| n_iy`.
pub fn divergence_vectors(geom: &ElementGeometry) -> (DVector<f64>, DVector<f64>) {
    let n = geom.n_edges;
    let q1 = DVector::from_fn(n, |i, _| geom.edge_len[i] * geom.normals[i][0]);
    let q2 = DVector::from_fn(n, |i, _| geom.edge_len[i] * geom.normals[i][1]);
    (q1, q2)
}

/// Load vector `F_j = int_T f(x,y) s(w_j) dT` under the selected rule.
pub fn load_vector(
    geom: &ElementGeometry,
    f: &dyn Fn(f64, f64) -> f64,
    rule: QuadratureRule,
) -> Result<DVector<f64>, GeometryError> {
    let d = extension_matrix(geom);
    load_vector_with(geom, &d, f, rule)
}

pub(crate) fn load_vector_with(
    geom: &ElementGeometry,
    d: &DMatrix<f64>,
    f: &dyn Fn(f64, f64) -> f64,
    rule: QuadratureRule,
) -> Result<DVector<f64>, GeometryError> {
    let n = geom.n_edges;
    let s_eval = |j: usize, x: f64, y: f64| {
        d[(0, j)] + d[(1, j)] * (x - geom.ref_point[0]) + d[(2, j)] * (y - geom.ref_point[1])
    };
    match rule {
        QuadratureRule::PolyDeg2 => {
            let mut out = DVector::zeros(n);
            let c = geom.ref_point;
            for k in 0..geom.corners.len() {
                let v1 = geom.corners[k];
                let v2 = geom.corners[(k + 1) % geom.corners.len()];
                let tri_area =
                    0.5 * ((v1[0] - c[0]) * (v2[1] - c[1]) - (v1[1] - c[1]) * (v2[0] - c[0]));
                let w = tri_area / 3.0;
                let pts = [
                    [0.5 * (c[0] + v1[0]), 0.5 * (c[1] + v1[1])],
                    [0.5 * (v1[0] + v2[0]), 0.5 * (v1[1] + v2[1])],
                    [0.5 * (v2[0] + c[0]), 0.5 * (v2[1] + c[1])],
                ];
                for p in pts {
                    let fv = w * f(p[0], p[1]);
                    for j in 0..n {
                        out[j] += fv * s_eval(j, p[0], p[1]);
                    }
                }
            }
            Ok(out)
        }
        QuadratureRule::SimpsonMid => {
            if !geom.is_axis_aligned_rectangle() {
                return Err(GeometryError::RuleNeedsRectangle { rule });
            }
            let mut out = DVector::zeros(n);
            for j in 0..n {
                // Extent of the rectangle along the normal of edge j equals the
                // length of the perpendicular edges.
                let axis = geom.normals[j];
                let perp_len = (0..n)
                    .find(|&k| {
                        (geom.normals[k][0] * axis[0] + geom.normals[k][1] * axis[1]).abs() < 0.5
                    })
                    .map(|k| geom.edge_len[k])
                    .expect("rectangle has perpendicular edges");
                let t = 0.5 * perp_len;
                let c = geom.ref_point;
                let pts = [
                    [c[0] - t * axis[0], c[1] - t * axis[1]],
                    c,
                    [c[0] + t * axis[0], c[1] + t * axis[1]],
                ];
                let weights = [geom.area / 6.0, 4.0 * geom.area / 6.0, geom.area / 6.0];
                for (p, w) in pts.iter().zip(weights) {
                    out[j] += w * f(p[0], p[1]) * s_eval(j, p[0], p[1]);
                }
            }
            Ok(out)
        }
        QuadratureRule::Fd => {
            if !geom.is_axis_aligned_rectangle() {
                return Err(GeometryError::RuleNeedsRectangle { rule });
            }
            let quarter = geom.area / 4.0;
            Ok(DVector::from_fn(n, |j, _| {
                let mp = geom.midpoint(j);
                quarter * f(mp[0], mp[1])
            }))
        }
    }
}

/// Bundles every per-element block for one cell.
pub fn element_matrices(
    geom: &ElementGeometry,
    kappa: f64,
    f1: &dyn Fn(f64, f64) -> f64,
    f2: &dyn Fn(f64, f64) -> f64,
    rule: QuadratureRule,
) -> Result<ElementMatrices, GeometryError> {
    assert!(kappa > 0.0, "stabilization parameter must be positive");
    let a = stabilizer_matrix(geom);
    let b = gradient_matrix(geom);
    let (q1, q2) = divergence_vectors(geom);
    let d = extension_matrix(geom);
    let f1 = load_vector_with(geom, &d, f1, rule)?;
    let f2 = load_vector_with(geom, &d, f2, rule)?;
    Ok(ElementMatrices {
        kappa,
        a,
        b,
        q1,
        q2,
        d,
        f1,
        f2,
    })
}

/// Integrates `f` over the polygon with the centroid-fan, edge-midpoint rule;
/// exact for quadratic integrands on convex cells.
pub fn integrate_poly_deg2(geom: &ElementGeometry, f: &dyn Fn(f64, f64) -> f64) -> f64 {
    let c = geom.ref_point;
    let mut sum = 0.0;
    for k in 0..geom.corners.len() {
        let v1 = geom.corners[k];
        let v2 = geom.corners[(k + 1) % geom.corners.len()];
        let tri_area = 0.5 * ((v1[0] - c[0]) * (v2[1] - c[1]) - (v1[1] - c[1]) * (v2[0] - c[0]));
        let w = tri_area / 3.0;
        let pts = [
            [0.5 * (c[0] + v1[0]), 0.5 * (c[1] + v1[1])],
            [0.5 * (v1[0] + v2[0]), 0.5 * (v1[1] + v2[1])],
            [0.5 * (v2[0] + c[0]), 0.5 * (v2[1] + c[1])],
        ];
        for p in pts {
            sum += w * f(p[0], p[1]);
        }
    }
    sum
}

/// Stabilizer quadratic form evaluated the long way round, through the linear
/// extension: `h^{-1} sum_i (s(u)(M_i) - u_i)^2 |e_i|`. Used as the second
/// route in equality checks against `u^t A u`.
pub fn stabilizer_energy_via_extension(
    geom: &ElementGeometry,
    trace: &[f64],
) -> Result<f64, GeometryError> {
    let ext = extension_coefficients(geom, trace)?;
    let mut sum = 0.0;
    for i in 0..geom.n_edges {
        let mp = geom.midpoint(i);
        let gap = ext.eval(geom.ref_point, mp[0], mp[1]) - trace[i];
        sum += gap * gap * geom.edge_len[i];
    }
    Ok(sum / geom.diameter_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Unit square element in (left, right, bottom, top) edge order, centered
    /// at `center`.
    fn square_geom(center: [f64; 2]) -> ElementGeometry {
        let [cx, cy] = center;
        ElementGeometry::from_parts(
            vec![
                [cx - 0.5, cy],
                [cx + 0.5, cy],
                [cx, cy - 0.5],
                [cx, cy + 0.5],
            ],
            vec![1.0; 4],
            vec![[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]],
            1.0,
            center,
            1.0,
            vec![
                [cx - 0.5, cy - 0.5],
                [cx + 0.5, cy - 0.5],
                [cx + 0.5, cy + 0.5],
                [cx - 0.5, cy + 0.5],
            ],
        )
        .unwrap()
    }

    /// Regular hexagon with side `s` centered at the origin, vertices at
    /// angles 0, 60, ..., 300 degrees.
    fn hexagon_geom(s: f64) -> ElementGeometry {
        let corners: Vec<[f64; 2]> = (0..6)
            .map(|k| {
                let th = std::f64::consts::PI / 3.0 * k as f64;
                [s * th.cos(), s * th.sin()]
            })
            .collect();
        let mut midpoints = Vec::new();
        let mut normals = Vec::new();
        for k in 0..6 {
            let (a, b) = (corners[k], corners[(k + 1) % 6]);
            midpoints.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            normals.push([dy / len, -dx / len]);
        }
        let area = 1.5 * 3.0f64.sqrt() * s * s;
        ElementGeometry::from_parts(midpoints, vec![s; 6], normals, area, [0.0, 0.0], s, corners)
            .unwrap()
    }

    /// Random convex polygon: an affine image of a regular k-gon. Affine maps
    /// preserve convexity, so any sampled shape is valid.
    fn random_convex_polygon(rng: &mut crate::mesh::SplitMix64, k: usize) -> ElementGeometry {
        let lin = loop {
            let m = [
                [0.5 + rng.next_symmetric(), 0.6 * rng.next_symmetric()],
                [0.6 * rng.next_symmetric(), 0.5 + rng.next_symmetric()],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() > 0.2 {
                break if det > 0.0 { m } else { [m[1], m[0]] };
            }
        };
        let shift = [2.0 * rng.next_symmetric(), 2.0 * rng.next_symmetric()];
        let corners: Vec<[f64; 2]> = (0..k)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                let (x, y) = (th.cos(), th.sin());
                [
                    lin[0][0] * x + lin[0][1] * y + shift[0],
                    lin[1][0] * x + lin[1][1] * y + shift[1],
                ]
            })
            .collect();
        geometry_from_corners(&corners)
    }

    fn geometry_from_corners(corners: &[[f64; 2]]) -> ElementGeometry {
        let k = corners.len();
        let mut midpoints = Vec::new();
        let mut lens = Vec::new();
        let mut normals = Vec::new();
        let mut area2 = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..k {
            let (a, b) = (corners[i], corners[(i + 1) % k]);
            midpoints.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            lens.push(len);
            normals.push([dy / len, -dx / len]);
            let cross = a[0] * b[1] - a[1] * b[0];
            area2 += cross;
            cx += cross * (a[0] + b[0]);
            cy += cross * (a[1] + b[1]);
        }
        let area = 0.5 * area2;
        let centroid = [cx / (3.0 * area2), cy / (3.0 * area2)];
        let h = lens.iter().cloned().fold(0.0f64, f64::max);
        ElementGeometry::from_parts(
            midpoints,
            lens,
            normals,
            area,
            centroid,
            h,
            corners.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn square_geometry_rows() {
        let geom = square_geom([0.0, 0.0]);
        let expect = [
            [1.0, -0.5, 0.0],
            [1.0, 0.5, 0.0],
            [1.0, 0.0, -0.5],
            [1.0, 0.0, 0.5],
        ];
        for (row, exp) in geom.m.iter().zip(expect) {
            for (a, b) in row.iter().zip(exp) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!(geom.edge_len.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn hexagon_moment_matrix_matches_direct_summation() {
        let geom = hexagon_geom(1.0);
        // Independent 6-term summation of M^t E M.
        let mut g = [[0.0f64; 3]; 3];
        for i in 0..6 {
            let m = geom.m[i];
            for r in 0..3 {
                for c in 0..3 {
                    g[r][c] += geom.edge_len[i] * m[r] * m[c];
                }
            }
        }
        // Midpoints sit at radius sqrt(3)/2, angles 30 + 60 k degrees; the sums
        // of cos^2 and sin^2 over those angles are each 3.
        assert!((g[0][0] - 6.0).abs() < 1e-14);
        assert!((g[1][1] - 3.0 * 0.75).abs() < 1e-14);
        assert!((g[2][2] - 3.0 * 0.75).abs() < 1e-14);
        assert!(g[0][1].abs() < 1e-14 && g[1][2].abs() < 1e-14);
        // And the geometry is usable (rank 3).
        assert!(geom.condition_estimate() < 1e3);
    }

    #[test]
    fn degenerate_collinear_midpoints_fail() {
        let res = ElementGeometry::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]],
            vec![1.0; 4],
            vec![[0.0, 1.0]; 4],
            1.0,
            [1.5, 0.0],
            1.0,
            vec![],
        );
        assert!(matches!(
            res,
            Err(GeometryError::DegenerateMidpoints { .. })
        ));
    }

    #[test]
    fn extension_square_step_trace() {
        // Trace (0, 1, 1/2, 1/2) on (left, right, bottom, top) extends to
        // s = 1/2 + (x - xT): slope (u_right - u_left) / width.
        let geom = square_geom([0.3, -0.2]);
        let ext = extension_coefficients(&geom, &[0.0, 1.0, 0.5, 0.5]).unwrap();
        assert!((ext.alpha0 - 0.5).abs() < 1e-14);
        assert!((ext.alpha1 - 1.0).abs() < 1e-14);
        assert!(ext.alpha2.abs() < 1e-14);
    }

    #[test]
    fn extension_reproduces_constants_and_linears() {
        let geom = hexagon_geom(1.0);
        let ext = extension_coefficients(&geom, &[3.25; 6]).unwrap();
        assert!((ext.alpha0 - 3.25).abs() < 1e-13);
        assert!(ext.alpha1.abs() < 1e-13 && ext.alpha2.abs() < 1e-13);

        let (a, b, c) = (0.7, -1.3, 2.1);
        let trace: Vec<f64> = (0..6)
            .map(|i| {
                let mp = geom.midpoint(i);
                a + b * (mp[0] - geom.ref_point[0]) + c * (mp[1] - geom.ref_point[1])
            })
            .collect();
        let ext = extension_coefficients(&geom, &trace).unwrap();
        assert!((ext.alpha0 - a).abs() < 1e-13);
        assert!((ext.alpha1 - b).abs() < 1e-13);
        assert!((ext.alpha2 - c).abs() < 1e-13);
    }

    #[test]
    fn weak_gradient_examples() {
        let geom = square_geom([0.5, 0.5]);
        // Trace of f(x, y) = x at midpoints of the unit square [0,1]^2.
        let g = weak_gradient(&geom, &[0.0, 1.0, 0.5, 0.5]);
        assert!((g[0] - 1.0).abs() < 1e-14 && g[1].abs() < 1e-14);

        let g = weak_gradient(&geom, &[7.0; 4]);
        assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);

        // Exact on linear traces over the hexagon; cross-check against an
        // independent 6-term summation.
        let geom = hexagon_geom(1.0);
        let trace: Vec<f64> = (0..6)
            .map(|i| {
                let mp = geom.midpoint(i);
                2.0 * mp[0] + 3.0 * mp[1]
            })
            .collect();
        let g = weak_gradient(&geom, &trace);
        let mut brute = [0.0, 0.0];
        for i in 0..6 {
            brute[0] += trace[i] * geom.edge_len[i] * geom.normals[i][0] / geom.area;
            brute[1] += trace[i] * geom.edge_len[i] * geom.normals[i][1] / geom.area;
        }
        assert!((g[0] - brute[0]).abs() < 1e-15 && (g[1] - brute[1]).abs() < 1e-15);
        assert!((g[0] - 2.0).abs() < 1e-13 && (g[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn weak_divergence_examples() {
        let geom = square_geom([0.5, 0.5]);
        assert!(weak_divergence(&geom, &[4.0; 4], &[-2.0; 4]).abs() < 1e-14);
        // (u, v) = (x, 0) has divergence 1.
        let du = weak_divergence(&geom, &[0.0, 1.0, 0.5, 0.5], &[0.0; 4]);
        assert!((du - 1.0).abs() < 1e-14);
        // (u, v) = (y, -x) is divergence free.
        let u: Vec<f64> = (0..4).map(|i| geom.midpoint(i)[1]).collect();
        let v: Vec<f64> = (0..4).map(|i| -geom.midpoint(i)[0]).collect();
        assert!(weak_divergence(&geom, &u, &v).abs() < 1e-14);
    }

    #[test]
    fn stabilizer_unit_square_quarter_pattern() {
        let a = stabilizer_matrix(&square_geom([0.0, 0.0]));
        let expect = [
            [0.25, 0.25, -0.25, -0.25],
            [0.25, 0.25, -0.25, -0.25],
            [-0.25, -0.25, 0.25, 0.25],
            [-0.25, -0.25, 0.25, 0.25],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (a[(i, j)] - expect[i][j]).abs() < 1e-14,
                    "A[{i}][{j}] = {}",
                    a[(i, j)]
                );
            }
        }
    }

    #[test]
    fn stabilizer_kills_linear_traces() {
        let mut rng = crate::mesh::SplitMix64::new(99);
        for k in 3..=10 {
            let geom = random_convex_polygon(&mut rng, k);
            let a = stabilizer_matrix(&geom);
            // A M = 0 column by column.
            for col in 0..3 {
                for i in 0..k {
                    let mut s = 0.0;
                    for j in 0..k {
                        s += a[(i, j)] * geom.m[j][col];
                    }
                    assert!(s.abs() < 1e-12, "A*M != 0 at ({i},{col}): {s}");
                }
            }
            // Quadratic form of a linear trace vanishes.
            let trace: Vec<f64> = (0..k)
                .map(|i| 1.5 - 0.4 * geom.m[i][1] + 0.9 * geom.m[i][2])
                .collect();
            let mut q = 0.0;
            for i in 0..k {
                for j in 0..k {
                    q += trace[i] * a[(i, j)] * trace[j];
                }
            }
            assert!(q.abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matrix_square_and_hexagon() {
        let b = gradient_matrix(&square_geom([0.0, 0.0]));
        let expect = [
            [1.0, -1.0, 0.0, 0.0],
            [-1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, -1.0],
            [0.0, 0.0, -1.0, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((b[(i, j)] - expect[i][j]).abs() < 1e-14);
            }
        }

        let geom = hexagon_geom(1.0);
        let b = gradient_matrix(&geom);
        let area = 1.5 * 3.0f64.sqrt();
        for i in 0..6 {
            for j in 0..6 {
                let th = std::f64::consts::PI / 3.0 * (i as f64 - j as f64);
                assert!((b[(i, j)] - th.cos() / area).abs() < 1e-13);
            }
        }
        // B 1 = 0 by closure.
        for i in 0..6 {
            let s: f64 = (0..6).map(|j| b[(i, j)]).sum();
            assert!(s.abs() < 1e-13);
        }
    }

    #[test]
    fn divergence_vectors_examples() {
        let (q1, q2) = divergence_vectors(&square_geom([0.0, 0.0]));
        assert_eq!(q1.as_slice(), &[-1.0, 1.0, 0.0, 0.0]);
        assert_eq!(q2.as_slice(), &[0.0, 0.0, -1.0, 1.0]);

        let geom = hexagon_geom(1.0);
        let (q1, q2) = divergence_vectors(&geom);
        for i in 0..6 {
            let th = std::f64::consts::PI / 6.0 + std::f64::consts::PI / 3.0 * i as f64;
            assert!((q1[i] - th.cos()).abs() < 1e-13);
            assert!((q2[i] - th.sin()).abs() < 1e-13);
        }
        assert!(q1.sum().abs() < 1e-13 && q2.sum().abs() < 1e-13);
    }

    #[test]
    fn load_vector_constant_is_quarter_per_edge() {
        let geom = square_geom([0.25, 0.75]);
        for rule in [
            QuadratureRule::PolyDeg2,
            QuadratureRule::SimpsonMid,
            QuadratureRule::Fd,
        ] {
            let f = load_vector(&geom, &|_, _| 1.0, rule).unwrap();
            for j in 0..4 {
                assert!(
                    (f[j] - 0.25).abs() < 1e-14,
                    "rule {rule:?} F[{j}] = {}",
                    f[j]
                );
            }
            let z = load_vector(&geom, &|_, _| 0.0, rule).unwrap();
            assert!(z.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn load_vector_linear_integrand_matches_symbolic() {
        // f(x, y) = x on the unit square centered at the origin:
        // F_j = int x * s_j = d2j * int x^2 = d2j / 12.
        let geom = square_geom([0.0, 0.0]);
        let f = load_vector(&geom, &|x, _| x, QuadratureRule::PolyDeg2).unwrap();
        let expect = [-1.0 / 12.0, 1.0 / 12.0, 0.0, 0.0];
        for j in 0..4 {
            assert!((f[j] - expect[j]).abs() < 1e-14, "F[{j}] = {}", f[j]);
        }
    }

    #[test]
    fn simpson_rule_rejects_non_rectangles() {
        let geom = hexagon_geom(1.0);
        assert!(matches!(
            load_vector(&geom, &|_, _| 1.0, QuadratureRule::SimpsonMid),
            Err(GeometryError::RuleNeedsRectangle { .. })
        ));
        assert!(matches!(
            load_vector(&geom, &|_, _| 1.0, QuadratureRule::Fd),
            Err(GeometryError::RuleNeedsRectangle { .. })
        ));
    }

    #[test]
    fn element_block_unit_square_kappa4() {
        let geom = square_geom([0.0, 0.0]);
        let mats = element_matrices(
            &geom,
            4.0,
            &|_, _| 0.0,
            &|_, _| 0.0,
            QuadratureRule::PolyDeg2,
        )
        .unwrap();
        let block = mats.velocity_block();
        let expect = [
            [2.0, 0.0, -1.0, -1.0],
            [0.0, 2.0, -1.0, -1.0],
            [-1.0, -1.0, 2.0, 0.0],
            [-1.0, -1.0, 0.0, 2.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((block[(i, j)] - expect[i][j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn element_block_kappa_rescale_is_linear_in_a() {
        let geom = hexagon_geom(0.8);
        let m1 = element_matrices(
            &geom,
            2.0,
            &|_, _| 0.0,
            &|_, _| 0.0,
            QuadratureRule::PolyDeg2,
        )
        .unwrap();
        let m2 = element_matrices(
            &geom,
            5.0,
            &|_, _| 0.0,
            &|_, _| 0.0,
            QuadratureRule::PolyDeg2,
        )
        .unwrap();
        let diff = m2.velocity_block() - m1.velocity_block();
        let scaled = 3.0 * &m1.a;
        assert!((diff - scaled).amax() < 1e-13);
    }

    #[test]
    fn element_block_nullspace_is_constants() {
        let geom = hexagon_geom(1.0);
        let mats = element_matrices(
            &geom,
            1.5,
            &|_, _| 0.0,
            &|_, _| 0.0,
            QuadratureRule::PolyDeg2,
        )
        .unwrap();
        let block = mats.velocity_block();
        let eig = nalgebra::SymmetricEigen::new(block.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(f64::total_cmp);
        // Exactly one (near-)zero eigenvalue, everything else positive.
        assert!(vals[0].abs() < 1e-12);
        assert!(vals[1] > 1e-6);
        // The constant vector is in the kernel.
        let ones = DVector::from_element(6, 1.0);
        assert!((&block * &ones).amax() < 1e-13);
    }

    proptest! {
        #[test]
        fn prop_element_identities_on_random_polygons(seed in 0u64..500, k in 3usize..=10) {
            let mut rng = crate::mesh::SplitMix64::new(seed);
            let geom = random_convex_polygon(&mut rng, k);
            let scale = geom.diameter_h.max(1.0);

            // Closure: sum of len * normal vanishes.
            let mut s = [0.0f64, 0.0];
            for i in 0..k {
                s[0] += geom.edge_len[i] * geom.normals[i][0];
                s[1] += geom.edge_len[i] * geom.normals[i][1];
            }
            prop_assert!(s[0].hypot(s[1]) < 1e-12 * scale);

            // Weak gradient is exact on linear traces.
            let (gx, gy) = (-0.8, 1.7);
            let trace: Vec<f64> = (0..k)
                .map(|i| gx * geom.m[i][1] + gy * geom.m[i][2] + 0.37)
                .collect();
            let g = weak_gradient(&geom, &trace);
            prop_assert!((g[0] - gx).abs() < 1e-11 && (g[1] - gy).abs() < 1e-11);

            // Two routes to the stabilizer energy agree.
            let trace: Vec<f64> = (0..k).map(|i| ((i * 37 + 11) % 17) as f64 / 7.0).collect();
            let a = stabilizer_matrix(&geom);
            let mut via_matrix = 0.0;
            for i in 0..k {
                for j in 0..k {
                    via_matrix += trace[i] * a[(i, j)] * trace[j];
                }
            }
            let via_ext = stabilizer_energy_via_extension(&geom, &trace).unwrap();
            let denom = via_matrix.abs().max(1e-30);
            prop_assert!((via_matrix - via_ext).abs() <= 1e-12 * denom.max(1.0));
            prop_assert!(via_matrix >= -1e-12);

            // Weak divergence equals (Q1.u + Q2.v) / |T|.
            let tu: Vec<f64> = (0..k).map(|i| (i as f64).sin()).collect();
            let tv: Vec<f64> = (0..k).map(|i| (i as f64 * 2.2).cos()).collect();
            let (q1, q2) = divergence_vectors(&geom);
            let via_q = (0..k).map(|i| q1[i] * tu[i] + q2[i] * tv[i]).sum::<f64>() / geom.area;
            let direct = weak_divergence(&geom, &tu, &tv);
            prop_assert!((via_q - direct).abs() < 1e-12 * (1.0 + direct.abs()));

            // B = G G^t within droplet tolerance.
            let b = gradient_matrix(&geom);
            for i in 0..k {
                for j in 0..k {
                    let gi = [geom.edge_len[i] * geom.normals[i][0], geom.edge_len[i] * geom.normals[i][1]];
                    let gj = [geom.edge_len[j] * geom.normals[j][0], geom.edge_len[j] * geom.normals[j][1]];
                    let val = (gi[0] * gj[0] + gi[1] * gj[1]) / geom.area;
                    prop_assert!((b[(i, j)] - val).abs() <= 1e-13 * (1.0 + val.abs()));
                }
            }
        }
    }
}
