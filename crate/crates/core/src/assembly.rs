//! Global degrees of freedom and assembly of the saddle-point system.
//!
//! Unknowns are ordered u-dofs (one per interior edge, in edge order), then
//! v-dofs, then one pressure dof per cell. Dirichlet edges carry no unknowns;
//! their prescribed midpoint values are eliminated into the right-hand side.
//!
//! The assembled matrix has the block form
//!
//! ```text
//!     [ K   0   Q1 ] [ U ]   [ F1 ]
//!     [ 0   K   Q2 ] [ V ] = [ F2 ]
//!     [ Q1t Q2t 0  ] [ Q ]   [ G  ]
//! ```
//!
//! with `K = kappa*A + B` summed over cells and `Q1, Q2` the divergence
//! coupling vectors. Writing the system with `+Q1` in both off-diagonal blocks
//! makes it exactly symmetric, at the price of a sign: the pressure unknown
//! `Q` stored here is the *negative* of the physical pressure. The momentum
//! equation in physical variables reads `K U - Q1 p = F1`, which is what the
//! per-edge stencils reduce to on uniform grids. [`lift_solution`] flips the
//! sign back and shifts the pressure to area-weighted zero mean.
//!
//! Continuity rows state the per-cell flux balance `Q1t U + Q2t V = G` with
//! `G_c = - sum over boundary edges of (g . n) |e|`, so a converged solution
//! conserves mass locally on every cell.

use crate::element::{element_geometry, element_matrices, GeometryError, QuadratureRule};
use crate::mesh::PolygonalMesh;
use crate::solver::Solution;
use crate::sparse::{CsrMatrix, Triplet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("stabilization parameter kappa must be positive, got {0}")]
    KappaNotPositive(f64),
    #[error("incompatible boundary data: net boundary flux {flux:.3e} exceeds {limit:.3e}")]
    IncompatibleBoundaryData { flux: f64, limit: f64 },
}

/// Maps mesh entities to equation numbers. Boundary edges are constrained and
/// carry no velocity dof.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub n_edges: usize,
    pub n_cells: usize,
    /// Per-edge u-dof, dense over interior edges in edge order.
    pub edge_dof: Vec<Option<u32>>,
    /// Inverse map: dof index -> edge id.
    pub interior_edges: Vec<u32>,
    pub n_interior: usize,
}

impl DofMap {
    pub fn u_dof(&self, edge: u32) -> Option<usize> {
        self.edge_dof[edge as usize].map(|d| d as usize)
    }

    pub fn v_dof(&self, edge: u32) -> Option<usize> {
        self.edge_dof[edge as usize].map(|d| d as usize + self.n_interior)
    }

    pub fn p_dof(&self, cell: u32) -> usize {
        2 * self.n_interior + cell as usize
    }

    pub fn p_offset(&self) -> usize {
        2 * self.n_interior
    }

    /// Total system dimension: `2 * interior edges + cells`.
    pub fn dim(&self) -> usize {
        2 * self.n_interior + self.n_cells
    }
}

/// Numbers the dofs of `mesh` deterministically: u over interior edges in edge
/// order, then v, then one pressure dof per cell in cell-id order.
pub fn number_dofs(mesh: &PolygonalMesh) -> DofMap {
    let mut edge_dof = vec![None; mesh.edges.len()];
    let mut interior_edges = Vec::with_capacity(mesh.n_interior_edges());
    for edge in &mesh.edges {
        if !edge.boundary {
            edge_dof[edge.id as usize] = Some(interior_edges.len() as u32);
            interior_edges.push(edge.id);
        }
    }
    DofMap {
        n_edges: mesh.edges.len(),
        n_cells: mesh.cells.len(),
        n_interior: interior_edges.len(),
        edge_dof,
        interior_edges,
    }
}

/// Prescribed velocity at boundary edge midpoints. Entries for interior edges
/// are present but unused (zero).
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub values: Vec<[f64; 2]>,
}

impl BoundaryData {
    pub fn homogeneous(mesh: &PolygonalMesh) -> Self {
        BoundaryData {
            values: vec![[0.0, 0.0]; mesh.edges.len()],
        }
    }

    /// Evaluates `g` at every boundary edge midpoint.
    pub fn from_fn(mesh: &PolygonalMesh, g: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut values = vec![[0.0, 0.0]; mesh.edges.len()];
        for &eid in &mesh.boundary_edges {
            let mp = mesh.edges[eid as usize].midpoint;
            values[eid as usize] = g(mp[0], mp[1]);
        }
        BoundaryData { values }
    }

    /// Net boundary flux `sum (g . n) |e|`; must (almost) vanish for a
    /// divergence-free problem to be solvable.
    pub fn net_flux(&self, mesh: &PolygonalMesh) -> f64 {
        let mut flux = 0.0;
        for &eid in &mesh.boundary_edges {
            let edge = &mesh.edges[eid as usize];
            let cell = edge.cells[0]
                .or(edge.cells[1])
                .expect("boundary edge has a cell");
            let ce = mesh.cells[cell as usize]
                .edges
                .iter()
                .find(|ce| ce.edge == eid)
                .expect("cell lists its edge");
            let n = mesh.outward_normal(*ce);
            let g = self.values[eid as usize];
            flux += (g[0] * n[0] + g[1] * n[1]) * edge.length;
        }
        flux
    }
}

/// The assembled sparse saddle-point system. See the module docs for the
/// block layout and the pressure sign convention.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dof_map: DofMap,
    /// Cell areas, indexed by cell id; used for pressure scaling and the
    /// weighted zero-mean convention.
    pub cell_area: Vec<f64>,
}

impl SaddleSystem {
    /// Unit vector spanning the matrix kernel: the constant-pressure
    /// direction.
    pub fn nullspace_vector(&self) -> Vec<f64> {
        let dim = self.dof_map.dim();
        let np = self.dof_map.n_cells as f64;
        let mut z = vec![0.0; dim];
        for c in 0..self.dof_map.n_cells {
            z[self.dof_map.p_offset() + c] = 1.0 / np.sqrt();
        }
        z
    }
}

/// Assembles the global system for `-Δu + ∇p = (f1, f2)`, `div u = 0` with
/// Dirichlet data `bc`. Element contributions accumulate in a deterministic
/// order (sorted by row, column, then cell id), so the result is independent
/// of the cell iteration order.
pub fn assemble(
    mesh: &PolygonalMesh,
    kappa: f64,
    f1: &dyn Fn(f64, f64) -> f64,
    f2: &dyn Fn(f64, f64) -> f64,
    bc: &BoundaryData,
    rule: QuadratureRule,
) -> Result<SaddleSystem, AssemblyError> {
    if !(kappa > 0.0) {
        return Err(AssemblyError::KappaNotPositive(kappa));
    }
    let boundary_len: f64 = mesh
        .boundary_edges
        .iter()
        .map(|&e| mesh.edges[e as usize].length)
        .sum();
    let flux = bc.net_flux(mesh);
    let limit = 1e-10 * boundary_len;
    if flux.abs() > limit {
        return Err(AssemblyError::IncompatibleBoundaryData { flux, limit });
    }

    let dof_map = number_dofs(mesh);
    let dim = dof_map.dim();
    let mut rhs = vec![0.0; dim];
    let mut triplets: Vec<Triplet> = Vec::new();
    let mut cell_area = vec![0.0; mesh.cells.len()];

    for cell in &mesh.cells {
        cell_area[cell.id as usize] = cell.area;
        let geom = element_geometry(cell, mesh)?;
        let mats = element_matrices(&geom, kappa, f1, f2, rule)?;
        let block = mats.velocity_block();
        let n = geom.n_edges;
        let p_col = dof_map.p_dof(cell.id) as u32;

        for li in 0..n {
            let ei = cell.edges[li].edge;
            let (Some(ui), Some(vi)) = (dof_map.u_dof(ei), dof_map.v_dof(ei)) else {
                // Constrained row: its equation is replaced by the boundary
                // value, which enters other rows through elimination below.
                continue;
            };
            rhs[ui] += mats.f1[li];
            rhs[vi] += mats.f2[li];

            for lj in 0..n {
                let ej = cell.edges[lj].edge;
                let k = block[(li, lj)];
                match (dof_map.u_dof(ej), dof_map.v_dof(ej)) {
                    (Some(uj), Some(vj)) => {
                        triplets.push(Triplet {
                            row: ui as u32,
                            col: uj as u32,
                            tag: cell.id,
                            value: k,
                        });
                        triplets.push(Triplet {
                            row: vi as u32,
                            col: vj as u32,
                            tag: cell.id,
                            value: k,
                        });
                    }
                    _ => {
                        let g = bc.values[ej as usize];
                        rhs[ui] -= k * g[0];
                        rhs[vi] -= k * g[1];
                    }
                }
            }

            // Velocity-pressure coupling, inserted symmetrically with the
            // identical value so that symmetry holds exactly.
            triplets.push(Triplet {
                row: ui as u32,
                col: p_col,
                tag: cell.id,
                value: mats.q1[li],
            });
            triplets.push(Triplet {
                row: p_col,
                col: ui as u32,
                tag: cell.id,
                value: mats.q1[li],
            });
            triplets.push(Triplet {
                row: vi as u32,
                col: p_col,
                tag: cell.id,
                value: mats.q2[li],
            });
            triplets.push(Triplet {
                row: p_col,
                col: vi as u32,
                tag: cell.id,
                value: mats.q2[li],
            });
        }

        // Boundary edges contribute prescribed flux to the continuity row.
        for li in 0..n {
            let ei = cell.edges[li].edge;
            if dof_map.u_dof(ei).is_none() {
                let g = bc.values[ei as usize];
                rhs[p_col as usize] -= mats.q1[li] * g[0] + mats.q2[li] * g[1];
            }
        }
    }

    let matrix = CsrMatrix::from_triplets(dim, dim, triplets);
    Ok(SaddleSystem {
        matrix,
        rhs,
        dof_map,
        cell_area,
    })
}

/// Expands a raw solution vector into per-edge velocity traces and per-cell
/// pressures: boundary traces are re-inserted from `bc`, the stored pressure
/// sign is flipped back to physical, and the pressure is shifted so that
/// `sum |T| p_T = 0`.
pub fn lift_solution(system: &SaddleSystem, raw: &[f64], bc: &BoundaryData) -> Solution {
    let dm = &system.dof_map;
    assert_eq!(raw.len(), dm.dim(), "raw vector length mismatch");
    let mut u = vec![0.0; dm.n_edges];
    let mut v = vec![0.0; dm.n_edges];
    for e in 0..dm.n_edges {
        match dm.u_dof(e as u32) {
            Some(ud) => {
                u[e] = raw[ud];
                v[e] = raw[dm.v_dof(e as u32).unwrap()];
            }
            None => {
                u[e] = bc.values[e][0];
                v[e] = bc.values[e][1];
            }
        }
    }
    let mut p: Vec<f64> = (0..dm.n_cells).map(|c| -raw[dm.p_offset() + c]).collect();
    let total_area: f64 = system.cell_area.iter().sum();
    let mean = p
        .iter()
        .zip(&system.cell_area)
        .map(|(pi, ai)| pi * ai)
        .sum::<f64>()
        / total_area;
    for pi in &mut p {
        *pi -= mean;
    }
    Solution { u, v, p }
}

/// Writes the system matrix in Matrix Market coordinate format.
pub fn dump_system(
    system: &SaddleSystem,
    path: impl AsRef<std::path::Path>,
) -> std::io::Result<()> {
    std::fs::write(path, system.matrix.to_matrix_market())
}
