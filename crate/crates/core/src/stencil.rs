//! Finite difference twin of the assembled system on uniform square grids.
//!
//! On an n-by-n square grid the discretization reduces, per interior edge, to
//! a 7-point stencil coupling an edge-midpoint velocity to six neighbouring
//! midpoints plus the two adjacent cell pressures, with weights
//!
//! ```text
//!     c1 = c3 = kappa/4 - 1,   c2 = kappa/2 + 2,   c4 = -kappa/4,
//! ```
//!
//! collapsing to the 5-point weights (0, 4, 0, -1, -1, -1, -1) at kappa = 4.
//! This module builds that system directly from the stencil formulas — no
//! element matrices involved — so that [`check_equivalence`] is a genuine
//! two-route consistency check against the assembled form.
//!
//! Rows are kept un-normalized (momentum entries O(1) with load `(h^2/2) f`,
//! continuity entries `±h`) to match the assembled system entry for entry;
//! dividing momentum rows by `h^2` recovers the familiar display form of the
//! 5-point scheme. Boundary-adjacent stencil terms move to the right-hand
//! side using the prescribed midpoint values, mirroring the elimination done
//! at assembly, and the pressure columns follow the same sign convention as
//! [`crate::assembly`] (the stored pressure unknown is the negated physical
//! pressure).

use crate::assembly::{number_dofs, BoundaryData, SaddleSystem};
use crate::mesh::{build_uniform_rect_mesh, MeshError, Rect};
use crate::sparse::{CsrMatrix, Triplet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StencilError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("finite difference build requires square cells (hx = {hx}, hy = {hy})")]
    NotSquare { hx: f64, hy: f64 },
    #[error("stabilization parameter kappa must be positive, got {0}")]
    KappaNotPositive(f64),
    #[error("systems have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

/// The four stencil weights. `c1`/`c3` multiply the collinear neighbours at
/// distance one cell, `c2` the center, `c4` the four lateral neighbours.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

pub fn stencil_weights(kappa: f64) -> StencilWeights {
    StencilWeights {
        c1: kappa / 4.0 - 1.0,
        c2: kappa / 2.0 + 2.0,
        c3: kappa / 4.0 - 1.0,
        c4: -kappa / 4.0,
    }
}

/// Maps grid-indexed entities of an n-by-n mesh to mesh ids, consistent with
/// the deterministic edge ordering of [`build_uniform_rect_mesh`].
///
/// Index conventions (all 1-based in the cell indices):
/// - `cell(i, j)`, `i, j in 1..=n`: the cell in column i, row j.
/// - `vedge(i, j)`, `i in 0..=n`, `j in 1..=n`: the vertical edge between
///   cells `(i, j)` and `(i+1, j)` (boundary at `i = 0` and `i = n`).
/// - `hedge(i, j)`, `i in 1..=n`, `j in 0..=n`: the horizontal edge between
///   cells `(i, j)` and `(i, j+1)` (boundary at `j = 0` and `j = n`).
#[derive(Clone, Copy, Debug)]
pub struct GridIndexer {
    pub n: usize,
}

impl GridIndexer {
    pub fn new(n: usize) -> Self {
        GridIndexer { n }
    }

    pub fn cell(&self, i: usize, j: usize) -> u32 {
        debug_assert!((1..=self.n).contains(&i) && (1..=self.n).contains(&j));
        ((j - 1) * self.n + (i - 1)) as u32
    }

    pub fn vedge(&self, i: usize, j: usize) -> u32 {
        debug_assert!(i <= self.n && (1..=self.n).contains(&j));
        ((j - 1) * (2 * self.n + 1) + self.n + i) as u32
    }

    pub fn hedge(&self, i: usize, j: usize) -> u32 {
        debug_assert!((1..=self.n).contains(&i) && j <= self.n);
        (j * (2 * self.n + 1) + (i - 1)) as u32
    }
}

/// Builds the finite difference saddle-point system on an n-by-n square grid
/// over `domain`, directly from the stencil weights. `bc` must be indexed by
/// the edge ids of the uniform mesh of the same `n` and `domain` (the
/// generator is deterministic, so any such mesh instance yields the same ids).
pub fn build_fd_system(
    n: usize,
    domain: Rect,
    kappa: f64,
    f1: &dyn Fn(f64, f64) -> f64,
    f2: &dyn Fn(f64, f64) -> f64,
    bc: &BoundaryData,
) -> Result<SaddleSystem, StencilError> {
    if !(kappa > 0.0) {
        return Err(StencilError::KappaNotPositive(kappa));
    }
    let mesh = build_uniform_rect_mesh(n, domain)?;
    let grid = mesh.grid.expect("uniform mesh carries grid info");
    if !grid.is_square() {
        return Err(StencilError::NotSquare {
            hx: grid.hx,
            hy: grid.hy,
        });
    }
    let h = grid.hx;
    let w = stencil_weights(kappa);
    let ix = GridIndexer::new(n);
    let dof_map = number_dofs(&mesh);
    let dim = dof_map.dim();
    let mut rhs = vec![0.0; dim];
    let mut triplets: Vec<Triplet> = Vec::new();

    let midpoint = |edge: u32| mesh.edges[edge as usize].midpoint;
    // Adds `coeff * value(edge)` to a velocity row: into the matrix when the
    // neighbour is free, onto the right-hand side when it is prescribed.
    let couple = |triplets: &mut Vec<Triplet>,
                  rhs: &mut Vec<f64>,
                  row: usize,
                  edge: u32,
                  comp: usize,
                  coeff: f64| {
        let dof = match comp {
            0 => dof_map.u_dof(edge),
            _ => dof_map.v_dof(edge),
        };
        match dof {
            Some(col) => triplets.push(Triplet {
                row: row as u32,
                col: col as u32,
                tag: 0,
                value: coeff,
            }),
            None => rhs[row] -= coeff * bc.values[edge as usize][comp],
        }
    };

    // Momentum rows of interior vertical edges: the stencil extends into the
    // two cells left and right of the edge.
    for j in 1..=n {
        for i in 1..n {
            let e = ix.vedge(i, j);
            let mp = midpoint(e);
            let neighbours = [
                (ix.vedge(i, j), w.c2),
                (ix.vedge(i + 1, j), w.c1),
                (ix.vedge(i - 1, j), w.c3),
                (ix.hedge(i + 1, j), w.c4),
                (ix.hedge(i + 1, j - 1), w.c4),
                (ix.hedge(i, j), w.c4),
                (ix.hedge(i, j - 1), w.c4),
            ];
            for comp in 0..2 {
                let row = if comp == 0 {
                    dof_map.u_dof(e).unwrap()
                } else {
                    dof_map.v_dof(e).unwrap()
                };
                for (ne, coeff) in neighbours {
                    couple(&mut triplets, &mut rhs, row, ne, comp, coeff);
                }
                let f = if comp == 0 { f1 } else { f2 };
                rhs[row] += h * h / 2.0 * f(mp[0], mp[1]);
            }
            // Pressure coupling sits on the u-row only: +h from the left
            // cell, -h from the right cell (in the negated-pressure unknown).
            let row = dof_map.u_dof(e).unwrap() as u32;
            for (cell, coeff) in [(ix.cell(i, j), h), (ix.cell(i + 1, j), -h)] {
                let col = dof_map.p_dof(cell) as u32;
                triplets.push(Triplet {
                    row,
                    col,
                    tag: 0,
                    value: coeff,
                });
                triplets.push(Triplet {
                    row: col,
                    col: row,
                    tag: 0,
                    value: coeff,
                });
            }
        }
    }

    // Momentum rows of interior horizontal edges: cells below and above.
    for j in 1..n {
        for i in 1..=n {
            let e = ix.hedge(i, j);
            let mp = midpoint(e);
            let neighbours = [
                (ix.hedge(i, j), w.c2),
                (ix.hedge(i, j + 1), w.c1),
                (ix.hedge(i, j - 1), w.c3),
                (ix.vedge(i - 1, j + 1), w.c4),
                (ix.vedge(i, j + 1), w.c4),
                (ix.vedge(i - 1, j), w.c4),
                (ix.vedge(i, j), w.c4),
            ];
            for comp in 0..2 {
                let row = if comp == 0 {
                    dof_map.u_dof(e).unwrap()
                } else {
                    dof_map.v_dof(e).unwrap()
                };
                for (ne, coeff) in neighbours {
                    couple(&mut triplets, &mut rhs, row, ne, comp, coeff);
                }
                let f = if comp == 0 { f1 } else { f2 };
                rhs[row] += h * h / 2.0 * f(mp[0], mp[1]);
            }
            // Pressure coupling on the v-row: +h from below, -h from above.
            let row = dof_map.v_dof(e).unwrap() as u32;
            for (cell, coeff) in [(ix.cell(i, j), h), (ix.cell(i, j + 1), -h)] {
                let col = dof_map.p_dof(cell) as u32;
                triplets.push(Triplet {
                    row,
                    col,
                    tag: 0,
                    value: coeff,
                });
                triplets.push(Triplet {
                    row: col,
                    col: row,
                    tag: 0,
                    value: coeff,
                });
            }
        }
    }

    // Continuity rows: h (u_e - u_w) + h (v_n - v_s) = boundary flux moves.
    // The velocity-pressure couplings above already wrote the transposed
    // entries for free edges; here only the prescribed edges contribute.
    for j in 1..=n {
        for i in 1..=n {
            let row = dof_map.p_dof(ix.cell(i, j));
            let terms = [
                (ix.vedge(i, j), 0usize, h),
                (ix.vedge(i - 1, j), 0, -h),
                (ix.hedge(i, j), 1, h),
                (ix.hedge(i, j - 1), 1, -h),
            ];
            for (edge, comp, coeff) in terms {
                if dof_map.u_dof(edge).is_none() {
                    rhs[row] -= coeff * bc.values[edge as usize][comp];
                }
            }
        }
    }

    let cell_area = mesh.cells.iter().map(|c| c.area).collect();
    Ok(SaddleSystem {
        matrix: CsrMatrix::from_triplets(dim, dim, triplets),
        rhs,
        dof_map,
        cell_area,
    })
}

/// Largest entrywise difference between two systems (matrix and right-hand
/// side), after confirming they have the same dimension. Both systems must be
/// built over the same dof numbering.
pub fn check_equivalence(a: &SaddleSystem, b: &SaddleSystem) -> Result<f64, StencilError> {
    if a.dof_map.dim() != b.dof_map.dim() {
        return Err(StencilError::DimensionMismatch(
            a.dof_map.dim(),
            b.dof_map.dim(),
        ));
    }
    let mat = a.matrix.max_entry_difference(&b.matrix);
    let rhs = a
        .rhs
        .iter()
        .zip(&b.rhs)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    Ok(mat.max(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::element::QuadratureRule;

    #[test]
    fn weights_at_reference_kappas() {
        let w = stencil_weights(4.0);
        assert_eq!((w.c1, w.c2, w.c3, w.c4), (0.0, 4.0, 0.0, -1.0));
        let w = stencil_weights(2.0);
        assert_eq!((w.c1, w.c2, w.c3, w.c4), (-0.5, 3.0, -0.5, -0.5));
    }

    #[test]
    fn weights_kill_constants() {
        for kappa in [0.5, 1.0, 4.0, 10.0, 25.0] {
            let w = stencil_weights(kappa);
            assert!((w.c1 + w.c2 + w.c3 + 4.0 * w.c4).abs() < 1e-15);
        }
    }

    #[test]
    fn indexer_matches_mesh_layout() {
        let n = 4;
        let mesh = build_uniform_rect_mesh(n, Rect::unit()).unwrap();
        let grid = mesh.grid.unwrap();
        let ix = GridIndexer::new(n);
        let mut seen = vec![false; mesh.edges.len()];
        for j in 1..=n {
            for i in 0..=n {
                let e = &mesh.edges[ix.vedge(i, j) as usize];
                assert!((e.midpoint[0] - i as f64 * grid.hx).abs() < 1e-14);
                assert!((e.midpoint[1] - (j as f64 - 0.5) * grid.hy).abs() < 1e-14);
                assert_eq!(e.normal, [1.0, 0.0]);
                seen[e.id as usize] = true;
            }
        }
        for j in 0..=n {
            for i in 1..=n {
                let e = &mesh.edges[ix.hedge(i, j) as usize];
                assert!((e.midpoint[0] - (i as f64 - 0.5) * grid.hx).abs() < 1e-14);
                assert!((e.midpoint[1] - j as f64 * grid.hy).abs() < 1e-14);
                seen[e.id as usize] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "indexer covers every edge");
        for j in 1..=n {
            for i in 1..=n {
                let c = &mesh.cells[ix.cell(i, j) as usize];
                assert!((c.centroid[0] - (i as f64 - 0.5) * grid.hx).abs() < 1e-13);
                assert!((c.centroid[1] - (j as f64 - 0.5) * grid.hy).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn five_point_row_pattern() {
        let n = 4;
        let bc = {
            let mesh = build_uniform_rect_mesh(n, Rect::unit()).unwrap();
            BoundaryData::homogeneous(&mesh)
        };
        let sys = build_fd_system(n, Rect::unit(), 4.0, &|_, _| 0.0, &|_, _| 0.0, &bc).unwrap();
        let h = 0.25;
        let ix = GridIndexer::new(n);
        // Fully interior vertical edge (2, 2): u-row has diagonal 4, four -1
        // velocity neighbours, two +-h pressure couplings, and explicit zeros
        // on the collinear neighbours.
        let e = ix.vedge(2, 2);
        let row = sys.dof_map.u_dof(e).unwrap();
        let (cols, vals) = sys.matrix.row(row);
        assert_eq!(cols.len(), 9);
        let get = |col: usize| {
            cols.iter()
                .position(|&c| c as usize == col)
                .map(|k| vals[k])
                .unwrap()
        };
        assert_eq!(get(row), 4.0);
        for (i, j) in [(3, 2), (1, 2)] {
            assert_eq!(get(sys.dof_map.u_dof(ix.vedge(i, j)).unwrap()), 0.0);
        }
        for (i, j) in [(3, 2), (3, 1), (2, 2), (2, 1)] {
            assert_eq!(get(sys.dof_map.u_dof(ix.hedge(i, j)).unwrap()), -1.0);
        }
        assert!((get(sys.dof_map.p_dof(ix.cell(2, 2))) - h).abs() < 1e-15);
        assert!((get(sys.dof_map.p_dof(ix.cell(3, 2))) + h).abs() < 1e-15);

        // Continuity pattern of cell (2, 2).
        let prow = sys.dof_map.p_dof(ix.cell(2, 2));
        let (cols, vals) = sys.matrix.row(prow);
        assert_eq!(cols.len(), 4);
        let get = |col: usize| {
            cols.iter()
                .position(|&c| c as usize == col)
                .map(|k| vals[k])
                .unwrap()
        };
        assert!((get(sys.dof_map.u_dof(ix.vedge(2, 2)).unwrap()) - h).abs() < 1e-15);
        assert!((get(sys.dof_map.u_dof(ix.vedge(1, 2)).unwrap()) + h).abs() < 1e-15);
        assert!((get(sys.dof_map.v_dof(ix.hedge(2, 2)).unwrap()) - h).abs() < 1e-15);
        assert!((get(sys.dof_map.v_dof(ix.hedge(2, 1)).unwrap()) + h).abs() < 1e-15);
    }

    #[test]
    fn zero_data_admits_zero_solution() {
        let mesh = build_uniform_rect_mesh(3, Rect::unit()).unwrap();
        let bc = BoundaryData::homogeneous(&mesh);
        let sys = build_fd_system(3, Rect::unit(), 4.0, &|_, _| 0.0, &|_, _| 0.0, &bc).unwrap();
        assert!(sys.rhs.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn constant_forcing_rhs_entries() {
        let n = 4;
        let mesh = build_uniform_rect_mesh(n, Rect::unit()).unwrap();
        let bc = BoundaryData::homogeneous(&mesh);
        let sys = build_fd_system(n, Rect::unit(), 4.0, &|_, _| 1.0, &|_, _| 0.0, &bc).unwrap();
        let half_h2 = 0.25 * 0.25 / 2.0;
        for d in 0..sys.dof_map.n_interior {
            assert!((sys.rhs[d] - half_h2).abs() < 1e-16, "u-rhs {}", sys.rhs[d]);
            assert_eq!(sys.rhs[d + sys.dof_map.n_interior], 0.0);
        }
    }

    #[test]
    fn equivalence_with_assembled_system() {
        let f1 = |x: f64, y: f64| (x + 2.0 * y).sin();
        let f2 = |x: f64, y: f64| (x - y).cos();
        // Divergence-free boundary data to keep the problem compatible.
        let g = |x: f64, y: f64| [y, x];
        for n in [2usize, 4, 8] {
            for kappa in [1.0, 4.0, 10.0] {
                let mesh = build_uniform_rect_mesh(n, Rect::unit()).unwrap();
                let bc = BoundaryData::from_fn(&mesh, g);
                let swg = assemble(&mesh, kappa, &f1, &f2, &bc, QuadratureRule::Fd).unwrap();
                let fd = build_fd_system(n, Rect::unit(), kappa, &f1, &f2, &bc).unwrap();
                let diff = check_equivalence(&swg, &fd).unwrap();
                assert!(diff <= 1e-12, "n = {n}, kappa = {kappa}: diff {diff:.3e}");
            }
        }
    }

    #[test]
    fn equivalence_detector_sees_perturbations() {
        let mesh = build_uniform_rect_mesh(4, Rect::unit()).unwrap();
        let bc = BoundaryData::homogeneous(&mesh);
        let sys = build_fd_system(4, Rect::unit(), 4.0, &|_, _| 1.0, &|_, _| 0.0, &bc).unwrap();
        let mut other = sys.clone();
        other.matrix.values[5] += 1e-6;
        let diff = check_equivalence(&sys, &other).unwrap();
        assert!(diff >= 1e-6);
    }
}
