//! Polygonal meshes with edge-midpoint geometry.
//!
//! All degrees of freedom of the discretization live on edge midpoints (velocity)
//! and cells (pressure), so the mesh stores, for every edge, its midpoint, length
//! and a canonical unit normal, and for every cell an ordered counterclockwise
//! edge loop with per-edge orientation signs.
//!
//! Conventions:
//! - An edge is stored once, directed from its lower-id endpoint to its higher-id
//!   endpoint. Its canonical normal is the direction vector rotated clockwise,
//!   `(dy, -dx)/len`.
//! - A cell traversing an edge in the canonical direction sees the canonical
//!   normal as its outward normal (sign `+1`); the neighbour on the other side
//!   gets sign `-1`. Opposite outward normals on shared edges therefore hold
//!   exactly, not just to rounding.
//! - Generated rectangular meshes order edges lexicographically by midpoint,
//!   y-major then x, and cells row-major by center. Regenerating with the same
//!   inputs reproduces ids, orderings and coordinates bit for bit.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Axis-aligned rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// The unit square `(0,1) x (0,1)`.
    pub fn unit() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Vertex {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

/// A mesh edge. `vertices` is in canonical order (lower id first) and `normal`
/// is the canonical unit normal; `cells[0]` is the incident cell whose outward
/// normal equals `normal`, `cells[1]` the one whose outward normal is `-normal`.
#[derive(Clone, Debug)]
pub struct Edge {
    pub id: u32,
    pub vertices: [u32; 2],
    pub midpoint: [f64; 2],
    pub length: f64,
    pub normal: [f64; 2],
    pub boundary: bool,
    pub cells: [Option<u32>; 2],
}

/// One edge of a cell's counterclockwise loop: the global edge id plus the
/// orientation sign such that `sign * edge.normal` points out of the cell.
#[derive(Clone, Copy, Debug)]
pub struct CellEdge {
    pub edge: u32,
    pub sign: f64,
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub id: u32,
    /// Counterclockwise vertex loop; `edges[k]` joins `vertices[k]` to
    /// `vertices[(k+1) % len]`.
    pub vertices: Vec<u32>,
    pub edges: Vec<CellEdge>,
    pub area: f64,
    pub centroid: [f64; 2],
    /// Element diameter used by the stabilizer: the longest edge of the cell.
    pub diameter_h: f64,
}

/// Auxiliary description of a structured n-by-n rectangular mesh. Present only
/// on meshes produced by [`build_uniform_rect_mesh`]; grid-indexed operations
/// (finite difference stencils, grid norms) require it.
#[derive(Clone, Copy, Debug)]
pub struct GridInfo {
    pub n: usize,
    pub rect: Rect,
    pub hx: f64,
    pub hy: f64,
}

impl GridInfo {
    /// True when the cells are squares (`hx == hy` up to rounding).
    pub fn is_square(&self) -> bool {
        (self.hx - self.hy).abs() <= 1e-12 * self.hx.abs().max(self.hy.abs())
    }
}

/// Ids are positional throughout: `vertices[i].id == i`, `edges[i].id == i`,
/// `cells[i].id == i`.
#[derive(Clone, Debug)]
pub struct PolygonalMesh {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
    /// Sorted ids of edges with exactly one incident cell.
    pub boundary_edges: Vec<u32>,
    pub grid: Option<GridInfo>,
}

impl PolygonalMesh {
    /// Outward unit normal of `cell_edge` as seen from its cell.
    pub fn outward_normal(&self, ce: CellEdge) -> [f64; 2] {
        let n = self.edges[ce.edge as usize].normal;
        [ce.sign * n[0], ce.sign * n[1]]
    }

    pub fn n_interior_edges(&self) -> usize {
        self.edges.len() - self.boundary_edges.len()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh file parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("domain must have positive width and height")]
    InvalidDomain,
    #[error("n must be at least 1")]
    InvalidResolution,
    #[error("perturbation amplitude {0} outside [0, 0.3)")]
    InvalidAmplitude(f64),
    #[error("cell {cell} references vertex {vertex} out of range")]
    VertexOutOfRange { cell: u32, vertex: u32 },
    #[error(
        "cell {cell}: edge loop does not close (fewer than 3 distinct vertices or repeated vertex)"
    )]
    OpenLoop { cell: u32 },
    #[error("cell {cell}: non-positive area (vertex loop must be counterclockwise)")]
    NegativeArea { cell: u32 },
    #[error("edge ({a},{b}) has zero length")]
    ZeroLengthEdge { a: u32, b: u32 },
    #[error("edge ({a},{b}) is shared by more than two cells, or twice with the same orientation")]
    NonManifoldEdge { a: u32, b: u32 },
    #[error("cell {cell} is not convex after perturbation")]
    NonConvexCell { cell: u32 },
    #[error("vertex {0} has non-finite coordinates")]
    NonFiniteVertex(u32),
}

/// A validation finding. Diagnostics are data, not errors: [`validate_mesh`]
/// returns the full list and leaves acting on it to the caller.
#[derive(Clone, Debug)]
pub struct Diagnostic {
    pub cell: Option<u32>,
    pub edge: Option<u32>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.cell, self.edge) {
            (Some(c), _) => write!(f, "cell {}: {}", c, self.message),
            (_, Some(e)) => write!(f, "edge {}: {}", e, self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

/// SplitMix64: tiny, portable 64-bit PRNG used for mesh perturbation so that
/// perturbed meshes are reproducible across platforms and implementations.
///
/// State update `s += 0x9E3779B97F4A7C15`; output mixes the state with two
/// xor-shift-multiply rounds (`0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`).
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[-1, 1)` with 53 significant bits.
    pub fn next_symmetric(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        2.0 * u - 1.0
    }
}

/// Mesh file format: vertex coordinates plus counterclockwise vertex loops.
#[derive(Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<[f64; 2]>,
    cells: Vec<Vec<u32>>,
}

enum EdgeOrder {
    /// Sort edges lexicographically by midpoint, y-major then x.
    ByMidpoint,
    /// Edges appear exactly in this order (pairs already canonical).
    Explicit(Vec<[u32; 2]>),
}

/// Builds an `n x n` mesh of congruent rectangles over `domain`.
///
/// Vertices are laid out row-major; edges alternate bands of horizontal and
/// vertical edges so that the global order is lexicographic by midpoint
/// (y-major then x); cells are row-major by center.
pub fn build_uniform_rect_mesh(n: usize, domain: Rect) -> Result<PolygonalMesh, MeshError> {
    build_rect_mesh_with_offsets(n, domain, |_, _| [0.0, 0.0]).map(|mut m| {
        m.grid = Some(GridInfo {
            n,
            rect: domain,
            hx: domain.width() / n as f64,
            hy: domain.height() / n as f64,
        });
        m
    })
}

/// Builds the same topology as [`build_uniform_rect_mesh`] but displaces every
/// interior vertex by `amplitude * (hx, hy) * r` with `r` drawn from `[-1,1)^2`
/// using [`SplitMix64`] seeded with `seed`. Draws are consumed in vertex-id
/// order, two per interior vertex; boundary vertices stay put.
///
/// With `amplitude == 0` the result is bitwise identical geometry to the
/// uniform mesh (minus the grid tag, since the cells are no longer grid cells
/// in general).
pub fn build_perturbed_quad_mesh(
    n: usize,
    domain: Rect,
    amplitude: f64,
    seed: u64,
) -> Result<PolygonalMesh, MeshError> {
    if !(0.0..0.3).contains(&amplitude) {
        return Err(MeshError::InvalidAmplitude(amplitude));
    }
    let hx = domain.width() / n as f64;
    let hy = domain.height() / n as f64;
    let mut rng = SplitMix64::new(seed);
    let mut shifts = vec![[0.0, 0.0]; (n + 1) * (n + 1)];
    for j in 0..=n {
        for i in 0..=n {
            if i > 0 && i < n && j > 0 && j < n {
                let dx = amplitude * hx * rng.next_symmetric();
                let dy = amplitude * hy * rng.next_symmetric();
                shifts[j * (n + 1) + i] = [dx, dy];
            }
        }
    }
    let mesh = build_rect_mesh_with_offsets(n, domain, |i, j| shifts[j * (n + 1) + i])?;
    for cell in &mesh.cells {
        if !is_convex(&mesh, cell) {
            return Err(MeshError::NonConvexCell { cell: cell.id });
        }
    }
    Ok(mesh)
}

fn build_rect_mesh_with_offsets(
    n: usize,
    domain: Rect,
    offset: impl Fn(usize, usize) -> [f64; 2],
) -> Result<PolygonalMesh, MeshError> {
    if n < 1 {
        return Err(MeshError::InvalidResolution);
    }
    if !(domain.width() > 0.0 && domain.height() > 0.0) {
        return Err(MeshError::InvalidDomain);
    }
    let hx = domain.width() / n as f64;
    let hy = domain.height() / n as f64;
    let vid = |i: usize, j: usize| (j * (n + 1) + i) as u32;

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let d = offset(i, j);
            vertices.push([
                domain.x0 + i as f64 * hx + d[0],
                domain.y0 + j as f64 * hy + d[1],
            ]);
        }
    }

    // Edge bands in ascending midpoint y: the horizontal edges of vertex row j,
    // then the vertical edges between rows j and j+1.
    let mut edge_pairs = Vec::with_capacity(2 * n * (n + 1));
    for j in 0..=n {
        for i in 0..n {
            edge_pairs.push([vid(i, j), vid(i + 1, j)]);
        }
        if j < n {
            for i in 0..=n {
                edge_pairs.push([vid(i, j), vid(i, j + 1)]);
            }
        }
    }

    let mut cell_loops = Vec::with_capacity(n * n);
    for cj in 0..n {
        for ci in 0..n {
            cell_loops.push(vec![
                vid(ci, cj),
                vid(ci + 1, cj),
                vid(ci + 1, cj + 1),
                vid(ci, cj + 1),
            ]);
        }
    }

    assemble_mesh(vertices, cell_loops, EdgeOrder::Explicit(edge_pairs))
}

/// Loads a mesh from the JSON file format (`vertices: [[x,y],...]`,
/// `cells: [[v0,v1,...],...]` with counterclockwise vertex loops). All derived
/// geometry is computed from the vertex data and validated.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<PolygonalMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    mesh_from_json(&text)
}

/// Same as [`load_mesh`] but from an in-memory JSON string.
pub fn mesh_from_json(text: &str) -> Result<PolygonalMesh, MeshError> {
    let file: MeshFile = serde_json::from_str(text)?;
    assemble_mesh(file.vertices, file.cells, EdgeOrder::ByMidpoint)
}

/// Serializes a mesh back to the JSON file format.
pub fn mesh_to_json(mesh: &PolygonalMesh) -> String {
    let file = MeshFile {
        vertices: mesh.vertices.iter().map(|v| [v.x, v.y]).collect(),
        cells: mesh.cells.iter().map(|c| c.vertices.clone()).collect(),
    };
    serde_json::to_string_pretty(&file).expect("mesh serialization cannot fail")
}

fn assemble_mesh(
    coords: Vec<[f64; 2]>,
    cell_loops: Vec<Vec<u32>>,
    order: EdgeOrder,
) -> Result<PolygonalMesh, MeshError> {
    for (k, c) in coords.iter().enumerate() {
        if !(c[0].is_finite() && c[1].is_finite()) {
            return Err(MeshError::NonFiniteVertex(k as u32));
        }
    }
    let nv = coords.len() as u32;
    for (cid, loop_) in cell_loops.iter().enumerate() {
        for &v in loop_ {
            if v >= nv {
                return Err(MeshError::VertexOutOfRange {
                    cell: cid as u32,
                    vertex: v,
                });
            }
        }
        let mut distinct = loop_.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if loop_.len() < 3 || distinct.len() != loop_.len() {
            return Err(MeshError::OpenLoop { cell: cid as u32 });
        }
    }

    // Edge list and (a,b) -> id map, a < b canonical.
    let canonical = |a: u32, b: u32| if a < b { [a, b] } else { [b, a] };
    let pairs: Vec<[u32; 2]> = match order {
        EdgeOrder::Explicit(pairs) => pairs,
        EdgeOrder::ByMidpoint => {
            let mut set = std::collections::BTreeSet::new();
            for loop_ in &cell_loops {
                for k in 0..loop_.len() {
                    let a = loop_[k];
                    let b = loop_[(k + 1) % loop_.len()];
                    set.insert(canonical(a, b));
                }
            }
            let mut pairs: Vec<[u32; 2]> = set.into_iter().collect();
            let mid = |p: &[u32; 2]| {
                let (a, b) = (coords[p[0] as usize], coords[p[1] as usize]);
                [0.5 * (a[1] + b[1]), 0.5 * (a[0] + b[0])]
            };
            pairs.sort_by(|p, q| {
                let (mp, mq) = (mid(p), mid(q));
                mp[0]
                    .total_cmp(&mq[0])
                    .then(mp[1].total_cmp(&mq[1]))
                    .then(p.cmp(q))
            });
            pairs
        }
    };

    let mut edge_of = std::collections::HashMap::with_capacity(pairs.len());
    let mut edges = Vec::with_capacity(pairs.len());
    for (id, &[a, b]) in pairs.iter().enumerate() {
        let (pa, pb) = (coords[a as usize], coords[b as usize]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let length = dx.hypot(dy);
        if length <= 0.0 {
            return Err(MeshError::ZeroLengthEdge { a, b });
        }
        edge_of.insert([a, b], id as u32);
        edges.push(Edge {
            id: id as u32,
            vertices: [a, b],
            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
            length,
            normal: [dy / length, -dx / length],
            boundary: false,
            cells: [None, None],
        });
    }

    let mut cells = Vec::with_capacity(cell_loops.len());
    for (cid, loop_) in cell_loops.into_iter().enumerate() {
        let pts: Vec<[f64; 2]> = loop_.iter().map(|&v| coords[v as usize]).collect();
        let (area, centroid) = polygon_area_centroid(&pts);
        if area <= 0.0 {
            return Err(MeshError::NegativeArea { cell: cid as u32 });
        }
        let mut cell_edges = Vec::with_capacity(loop_.len());
        let mut diameter_h = 0.0f64;
        for k in 0..loop_.len() {
            let a = loop_[k];
            let b = loop_[(k + 1) % loop_.len()];
            let eid = edge_of[&canonical(a, b)];
            let sign = if a < b { 1.0 } else { -1.0 };
            let slot = if sign > 0.0 { 0 } else { 1 };
            let edge = &mut edges[eid as usize];
            if edge.cells[slot].is_some() {
                let [ea, eb] = edge.vertices;
                return Err(MeshError::NonManifoldEdge { a: ea, b: eb });
            }
            edge.cells[slot] = Some(cid as u32);
            diameter_h = diameter_h.max(edge.length);
            cell_edges.push(CellEdge { edge: eid, sign });
        }
        cells.push(Cell {
            id: cid as u32,
            vertices: loop_,
            edges: cell_edges,
            area,
            centroid,
            diameter_h,
        });
    }

    let mut boundary_edges = Vec::new();
    for edge in &mut edges {
        let incident = edge.cells.iter().filter(|c| c.is_some()).count();
        edge.boundary = incident == 1;
        if edge.boundary {
            boundary_edges.push(edge.id);
        }
    }

    let vertices = coords
        .into_iter()
        .enumerate()
        .map(|(id, c)| Vertex {
            id: id as u32,
            x: c[0],
            y: c[1],
        })
        .collect();

    Ok(PolygonalMesh {
        vertices,
        edges,
        cells,
        boundary_edges,
        grid: None,
    })
}

/// Shoelace area and area centroid, computed relative to the first vertex to
/// limit cancellation for polygons far from the origin.
fn polygon_area_centroid(pts: &[[f64; 2]]) -> (f64, [f64; 2]) {
    let p0 = pts[0];
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 1..pts.len() - 1 {
        let ax = pts[k][0] - p0[0];
        let ay = pts[k][1] - p0[1];
        let bx = pts[k + 1][0] - p0[0];
        let by = pts[k + 1][1] - p0[1];
        let cross = ax * by - ay * bx;
        area2 += cross;
        cx += cross * (ax + bx);
        cy += cross * (ay + by);
    }
    let area = 0.5 * area2;
    if area2 == 0.0 {
        return (0.0, p0);
    }
    (
        area,
        [p0[0] + cx / (3.0 * area2), p0[1] + cy / (3.0 * area2)],
    )
}

fn is_convex(mesh: &PolygonalMesh, cell: &Cell) -> bool {
    let k = cell.vertices.len();
    for i in 0..k {
        let p = |idx: usize| {
            let v = &mesh.vertices[cell.vertices[idx % k] as usize];
            [v.x, v.y]
        };
        let (a, b, c) = (p(i), p(i + 1), p(i + 2));
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross <= 0.0 {
            return false;
        }
    }
    true
}

/// Checks every mesh invariant within tolerance and returns the findings.
/// An empty list means the mesh is sound.
pub fn validate_mesh(mesh: &PolygonalMesh) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for edge in &mesh.edges {
        let incident = edge.cells.iter().filter(|c| c.is_some()).count();
        if incident == 0 {
            out.push(Diagnostic {
                cell: None,
                edge: Some(edge.id),
                message: "dangling edge with no incident cell".into(),
            });
        }
        if edge.boundary != (incident == 1) {
            out.push(Diagnostic {
                cell: None,
                edge: Some(edge.id),
                message: "boundary flag inconsistent with incidence count".into(),
            });
        }
        let nrm = (edge.normal[0].powi(2) + edge.normal[1].powi(2)).sqrt();
        if (nrm - 1.0).abs() > 1e-12 {
            out.push(Diagnostic {
                cell: None,
                edge: Some(edge.id),
                message: format!("normal is not unit length (|n| = {nrm})"),
            });
        }
        let (a, b) = (
            &mesh.vertices[edge.vertices[0] as usize],
            &mesh.vertices[edge.vertices[1] as usize],
        );
        let len = (b.x - a.x).hypot(b.y - a.y);
        if (len - edge.length).abs() > 1e-12 * len.max(1.0) {
            out.push(Diagnostic {
                cell: None,
                edge: Some(edge.id),
                message: "stored length disagrees with endpoints".into(),
            });
        }
        let mid_err = (edge.midpoint[0] - 0.5 * (a.x + b.x))
            .abs()
            .max((edge.midpoint[1] - 0.5 * (a.y + b.y)).abs());
        if mid_err > 1e-12 * len.max(1.0) {
            out.push(Diagnostic {
                cell: None,
                edge: Some(edge.id),
                message: "stored midpoint disagrees with endpoints".into(),
            });
        }
    }
    for cell in &mesh.cells {
        if cell.area <= 0.0 {
            out.push(Diagnostic {
                cell: Some(cell.id),
                edge: None,
                message: "non-positive area".into(),
            });
        }
        let mut sum = [0.0f64, 0.0f64];
        for &ce in &cell.edges {
            let e = &mesh.edges[ce.edge as usize];
            let n = mesh.outward_normal(ce);
            sum[0] += e.length * n[0];
            sum[1] += e.length * n[1];
        }
        let closure = sum[0].hypot(sum[1]);
        if closure > 1e-12 * cell.diameter_h {
            out.push(Diagnostic {
                cell: Some(cell.id),
                edge: None,
                message: format!("closure violated: |sum of len*normal| = {closure:.3e}"),
            });
        }
    }
    if let Some(grid) = &mesh.grid {
        let total = mesh.total_area();
        let expect = grid.rect.area();
        if (total - expect).abs() > 1e-12 * expect {
            out.push(Diagnostic {
                cell: None,
                edge: None,
                message: format!("cell areas sum to {total}, domain area is {expect}"),
            });
        }
    }
    out
}
