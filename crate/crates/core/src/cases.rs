//! Built-in test problems: two manufactured smooth solutions with hand-derived
//! forcing terms, a linear patch field, and the lid-driven cavity boundary
//! data. The forcing derivations `f = -Δu + ∇p` are cross-checked against
//! central differences in the test suite before anything downstream trusts
//! them.

use crate::assembly::BoundaryData;
use crate::mesh::{PolygonalMesh, Rect};

/// A Stokes problem with known exact solution on a rectangular domain.
#[derive(Clone, Copy)]
pub struct StokesCase {
    pub name: &'static str,
    pub domain: Rect,
    pub u: fn(f64, f64) -> f64,
    pub v: fn(f64, f64) -> f64,
    pub p: fn(f64, f64) -> f64,
    pub grad_u: fn(f64, f64) -> [f64; 2],
    pub grad_v: fn(f64, f64) -> [f64; 2],
    pub f1: fn(f64, f64) -> f64,
    pub f2: fn(f64, f64) -> f64,
}

impl StokesCase {
    /// Dirichlet data sampled from the exact velocity at boundary midpoints.
    pub fn boundary_data(&self, mesh: &PolygonalMesh) -> BoundaryData {
        let (u, v) = (self.u, self.v);
        BoundaryData::from_fn(mesh, |x, y| [u(x, y), v(x, y)])
    }
}

// --- trigonometric solution on (0, pi)^2 ---------------------------------

fn c1_u(x: f64, y: f64) -> f64 {
    x.sin().powi(2) * y.cos() * y.sin()
}

fn c1_v(x: f64, y: f64) -> f64 {
    -x.cos() * x.sin() * y.sin().powi(2)
}

fn c1_p(x: f64, y: f64) -> f64 {
    x.cos() * y.cos()
}

fn c1_grad_u(x: f64, y: f64) -> [f64; 2] {
    [
        0.5 * (2.0 * x).sin() * (2.0 * y).sin(),
        x.sin().powi(2) * (2.0 * y).cos(),
    ]
}

fn c1_grad_v(x: f64, y: f64) -> [f64; 2] {
    [
        -(2.0 * x).cos() * y.sin().powi(2),
        -0.5 * (2.0 * x).sin() * (2.0 * y).sin(),
    ]
}

fn c1_f1(x: f64, y: f64) -> f64 {
    // -Δu = -cos(2x) sin(2y) + 2 sin^2(x) sin(2y); p_x = -sin(x) cos(y).
    -(2.0 * x).cos() * (2.0 * y).sin() + 2.0 * x.sin().powi(2) * (2.0 * y).sin() - x.sin() * y.cos()
}

fn c1_f2(x: f64, y: f64) -> f64 {
    // -Δv = -2 sin(2x) sin^2(y) + sin(2x) cos(2y); p_y = -cos(x) sin(y).
    -2.0 * (2.0 * x).sin() * y.sin().powi(2) + (2.0 * x).sin() * (2.0 * y).cos() - x.cos() * y.sin()
}

/// Trigonometric divergence-free flow on `(0, pi)^2` with `p = cos x cos y`.
pub fn case1() -> StokesCase {
    let pi = std::f64::consts::PI;
    StokesCase {
        name: "case1",
        domain: Rect::new(0.0, 0.0, pi, pi),
        u: c1_u,
        v: c1_v,
        p: c1_p,
        grad_u: c1_grad_u,
        grad_v: c1_grad_v,
        f1: c1_f1,
        f2: c1_f2,
    }
}

// --- polynomial solution on the unit square --------------------------------

fn phi(t: f64) -> f64 {
    t * t * (t - 1.0) * (t - 1.0)
}

fn dphi(t: f64) -> f64 {
    2.0 * t * (t - 1.0) * (2.0 * t - 1.0)
}

fn ddphi(t: f64) -> f64 {
    12.0 * t * t - 12.0 * t + 2.0
}

fn dddphi(t: f64) -> f64 {
    24.0 * t - 12.0
}

fn c2_u(x: f64, y: f64) -> f64 {
    -128.0 * phi(x) * dphi(y)
}

fn c2_v(x: f64, y: f64) -> f64 {
    128.0 * dphi(x) * phi(y)
}

fn c2_p(x: f64, y: f64) -> f64 {
    150.0 * (x - 0.5) * (y - 0.5)
}

fn c2_grad_u(x: f64, y: f64) -> [f64; 2] {
    [-128.0 * dphi(x) * dphi(y), -128.0 * phi(x) * ddphi(y)]
}

fn c2_grad_v(x: f64, y: f64) -> [f64; 2] {
    [128.0 * ddphi(x) * phi(y), 128.0 * dphi(x) * dphi(y)]
}

fn c2_f1(x: f64, y: f64) -> f64 {
    128.0 * (ddphi(x) * dphi(y) + phi(x) * dddphi(y)) + 150.0 * (y - 0.5)
}

fn c2_f2(x: f64, y: f64) -> f64 {
    -128.0 * (dddphi(x) * phi(y) + dphi(x) * ddphi(y)) + 150.0 * (x - 0.5)
}

/// Quartic stream-function flow on the unit square (velocity
/// `(-128 φ(x) φ'(y), 128 φ'(x) φ(y))` with `φ(t) = t²(t-1)²`) and linear
/// saddle pressure `150 (x - 1/2)(y - 1/2)`.
pub fn case2() -> StokesCase {
    StokesCase {
        name: "case2",
        domain: Rect::unit(),
        u: c2_u,
        v: c2_v,
        p: c2_p,
        grad_u: c2_grad_u,
        grad_v: c2_grad_v,
        f1: c2_f1,
        f2: c2_f2,
    }
}

// --- linear patch field -----------------------------------------------------

fn patch_u(x: f64, y: f64) -> f64 {
    x + y
}

fn patch_v(x: f64, y: f64) -> f64 {
    x - y
}

fn zero2(_: f64, _: f64) -> f64 {
    0.0
}

fn patch_grad_u(_: f64, _: f64) -> [f64; 2] {
    [1.0, 1.0]
}

fn patch_grad_v(_: f64, _: f64) -> [f64; 2] {
    [1.0, -1.0]
}

/// Divergence-free linear velocity `(x + y, x - y)` with zero pressure and
/// zero forcing. The discretization reproduces it exactly, which makes it a
/// patch test for the whole pipeline.
pub fn patch() -> StokesCase {
    StokesCase {
        name: "patch",
        domain: Rect::unit(),
        u: patch_u,
        v: patch_v,
        p: zero2,
        grad_u: patch_grad_u,
        grad_v: patch_grad_v,
        f1: zero2,
        f2: zero2,
    }
}

/// Lid-driven cavity boundary data on a unit-square mesh: `u = (1, 0)` at the
/// midpoints of every horizontal boundary edge on `y = 1`, zero elsewhere.
/// Midpoint dofs mean there is no corner dof and hence no corner ambiguity.
pub fn cavity_bc(mesh: &PolygonalMesh) -> BoundaryData {
    let top = mesh
        .grid
        .map(|g| g.rect.y1 - 0.25 * g.hy)
        .unwrap_or(1.0 - 1e-9);
    BoundaryData::from_fn(
        mesh,
        move |_, y| {
            if y > top {
                [1.0, 0.0]
            } else {
                [0.0, 0.0]
            }
        },
    )
}
