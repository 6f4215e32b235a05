//! File emitters: convergence tables as CSV (3-significant-digit main file
//! plus a full-precision companion), velocity/pressure fields as legacy ASCII
//! VTK polygons, and raw edge-midpoint traces as CSV. All formatting is fixed,
//! so re-running a configuration reproduces every output byte for byte.

use crate::analysis::{ConvergenceTable, ErrorReport};
use crate::mesh::PolygonalMesh;
use crate::solver::Solution;
use std::fmt::Write as _;

/// `2.35e-02`-style scientific notation with three significant digits.
pub fn format_sci(x: f64) -> String {
    if x == 0.0 {
        return "0.00e+00".to_string();
    }
    let s = format!("{:.2e}", x);
    // Rust prints `2.35e-2`; pad the exponent to two digits.
    match s.split_once('e') {
        Some((mant, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mant}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

fn order_str(o: Option<f64>) -> String {
    match o {
        Some(o) => format!("{o:.2}"),
        None => "0.00".to_string(),
    }
}

const TABLE_HEADER: &str =
    "n,u_l2,u_l2_order,u_h1,u_h1_order,v_l2,v_l2_order,v_h1,v_h1_order,p_l2,p_l2_order\n";

/// Main convergence CSV mirroring the five reference-table error columns with
/// their observed orders.
pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from(TABLE_HEADER);
    let orders: Vec<Vec<Option<f64>>> = [
        |r: &ErrorReport| r.l2_u,
        |r: &ErrorReport| r.h1_u,
        |r: &ErrorReport| r.l2_v,
        |r: &ErrorReport| r.h1_v,
        |r: &ErrorReport| r.l2_p,
    ]
    .iter()
    .map(|f| table.orders(f))
    .collect();
    for (k, (n, r)) in table.rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            n,
            format_sci(r.l2_u),
            order_str(orders[0][k]),
            format_sci(r.h1_u),
            order_str(orders[1][k]),
            format_sci(r.l2_v),
            order_str(orders[2][k]),
            format_sci(r.h1_v),
            order_str(orders[3][k]),
            format_sci(r.l2_p),
            order_str(orders[4][k]),
        );
    }
    out
}

/// Full-precision companion with every measured quantity.
pub fn convergence_csv_full(table: &ConvergenceTable) -> String {
    let mut out = String::from("n,u_l2,u_h1,v_l2,v_h1,p_l2,s_l2,tribar,div_max\n");
    for (n, r) in &table.rows {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            n, r.l2_u, r.h1_u, r.l2_v, r.h1_v, r.l2_p, r.l2_s, r.tribar, r.div_max
        );
    }
    out
}

/// Errors measured on general polygonal meshes, where only the mesh-free
/// norms apply.
pub fn polygonal_csv(rows: &[(usize, f64, f64, f64)]) -> String {
    let mut out = String::from("n,tribar,tribar_order,s_l2,s_l2_order,div_max\n");
    for (k, (n, tribar, l2_s, div)) in rows.iter().enumerate() {
        let order = |prev: f64, cur: f64, prev_n: usize| {
            if *n == 2 * prev_n {
                format!("{:.2}", (prev / cur).log2())
            } else {
                "0.00".to_string()
            }
        };
        let (to, so) = if k == 0 {
            ("0.00".to_string(), "0.00".to_string())
        } else {
            let (pn, pt, ps, _) = rows[k - 1];
            (order(pt, *tribar, pn), order(ps, *l2_s, pn))
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            n,
            format_sci(*tribar),
            to,
            format_sci(*l2_s),
            so,
            format_sci(*div)
        );
    }
    out
}

/// Legacy ASCII VTK unstructured grid: cells as polygons, pressure and
/// cell-centered velocity (one vector per cell) as cell data.
pub fn vtk_fields(mesh: &PolygonalMesh, solution: &Solution, cell_velocity: &[[f64; 2]]) -> String {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("stokes fields\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.9e} {:.9e} 0", v.x, v.y);
    }
    let total: usize = mesh.cells.iter().map(|c| c.vertices.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {}", mesh.cells.len(), total);
    for c in &mesh.cells {
        let mut line = format!("{}", c.vertices.len());
        for v in &c.vertices {
            let _ = write!(line, " {v}");
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.cells.len());
    for _ in &mesh.cells {
        out.push_str("7\n"); // VTK_POLYGON
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.cells.len());
    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for p in &solution.p {
        let _ = writeln!(out, "{:.9e}", p);
    }
    out.push_str("VECTORS velocity double\n");
    for vel in cell_velocity {
        let _ = writeln!(out, "{:.9e} {:.9e} 0", vel[0], vel[1]);
    }
    out
}

/// Raw edge-midpoint traces: one `x,y,u,v` line per edge.
pub fn trace_csv(mesh: &PolygonalMesh, solution: &Solution) -> String {
    let mut out = String::from("x,y,u,v\n");
    for e in &mesh.edges {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            e.midpoint[0], e.midpoint[1], solution.u[e.id as usize], solution.v[e.id as usize]
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_format_matches_reference_style() {
        assert_eq!(format_sci(2.35e-2), "2.35e-02");
        assert_eq!(format_sci(1.39), "1.39e+00");
        assert_eq!(format_sci(4.01e-4), "4.01e-04");
        assert_eq!(format_sci(0.0), "0.00e+00");
        assert_eq!(format_sci(1.48e-1), "1.48e-01");
    }

    #[test]
    fn vtk_has_expected_structure() {
        let mesh = crate::mesh::build_uniform_rect_mesh(2, crate::mesh::Rect::unit()).unwrap();
        let sol = Solution {
            u: vec![0.0; mesh.edges.len()],
            v: vec![0.0; mesh.edges.len()],
            p: vec![1.0, 2.0, 3.0, 4.0],
        };
        let vel = vec![[0.5, -0.5]; 4];
        let text = vtk_fields(&mesh, &sol, &vel);
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 4 20"));
        assert!(text.contains("SCALARS pressure double 1"));
        assert!(text.contains("VECTORS velocity double"));
    }
}
