//! Minimal CSR sparse matrix with deterministic assembly.
//!
//! Triplets carry a provenance tag (the contributing cell id) so duplicate
//! entries are summed in a canonical order, independent of the order cells
//! were visited in. Assembling the same mesh with a permuted cell list
//! therefore reproduces the matrix bit for bit.

#[derive(Clone, Debug)]
pub struct Triplet {
    pub row: u32,
    pub col: u32,
    /// Provenance tag used only to order duplicate contributions.
    pub tag: u32,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix by sorting triplets by `(row, col, tag)` and summing
    /// duplicates in that order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<Triplet>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.row, a.col, a.tag).cmp(&(b.row, b.col, b.tag)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for t in &triplets {
            debug_assert!((t.row as usize) < nrows && (t.col as usize) < ncols);
            if last == Some((t.row, t.col)) {
                *values.last_mut().unwrap() += t.value;
            } else {
                col_idx.push(t.col);
                values.push(t.value);
                row_ptr[t.row as usize + 1] += 1;
                last = Some((t.row, t.col));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x` with fixed summation order (row-major, ascending columns).
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            y[r] = acc;
        }
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`; 0 for exactly symmetric
    /// matrices.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c as usize, r)).abs());
            }
        }
        worst
    }

    /// Largest entrywise difference with `other`, taken over the union of the
    /// two sparsity patterns (a missing entry counts as zero).
    pub fn max_entry_difference(&self, other: &CsrMatrix) -> f64 {
        assert_eq!(self.nrows, other.nrows, "dimension mismatch");
        assert_eq!(self.ncols, other.ncols, "dimension mismatch");
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let (ca, va) = self.row(r);
            let (cb, vb) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ca.len() || j < cb.len() {
                let diff = match (ca.get(i), cb.get(j)) {
                    (Some(&c1), Some(&c2)) if c1 == c2 => {
                        let d = va[i] - vb[j];
                        i += 1;
                        j += 1;
                        d
                    }
                    (Some(&c1), Some(&c2)) if c1 < c2 => {
                        let d = va[i];
                        i += 1;
                        d
                    }
                    (Some(_), Some(_)) => {
                        let d = vb[j];
                        j += 1;
                        d
                    }
                    (Some(_), None) => {
                        let d = va[i];
                        i += 1;
                        d
                    }
                    (None, Some(_)) => {
                        let d = vb[j];
                        j += 1;
                        d
                    }
                    (None, None) => unreachable!(),
                };
                worst = worst.max(diff.abs());
            }
        }
        worst
    }

    /// Matrix Market coordinate format, entries sorted by (row, col), 1-based.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        out.push_str(&format!("{} {} {}\n", self.nrows, self.ncols, self.nnz()));
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                out.push_str(&format!("{} {} {:.16e}\n", r + 1, c + 1, v));
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                m[(r, *c as usize)] = *v;
            }
        }
        m
    }
}
