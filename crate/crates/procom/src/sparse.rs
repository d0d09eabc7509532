//! Compressed sparse rows for the symmetric normalized adjacency.
//!
//! Tensors stay dense; the propagation operator iterates neighbor lists
//! instead of materializing an n×n matrix.

use crate::tensor::Real;

/// Symmetric sparse matrix in CSR form. Constructed symmetrically
/// (both triangles stored), so `S = Sᵀ` holds exactly.
#[derive(Debug, Clone)]
pub struct SparseSym<F> {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<F>,
}

impl<F: Real> SparseSym<F> {
    /// Build from per-row `(col, value)` lists; each row must be sorted by column.
    pub fn from_rows(rows: Vec<Vec<(u32, F)>>) -> Self {
        let n = rows.len();
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        offsets.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        SparseSym {
            n,
            offsets,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (u32, F)> + '_ {
        let lo = self.offsets[i];
        let hi = self.offsets[i + 1];
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    /// `out = S · h` where `h` is `n×d` row-major.
    pub fn spmm(&self, h: &[F], d: usize, out: &mut [F]) {
        debug_assert_eq!(h.len(), self.n * d);
        debug_assert_eq!(out.len(), self.n * d);
        for v in out.iter_mut() {
            *v = F::zero();
        }
        for i in 0..self.n {
            let orow = &mut out[i * d..(i + 1) * d];
            for idx in self.offsets[i]..self.offsets[i + 1] {
                let w = self.vals[idx];
                let hrow = &h[self.cols[idx] as usize * d..(self.cols[idx] as usize + 1) * d];
                for (o, &hv) in orow.iter_mut().zip(hrow.iter()) {
                    *o = *o + w * hv;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<F> {
        let mut dense = vec![F::zero(); self.n * self.n];
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                dense[i * self.n + c as usize] = v;
            }
        }
        dense
    }
}
