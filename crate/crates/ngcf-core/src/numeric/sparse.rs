//! Compressed sparse row matrix and the sparse-dense product the
//! propagation layers are built on.

use alloc::vec;
use alloc::vec::Vec;

use super::{DenseMatrix, Scalar};
use crate::error::{Error, Result};

/// CSR matrix: `offsets` has `n_rows + 1` entries, row `i` owns the slice
/// `offsets[i]..offsets[i+1]` of `cols`/`values`, and column indices are
/// strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn from_parts(
        n_rows: usize,
        n_cols: usize,
        offsets: Vec<usize>,
        cols: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        let m = Self { n_rows, n_cols, offsets, cols, values };
        m.validate()?;
        Ok(m)
    }

    /// Builds from `(row, col, value)` triplets; duplicate coordinates are
    /// rejected rather than summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, T)>,
    ) -> Result<Self> {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut offsets = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for window in triplets.windows(2) {
            if window[0].0 == window[1].0 && window[0].1 == window[1].1 {
                return Err(Error::Data(alloc::format!(
                    "duplicate sparse entry at ({}, {})",
                    window[0].0, window[0].1
                )));
            }
        }
        for (r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Data(alloc::format!(
                    "sparse entry ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            offsets[r + 1] += 1;
            cols.push(c);
            values.push(v);
        }
        for i in 0..n_rows {
            offsets[i + 1] += offsets[i];
        }
        Self::from_parts(n_rows, n_cols, offsets, cols, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            offsets: (0..=n).collect(),
            cols: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Checks the structural invariants; every constructor goes through this.
    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() != self.n_rows + 1
            || self.offsets.first() != Some(&0)
            || self.offsets.last() != Some(&self.cols.len())
            || self.cols.len() != self.values.len()
        {
            return Err(Error::Data("malformed CSR index arrays".into()));
        }
        for i in 0..self.n_rows {
            let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
            if lo > hi {
                return Err(Error::Data("CSR offsets not monotone".into()));
            }
            let row_cols = &self.cols[lo..hi];
            for w in row_cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Data("CSR columns not strictly increasing".into()));
                }
            }
            if row_cols.last().is_some_and(|&c| c >= self.n_cols) {
                return Err(Error::Data("CSR column index out of range".into()));
            }
        }
        if let Some(idx) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(alloc::format!("non-finite sparse value at nnz {idx}")));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let (lo, hi) = (self.offsets[row], self.offsets[row + 1]);
        match self.cols[lo..hi].binary_search(&col) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => T::zero(),
        }
    }

    /// Column indices and values of one row.
    pub fn row_entries(&self, row: usize) -> (&[usize], &[T]) {
        let (lo, hi) = (self.offsets[row], self.offsets[row + 1]);
        (&self.cols[lo..hi], &self.values[lo..hi])
    }

    /// Sparse-dense product `self * x`, accumulated row-major so the result
    /// is deterministic for a fixed sparsity pattern.
    pub fn spmm(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if self.n_cols != x.n_rows() {
            return Err(Error::Shape {
                context: "spmm",
                expected: (self.n_cols, 0),
                got: (x.n_rows(), x.n_cols()),
            });
        }
        let d = x.n_cols();
        let mut out = DenseMatrix::zeros(self.n_rows, d);
        for i in 0..self.n_rows {
            let (cols, values) = (
                &self.cols[self.offsets[i]..self.offsets[i + 1]],
                &self.values[self.offsets[i]..self.offsets[i + 1]],
            );
            let out_row = out.row_mut(i);
            for (&c, &v) in cols.iter().zip(values) {
                let x_row = x.row(c);
                for j in 0..d {
                    out_row[j] = out_row[j] + v * x_row[j];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut offsets = vec![0usize; self.n_cols + 1];
        for &c in &self.cols {
            offsets[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            offsets[i + 1] += offsets[i];
        }
        let mut cols = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        let mut cursor = offsets.clone();
        for r in 0..self.n_rows {
            for k in self.offsets[r]..self.offsets[r + 1] {
                let dst = cursor[self.cols[k]];
                cols[dst] = r;
                values[dst] = self.values[k];
                cursor[self.cols[k]] += 1;
            }
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, offsets, cols, values }
    }

    /// Adds the identity to a square matrix with an empty diagonal.
    pub fn add_identity(&self) -> Result<Self> {
        if self.n_rows != self.n_cols {
            return Err(Error::Shape {
                context: "add_identity",
                expected: (self.n_rows, self.n_rows),
                got: (self.n_rows, self.n_cols),
            });
        }
        let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(self.nnz() + self.n_rows);
        for r in 0..self.n_rows {
            let (cols, values) = self.row_entries(r);
            for (&c, &v) in cols.iter().zip(values) {
                triplets.push((r, c, v));
            }
            triplets.push((r, r, T::one()));
        }
        Self::from_triplets(self.n_rows, self.n_cols, triplets)
    }

    /// Zeroes every entry whose row or column is masked out and scales the
    /// survivors; the shape is preserved. Entries on kept-row/kept-column
    /// positions keep their coordinates, so a symmetric input stays symmetric
    /// under a symmetric mask.
    pub fn masked_scaled(&self, keep: &[bool], scale: T) -> Result<Self> {
        if keep.len() != self.n_rows || keep.len() != self.n_cols {
            return Err(Error::Shape {
                context: "masked_scaled",
                expected: (self.n_rows, self.n_cols),
                got: (keep.len(), keep.len()),
            });
        }
        let mut offsets = Vec::with_capacity(self.n_rows + 1);
        offsets.push(0usize);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.n_rows {
            if keep[r] {
                let (row_cols, row_values) = self.row_entries(r);
                for (&c, &v) in row_cols.iter().zip(row_values) {
                    if keep[c] {
                        cols.push(c);
                        values.push(v * scale);
                    }
                }
            }
            offsets.push(cols.len());
        }
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, offsets, cols, values })
    }

    pub fn convert<U: Scalar>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            offsets: self.offsets.clone(),
            cols: self.cols.clone(),
            values: self.values.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, values) = self.row_entries(r);
            for (&c, &v) in cols.iter().zip(values) {
                out.set(r, c, v);
            }
        }
        out
    }
}
