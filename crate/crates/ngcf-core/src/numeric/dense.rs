//! Row-major dense matrix with the handful of kernels the model needs.

use alloc::vec;
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use super::{Rng, Scalar};
use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: vec![T::zero(); n_rows * n_cols] }
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Shape {
                context: "from_vec",
                expected: (n_rows, n_cols),
                got: (data.len(), 1),
            });
        }
        Ok(Self { n_rows, n_cols, data })
    }

    /// Glorot-uniform initialization: i.i.d. on `[-a, a]` with
    /// `a = sqrt(6 / (n_rows + n_cols))`.
    pub fn xavier_init(n_rows: usize, n_cols: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (n_rows + n_cols) as f64).sqrt();
        let data = (0..n_rows * n_cols)
            .map(|_| T::from_f64(bound * (2.0 * rng.next_f64() - 1.0)))
            .collect();
        Self { n_rows, n_cols, data }
    }

    /// Inverted-dropout mask: entries are `0` with probability `p`, else
    /// `1/(1-p)`, so the mask has unit expectation and evaluation needs no
    /// rescaling.
    pub fn dropout_mask(n_rows: usize, n_cols: usize, p: f64, rng: &mut Rng) -> Self {
        debug_assert!((0.0..1.0).contains(&p));
        if p == 0.0 {
            return Self::from_elem(n_rows, n_cols, T::one());
        }
        let keep = T::from_f64(1.0 / (1.0 - p));
        let data = (0..n_rows * n_cols)
            .map(|_| if rng.next_f64() < p { T::zero() } else { keep })
            .collect();
        Self { n_rows, n_cols, data }
    }

    pub fn from_elem(n_rows: usize, n_cols: usize, value: T) -> Self {
        Self { n_rows, n_cols, data: vec![value; n_rows * n_cols] }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.n_cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    fn check_same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::Shape {
                context,
                expected: (self.n_rows, self.n_cols),
                got: (other.n_rows, other.n_cols),
            });
        }
        Ok(())
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::Shape {
                context: "matmul",
                expected: (self.n_cols, other.n_rows),
                got: (other.n_rows, other.n_cols),
            });
        }
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        let n = other.n_cols;
        for i in 0..self.n_rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for j in 0..n {
                    out_row[j] = out_row[j] + a * b_row[j];
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other`; both operands share their row count.
    pub fn matmul_transpose_left(&self, other: &Self) -> Result<Self> {
        if self.n_rows != other.n_rows {
            return Err(Error::Shape {
                context: "matmul_transpose_left",
                expected: (self.n_rows, self.n_cols),
                got: (other.n_rows, other.n_cols),
            });
        }
        let mut out = Self::zeros(self.n_cols, other.n_cols);
        let n = other.n_cols;
        for i in 0..self.n_rows {
            let b_row = &other.data[i * n..(i + 1) * n];
            for (r, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let out_row = &mut out.data[r * n..(r + 1) * n];
                for j in 0..n {
                    out_row[j] = out_row[j] + a * b_row[j];
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`; operands share their column count.
    pub fn matmul_transpose_right(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_cols {
            return Err(Error::Shape {
                context: "matmul_transpose_right",
                expected: (self.n_rows, self.n_cols),
                got: (other.n_rows, other.n_cols),
            });
        }
        let mut out = Self::zeros(self.n_rows, other.n_rows);
        for i in 0..self.n_rows {
            let a_row = self.row(i);
            for j in 0..other.n_rows {
                let b_row = other.row(j);
                let mut acc = T::zero();
                for k in 0..self.n_cols {
                    acc = acc + a_row[k] * b_row[k];
                }
                out.data[i * other.n_rows + j] = acc;
            }
        }
        Ok(out)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "hadamard")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).collect();
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, data })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "add")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, data })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    /// `self += scale * other`.
    pub fn add_scaled_assign(&mut self, other: &Self, scale: T) -> Result<()> {
        self.check_same_shape(other, "add_scaled_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + scale * b;
        }
        Ok(())
    }

    pub fn scale(&self, factor: T) -> Self {
        let data = self.data.iter().map(|&a| a * factor).collect();
        Self { n_rows: self.n_rows, n_cols: self.n_cols, data }
    }

    /// `x` for `x >= 0`, else `slope * x`.
    pub fn leaky_relu(&self, slope: T) -> Self {
        let data = self
            .data
            .iter()
            .map(|&x| if x >= T::zero() { x } else { slope * x })
            .collect();
        Self { n_rows: self.n_rows, n_cols: self.n_cols, data }
    }

    /// Derivative of the leaky rectifier; the subgradient at 0 is taken as 1.
    pub fn leaky_relu_grad(&self, slope: T) -> Self {
        let data = self
            .data
            .iter()
            .map(|&x| if x >= T::zero() { T::one() } else { slope })
            .collect();
        Self { n_rows: self.n_rows, n_cols: self.n_cols, data }
    }

    /// Column-wise concatenation of blocks sharing a row count.
    pub fn concat_cols(blocks: &[&Self]) -> Result<Self> {
        let n_rows = blocks.first().map(|b| b.n_rows).unwrap_or(0);
        let n_cols: usize = blocks.iter().map(|b| b.n_cols).sum();
        let mut out = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            let out_row = &mut out.data[i * n_cols..(i + 1) * n_cols];
            let mut offset = 0;
            for block in blocks {
                if block.n_rows != n_rows {
                    return Err(Error::Shape {
                        context: "concat_cols",
                        expected: (n_rows, block.n_cols),
                        got: (block.n_rows, block.n_cols),
                    });
                }
                out_row[offset..offset + block.n_cols].copy_from_slice(block.row(i));
                offset += block.n_cols;
            }
        }
        Ok(out)
    }

    /// Copy of columns `[start, start + width)`.
    pub fn col_block(&self, start: usize, width: usize) -> Self {
        debug_assert!(start + width <= self.n_cols);
        let mut out = Self::zeros(self.n_rows, width);
        for i in 0..self.n_rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[start..start + width]);
        }
        out
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|x| !x.is_finite())
    }

    /// Lossless-as-possible precision conversion.
    pub fn convert<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }
}
