use num_traits::{Float, Zero};

use std::ops::{Index, IndexMut, Range};

use crate::error::{Error, Result};
use crate::scalar::{Field, Real, C};

/// Dense column-major matrix over a real or complex [`Field`].
///
/// Snapshots are stored as columns, so `col(j)` is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Field> Matrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![E::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = E::one();
        }
        m
    }

    pub fn from_diag(values: &[E]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Wraps column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix storage",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from row-major values, which reads naturally in literals.
    pub fn from_rows(rows: usize, cols: usize, values: &[E]) -> Self {
        assert_eq!(values.len(), rows * cols, "row-major literal has wrong length");
        Self::from_fn(rows, cols, |i, j| values[i * cols + j])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<E>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    context: "column length",
                    expected: rows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[E] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [E] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<E> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[E]) {
        self.col_mut(j).copy_from_slice(values);
    }

    /// Copy of a contiguous column range.
    pub fn columns(&self, range: Range<usize>) -> Self {
        let cols = range.len();
        Self {
            rows: self.rows,
            cols,
            data: self.data[range.start * self.rows..range.end * self.rows].to_vec(),
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// Copy of a contiguous row range.
    pub fn row_block(&self, range: Range<usize>) -> Self {
        let rows = range.len();
        Self::from_fn(rows, self.cols, |i, j| self[(range.start + i, j)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn map<F: Field>(&self, f: impl Fn(E) -> F) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other.data[j * other.rows + k];
                if b == E::zero() {
                    continue;
                }
                let ac = &self.data[k * self.rows..(k + 1) * self.rows];
                for (o, &a) in oc.iter_mut().zip(ac) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᴴ * other` without forming the adjoint.
    pub fn adjoint_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "adjoint_matmul inner dimension");
        Self::from_fn(self.cols, other.cols, |i, j| dot_conj(self.col(i), other.col(j)))
    }

    pub fn matvec(&self, v: &[E]) -> Vec<E> {
        assert_eq!(self.cols, v.len(), "matvec dimension");
        let mut out = vec![E::zero(); self.rows];
        for (k, &vk) in v.iter().enumerate() {
            if vk == E::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.col(k)) {
                *o += a * vk;
            }
        }
        out
    }

    /// `selfᴴ v`.
    pub fn adjoint_matvec(&self, v: &[E]) -> Vec<E> {
        assert_eq!(self.rows, v.len(), "adjoint_matvec dimension");
        (0..self.cols).map(|j| dot_conj(self.col(j), v)).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "add shape");
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "sub shape");
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(E, E) -> E) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scaled(&self, s: E) -> Self {
        self.map(|x| x * s)
    }

    pub fn frobenius_norm(&self) -> E::Real {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> E::Real {
        self.data
            .iter()
            .map(|x| x.modulus())
            .fold(E::Real::zero(), |a, b| a.max(b))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.finite())
    }

    /// Horizontal concatenation; all blocks must share the row count.
    pub fn hcat(blocks: &[&Self]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        let mut data = Vec::new();
        let mut cols = 0;
        for b in blocks {
            if b.rows != rows {
                return Err(Error::DimensionMismatch {
                    context: "hcat rows",
                    expected: rows,
                    found: b.rows,
                });
            }
            data.extend_from_slice(&b.data);
            cols += b.cols;
        }
        Ok(Self { rows, cols, data })
    }

    /// Vertical concatenation; all blocks must share the column count.
    pub fn vcat(blocks: &[&Self]) -> Result<Self> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        for b in blocks {
            if b.cols != cols {
                return Err(Error::DimensionMismatch {
                    context: "vcat cols",
                    expected: cols,
                    found: b.cols,
                });
            }
        }
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for b in blocks {
                data.extend_from_slice(b.col(j));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl<T: Real> Matrix<T> {
    pub fn to_complex(&self) -> Matrix<C<T>> {
        self.map(|x| C::new(x, T::zero()))
    }

    /// Largest deviation of `selfᵀ self` from the identity.
    pub fn orthonormality_defect(&self) -> T {
        let g = self.adjoint_matmul(self);
        let mut worst = T::zero();
        for j in 0..g.cols {
            for i in 0..g.rows {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

impl<T: Real> Matrix<C<T>> {
    pub fn re(&self) -> Matrix<T> {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> Matrix<T> {
        self.map(|z| z.im)
    }
}

impl<E> Index<(usize, usize)> for Matrix<E> {
    type Output = E;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &E {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<E> IndexMut<(usize, usize)> for Matrix<E> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// `Σ conj(a_i) b_i`.
#[inline]
pub fn dot_conj<E: Field>(a: &[E], b: &[E]) -> E {
    a.iter().zip(b).fold(E::zero(), |acc, (&x, &y)| acc + x.conj() * y)
}

/// Euclidean norm, scaled to avoid overflow.
pub fn norm2<E: Field>(v: &[E]) -> E::Real {
    let scale = v
        .iter()
        .map(|x| x.modulus())
        .fold(E::Real::zero(), |a, b| a.max(b));
    if scale == E::Real::zero() || !scale.is_finite() {
        return scale;
    }
    let inv = scale.recip();
    let ss: E::Real = v.iter().map(|x| x.scale(inv).abs2()).sum();
    scale * ss.sqrt()
}
