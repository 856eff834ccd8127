use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Result};
use crate::real::Real;

/// Dense row-major matrix. Rows are batch samples throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        ensure_dim("matrix data length", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            ensure_dim("matrix row width", cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Concatenates columns of `self` and `other` row by row.
    pub fn hcat(&self, other: &Self) -> Result<Self> {
        ensure_dim("hcat rows", self.rows, other.rows)?;
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self { rows: self.rows, cols, data })
    }

    /// Stacks `other` below `self`.
    pub fn vcat(&self, other: &Self) -> Result<Self> {
        ensure_dim("vcat cols", self.cols, other.cols)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols);
        let mut data = Vec::with_capacity(self.rows * (end - start));
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        Self { rows: self.rows, cols: end - start, data }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }

    /// Each row repeated `times` consecutively.
    pub fn repeat_rows(&self, times: usize) -> Self {
        let mut data = Vec::with_capacity(self.data.len() * times);
        for i in 0..self.rows {
            for _ in 0..times {
                data.extend_from_slice(self.row(i));
            }
        }
        Self { rows: self.rows * times, cols: self.cols, data }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| U::of(x.f64())).collect() }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        ensure_dim("matmul inner", self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        gemm(
            self.rows,
            self.cols,
            other.cols,
            T::one(),
            (&self.data, self.cols as isize, 1),
            (&other.data, other.cols as isize, 1),
            T::zero(),
            (&mut out.data, other.cols as isize, 1),
        );
        Ok(out)
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        ensure_dim("t_matmul inner", self.rows, other.rows)?;
        let mut out = Self::zeros(self.cols, other.cols);
        gemm(
            self.cols,
            self.rows,
            other.cols,
            T::one(),
            (&self.data, 1, self.cols as isize),
            (&other.data, other.cols as isize, 1),
            T::zero(),
            (&mut out.data, other.cols as isize, 1),
        );
        Ok(out)
    }

    /// `self * other^T`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        ensure_dim("matmul_t inner", self.cols, other.cols)?;
        let mut out = Self::zeros(self.rows, other.rows);
        gemm(
            self.rows,
            self.cols,
            other.rows,
            T::one(),
            (&self.data, self.cols as isize, 1),
            (&other.data, 1, other.cols as isize),
            T::zero(),
            (&mut out.data, other.rows as isize, 1),
        );
        Ok(out)
    }
}

/// Bounds-checked wrapper over the strided gemm kernel.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: (&[T], isize, isize),
    b: (&[T], isize, isize),
    beta: T,
    c: (&mut [T], isize, isize),
) {
    fn extent(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
        if rows == 0 || cols == 0 {
            return 0;
        }
        (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
    }
    assert!(a.1 >= 0 && a.2 >= 0 && b.1 >= 0 && b.2 >= 0 && c.1 >= 0 && c.2 >= 0);
    assert!(extent(m, k, a.1, a.2) <= a.0.len());
    assert!(extent(k, n, b.1, b.2) <= b.0.len());
    assert!(extent(m, n, c.1, c.2) <= c.0.len());
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every strided index touched by the kernel is below the extents checked above.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            beta,
            c.0.as_mut_ptr(),
            c.1,
            c.2,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum())
    }

    fn transpose(a: &Matrix<f64>) -> Matrix<f64> {
        Matrix::from_fn(a.cols(), a.rows(), |i, j| a.get(j, i))
    }

    #[test]
    fn products_match_naive_loops() {
        let a = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.5 - 2.0);
        let b = Matrix::from_fn(4, 2, |i, j| (i as f64 - j as f64) * 0.25);
        let c = Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        assert_eq!(a.matmul(&b).unwrap(), naive(&a, &b));
        assert_eq!(a.t_matmul(&c).unwrap(), naive(&transpose(&a), &c));
        assert_eq!(a.matmul_t(&transpose(&b)).unwrap(), naive(&a, &b));
    }

    #[test]
    fn shape_errors_are_reported() {
        let a = Matrix::<f64>::zeros(2, 3);
        assert!(a.matmul(&a).is_err());
        assert!(Matrix::<f64>::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn row_helpers() {
        let a = Matrix::from_fn(2, 2, |i, j| (i * 2 + j) as f64);
        let r = a.repeat_rows(2);
        assert_eq!(r.rows(), 4);
        assert_eq!(r.row(1), a.row(0));
        assert_eq!(r.row(2), a.row(1));
        let h = a.hcat(&a.columns(1, 2)).unwrap();
        assert_eq!(h.row(1), &[2.0, 3.0, 3.0]);
    }
}
