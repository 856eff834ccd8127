use alloc::vec;
use alloc::vec::Vec;

use super::matrix::Matrix;
use crate::error::{ensure_dim, Error, Result};
use crate::real::Real;
use crate::snapshot::Snapshot;

/// Per-column z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer<T> {
    mean: Vec<T>,
    std: Vec<T>,
}

/// Columns with (near) zero spread keep unit scale.
const MIN_STD: f64 = 1e-6;

impl<T: Real> Normalizer<T> {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![T::zero(); dim], std: vec![T::one(); dim] }
    }

    pub fn fit(data: &Matrix<T>) -> Self {
        let (n, d) = (data.rows(), data.cols());
        if n == 0 {
            return Self::identity(d);
        }
        let nf = n as f64;
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v.f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v.f64() - m) * (v.f64() - m);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = T::of(v / nf).sqrt().f64();
                T::of(if s < MIN_STD { 1.0 } else { s })
            })
            .collect();
        Self { mean: mean.into_iter().map(T::of).collect(), std }
    }

    pub fn from_parts(mean: Vec<T>, std: Vec<T>) -> Result<Self> {
        ensure_dim("normalizer std", mean.len(), std.len())?;
        if std.iter().any(|s| !(*s > T::zero() && s.is_finite())) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("normalizer needs finite mean and positive std".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn std(&self) -> &[T] {
        &self.std
    }

    pub fn normalize(&self, x: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| (x.get(i, j) - self.mean[j]) / self.std[j])
    }

    pub fn denormalize(&self, z: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j) * self.std[j] + self.mean[j])
    }

    pub fn export(&self, prefix: &str, snap: &mut Snapshot<T>) {
        snap.push(alloc::format!("{prefix}.mean"), vec![self.dim()], self.mean.clone());
        snap.push(alloc::format!("{prefix}.std"), vec![self.dim()], self.std.clone());
    }

    pub fn import(prefix: &str, snap: &Snapshot<T>) -> Result<Self> {
        let mean = snap.tensor(&alloc::format!("{prefix}.mean"))?.data.clone();
        let std = snap.tensor(&alloc::format!("{prefix}.std"))?.data.clone();
        Self::from_parts(mean, std)
    }
}
