//! Minimal compressed-row sparse matrices used for assembly and constraints.
//!
//! Factorization is delegated to `faer`; this type only needs cheap
//! construction, products and export.

use std::io::Write;
use std::ops::{AddAssign, Mul};

use num_complex::Complex64;
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Zero + AddAssign> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from per-row entry lists. Duplicate columns within a row are
    /// summed; columns end up sorted.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < ncols, "column {c} out of range {ncols}");
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self::from_rows(ncols, rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => T::zero(),
        }
    }

    pub fn map<U: Copy + Zero + AddAssign>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `y = A x`
    pub fn mul_vec<V>(&self, x: &[V]) -> Vec<V>
    where
        V: Copy + Zero + AddAssign + Mul<T, Output = V>,
    {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let mut acc = V::zero();
                for (c, v) in self.row(r) {
                    acc += x[c] * v;
                }
                acc
            })
            .collect()
    }

    /// `y = A^T x` (plain transpose, no conjugation)
    pub fn mul_transpose_vec<V>(&self, x: &[V]) -> Vec<V>
    where
        V: Copy + Zero + AddAssign + Mul<T, Output = V>,
    {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![V::zero(); self.ncols];
        for r in 0..self.nrows {
            let xr = x[r];
            for (c, v) in self.row(r) {
                y[c] += xr * v;
            }
        }
        y
    }

    /// Stacks `self` on top of `other` (same column count).
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.ncols);
        let mut row_ptr = self.row_ptr.clone();
        let offset = self.col_idx.len();
        row_ptr.extend(other.row_ptr[1..].iter().map(|p| p + offset));
        let mut col_idx = self.col_idx.clone();
        col_idx.extend_from_slice(&other.col_idx);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self {
            nrows: self.nrows + other.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl CsrMatrix<Complex64> {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `alpha * self + beta * other` on the union of sparsity patterns.
    pub fn axpby(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let rows = (0..self.nrows)
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (c, v * alpha))
                    .chain(other.row(r).map(|(c, v)| (c, v * beta)))
                    .collect()
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }
}

/// Writes `row col value` lines (0-based indices), one entry per line.
pub fn write_coordinate<T: Copy + Zero + AddAssign, W: Write>(
    m: &CsrMatrix<T>,
    out: &mut W,
    fmt: impl Fn(T) -> String,
) -> std::io::Result<()> {
    writeln!(out, "% {} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (r, c, v) in m.triplets() {
        writeln!(out, "{r} {c} {}", fmt(v))?;
    }
    Ok(())
}

pub fn fmt_real(v: f64) -> String {
    format!("{v:e}")
}

pub fn fmt_complex(v: Complex64) -> String {
    format!("{:e} {:e}", v.re, v.im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn transpose_product_matches_dense() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let x = [Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0)];
        let y = m.mul_transpose_vec(&x);
        assert_eq!(y[0], Complex64::new(1.0, 1.0));
        assert_eq!(y[1], Complex64::new(0.0, 6.0));
        assert_eq!(y[2], Complex64::new(2.0, 2.0));
    }

    #[test]
    fn vstack_keeps_rows() {
        let a = CsrMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]);
        let b = CsrMatrix::from_triplets(2, 2, &[(1, 1, 5.0)]);
        let s = a.vstack(&b);
        assert_eq!(s.nrows(), 3);
        assert_eq!(s.get(2, 1), 5.0);
        assert_eq!(s.get(0, 0), 1.0);
    }
}
