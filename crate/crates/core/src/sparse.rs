//! Compressed sparse row matrices.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_dim, Result};

/// Row-compressed sparse matrix with `u32` column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::from_rows(n, n, values.iter().enumerate().map(|(i, &v)| vec![(i as u32, v)]).collect());
        m.prune();
        m
    }

    /// Builds a matrix from per-row entry lists. Duplicate columns within a row are summed.
    pub fn from_rows(nrows: usize, ncols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (c, v) in row {
                debug_assert!((c as usize) < ncols, "column {c} out of range {ncols}");
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            rows[r].push((c as u32, v));
        }
        let mut m = Self::from_rows(nrows, ncols, rows);
        m.prune();
        m
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

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&(j as u32)).map_or(0.0, |k| vals[k])
    }

    /// Drops stored zeros.
    pub fn prune(&mut self) {
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut w = 0;
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.values[k] != 0.0 {
                    self.indices[w] = self.indices[k];
                    self.values[w] = self.values[k];
                    w += 1;
                }
            }
            indptr.push(w);
        }
        self.indices.truncate(w);
        self.values.truncate(w);
        self.indptr = indptr;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: vector length does not match columns");
        assert_eq!(y.len(), self.nrows);
        y.par_iter_mut().with_min_len(256).enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, v)| v * x[c as usize]).sum();
        });
    }

    pub fn try_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ncols, x.len())?;
        Ok(self.matvec(x))
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, rhs.nrows, "matmul: inner dimensions differ");
        let rows: Vec<Vec<(u32, f64)>> = (0..self.nrows)
            .into_par_iter()
            .with_min_len(64)
            .map(|i| {
                let (cols, vals) = self.row(i);
                let mut acc: Vec<(u32, f64)> = Vec::new();
                for (&k, &a) in cols.iter().zip(vals) {
                    let (rc, rv) = rhs.row(k as usize);
                    acc.extend(rc.iter().zip(rv).map(|(&c, &b)| (c, a * b)));
                }
                acc.sort_unstable_by_key(|e| e.0);
                let mut out: Vec<(u32, f64)> = Vec::with_capacity(acc.len());
                for (c, v) in acc {
                    match out.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => out.push((c, v)),
                    }
                }
                out.retain(|e| e.1 != 0.0);
                out
            })
            .collect();
        CsrMatrix::from_rows(self.nrows, rhs.ncols, rows)
    }

    /// `self + alpha * rhs`.
    pub fn add_scaled(&self, rhs: &CsrMatrix, alpha: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let rows = (0..self.nrows)
            .map(|i| {
                let (ac, av) = self.row(i);
                let (bc, bv) = rhs.row(i);
                let mut r: Vec<(u32, f64)> = ac.iter().copied().zip(av.iter().copied()).collect();
                r.extend(bc.iter().zip(bv).map(|(&c, &v)| (c, alpha * v)));
                r
            })
            .collect();
        let mut m = CsrMatrix::from_rows(self.nrows, self.ncols, rows);
        m.prune();
        m
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> CsrMatrix {
        assert_eq!(d.len(), self.nrows);
        let mut m = self.clone();
        for i in 0..self.nrows {
            for k in m.indptr[i]..m.indptr[i + 1] {
                m.values[k] *= d[i];
            }
        }
        m.prune();
        m
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> CsrMatrix {
        assert_eq!(d.len(), self.ncols);
        let mut m = self.clone();
        for k in 0..m.values.len() {
            m.values[k] *= d[m.indices[k] as usize];
        }
        m.prune();
        m
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m.prune();
        m
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                rows[j as usize].push((i as u32, x));
            }
        }
        CsrMatrix::from_rows(self.ncols, self.nrows, rows)
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                d[(i, j as usize)] += x;
            }
        }
        d
    }
}
