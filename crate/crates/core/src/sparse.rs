//! Compressed-column sparse matrices.
//!
//! Assembly goes through [`CscMatrix::from_triplets`], which rejects duplicate
//! `(row, col)` pairs instead of summing them: every operator in this crate is
//! built from structurally unique entries, so a duplicate means the caller
//! enumerated a simplex twice.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Assemble from `(row, col, value)` triplets. Row indices inside each
    /// column come out sorted.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, _) in &triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::Internal(format!(
                    "triplet ({r}, {c}) out of bounds for {nrows}x{ncols} matrix"
                )));
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (c, r));
        if let Some(w) = triplets
            .windows(2)
            .find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
        {
            return Err(Error::Internal(format!(
                "duplicate triplet at ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        for &(_, c, _) in &triplets {
            col_ptr[c + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let row_idx = triplets.iter().map(|t| t.0).collect();
        let values = triplets.iter().map(|t| t.2).collect();
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
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

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.col(j);
        match rows.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            let (rows, vals) = self.col(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * xj;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = Aᵀ x`
    pub fn tr_mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (j, out) in y.iter_mut().enumerate() {
            let (rows, vals) = self.col(j);
            *out = rows.iter().zip(vals).map(|(&i, &v)| v * x[i]).sum();
        }
    }

    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tr_mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut col_ptr = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            col_ptr[i + 1] += 1;
        }
        for i in 0..self.nrows {
            col_ptr[i + 1] += col_ptr[i];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let slot = next[i];
                row_idx[slot] = j;
                values[slot] = v;
                next[i] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Sparse product `A B` (Gustavson's column-by-column scheme).
    pub fn matmul(&self, other: &CscMatrix) -> CscMatrix {
        assert_eq!(self.ncols, other.nrows, "inner dimensions differ");
        let mut acc = vec![0.0; self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut pattern: Vec<usize> = Vec::new();
        let mut col_ptr = Vec::with_capacity(other.ncols + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..other.ncols {
            pattern.clear();
            let (brows, bvals) = other.col(j);
            for (&k, &bkj) in brows.iter().zip(bvals) {
                let (arows, avals) = self.col(k);
                for (&i, &aik) in arows.iter().zip(avals) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        pattern.push(i);
                    }
                    acc[i] += aik * bkj;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                row_idx.push(i);
                values.push(acc[i]);
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// `diag(d) A`
    pub fn scale_rows(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.nrows);
        for (i, v) in self.row_idx.iter().zip(self.values.iter_mut()) {
            *v *= d[*i];
        }
    }

    /// `A diag(d)`
    pub fn scale_cols(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.ncols);
        for (j, &dj) in d.iter().enumerate() {
            let range = self.col_ptr[j]..self.col_ptr[j + 1];
            self.values[range].iter_mut().for_each(|v| *v *= dj);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `alpha A + beta B` on the union pattern.
    pub fn lincomb(&self, alpha: f64, other: &CscMatrix, beta: f64) -> CscMatrix {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut col_ptr = Vec::with_capacity(self.ncols + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for j in 0..self.ncols {
            let (ar, av) = self.col(j);
            let (br, bv) = other.col(j);
            let (mut p, mut q) = (0, 0);
            while p < ar.len() || q < br.len() {
                let take_a = q >= br.len() || (p < ar.len() && ar[p] < br[q]);
                let take_b = p >= ar.len() || (q < br.len() && br[q] < ar[p]);
                if take_a {
                    row_idx.push(ar[p]);
                    values.push(alpha * av[p]);
                    p += 1;
                } else if take_b {
                    row_idx.push(br[q]);
                    values.push(beta * bv[q]);
                    q += 1;
                } else {
                    row_idx.push(ar[p]);
                    values.push(alpha * av[p] + beta * bv[q]);
                    p += 1;
                    q += 1;
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> CscMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.abs());
        out
    }

    /// `(A + Aᵀ) / 2`
    pub fn symmetrized(&self) -> CscMatrix {
        self.lincomb(0.5, &self.transpose(), 0.5)
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let diff = self.lincomb(1.0, &self.transpose(), -1.0);
        diff.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diag(&self) -> Vec<f64> {
        let n = self.nrows.min(self.ncols);
        (0..n).map(|i| self.get(i, i)).collect()
    }

    /// Row sums `A 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.ncols])
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn to_faer(&self) -> Result<faer::sparse::SparseColMat<usize, f64>> {
        let triplets: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| faer::sparse::Triplet::new(i, j, v))
            .collect();
        faer::sparse::SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .map_err(|e| Error::Internal(format!("sparse conversion failed: {e:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CscMatrix {
        // [1 0 2]
        // [0 3 0]
        CscMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (1, 1, 3.0), (0, 2, 2.0)]).unwrap()
    }

    #[test]
    fn duplicate_triplets_are_rejected() {
        let err = CscMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]);
        assert!(matches!(err, Err(Error::Internal(_))));
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        assert!(CscMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matvec_and_transpose() {
        let a = small();
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        assert_eq!(a.tr_mul_vec(&[1.0, 2.0]), vec![1.0, 6.0, 2.0]);
        let at = a.transpose();
        assert_eq!(at.nrows(), 3);
        assert_eq!(at.get(2, 0), 2.0);
        assert_eq!(at.mul_vec(&[1.0, 2.0]), a.tr_mul_vec(&[1.0, 2.0]));
    }

    #[test]
    fn matmul_matches_dense() {
        let a = small();
        let ata = a.transpose().matmul(&a);
        let dense = a.to_dense();
        let expect = dense.transpose() * &dense;
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(ata.get(i, j), expect[(i, j)]);
            }
        }
    }

    #[test]
    fn lincomb_and_symmetry() {
        let m = CscMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 3.0)]).unwrap();
        let s = m.symmetrized();
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.max_asymmetry(), 0.0);
        assert_eq!(m.max_asymmetry(), 2.0);
        let d = m.lincomb(1.0, &CscMatrix::identity(2), 2.0);
        assert_eq!(d.diag(), vec![2.0, 2.0]);
    }
}
