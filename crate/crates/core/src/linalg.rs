//! Sparse binary matrices and the dense products the SVD needs.

use nalgebra::DMatrix;
use rayon::prelude::*;

/// A 0/1 matrix in compressed sparse row form, with its transpose kept
/// alongside so both `A·X` and `Aᵀ·X` run row-parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryCsr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    t_indptr: Vec<usize>,
    t_indices: Vec<usize>,
}

fn compress(rows: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let mut indptr = Vec::with_capacity(rows.len() + 1);
    let mut indices = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    indptr.push(0);
    for row in rows {
        indices.extend_from_slice(row);
        indptr.push(indices.len());
    }
    (indptr, indices)
}

impl BinaryCsr {
    /// Builds from the column indices of each row's nonzeros. Indices are
    /// sorted and deduplicated.
    ///
    /// # Panics
    /// If a column index is out of range.
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); ncols];
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            for &j in row.iter() {
                assert!(j < ncols, "column {j} out of range for {ncols} columns");
                cols[j].push(i);
            }
        }
        let (indptr, indices) = compress(&rows);
        let (t_indptr, t_indices) = compress(&cols);
        Self {
            nrows: rows.len(),
            ncols,
            indptr,
            indices,
            t_indptr,
            t_indices,
        }
    }

    /// Nonzero entries of a dense row-major matrix become ones.
    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let ncols = dense.first().map_or(0, Vec::len);
        let rows = dense
            .iter()
            .map(|r| (0..ncols).filter(|&j| r[j] != 0.0).collect())
            .collect();
        Self::from_rows(ncols, rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn col(&self, j: usize) -> &[usize] {
        &self.t_indices[self.t_indptr[j]..self.t_indptr[j + 1]]
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.nrows).map(|i| self.row(i).len()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.ncols).map(|j| self.col(j).len()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.nrows)
            .map(|i| {
                let mut r = vec![0.0; self.ncols];
                for &j in self.row(i) {
                    r[j] = 1.0;
                }
                r
            })
            .collect()
    }

    /// Squared Frobenius norm, which for a 0/1 matrix is the nonzero count.
    pub fn frobenius_sq(&self) -> f64 {
        self.nnz() as f64
    }

    /// `A · X`.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        gather(self.nrows, x, |i| self.row(i))
    }

    /// `Aᵀ · X`.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.nrows);
        gather(self.ncols, x, |j| self.col(j))
    }
}

/// Output row `i` is the sum of the rows of `x` listed by `pattern(i)`.
/// Every output entry is summed in index order regardless of thread count.
fn gather<'a, F>(out_rows: usize, x: &DMatrix<f64>, pattern: F) -> DMatrix<f64>
where
    F: Fn(usize) -> &'a [usize] + Sync,
{
    let width = x.ncols();
    // Row-major copy of x so the inner loop is contiguous.
    let xt: Vec<f64> = x.transpose().as_slice().to_vec();
    let mut out = vec![0.0; out_rows * width];
    out.par_chunks_mut(width.max(1))
        .enumerate()
        .for_each(|(i, dst)| {
            if width == 0 {
                return;
            }
            for &k in pattern(i) {
                let src = &xt[k * width..(k + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        });
    DMatrix::from_row_slice(out_rows, width, &out)
}
