//! Compressed sparse row matrices and a direct LU solver backed by `faer`.
//!
//! Discrete operators on a [`crate::DiscGrid`] are stored as `CsrMatrix` over the
//! grid's node list, so composite operators (for instance the gauge Jacobian
//! `Σᵢ Dᵢ(Dᵢ + Cᵢ)`) are formed by sparse products rather than re-derived stencils.

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros produced by cancellation are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.iter().copied().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
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

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            out.extend(self.row(r).map(|(c, v)| (r, c, v)));
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Applies the matrix to node-major data with `ncomp` interleaved components,
    /// i.e. to every component column at once.
    pub fn apply_strided(&self, x: &[f64], ncomp: usize) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols * ncomp);
        let mut out = vec![0.0; self.nrows * ncomp];
        for r in 0..self.nrows {
            let dst = &mut out[r * ncomp..(r + 1) * ncomp];
            for (c, v) in self.row(r) {
                let src = &x[c * ncomp..(c + 1) * ncomp];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let trip: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = self.triplets();
        trip.extend(other.triplets());
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                indices.push(c);
                values.push(acc[c]);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Kronecker product `self ⊗ I_k`: every node index expands to `k` consecutive
    /// component indices.
    pub fn kron_identity(&self, k: usize) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() * k);
        for (r, c, v) in self.triplets() {
            for a in 0..k {
                trip.push((r * k + a, c * k + a, v));
            }
        }
        Self::from_triplets(self.nrows * k, self.ncols * k, &trip)
    }

    /// Block-diagonal matrix from dense `k×k` row-major blocks.
    pub fn block_diagonal(blocks: &[Vec<f64>], k: usize) -> Self {
        let mut trip = Vec::with_capacity(blocks.len() * k * k);
        for (n, b) in blocks.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    let v = b[i * k + j];
                    if v != 0.0 {
                        trip.push((n * k + i, n * k + j, v));
                    }
                }
            }
        }
        Self::from_triplets(blocks.len() * k, blocks.len() * k, &trip)
    }

    /// Submatrix selecting the given rows and columns (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            col_map[c] = j;
        }
        let mut trip = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let j = col_map[c];
                if j != usize::MAX {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &trip)
    }
}

/// Sparse LU factorization with partial pivoting.
pub struct LuSolver {
    n: usize,
    matrix: CsrMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for LuSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuSolver").field("n", &self.n).finish()
    }
}

impl LuSolver {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidParameter(format!(
                "LU of a non-square {}×{} matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        let trip: Vec<Triplet<usize, usize, f64>> = matrix
            .triplets()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip).map_err(|e| Error::SolverFailure {
            reason: format!("matrix assembly: {e:?}"),
            residual: f64::NAN,
        })?;
        let lu = csc.sp_lu().map_err(|e| Error::SolverFailure {
            reason: format!("LU factorization: {e:?}"),
            residual: f64::NAN,
        })?;
        Ok(Self {
            n,
            matrix: matrix.clone(),
            lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` and checks the relative residual against `tol`.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        {
            let mat = faer::MatMut::from_column_major_slice_mut(&mut x, self.n, 1);
            self.lu.solve_in_place(mat);
        }
        let residual = self.relative_residual(&x, b);
        if !(residual <= tol) {
            return Err(Error::SolverFailure {
                reason: "direct solve residual above tolerance".into(),
                residual,
            });
        }
        Ok(x)
    }

    /// `‖Ax − b‖₂ / max(‖b‖₂, ‖A‖·‖x‖, 1e-300)`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let num = ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let axnorm = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
        if num == 0.0 {
            return 0.0;
        }
        num / bnorm.max(axnorm).max(1e-300)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![3.0, -1.0]);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let b = CsrMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, 1.0), (2, 0, 4.0), (2, 1, -1.0)]);
        let c = a.matmul(&b);
        let mut dense = [[0.0; 2]; 2];
        for (r, col, v) in c.triplets() {
            dense[r][col] = v;
        }
        assert_eq!(dense, [[9.0, -2.0], [0.0, 3.0]]);
    }

    #[test]
    fn kron_and_strided_agree() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, -1.0)]);
        let x = [1.0, 10.0, 2.0, 20.0];
        assert_eq!(a.apply_strided(&x, 2), a.kron_identity(2).matvec(&x));
    }

    #[test]
    fn lu_solves_small_system() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 4.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 4.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 4.0),
            ],
        );
        let lu = LuSolver::new(&a).unwrap();
        let x = lu.solve(&[3.0, 2.0, 3.0], 1e-12).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn select_and_transpose() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 2, 1.0), (2, 0, 5.0), (1, 1, 2.0)]);
        let s = a.select(&[2, 1], &[0, 1]);
        assert_eq!(s.triplets(), vec![(0, 0, 5.0), (1, 1, 2.0)]);
        assert_eq!(a.transpose().transpose(), a);
    }
}
