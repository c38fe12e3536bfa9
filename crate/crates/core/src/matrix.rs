//! Dense row-major matrices and two-block row partitions.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense real `N × n` matrix stored row-major.
///
/// Immutable after construction. The rank is computed on first use and cached.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    rank: OnceLock<usize>,
}

/// Wire form: `{"rows": N, "cols": n, "data": [row-major entries]}`.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        Matrix::new(r.rows, r.cols, r.data)
    }
}

impl From<Matrix> for MatrixRepr {
    fn from(m: Matrix) -> Self {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.rows {
            list.entry(&self.row(i));
        }
        list.finish()
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Matrix {
            rows,
            cols,
            data,
            rank: OnceLock::new(),
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    rows: rows.len(),
                    cols,
                    expected: rows.len() * cols,
                    got: data.len() + r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix::new(n, n, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Matrix::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Row `v_i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `w_j`, copied.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.rows_iter().map(|r| dot(r, x)).collect()
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yi) in self.rows_iter().zip(y) {
            if yi != 0.0 {
                for (o, &a) in out.iter_mut().zip(r) {
                    *o += a * yi;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Tolerance used for rank decisions: `1e-10 · max|a_ij| · max(N, n)`.
    pub fn rank_tolerance(&self) -> f64 {
        1e-10 * self.max_abs() * self.rows.max(self.cols) as f64
    }

    /// Numerical rank by Gaussian elimination with partial pivoting.
    pub fn rank(&self) -> usize {
        *self.rank.get_or_init(|| {
            let tol = self.rank_tolerance();
            let mut m = self.data.clone();
            let (rows, cols) = (self.rows, self.cols);
            let mut rank = 0;
            for c in 0..cols {
                if rank == rows {
                    break;
                }
                let (piv, val) = (rank..rows)
                    .map(|r| (r, m[r * cols + c].abs()))
                    .fold((rank, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                if val <= tol {
                    continue;
                }
                if piv != rank {
                    for k in 0..cols {
                        m.swap(piv * cols + k, rank * cols + k);
                    }
                }
                let p = m[rank * cols + c];
                for r in rank + 1..rows {
                    let f = m[r * cols + c] / p;
                    if f != 0.0 {
                        for k in c..cols {
                            m[r * cols + k] -= f * m[rank * cols + k];
                        }
                    }
                }
                rank += 1;
            }
            rank
        })
    }

    /// `A(ω)`: the rows listed in `rows`, in the given order.
    pub fn submatrix(&self, rows: &[usize]) -> Result<Matrix> {
        if rows.is_empty() {
            return Err(Error::EmptySubmatrix);
        }
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(rows.len(), self.cols, data)
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<Matrix> {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|v| v * c).collect())
    }

    /// Reorders columns: column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Matrix> {
        assert_eq!(perm.len(), self.cols);
        let data = self
            .rows_iter()
            .flat_map(|r| perm.iter().map(move |&j| r[j]))
            .collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Matrix> {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        Matrix::new(m.nrows(), m.ncols(), data)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-block split `Ω₁ ∪ Ω₂` of the row indices `0..N`.
///
/// Blocks are kept sorted. Constructors do not force the canonical form
/// (row 0 in `block1`); use [`Partition::canonical`] for that.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    block1: Vec<usize>,
    block2: Vec<usize>,
}

impl Partition {
    /// Partition with `block1` as given and every other row in `block2`.
    pub fn from_block1(n: usize, block1: &[usize]) -> Result<Self> {
        let mut in1 = vec![false; n];
        for &i in block1 {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if in1[i] {
                return Err(Error::InvalidPartition(format!("row {i} listed twice")));
            }
            in1[i] = true;
        }
        Ok(Self::from_labels(&in1.iter().map(|&b| !b).collect::<Vec<_>>()))
    }

    /// Checks that the two blocks are disjoint and cover `0..n`.
    pub fn from_blocks(n: usize, block1: Vec<usize>, block2: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in block1.iter().chain(&block2) {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if seen[i] {
                return Err(Error::InvalidPartition(format!("row {i} appears twice")));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("row {i} missing")));
        }
        let mut p = Partition { n, block1, block2 };
        p.block1.sort_unstable();
        p.block2.sort_unstable();
        Ok(p)
    }

    /// `in_block2[i]` tells which block row `i` goes to.
    pub fn from_labels(in_block2: &[bool]) -> Self {
        let (b2, b1): (Vec<usize>, Vec<usize>) = (0..in_block2.len()).partition(|&i| in_block2[i]);
        Partition {
            n: in_block2.len(),
            block1: b1,
            block2: b2,
        }
    }

    /// Bit `i` of `mask` set means row `i` is in `block2`. Requires `n ≤ 64`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= 64);
        Self::from_labels(&(0..n).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
    }

    /// `Ω₁ = {i : ξ_i = +1}`.
    pub fn from_signs(signs: &[i8]) -> Self {
        Self::from_labels(&signs.iter().map(|&s| s < 0).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn block1(&self) -> &[usize] {
        &self.block1
    }

    pub fn block2(&self) -> &[usize] {
        &self.block2
    }

    /// Block `k ∈ {0, 1}`.
    pub fn block(&self, k: usize) -> &[usize] {
        match k {
            0 => &self.block1,
            1 => &self.block2,
            _ => panic!("partition has two blocks, asked for {k}"),
        }
    }

    pub fn labels(&self) -> Vec<bool> {
        let mut l = vec![false; self.n];
        for &i in &self.block2 {
            l[i] = true;
        }
        l
    }

    /// Sign vector with `+1` on `block1`.
    pub fn signs(&self) -> Vec<i8> {
        self.labels().iter().map(|&b| if b { -1 } else { 1 }).collect()
    }

    pub fn mask(&self) -> Option<u64> {
        (self.n <= 64).then(|| self.block2.iter().fold(0u64, |m, &i| m | 1 << i))
    }

    pub fn swapped(&self) -> Self {
        Partition {
            n: self.n,
            block1: self.block2.clone(),
            block2: self.block1.clone(),
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.block1.first() == Some(&0)
    }

    pub fn canonical(self) -> Self {
        if self.block2.first() == Some(&0) {
            self.swapped()
        } else {
            self
        }
    }

    /// Both blocks non-empty.
    pub fn is_nontrivial(&self) -> bool {
        !self.block1.is_empty() && !self.block2.is_empty()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}|{:?}", self.block1, self.block2)
    }
}
