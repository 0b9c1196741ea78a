//! Sparse and dense matrix types, loading, generation, and the dense
//! reference multiply.
//!
//! The sparse operand is always a square `n x n` matrix in canonical
//! compressed-sparse-row form; the dense operands are row-major `f32`
//! matrices. Values are single precision throughout, matching the kernels
//! downstream; [`dense_oracle_spmm`] accumulates in `f64` so it can serve
//! as a tight reference.

mod market;
mod synth;

pub use market::{load_matrix_market, write_matrix_market};
pub use synth::{generate_synthetic, SynthKind};

use crate::error::{Error, Result};

/// One coordinate-form entry, 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooEntry {
    pub row: usize,
    pub col: usize,
    pub value: f32,
}

/// Canonical compressed-sparse-row matrix.
///
/// Invariants held by every constructor:
/// - `row_ptr` has `n + 1` non-decreasing offsets with `row_ptr[0] == 0`
///   and `row_ptr[n] == nnz`;
/// - within each row the column indices are strictly increasing
///   (duplicates are merged by summation at construction);
/// - no stored value is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f32>,
}

impl CsrMatrix {
    /// Builds a canonical matrix from coordinate entries: sorts, merges
    /// duplicates by summation, and drops entries that sum to exact zero.
    pub fn from_coo(n: usize, entries: &[CooEntry]) -> Result<Self> {
        for e in entries {
            if e.row >= n || e.col >= n {
                return Err(Error::InvalidParameter(format!(
                    "entry ({}, {}) out of range for n = {n}",
                    e.row, e.col
                )));
            }
        }
        let mut sorted: Vec<CooEntry> = entries.to_vec();
        sorted.sort_by(|a, b| (a.row, a.col).cmp(&(b.row, b.col)));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut it = sorted.into_iter().peekable();
        while let Some(first) = it.next() {
            let mut sum = first.value;
            while let Some(next) = it.peek() {
                if next.row == first.row && next.col == first.col {
                    sum += next.value;
                    it.next();
                } else {
                    break;
                }
            }
            if sum != 0.0 {
                row_ptr[first.row + 1] += 1;
                col_idx.push(first.col);
                values.push(sum);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    /// Wraps pre-built arrays, validating every invariant.
    pub fn from_parts(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f32>,
    ) -> Result<Self> {
        if row_ptr.len() != n + 1 {
            return Err(Error::InvalidParameter(format!(
                "row_ptr length {} != n + 1 = {}",
                row_ptr.len(),
                n + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[n] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::InvalidParameter(
                "row_ptr endpoints inconsistent with array lengths".into(),
            ));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidParameter(format!(
                    "row_ptr decreases at row {i}"
                )));
            }
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidParameter(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last >= n {
                    return Err(Error::InvalidParameter(format!(
                        "column {last} out of range in row {i}"
                    )));
                }
            }
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    /// The identity pattern with unit values.
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// An `n x n` matrix with no stored entries.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f32]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Number of stored entries in row `i`.
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Out-degree (stored entries) of every row.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.row_nnz(i)).collect()
    }

    /// All entries in row-major coordinate order.
    pub fn to_coo(&self) -> Vec<CooEntry> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out.push(CooEntry { row: i, col: c, value: v });
            }
        }
        out
    }
}

/// Row-major dense matrix of `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "data length {} != {rows} x {cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Deterministic matrix with entries uniform in [-1, 1].
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Entry-wise tolerance check against a reference matrix: every entry
    /// must satisfy `|self - ref| <= max(abs, rel * |ref|)`, in f64.
    pub fn approx_eq(&self, reference: &DenseMatrix, rel: f64, abs: f64) -> bool {
        self.rows == reference.rows
            && self.cols == reference.cols
            && self
                .data
                .iter()
                .zip(&reference.data)
                .all(|(&x, &r)| (x as f64 - r as f64).abs() <= abs.max(rel * (r as f64).abs()))
    }
}

/// Ground-truth dense multiply `C = A * B` by a straightforward triple loop.
///
/// Accumulates in `f64` and rounds once per output element, so every other
/// execution path can be checked against it at a tight tolerance.
pub fn dense_oracle_spmm(a: &CsrMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "B has {} rows, A is {} x {}",
            b.rows(),
            a.n(),
            a.n()
        )));
    }
    let dim = b.cols();
    let mut c = DenseMatrix::zeros(a.n(), dim);
    let mut acc = vec![0.0f64; dim];
    for i in 0..a.n() {
        acc.fill(0.0);
        let (cols, vals) = a.row(i);
        for (&k, &v) in cols.iter().zip(vals) {
            let brow = b.row(k);
            for j in 0..dim {
                acc[j] += f64::from(v) * f64::from(brow[j]);
            }
        }
        let out = &mut c.data[i * dim..(i + 1) * dim];
        for j in 0..dim {
            out[j] = acc[j] as f32;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_coo_merges_duplicates_and_drops_zeros() {
        let entries = [
            CooEntry { row: 0, col: 0, value: 1.0 },
            CooEntry { row: 0, col: 0, value: 1.0 },
            CooEntry { row: 1, col: 2, value: 3.0 },
            CooEntry { row: 1, col: 2, value: -3.0 },
        ];
        let a = CsrMatrix::from_coo(3, &entries).unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.row(0), (&[0usize][..], &[2.0f32][..]));
        assert_eq!(a.row_nnz(1), 0);
    }

    #[test]
    fn from_parts_rejects_unsorted_rows() {
        let err = CsrMatrix::from_parts(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn oracle_identity_returns_b() {
        let a = CsrMatrix::identity(4);
        let b = DenseMatrix::random(4, 7, 11);
        let c = dense_oracle_spmm(&a, &b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn oracle_zero_matrix_returns_zero() {
        let a = CsrMatrix::empty(5);
        let b = DenseMatrix::random(5, 3, 2);
        let c = dense_oracle_spmm(&a, &b).unwrap();
        assert!(c.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn oracle_hand_multiplication() {
        // A = [[1, 2], [0, 3]], B = [[1, 0], [1, 1]] -> C = [[3, 2], [3, 3]]
        let a = CsrMatrix::from_coo(
            2,
            &[
                CooEntry { row: 0, col: 0, value: 1.0 },
                CooEntry { row: 0, col: 1, value: 2.0 },
                CooEntry { row: 1, col: 1, value: 3.0 },
            ],
        )
        .unwrap();
        let b = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let c = dense_oracle_spmm(&a, &b).unwrap();
        assert_eq!(c.data(), &[3.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn oracle_rejects_dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        let b = DenseMatrix::zeros(4, 2);
        assert!(dense_oracle_spmm(&a, &b).is_err());
    }
}
