//! Dense column-major matrices, index sets, and the vector/matrix operators
//! used throughout the crate: column sums, flattening, norms, signed-value
//! top-k selection, zero-padded row restriction, row supports, and the
//! row-compressibility magnitude.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Products with at least this many multiply-adds are split across threads.
const PAR_MATMUL_FLOP_THRESHOLD: u128 = 2_000_000;

/// A dense real matrix stored column-major in 64-bit floats.
///
/// Entry `(r, c)` lives at `data[r + c * rows]`. All arithmetic in the crate
/// is done in f64; the error bounds under test involve contraction factors
/// where single precision drift would be visible.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Construct from column-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(Error::BadDataLength {
                rows,
                cols,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteEntry);
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.data[r + c * rows] = f(r, c);
            }
        }
        m
    }

    /// Convenience constructor from row-major nested slices (tests mostly).
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let r = rows.len();
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::BadDataLength {
                rows: r,
                cols: c,
                got: rows.iter().map(|row| row.len()).sum(),
            });
        }
        let mut data = vec![0.0; r * c];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[i + j * r] = v;
            }
        }
        DenseMatrix::new(r, c, data)
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
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r + c * self.rows]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r + c * self.rows] = v;
    }

    #[inline]
    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Column-major backing slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Column sums: `out[i] = sum_j M[i][j]`.
    pub fn mu(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for c in 0..self.cols {
            let col = self.column(c);
            for (acc, &v) in out.iter_mut().zip(col) {
                *acc += v;
            }
        }
        out
    }

    /// Column-major stacking of the entries; `l2_norm(vec) == frobenius_norm`.
    pub fn vec_flatten(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.data[c + r * self.cols] = self.data[r + c * self.rows];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> DenseMatrix {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape("add", other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape("sub", other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    fn check_same_shape(&self, op: &'static str, other: &DenseMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                op,
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        Ok(())
    }

    /// `self * rhs`.
    ///
    /// Column-sweep form: each output column is a linear combination of the
    /// columns of `self`, which keeps the inner loop contiguous. Exact-zero
    /// coefficients are skipped, so products against zero-padded row
    /// restrictions cost no more than their compacted equivalents.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut data = vec![0.0; m * n];
        let fill_column = |j: usize, out_col: &mut [f64]| {
            let rhs_col = rhs.column(j);
            for (l, &coeff) in rhs_col.iter().enumerate().take(k) {
                if coeff == 0.0 {
                    continue;
                }
                let lhs_col = &self.data[l * m..(l + 1) * m];
                for (acc, &a) in out_col.iter_mut().zip(lhs_col) {
                    *acc += coeff * a;
                }
            }
        };
        if (m as u128) * (k as u128) * (n as u128) >= PAR_MATMUL_FLOP_THRESHOLD {
            data.par_chunks_mut(m)
                .enumerate()
                .for_each(|(j, col)| fill_column(j, col));
        } else {
            for (j, col) in data.chunks_mut(m).enumerate() {
                fill_column(j, col);
            }
        }
        Ok(DenseMatrix {
            rows: m,
            cols: n,
            data,
        })
    }

    /// `self^T * rhs`, computed as column dot products without materializing
    /// the transpose.
    pub fn matmul_transposed_self(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul_transposed_self",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let (m, k, n) = (self.cols, self.rows, rhs.cols);
        let mut data = vec![0.0; m * n];
        let fill_column = |j: usize, out_col: &mut [f64]| {
            let rhs_col = rhs.column(j);
            for (i, acc) in out_col.iter_mut().enumerate() {
                let lhs_col = &self.data[i * k..(i + 1) * k];
                let mut dot = 0.0;
                for (a, b) in lhs_col.iter().zip(rhs_col) {
                    dot += a * b;
                }
                *acc = dot;
            }
        };
        if (m as u128) * (k as u128) * (n as u128) >= PAR_MATMUL_FLOP_THRESHOLD {
            data.par_chunks_mut(m)
                .enumerate()
                .for_each(|(j, col)| fill_column(j, col));
        } else {
            for (j, col) in data.chunks_mut(m).enumerate() {
                fill_column(j, col);
            }
        }
        Ok(DenseMatrix {
            rows: m,
            cols: n,
            data,
        })
    }

    /// `self * rhs^T`.
    pub fn matmul_transposed_rhs(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.cols {
            return Err(Error::ShapeMismatch {
                op: "matmul_transposed_rhs",
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let (m, k, n) = (self.rows, self.cols, rhs.rows);
        let mut data = vec![0.0; m * n];
        let fill_column = |j: usize, out_col: &mut [f64]| {
            for l in 0..k {
                let coeff = rhs.data[j + l * n];
                if coeff == 0.0 {
                    continue;
                }
                let lhs_col = &self.data[l * m..(l + 1) * m];
                for (acc, &a) in out_col.iter_mut().zip(lhs_col) {
                    *acc += coeff * a;
                }
            }
        };
        if (m as u128) * (k as u128) * (n as u128) >= PAR_MATMUL_FLOP_THRESHOLD {
            data.par_chunks_mut(m)
                .enumerate()
                .for_each(|(j, col)| fill_column(j, col));
        } else {
            for (j, col) in data.chunks_mut(m).enumerate() {
                fill_column(j, col);
            }
        }
        Ok(DenseMatrix {
            rows: m,
            cols: n,
            data,
        })
    }

    /// Same-shape copy with the rows outside `set` zeroed.
    ///
    /// The zero-padded convention keeps the pruning algebra expressible as
    /// full-shape products; compacted extraction is a separate operation on
    /// networks.
    pub fn row_restrict(&self, set: &IndexSet) -> Result<DenseMatrix> {
        if set.universe() != self.rows {
            return Err(Error::UniverseMismatch {
                set_universe: set.universe(),
                expected: self.rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for c in 0..self.cols {
            let src = self.column(c);
            let dst = out.column_mut(c);
            for &r in set.as_slice() {
                dst[r] = src[r];
            }
        }
        Ok(out)
    }

    /// Keep only the rows in `set`, compacted to `set.len()` rows.
    pub fn select_rows(&self, set: &IndexSet) -> Result<DenseMatrix> {
        if set.universe() != self.rows {
            return Err(Error::UniverseMismatch {
                set_universe: set.universe(),
                expected: self.rows,
            });
        }
        if set.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let mut out = DenseMatrix::zeros(set.len(), self.cols);
        for c in 0..self.cols {
            let src = self.column(c);
            let dst = out.column_mut(c);
            for (i, &r) in set.as_slice().iter().enumerate() {
                dst[i] = src[r];
            }
        }
        Ok(out)
    }

    /// Keep only the columns in `set`, compacted to `set.len()` columns.
    pub fn select_cols(&self, set: &IndexSet) -> Result<DenseMatrix> {
        if set.universe() != self.cols {
            return Err(Error::UniverseMismatch {
                set_universe: set.universe(),
                expected: self.cols,
            });
        }
        if set.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let mut out = DenseMatrix::zeros(self.rows, set.len());
        for (i, &c) in set.as_slice().iter().enumerate() {
            out.column_mut(i).copy_from_slice(self.column(c));
        }
        Ok(out)
    }

    /// Indices of rows containing any entry of nonzero magnitude.
    pub fn row_support(&self) -> IndexSet {
        let mut nonzero = vec![false; self.rows];
        for c in 0..self.cols {
            for (flag, &v) in nonzero.iter_mut().zip(self.column(c)) {
                *flag |= v != 0.0;
            }
        }
        let indices: Vec<usize> = nonzero
            .iter()
            .enumerate()
            .filter_map(|(i, &nz)| nz.then_some(i))
            .collect();
        IndexSet::new(self.rows, indices).expect("support indices are in range")
    }

    /// Minimal magnitude `R` such that the sorted column sums obey
    /// `|mu(M)|_(i) <= R / i^(1/p)` (i counted from 1).
    ///
    /// Requires a non-negative matrix and `p` in (0, 1).
    pub fn compressibility_magnitude(&self, p: f64) -> Result<f64> {
        if !(0.0 < p && p < 1.0) {
            return Err(Error::InvalidP { p });
        }
        if self.data.iter().any(|&v| v < 0.0) {
            return Err(Error::NegativeEntry);
        }
        let mut sums = self.mu();
        // stable order: magnitude descending, index ascending
        let mut order: Vec<usize> = (0..sums.len()).collect();
        order.sort_by(|&a, &b| {
            sums[b]
                .abs()
                .total_cmp(&sums[a].abs())
                .then(a.cmp(&b))
        });
        sums = order.iter().map(|&i| sums[i]).collect();
        let inv_p = 1.0 / p;
        let mut r = 0.0f64;
        for (i, &v) in sums.iter().enumerate() {
            r = r.max(v.abs() * ((i + 1) as f64).powf(inv_p));
        }
        Ok(r)
    }
}

/// A strictly increasing set of indices into a universe `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    universe: usize,
    indices: Vec<usize>,
}

impl IndexSet {
    /// Sorts and de-duplicates `indices`; rejects out-of-range entries.
    pub fn new(universe: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= universe) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                universe,
            });
        }
        Ok(IndexSet { universe, indices })
    }

    pub fn empty(universe: usize) -> Self {
        IndexSet {
            universe,
            indices: Vec::new(),
        }
    }

    pub fn full(universe: usize) -> Self {
        IndexSet {
            universe,
            indices: (0..universe).collect(),
        }
    }

    #[inline]
    pub fn universe(&self) -> usize {
        self.universe
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn union(&self, other: &IndexSet) -> Result<IndexSet> {
        if self.universe != other.universe {
            return Err(Error::UniverseMismatch {
                set_universe: other.universe,
                expected: self.universe,
            });
        }
        let mut merged = self.indices.clone();
        merged.extend_from_slice(&other.indices);
        IndexSet::new(self.universe, merged)
    }

    pub fn complement(&self) -> IndexSet {
        let indices = (0..self.universe)
            .filter(|i| !self.contains(*i))
            .collect();
        IndexSet {
            universe: self.universe,
            indices,
        }
    }

    /// Size of the symmetric difference with `other`.
    pub fn symmetric_difference_count(&self, other: &IndexSet) -> usize {
        let in_both = self.indices.iter().filter(|&&i| other.contains(i)).count();
        self.len() + other.len() - 2 * in_both
    }
}

/// `sum_i |v_i|`.
pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `sqrt(sum_i v_i^2)`.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Indices of the `k` largest entries by signed value.
///
/// Ties break toward the lowest index so that runs are bit-reproducible.
pub fn top_k_by_value(v: &[f64], k: usize) -> Result<IndexSet> {
    if k == 0 || k > v.len() {
        return Err(Error::KOutOfRange { k, len: v.len() });
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    order.truncate(k);
    IndexSet::new(v.len(), order)
}

/// Indices of the `k` largest entries by magnitude, lowest index on ties.
pub fn top_k_by_magnitude(v: &[f64], k: usize) -> Result<IndexSet> {
    if k == 0 || k > v.len() {
        return Err(Error::KOutOfRange { k, len: v.len() });
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    IndexSet::new(v.len(), order)
}

/// Copy of `v` with entries outside `set` zeroed.
pub fn restrict_vector(v: &[f64], set: &IndexSet) -> Result<Vec<f64>> {
    if set.universe() != v.len() {
        return Err(Error::UniverseMismatch {
            set_universe: set.universe(),
            expected: v.len(),
        });
    }
    let mut out = vec![0.0; v.len()];
    for &i in set.as_slice() {
        out[i] = v[i];
    }
    Ok(out)
}
