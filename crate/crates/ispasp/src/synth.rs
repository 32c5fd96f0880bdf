//! Seeded synthetic data: row-compressible hidden representations, Gaussian
//! weight matrices, and planted row-sparse instances for recovery tests.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::Prng;

/// Parameters for one synthetic row-compressible matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressibleSpec {
    pub d_hid: usize,
    /// Number of columns (dataset size).
    pub b: usize,
    /// Row-compressibility ratio in (0, 1); lower means nearer to row-sparse.
    pub p: f64,
    /// Magnitude of the compressibility envelope.
    pub r: f64,
    pub seed: u64,
}

impl CompressibleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d_hid == 0 || self.b == 0 {
            return Err(Error::InvalidParameter(
                "d_hid and b must be at least 1".into(),
            ));
        }
        if !(0.0 < self.p && self.p < 1.0) {
            return Err(Error::InvalidP { p: self.p });
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "r must be positive and finite, got {}",
                self.r
            )));
        }
        Ok(())
    }
}

/// Generate a non-negative matrix whose sorted row sums decay at least as
/// fast as `r / i^(1/p)`.
///
/// Row `j` (1-indexed, pre-shuffle) receives a budget of `r / j^(1/p)`. The
/// budget is spent by a running sum: draw `b` values sequentially, the k-th
/// uniform in `[0, remaining / (b - k)]`, which both respects the cap and
/// spreads mass across columns. Rows are then permuted by a seeded shuffle so
/// the matrix is not in sorted magnitude order.
pub fn gen_compressible(spec: &CompressibleSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let mut rng = Prng::from_seed(spec.seed);
    let inv_p = 1.0 / spec.p;
    let mut out = DenseMatrix::zeros(spec.d_hid, spec.b);
    for j in 0..spec.d_hid {
        let mut remaining = spec.r / ((j + 1) as f64).powf(inv_p);
        for k in 0..spec.b {
            let v = rng.uniform(remaining / (spec.b - k) as f64);
            out.set(j, k, v);
            remaining -= v;
        }
    }
    // permute the row order in place
    let mut perm: Vec<usize> = (0..spec.d_hid).collect();
    rng.shuffle(&mut perm);
    let mut shuffled = DenseMatrix::zeros(spec.d_hid, spec.b);
    for c in 0..spec.b {
        let src = out.column(c);
        let dst = shuffled.column_mut(c);
        for (new_row, &old_row) in perm.iter().enumerate() {
            dst[new_row] = src[old_row];
        }
    }
    Ok(shuffled)
}

/// Matrix of i.i.d. `N(0, std^2)` entries.
pub fn gen_gaussian(rows: usize, cols: usize, std: f64, seed: u64) -> DenseMatrix {
    let mut rng = Prng::from_seed(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| std * rng.normal())
}

/// Kaiming-style weight init: `N(0, 2 / fan_in)` with `fan_in = cols`, the
/// input feature count for a `rows x cols` map applied as `W * x`.
pub fn gen_gaussian_weight(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    gen_gaussian(rows, cols, (2.0 / cols as f64).sqrt(), seed)
}

/// Matrix with exactly `s` nonzero rows (uniformly chosen), nonzero entries
/// uniform in `(0, 1]`. Oracle input for exact-recovery tests.
pub fn gen_exact_row_sparse(d_hid: usize, b: usize, s: usize, seed: u64) -> Result<DenseMatrix> {
    if s == 0 || s > d_hid {
        return Err(Error::SparsityOutOfRange { s, max: d_hid });
    }
    let mut rng = Prng::from_seed(seed);
    let support = rng.sample_distinct(d_hid, s);
    let mut out = DenseMatrix::zeros(d_hid, b);
    for &row in &support {
        for c in 0..b {
            // 1 - u maps [0,1) onto (0,1], keeping the row support exact
            out.set(row, c, 1.0 - rng.next_f64());
        }
    }
    Ok(out)
}
