//! Evaluators and estimators for the pruning error analysis: restricted
//! isometry constants, best row-sparse splits, the geometric hidden-residual
//! bound with its per-iteration recursion, the output-residual and noise
//! bounds, and the single- and multi-layer asymptotic rates.
//!
//! The bound evaluators plug measured quantities into the written formulas
//! with all their literal constants; nothing here depends on the pruning
//! implementation, so traces can be checked against an independent route.

use crate::error::{Error, Result};
use crate::matrix::{l1_norm, l2_norm, top_k_by_value, DenseMatrix, IndexSet};
use crate::rng::Prng;

/// Exact RIP enumeration refuses to visit more supports than this.
pub const ENUMERATION_GUARD: u64 = 200_000;
const JACOBI_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Decomposition `H = Z + E` with `Z` the best `s`-row-sparse part.
#[derive(Debug, Clone)]
pub struct SparseSplit {
    /// Rows of `H` with the `s` largest column sums, zero elsewhere.
    pub z: DenseMatrix,
    /// `H - Z`.
    pub e: DenseMatrix,
    /// The selected row set.
    pub support: IndexSet,
}

/// Split `H` into its best `s`-row-sparse part and the remainder.
///
/// The support minimizes `||mu(E)||` over all size-`s` row sets: keeping the
/// rows with the largest column sums is optimal for any monotone norm of the
/// leftover sums.
pub fn best_s_row_sparse(h: &DenseMatrix, s: usize) -> Result<SparseSplit> {
    if s == 0 || s > h.rows() {
        return Err(Error::SparsityOutOfRange { s, max: h.rows() });
    }
    let support = top_k_by_value(&h.mu(), s)?;
    let z = h.row_restrict(&support)?;
    let e = h.sub(&z)?;
    Ok(SparseSplit { z, e, support })
}

/// Whether a restricted isometry constant was maximized over every support
/// or only a sampled subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RipMode {
    Exact,
    Sampled,
}

/// An estimate of the `r`-th restricted isometry constant.
///
/// In `Exact` mode `delta` is the true constant. In `Sampled` mode it is a
/// certified lower bound: sampling can only miss the worst support, never
/// overstate it.
#[derive(Debug, Clone, PartialEq)]
pub struct RipEstimate {
    pub r: usize,
    pub delta: f64,
    pub mode: RipMode,
    /// Number of supports visited in sampled mode.
    pub samples: usize,
}

fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Cyclic Jacobi iteration on a symmetric matrix, returning the extreme
/// eigenvalues. Converges when the off-diagonal norm falls below
/// `1e-10 * max(1, ||A||_F)`.
fn symmetric_eigen_extremes(gram: &mut [f64], n: usize) -> Result<(f64, f64)> {
    debug_assert_eq!(gram.len(), n * n);
    if n == 1 {
        return Ok((gram[0], gram[0]));
    }
    let frob = gram.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = JACOBI_TOL * frob.max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += gram[p + q * n] * gram[p + q * n];
            }
        }
        if (2.0 * off).sqrt() <= threshold {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..n {
                lo = lo.min(gram[i + i * n]);
                hi = hi.max(gram[i + i * n]);
            }
            return Ok((lo, hi));
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = gram[p + q * n];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = gram[p + p * n];
                let aqq = gram[q + q * n];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = gram[k + p * n];
                    let akq = gram[k + q * n];
                    gram[k + p * n] = c * akp - s * akq;
                    gram[k + q * n] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = gram[p + k * n];
                    let aqk = gram[q + k * n];
                    gram[p + k * n] = c * apk - s * aqk;
                    gram[q + k * n] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::EigenNotConverged {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

/// `max(1 - lambda_min, lambda_max - 1)` of the Gram matrix of the columns
/// in `support`.
fn support_delta(w: &DenseMatrix, support: &[usize]) -> Result<f64> {
    let r = support.len();
    let mut gram = vec![0.0; r * r];
    for a in 0..r {
        let col_a = w.column(support[a]);
        for b in a..r {
            let col_b = w.column(support[b]);
            let mut dot = 0.0;
            for (x, y) in col_a.iter().zip(col_b) {
                dot += x * y;
            }
            gram[a + b * r] = dot;
            gram[b + a * r] = dot;
        }
    }
    let (lo, hi) = symmetric_eigen_extremes(&mut gram, r)?;
    Ok((1.0 - lo).max(hi - 1.0))
}

/// Advance a lexicographic combination in place; false when exhausted.
fn next_combination(indices: &mut [usize], n: usize) -> bool {
    let r = indices.len();
    let mut i = r;
    while i > 0 && indices[i - 1] == n - r + i - 1 {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    indices[i - 1] += 1;
    for j in i..r {
        indices[j] = indices[j - 1] + 1;
    }
    true
}

/// Estimate the `r`-th restricted isometry constant of `w` from extreme
/// squared singular values of column submatrices.
///
/// Exact mode enumerates every support (guarded by [`ENUMERATION_GUARD`]);
/// sampled mode maximizes over `samples` seeded random supports and is a
/// lower bound on the true constant. With a fixed seed the sampled sequence
/// is a prefix of any longer run, so more samples never decrease the
/// estimate.
pub fn rip_constant(
    w: &DenseMatrix,
    r: usize,
    mode: RipMode,
    samples: usize,
    seed: u64,
) -> Result<RipEstimate> {
    if r == 0 || r > w.cols() {
        return Err(Error::KOutOfRange { k: r, len: w.cols() });
    }
    match mode {
        RipMode::Exact => {
            let count = binomial(w.cols(), r);
            if count > ENUMERATION_GUARD {
                return Err(Error::EnumerationTooLarge {
                    n: w.cols(),
                    r,
                    guard: ENUMERATION_GUARD,
                });
            }
            let mut support: Vec<usize> = (0..r).collect();
            let mut delta = support_delta(w, &support)?;
            while next_combination(&mut support, w.cols()) {
                delta = delta.max(support_delta(w, &support)?);
            }
            Ok(RipEstimate {
                r,
                delta,
                mode,
                samples: count as usize,
            })
        }
        RipMode::Sampled => {
            if samples == 0 {
                return Err(Error::InvalidParameter("samples must be positive".into()));
            }
            let mut rng = Prng::stream(seed, "rip/supports");
            let mut delta = 0.0f64;
            for _ in 0..samples {
                let support = rng.sample_distinct(w.cols(), r);
                delta = delta.max(support_delta(w, &support)?);
            }
            Ok(RipEstimate {
                r,
                delta,
                mode,
                samples,
            })
        }
    }
}

/// Hidden-residual bound after `t` iterations:
/// `0.444^t * ||mu(H)||_2 + (14 + 7/sqrt(s)) * ||mu(E)||_1`.
pub fn lemma_hidden_residual_bound(
    h: &DenseMatrix,
    e: &DenseMatrix,
    s: usize,
    t: usize,
) -> Result<f64> {
    if s == 0 {
        return Err(Error::SparsityOutOfRange { s, max: h.rows() });
    }
    let decay = 0.444f64.powi(t as i32) * l2_norm(&h.mu());
    let noise = (14.0 + 7.0 / (s as f64).sqrt()) * l1_norm(&e.mu());
    Ok(decay + noise)
}

/// Per-iteration recursion bound:
/// `0.444 * prev + 7.333 * ||mu(E_hat)||_2 + (3.456 / sqrt(s)) * ||mu(E_hat)||_1`,
/// where `E_hat` is `E` with the active rows zeroed.
pub fn recursion_step_bound(prev_residual_norm: f64, e_hat: &DenseMatrix, s: usize) -> f64 {
    let mu = e_hat.mu();
    0.444 * prev_residual_norm
        + 7.333 * l2_norm(&mu)
        + 3.456 / (s as f64).sqrt() * l1_norm(&mu)
}

/// Output-residual bound: `||W1||_F` times the hidden-residual bound.
pub fn theorem_output_bound(
    w1: &DenseMatrix,
    h: &DenseMatrix,
    e: &DenseMatrix,
    s: usize,
    t: usize,
) -> Result<f64> {
    Ok(w1.frobenius_norm() * lemma_hidden_residual_bound(h, e, s, t)?)
}

/// Noise bound for a `p`-row-compressible matrix of magnitude `R`:
/// `||mu(E)||_1 <= R * s^(1 - 1/p) / (1/p - 1)`.
pub fn lemma_noise_bound(r_magnitude: f64, p: f64, s: usize) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidP { p });
    }
    if !(r_magnitude > 0.0 && r_magnitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "magnitude must be positive, got {r_magnitude}"
        )));
    }
    if s == 0 {
        return Err(Error::SparsityOutOfRange { s, max: usize::MAX });
    }
    Ok(r_magnitude * (s as f64).powf(1.0 - 1.0 / p) / (1.0 / p - 1.0))
}

/// Asymptotic exponent of the output residual in `s`: the `s^(1/2 - 1/p)`
/// factor combines with the `2 sqrt(s)` term to give `s^(1 - 1/p)`.
///
/// Computed as `(p - 1) / p`, which is exact for dyadic `p`.
pub fn theorem_final_rate(p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidP { p });
    }
    Ok((p - 1.0) / p)
}

/// Multi-layer output-residual bound for an `L`-hidden-layer network with
/// uniform hidden width `d` pruned to `s`:
///
/// `sum_{i=1}^L (14 + 7/sqrt(s))^(L-i+1)
///     * (||W_L||_F * prod_{j=1}^{L-i} ||vec(W_j)||_1)
///     * d^((L-i)/2) * s^(1 - 1/p) / (1/p - 1)`
///
/// evaluated with unit implicit constant. `l1_vec_w[j]` is the entrywise
/// l1 norm of the `(j+1)`-th weight matrix; `L - 1` values are consumed.
pub fn theorem_multilayer_bound(
    layers: usize,
    d: usize,
    s: usize,
    p: f64,
    frob_w_last: f64,
    l1_vec_w: &[f64],
) -> Result<f64> {
    if layers == 0 {
        return Err(Error::InvalidParameter("need at least one layer".into()));
    }
    if l1_vec_w.len() != layers - 1 {
        return Err(Error::LayerCountMismatch {
            expected: layers - 1,
            got: l1_vec_w.len(),
        });
    }
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidP { p });
    }
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if d == 0 || s == 0 || !positive(frob_w_last) || !l1_vec_w.iter().all(|&v| positive(v)) {
        return Err(Error::InvalidParameter(
            "dimensions and norms must be positive".into(),
        ));
    }
    let s_f = s as f64;
    let d_f = d as f64;
    let noise_rate = s_f.powf(1.0 - 1.0 / p) / (1.0 / p - 1.0);
    let green_base = 14.0 + 7.0 / s_f.sqrt();
    let mut total = 0.0;
    for i in 1..=layers {
        let depth = (layers - i) as f64;
        let green = green_base.powf(depth + 1.0);
        let mut blue = frob_w_last;
        for &w_norm in &l1_vec_w[..layers - i] {
            blue *= w_norm;
        }
        let red = d_f.powf(depth / 2.0) * noise_rate;
        total += green * blue * red;
    }
    Ok(total)
}

/// Per-layer asymptotic exponents of the multi-layer bound in `s` (with `d`
/// a fixed multiple of `s`), ordered first-to-last layer. Layer `l` of `L`
/// decays as `s^((L - l + 1)/2 + 1 - 1/p)`.
pub fn multilayer_rate_exponents(layers: usize, p: f64) -> Result<Vec<f64>> {
    if layers == 0 {
        return Err(Error::InvalidParameter("need at least one layer".into()));
    }
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidP { p });
    }
    let rate = (p - 1.0) / p;
    Ok((1..=layers)
        .map(|layer| (layers - layer + 1) as f64 / 2.0 + rate)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_compressible, gen_gaussian, CompressibleSpec};

    #[test]
    fn split_of_exactly_sparse_matrix_has_zero_noise() {
        let h = crate::synth::gen_exact_row_sparse(10, 6, 3, 1).unwrap();
        let split = best_s_row_sparse(&h, 3).unwrap();
        assert_eq!(split.e.frobenius_norm(), 0.0);
        assert_eq!(split.z.add(&split.e).unwrap(), h);
    }

    #[test]
    fn split_with_s_equal_rows_has_zero_noise() {
        let h = gen_gaussian(5, 4, 1.0, 2).map(|v| v.abs());
        let split = best_s_row_sparse(&h, 5).unwrap();
        assert_eq!(split.e.frobenius_norm(), 0.0);
    }

    #[test]
    fn split_reconstructs_exactly_and_support_is_s_sparse() {
        let h = gen_gaussian(9, 5, 1.0, 3).map(|v| v.abs());
        let split = best_s_row_sparse(&h, 4).unwrap();
        assert_eq!(split.z.add(&split.e).unwrap(), h);
        assert!(split.z.row_support().len() <= 4);
        assert_eq!(split.support.len(), 4);
    }

    #[test]
    fn split_minimizes_noise_over_all_supports() {
        // exhaustive oracle over all C(8, 3) size-3 row sets
        let h = gen_gaussian(8, 6, 1.0, 4).map(|v| v.abs());
        let split = best_s_row_sparse(&h, 3).unwrap();
        let achieved = l1_norm(&split.e.mu());
        let mut support: Vec<usize> = (0..3).collect();
        let mut best = f64::INFINITY;
        loop {
            let set = IndexSet::new(8, support.clone()).unwrap();
            let e = h.sub(&h.row_restrict(&set).unwrap()).unwrap();
            best = best.min(l1_norm(&e.mu()));
            if !next_combination(&mut support, 8) {
                break;
            }
        }
        assert!(
            (achieved - best).abs() <= 1e-12 * best.max(1.0),
            "achieved {achieved}, exhaustive best {best}"
        );
    }

    #[test]
    fn rip_of_orthonormal_columns_is_zero() {
        let eye = DenseMatrix::identity(6);
        for r in [1, 3, 6] {
            let est = rip_constant(&eye, r, RipMode::Exact, 0, 0).unwrap();
            assert!(est.delta.abs() < 1e-12, "r = {r}: delta {}", est.delta);
        }
    }

    #[test]
    fn rip_of_scaled_identity_is_closed_form() {
        let c = 1.3;
        let w = DenseMatrix::identity(4).scale(c);
        let est = rip_constant(&w, 1, RipMode::Exact, 0, 0).unwrap();
        assert!((est.delta - (c * c - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sampled_rip_is_a_lower_bound_and_monotone_in_samples() {
        let w = gen_gaussian(60, 10, 1.0 / 60f64.sqrt(), 5);
        let exact = rip_constant(&w, 3, RipMode::Exact, 0, 0).unwrap();
        let few = rip_constant(&w, 3, RipMode::Sampled, 20, 9).unwrap();
        let more = rip_constant(&w, 3, RipMode::Sampled, 60, 9).unwrap();
        assert!(few.delta <= more.delta + 1e-15);
        assert!(more.delta <= exact.delta + 1e-12);
    }

    #[test]
    fn gaussian_regime_attains_small_delta_at_generous_aspect() {
        // tall Gaussian blocks reach the delta <= 0.1 regime
        for seed in 0..3 {
            let w = gen_gaussian(6400, 24, 1.0 / 6400f64.sqrt(), 100 + seed);
            let est = rip_constant(&w, 8, RipMode::Sampled, 40, seed).unwrap();
            assert!(
                est.delta <= 0.1,
                "seed {seed}: sampled delta {} above 0.1",
                est.delta
            );
        }
    }

    #[test]
    fn rip_guard_and_range_errors() {
        let w = DenseMatrix::identity(30);
        assert!(matches!(
            rip_constant(&w, 15, RipMode::Exact, 0, 0),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(matches!(
            rip_constant(&w, 31, RipMode::Exact, 0, 0),
            Err(Error::KOutOfRange { .. })
        ));
    }

    #[test]
    fn hidden_residual_bound_plugs_in() {
        let h = gen_gaussian(6, 4, 1.0, 6).map(|v| v.abs());
        let split = best_s_row_sparse(&h, 2).unwrap();
        // t = 0 is the plain sum of both terms
        let b0 = lemma_hidden_residual_bound(&h, &split.e, 2, 0).unwrap();
        let want = l2_norm(&h.mu()) + (14.0 + 7.0 / 2f64.sqrt()) * l1_norm(&split.e.mu());
        assert!((b0 - want).abs() < 1e-12);
        // geometric decay with zero noise
        let zero = DenseMatrix::zeros(6, 4);
        let b_large = lemma_hidden_residual_bound(&h, &zero, 2, 400).unwrap();
        assert!(b_large < 1e-100);
    }

    #[test]
    fn recursion_bound_cases() {
        let zero = DenseMatrix::zeros(4, 3);
        assert!((recursion_step_bound(2.0, &zero, 4) - 0.888).abs() < 1e-12);
        assert_eq!(recursion_step_bound(0.0, &zero, 4), 0.0);
    }

    #[test]
    fn output_bound_scales_with_w1() {
        let h = gen_gaussian(5, 3, 1.0, 7).map(|v| v.abs());
        let split = best_s_row_sparse(&h, 2).unwrap();
        let w1 = gen_gaussian(4, 5, 1.0, 8);
        let b1 = theorem_output_bound(&w1, &h, &split.e, 2, 3).unwrap();
        let b2 = theorem_output_bound(&w1.scale(2.0), &h, &split.e, 2, 3).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-9 * b1);
        let zero = DenseMatrix::zeros(4, 5);
        assert_eq!(theorem_output_bound(&zero, &h, &split.e, 2, 3).unwrap(), 0.0);
    }

    #[test]
    fn noise_bound_arithmetic() {
        assert!((lemma_noise_bound(1.0, 0.5, 4).unwrap() - 0.25).abs() < 1e-15);
        // decreasing in s for p < 1
        let mut prev = f64::INFINITY;
        for s in [1, 2, 4, 8, 16] {
            let v = lemma_noise_bound(1.0, 0.5, s).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn noise_bound_holds_for_generated_matrices() {
        let spec = CompressibleSpec {
            d_hid: 30,
            b: 40,
            p: 0.5,
            r: 1.0,
            seed: 21,
        };
        let h = gen_compressible(&spec).unwrap();
        for s in 1..=30 {
            let measured = l1_norm(&best_s_row_sparse(&h, s).unwrap().e.mu());
            let bound = lemma_noise_bound(spec.r, spec.p, s).unwrap();
            assert!(
                measured <= bound + 1e-12,
                "s = {s}: measured {measured} > bound {bound}"
            );
        }
    }

    #[test]
    fn final_rate_reference_values() {
        assert_eq!(theorem_final_rate(0.75).unwrap(), -1.0 / 3.0);
        assert_eq!(theorem_final_rate(0.5).unwrap(), -1.0);
        assert_eq!(theorem_final_rate(0.25).unwrap(), -3.0);
    }

    #[test]
    fn final_rate_decreases_with_p() {
        let mut prev = f64::INFINITY;
        for p in [0.9, 0.7, 0.5, 0.3, 0.1] {
            let rate = theorem_final_rate(p).unwrap();
            assert!(rate < prev);
            prev = rate;
        }
    }

    #[test]
    fn multilayer_bound_single_layer_consistency() {
        let (d, s, p, wf) = (64, 8, 0.5, 3.0);
        let direct = theorem_multilayer_bound(1, d, s, p, wf, &[]).unwrap();
        let want = (14.0 + 7.0 / (s as f64).sqrt()) * wf * lemma_noise_bound(1.0, p, s).unwrap();
        assert!((direct - want).abs() < 1e-9 * want);
    }

    #[test]
    fn multilayer_exponent_sequence() {
        let exps = multilayer_rate_exponents(3, 0.25).unwrap();
        assert_eq!(exps, vec![-1.5, -2.0, -2.5]);
    }

    #[test]
    fn multilayer_bound_decreases_in_s_at_fixed_ratio() {
        let mut prev = f64::INFINITY;
        for s in [8, 16, 32, 64] {
            let v = theorem_multilayer_bound(3, 4 * s, s, 0.25, 2.0, &[10.0, 10.0]).unwrap();
            assert!(v < prev, "s = {s}: {v} !< {prev}");
            prev = v;
        }
    }

    #[test]
    fn multilayer_bound_rejects_wrong_list_length() {
        assert!(matches!(
            theorem_multilayer_bound(3, 16, 4, 0.5, 1.0, &[1.0]),
            Err(Error::LayerCountMismatch { .. })
        ));
    }

    #[test]
    fn split_rejects_oversized_s() {
        let h = DenseMatrix::identity(3);
        assert!(matches!(
            best_s_row_sparse(&h, 4),
            Err(Error::SparsityOutOfRange { .. })
        ));
    }
}
