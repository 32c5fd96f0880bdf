//! Structured pruning of ReLU networks.
//!
//! The iterative sparse structured pruning loop alternates three steps on the
//! residual `V` between dense and pruned outputs:
//!
//! 1. score neurons by `Y = W1^T * V`, the gradient of the reconstruction
//!    objective `L(H') = 1/2 ||W1 * H' - U'||_F^2` with respect to the hidden
//!    representations;
//! 2. merge the 2s best-scored neurons with the active set, then keep the s
//!    of those with the largest column-summed hidden activations;
//! 3. recompute `V = U - W1 * H|_S` against the new active set.
//!
//! Greedy forward selection and top-k activation selection are provided as
//! baselines with the same output contract: an index set of at most `s`
//! retained neurons.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::{
    restrict_vector, top_k_by_magnitude, top_k_by_value, DenseMatrix, IndexSet,
};
use crate::mlp::{MultiLayerNet, TwoLayerNet};
use crate::mnist::BatchSampler;
use crate::rng::Prng;

/// How the candidate set is ranked on the importance totals.
///
/// `Value` follows the intuition that only large positive importances should
/// enter the active set; `Magnitude` ranks by absolute value. The choice only
/// matters when importances go negative, so it is exposed as a policy flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionPolicy {
    #[default]
    Value,
    Magnitude,
}

/// Default iteration budget; the active set is stable well before this on
/// every instance family studied here.
pub const DEFAULT_ITERATIONS: usize = 20;

/// Pruning parameters shared by the drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneParams {
    /// Target number of retained neurons.
    pub s: usize,
    /// Iteration budget `T`.
    pub iterations: usize,
    /// Mini-batch size for dataset-backed pruning.
    pub batch_size: usize,
    /// Sample a fresh mini-batch every iteration (dataset-backed only).
    pub resample: bool,
    pub policy: SelectionPolicy,
    /// Stop before `T` once the active set has been stable for 3 iterations.
    pub early_stop: bool,
    pub seed: u64,
}

impl PruneParams {
    pub fn new(s: usize, iterations: usize) -> Self {
        PruneParams {
            s,
            iterations,
            batch_size: 512,
            resample: false,
            policy: SelectionPolicy::Value,
            early_stop: false,
            seed: 0,
        }
    }

    /// Parameters with the default iteration budget of
    /// [`DEFAULT_ITERATIONS`].
    pub fn with_target(s: usize) -> Self {
        PruneParams::new(s, DEFAULT_ITERATIONS)
    }

    fn validate(&self, d_hid: usize) -> Result<()> {
        if self.s == 0 || self.s > d_hid {
            return Err(Error::SparsityOutOfRange {
                s: self.s,
                max: d_hid,
            });
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Evolving state of the pruning loop over a fixed batch.
#[derive(Debug, Clone)]
pub struct PruneState {
    /// Active neuron set after `t` iterations.
    pub active: IndexSet,
    pub t: usize,
    /// `V = U - W1 * H|_active`.
    pub residual: DenseMatrix,
    /// Dense output `U = W1 * H` for the current batch.
    pub dense_out: DenseMatrix,
    /// Column sums of the current hidden representations.
    pub h_sums: Vec<f64>,
}

impl PruneState {
    /// Fresh state: empty active set, residual equal to the dense output.
    pub fn init(w1: &DenseMatrix, h: &DenseMatrix) -> Result<Self> {
        let dense_out = w1.matmul(h)?;
        Ok(PruneState {
            active: IndexSet::empty(h.rows()),
            t: 0,
            residual: dense_out.clone(),
            dense_out,
            h_sums: h.mu(),
        })
    }
}

/// Per-iteration diagnostics of one pruning run.
#[derive(Debug, Clone, Default)]
pub struct PruneTrace {
    /// `||V||_F` before any iteration (the dense output norm).
    pub initial_residual_norm: f64,
    /// `||V_t||_F` after each iteration.
    pub residual_norms: Vec<f64>,
    /// Symmetric-difference size between consecutive active sets.
    pub active_change_counts: Vec<usize>,
    /// Active set after each iteration.
    pub active_sets: Vec<IndexSet>,
    /// Wall-clock per iteration, milliseconds.
    pub step_ms: Vec<f64>,
}

/// Result of a pruning run: final set plus diagnostics.
#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub selected: IndexSet,
    pub trace: PruneTrace,
}

/// Importance scores `Y = W1^T * V`; entry `(i, j)` scores neuron `i` on
/// example `j`.
pub fn importance(w1: &DenseMatrix, residual: &DenseMatrix) -> Result<DenseMatrix> {
    w1.matmul_transposed_self(residual)
}

/// Reconstruction objective `1/2 ||W1 * H - U'||_F^2` with `U'` held fixed.
pub fn reconstruction_loss(
    w1: &DenseMatrix,
    h: &DenseMatrix,
    u_prime: &DenseMatrix,
) -> Result<f64> {
    let diff = w1.matmul(h)?.sub(u_prime)?;
    Ok(0.5 * diff.frobenius_norm().powi(2))
}

/// Central finite-difference gradient of the reconstruction objective with
/// respect to each entry of `H`.
///
/// This is the independent oracle for [`importance`]: every probe re-evaluates
/// the objective from scratch rather than reusing any analytic structure.
pub fn importance_fd(
    w1: &DenseMatrix,
    h: &DenseMatrix,
    u_prime: &DenseMatrix,
    step: f64,
) -> Result<DenseMatrix> {
    if step <= 0.0 {
        return Err(Error::InvalidParameter(format!("bad fd step {step}")));
    }
    let mut grad = DenseMatrix::zeros(h.rows(), h.cols());
    let mut probe = h.clone();
    for c in 0..h.cols() {
        for r in 0..h.rows() {
            let orig = h.get(r, c);
            probe.set(r, c, orig + step);
            let plus = reconstruction_loss(w1, &probe, u_prime)?;
            probe.set(r, c, orig - step);
            let minus = reconstruction_loss(w1, &probe, u_prime)?;
            probe.set(r, c, orig);
            grad.set(r, c, (plus - minus) / (2.0 * step));
        }
    }
    Ok(grad)
}

/// Indices of the top `k` entries under `policy`, with exact zeros dropped
/// (support semantics).
fn top_support(v: &[f64], k: usize, policy: SelectionPolicy) -> Result<IndexSet> {
    let k = k.min(v.len());
    let picked = match policy {
        SelectionPolicy::Value => top_k_by_value(v, k)?,
        SelectionPolicy::Magnitude => top_k_by_magnitude(v, k)?,
    };
    let nonzero: Vec<usize> = picked.iter().filter(|&i| v[i] != 0.0).collect();
    IndexSet::new(v.len(), nonzero)
}

/// One pruning iteration over a fixed batch.
///
/// Executes exactly: `y = mu(W1^T V)`; `Omega` = supports of the 2s
/// top-ranked entries of `y` (clamped to the layer width); `Omega* = Omega
/// u S`; `b = mu(H)|_Omega*`; `S' =` supports of the s largest entries of
/// `b`; `V' = U - W1 * H|_S'`.
pub fn ispasp_step(
    state: PruneState,
    w1: &DenseMatrix,
    h: &DenseMatrix,
    params: &PruneParams,
) -> Result<PruneState> {
    let d_hid = h.rows();
    params.validate(d_hid)?;
    if w1.cols() != d_hid {
        return Err(Error::ShapeMismatch {
            op: "ispasp_step",
            left_rows: w1.rows(),
            left_cols: w1.cols(),
            right_rows: h.rows(),
            right_cols: h.cols(),
        });
    }
    let y = importance(w1, &state.residual)?.mu();
    let omega = top_support(&y, 2 * params.s, params.policy)?;
    let omega_star = omega.union(&state.active)?;
    let b = restrict_vector(&state.h_sums, &omega_star)?;
    // the merged set can be smaller than s; supports of zero entries never
    // survive either way
    let next_active = top_support(&b, params.s, SelectionPolicy::Value)?;
    let residual = state
        .dense_out
        .sub(&w1.matmul(&h.row_restrict(&next_active)?)?)?;
    Ok(PruneState {
        active: next_active,
        t: state.t + 1,
        residual,
        dense_out: state.dense_out,
        h_sums: state.h_sums,
    })
}

fn run_fixed(
    w1: &DenseMatrix,
    h: &DenseMatrix,
    params: &PruneParams,
) -> Result<PruneOutcome> {
    let mut state = PruneState::init(w1, h)?;
    let mut trace = PruneTrace {
        initial_residual_norm: state.residual.frobenius_norm(),
        ..PruneTrace::default()
    };
    let mut stable_for = 0usize;
    for _ in 0..params.iterations {
        let started = Instant::now();
        let next = ispasp_step(state.clone(), w1, h, params)?;
        let changed = state.active.symmetric_difference_count(&next.active);
        state = next;
        trace.step_ms.push(started.elapsed().as_secs_f64() * 1e3);
        trace.residual_norms.push(state.residual.frobenius_norm());
        trace.active_change_counts.push(changed);
        trace.active_sets.push(state.active.clone());
        stable_for = if changed == 0 { stable_for + 1 } else { 0 };
        if params.early_stop && stable_for >= 3 {
            break;
        }
    }
    Ok(PruneOutcome {
        selected: state.active,
        trace,
    })
}

/// Prune directly against a fixed hidden-representation matrix (the whole
/// synthetic dataset, or one frozen batch).
pub fn ispasp_prune_matrix(
    w1: &DenseMatrix,
    h: &DenseMatrix,
    params: &PruneParams,
) -> Result<PruneOutcome> {
    params.validate(h.rows())?;
    run_fixed(w1, h, params)
}

/// Dataset-backed pruning of a two-layer network.
///
/// With `resample` set, a fresh mini-batch is drawn each iteration and `U`,
/// `h`, and `V` are recomputed against it before the step; otherwise one
/// batch is drawn and the fixed-matrix path is used.
pub fn ispasp_prune_net(
    net: &TwoLayerNet,
    sampler: &mut BatchSampler,
    params: &PruneParams,
) -> Result<PruneOutcome> {
    params.validate(net.d_hid())?;
    if !params.resample {
        let (x, _) = sampler.next_batch();
        let h = net.hidden(&x)?;
        return run_fixed(net.w1(), &h, params);
    }
    let w1 = net.w1();
    let mut active = IndexSet::empty(net.d_hid());
    let mut trace = PruneTrace::default();
    let mut stable_for = 0usize;
    for t in 0..params.iterations {
        let started = Instant::now();
        let (x, _) = sampler.next_batch();
        let h = net.hidden(&x)?;
        let dense_out = w1.matmul(&h)?;
        let residual = if active.is_empty() {
            dense_out.clone()
        } else {
            dense_out.sub(&w1.matmul(&h.row_restrict(&active)?)?)?
        };
        if t == 0 {
            trace.initial_residual_norm = residual.frobenius_norm();
        }
        let state = PruneState {
            active: active.clone(),
            t,
            residual,
            dense_out,
            h_sums: h.mu(),
        };
        let next = ispasp_step(state, w1, &h, params)?;
        let changed = active.symmetric_difference_count(&next.active);
        active = next.active;
        trace.step_ms.push(started.elapsed().as_secs_f64() * 1e3);
        trace.residual_norms.push(next.residual.frobenius_norm());
        trace.active_change_counts.push(changed);
        trace.active_sets.push(active.clone());
        stable_for = if changed == 0 { stable_for + 1 } else { 0 };
        if params.early_stop && stable_for >= 3 {
            break;
        }
    }
    Ok(PruneOutcome {
        selected: active,
        trace,
    })
}

/// Result of greedily pruning every hidden layer of a deep network.
#[derive(Debug, Clone)]
pub struct MultilayerPruneOutcome {
    pub pruned: MultiLayerNet,
    pub selections: Vec<IndexSet>,
    pub traces: Vec<PruneTrace>,
}

/// Prune each hidden layer in order, first to last.
///
/// Layer `i` is pruned against the hidden representations the already-pruned
/// prefix of the network produces, pairing the layer's outgoing weights with
/// those representations; its incoming rows and outgoing columns are then
/// compacted before moving on.
pub fn ispasp_prune_multilayer(
    net: &MultiLayerNet,
    x: &DenseMatrix,
    per_layer: &[PruneParams],
) -> Result<MultilayerPruneOutcome> {
    let layers = net.hidden_layers();
    if per_layer.len() != layers {
        return Err(Error::LayerCountMismatch {
            expected: layers,
            got: per_layer.len(),
        });
    }
    let mut weights = net.weights().to_vec();
    let mut input = x.clone();
    let mut selections = Vec::with_capacity(layers);
    let mut traces = Vec::with_capacity(layers);
    for (layer, params) in per_layer.iter().enumerate() {
        let h = weights[layer].matmul(&input)?.map(|v| v.max(0.0));
        params.validate(h.rows())?;
        let outcome = run_fixed(&weights[layer + 1], &h, params)?;
        if outcome.selected.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "layer {layer} pruned to an empty support"
            )));
        }
        weights[layer] = weights[layer].select_rows(&outcome.selected)?;
        weights[layer + 1] = weights[layer + 1].select_cols(&outcome.selected)?;
        input = h.select_rows(&outcome.selected)?;
        selections.push(outcome.selected);
        traces.push(outcome.trace);
    }
    Ok(MultilayerPruneOutcome {
        pruned: MultiLayerNet::new(weights)?,
        selections,
        traces,
    })
}

/// Mean cross-entropy of column-major logits against labels.
fn ce_from_logits(logits: &[f64], d_out: usize, labels: &[u8]) -> f64 {
    let mut total = 0.0;
    for (j, &label) in labels.iter().enumerate() {
        let col = &logits[j * d_out..(j + 1) * d_out];
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = col.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += max + log_sum - col[usize::from(label)];
    }
    total / labels.len() as f64
}

/// Greedy forward selection baseline.
///
/// Starting from the empty set, each of `s` rounds samples a fresh
/// mini-batch and adds the neuron whose inclusion minimizes classification
/// loss over that batch. `candidate_pool` limits each round's search to a
/// seeded random subset of the not-yet-selected neurons (the stochastic
/// variant); `None` searches exhaustively.
pub fn gfs_prune(
    net: &TwoLayerNet,
    sampler: &mut BatchSampler,
    s: usize,
    candidate_pool: Option<usize>,
    seed: u64,
) -> Result<IndexSet> {
    let d_hid = net.d_hid();
    if s == 0 || s > d_hid {
        return Err(Error::SparsityOutOfRange { s, max: d_hid });
    }
    if candidate_pool == Some(0) {
        return Err(Error::InvalidParameter("candidate pool must be positive".into()));
    }
    let w1 = net.w1();
    let d_out = net.d_out();
    let mut rng = Prng::stream(seed, "gfs/candidates");
    let mut selected: Vec<usize> = Vec::with_capacity(s);
    let mut is_selected = vec![false; d_hid];
    for _ in 0..s {
        let (x, labels) = sampler.next_batch();
        let h = net.hidden(&x)?;
        let b = labels.len();
        // logits of the current sub-network on this batch
        let mut base = vec![0.0; d_out * b];
        for &neuron in &selected {
            accumulate_neuron(&mut base, w1, &h, neuron, d_out);
        }
        let remaining: Vec<usize> = (0..d_hid).filter(|&i| !is_selected[i]).collect();
        let candidates: Vec<usize> = match candidate_pool {
            Some(pool) if pool < remaining.len() => rng
                .sample_distinct(remaining.len(), pool)
                .into_iter()
                .map(|i| remaining[i])
                .collect(),
            _ => remaining,
        };
        let mut buffer = vec![0.0; d_out * b];
        let mut best: Option<(usize, f64)> = None;
        for &candidate in &candidates {
            buffer.copy_from_slice(&base);
            accumulate_neuron(&mut buffer, w1, &h, candidate, d_out);
            let loss = ce_from_logits(&buffer, d_out, &labels);
            // strict improvement keeps ties on the lowest index
            if best.is_none_or(|(_, cur)| loss < cur) {
                best = Some((candidate, loss));
            }
        }
        let (winner, _) = best.expect("candidate list is never empty while |S| < s");
        is_selected[winner] = true;
        selected.push(winner);
    }
    IndexSet::new(d_hid, selected)
}

/// Add neuron `i`'s rank-one contribution `w1[:, i] * h[i, :]` to column-major
/// logits.
fn accumulate_neuron(
    logits: &mut [f64],
    w1: &DenseMatrix,
    h: &DenseMatrix,
    neuron: usize,
    d_out: usize,
) {
    let weights = w1.column(neuron);
    for j in 0..h.cols() {
        let activation = h.get(neuron, j);
        if activation == 0.0 {
            continue;
        }
        let col = &mut logits[j * d_out..(j + 1) * d_out];
        for (acc, &w) in col.iter_mut().zip(weights) {
            *acc += w * activation;
        }
    }
}

/// Top-k activation baseline: one batch, one pass, the `s` neurons with the
/// largest column-summed hidden representations.
pub fn topk_prune(net: &TwoLayerNet, batch: &DenseMatrix, s: usize) -> Result<IndexSet> {
    if s == 0 || s > net.d_hid() {
        return Err(Error::SparsityOutOfRange {
            s,
            max: net.d_hid(),
        });
    }
    top_k_by_value(&net.hidden(batch)?.mu(), s)
}
