//! Bound-soundness study: construct seeded Gaussian instances, run the
//! pruner, and overlay the measured traces with the hidden-residual,
//! recursion, and output bounds. Also sweeps the noise bound over every
//! target size and runs the planted-support recovery check.
//!
//! The restricted isometry premise is verified by sampling, which yields a
//! lower bound on the true constant; each row records the estimate and
//! whether it clears the 0.1 threshold, and any bound violation is reported
//! together with the premise status so an unverified premise is never
//! silently blamed on the pruner.

use crate::bounds::{
    best_s_row_sparse, lemma_hidden_residual_bound, lemma_noise_bound, recursion_step_bound,
    rip_constant, theorem_output_bound, RipMode,
};
use crate::error::Result;
use crate::matrix::{l1_norm, l2_norm};
use crate::pruner::{ispasp_prune_matrix, PruneParams};
use crate::rng::derive_seed;
use crate::synth::{gen_compressible, gen_exact_row_sparse, gen_gaussian, CompressibleSpec};

use super::config::BoundsConfig;
use super::csvfmt::Table;

pub const TRACE_SCHEMA: &str = "bounds-trace-v1";
pub const NOISE_SCHEMA: &str = "bounds-noise-v1";
pub const RECOVERY_SCHEMA: &str = "bounds-recovery-v1";

/// The isometry premise adopted from the analysis.
pub const DELTA_PREMISE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BoundsOutput {
    pub trace_csv: String,
    pub noise_csv: String,
    pub recovery_csv: String,
    /// Human-readable description of every bound violation, naming the
    /// premise status of the offending instance.
    pub violations: Vec<String>,
    /// Noise-bound failures across the sweep (should be zero).
    pub noise_violations: usize,
    /// Recovery instances that missed the planted support or tolerance.
    pub recovery_failures: usize,
    /// Sampled isometry lower bound per instance.
    pub deltas: Vec<f64>,
}

pub fn run_bounds(cfg: &BoundsConfig) -> Result<BoundsOutput> {
    cfg.validate()?;
    let mut trace = Table::new(&[
        "schema",
        "run_id",
        "instance",
        "t",
        "rows",
        "d_hid",
        "b",
        "s",
        "p",
        "r_magnitude",
        "w1_seed",
        "h_seed",
        "rip_samples",
        "delta4s_lower_bound",
        "delta_premise_ok",
        "measured_hidden",
        "hidden_bound",
        "recursion_bound",
        "measured_output",
        "output_bound",
    ]);
    let mut violations = Vec::new();
    let mut deltas = Vec::new();
    let mut run_id = 0usize;

    for instance in 0..cfg.instances {
        let w1_seed = derive_seed(cfg.seed, &format!("bounds/w1/{instance}"));
        let h_seed = derive_seed(cfg.seed, &format!("bounds/h/{instance}"));
        let w1 = gen_gaussian(cfg.rows, cfg.d_hid, 1.0 / (cfg.rows as f64).sqrt(), w1_seed);
        let spec = CompressibleSpec {
            d_hid: cfg.d_hid,
            b: cfg.b,
            p: cfg.p,
            r: cfg.r_magnitude,
            seed: h_seed,
        };
        let h = gen_compressible(&spec)?;
        let split = best_s_row_sparse(&h, cfg.s)?;

        let rip = rip_constant(&w1, 4 * cfg.s, RipMode::Sampled, cfg.rip_samples, w1_seed)?;
        let premise_ok = rip.delta <= DELTA_PREMISE;
        deltas.push(rip.delta);
        let premise_note = if premise_ok {
            format!("delta_4s premise verified (sampled {:.4})", rip.delta)
        } else {
            format!(
                "premise failed: sampled delta_4s = {:.4} > {DELTA_PREMISE}",
                rip.delta
            )
        };

        let outcome = ispasp_prune_matrix(&w1, &h, &PruneParams::new(cfg.s, cfg.iterations))?;
        let mu_h = h.mu();
        let mut prev_measured = l2_norm(&mu_h);
        for (step, active) in outcome.trace.active_sets.iter().enumerate() {
            let t = step + 1;
            // mu(H - H|_S) equals mu(H) with the active entries zeroed
            let mut residual_sums = mu_h.clone();
            for i in active.iter() {
                residual_sums[i] = 0.0;
            }
            let measured_hidden = l2_norm(&residual_sums);
            let hidden_bound = lemma_hidden_residual_bound(&h, &split.e, cfg.s, t)?;
            // the recursion uses the set entering the iteration
            let entering = if step == 0 {
                None
            } else {
                Some(&outcome.trace.active_sets[step - 1])
            };
            let mut e_hat = split.e.clone();
            if let Some(set) = entering {
                e_hat = e_hat.sub(&e_hat.row_restrict(set)?)?;
            }
            let rec_bound = recursion_step_bound(prev_measured, &e_hat, cfg.s);
            let measured_output = outcome.trace.residual_norms[step];
            let output_bound = theorem_output_bound(&w1, &h, &split.e, cfg.s, t)?;

            for (name, measured, bound) in [
                ("hidden", measured_hidden, hidden_bound),
                ("recursion", measured_hidden, rec_bound),
                ("output", measured_output, output_bound),
            ] {
                if measured > bound {
                    violations.push(format!(
                        "instance {instance} t {t}: {name} bound violated \
                         ({measured} > {bound}); {premise_note}"
                    ));
                }
            }

            trace.push(vec![
                TRACE_SCHEMA.into(),
                run_id.to_string(),
                instance.to_string(),
                t.to_string(),
                cfg.rows.to_string(),
                cfg.d_hid.to_string(),
                cfg.b.to_string(),
                cfg.s.to_string(),
                cfg.p.to_string(),
                cfg.r_magnitude.to_string(),
                w1_seed.to_string(),
                h_seed.to_string(),
                cfg.rip_samples.to_string(),
                rip.delta.to_string(),
                premise_ok.to_string(),
                measured_hidden.to_string(),
                hidden_bound.to_string(),
                rec_bound.to_string(),
                measured_output.to_string(),
                output_bound.to_string(),
            ]);
            run_id += 1;
            prev_measured = measured_hidden;
        }
    }

    // noise-bound sweep over every target size, per instance
    let mut noise = Table::new(&[
        "schema",
        "run_id",
        "instance",
        "d_hid",
        "b",
        "p",
        "r_magnitude",
        "h_seed",
        "s",
        "measured_mu_e_l1",
        "noise_bound",
        "holds",
    ]);
    let mut noise_violations = 0usize;
    let mut noise_run_id = 0usize;
    for instance in 0..cfg.instances {
        let h_seed = derive_seed(cfg.seed, &format!("bounds/h/{instance}"));
        let spec = CompressibleSpec {
            d_hid: cfg.d_hid,
            b: cfg.b,
            p: cfg.p,
            r: cfg.r_magnitude,
            seed: h_seed,
        };
        let h = gen_compressible(&spec)?;
        for s in 1..=cfg.d_hid {
            let measured = l1_norm(&best_s_row_sparse(&h, s)?.e.mu());
            let bound = lemma_noise_bound(cfg.r_magnitude, cfg.p, s)?;
            let holds = measured <= bound;
            if !holds {
                noise_violations += 1;
            }
            noise.push(vec![
                NOISE_SCHEMA.into(),
                noise_run_id.to_string(),
                instance.to_string(),
                cfg.d_hid.to_string(),
                cfg.b.to_string(),
                cfg.p.to_string(),
                cfg.r_magnitude.to_string(),
                h_seed.to_string(),
                s.to_string(),
                measured.to_string(),
                bound.to_string(),
                holds.to_string(),
            ]);
            noise_run_id += 1;
        }
    }

    // planted-support recovery
    let mut recovery = Table::new(&[
        "schema",
        "run_id",
        "instance",
        "rows",
        "d_hid",
        "b",
        "s",
        "w1_seed",
        "h_seed",
        "support_recovered",
        "residual_ratio",
    ]);
    let mut recovery_failures = 0usize;
    for instance in 0..cfg.recovery_instances {
        let w1_seed = derive_seed(cfg.seed, &format!("bounds/recovery/w1/{instance}"));
        let h_seed = derive_seed(cfg.seed, &format!("bounds/recovery/h/{instance}"));
        let w1 = gen_gaussian(cfg.rows, cfg.d_hid, 1.0 / (cfg.rows as f64).sqrt(), w1_seed);
        let h = gen_exact_row_sparse(cfg.d_hid, cfg.b, cfg.s, h_seed)?;
        let outcome = ispasp_prune_matrix(&w1, &h, &PruneParams::new(cfg.s, cfg.iterations))?;
        let planted = h.row_support();
        let recovered = outcome.selected == planted;
        let u_norm = outcome.trace.initial_residual_norm;
        let ratio = outcome
            .trace
            .residual_norms
            .last()
            .copied()
            .unwrap_or(u_norm)
            / u_norm;
        if !recovered || ratio > 1e-8 {
            recovery_failures += 1;
        }
        recovery.push(vec![
            RECOVERY_SCHEMA.into(),
            instance.to_string(),
            instance.to_string(),
            cfg.rows.to_string(),
            cfg.d_hid.to_string(),
            cfg.b.to_string(),
            cfg.s.to_string(),
            w1_seed.to_string(),
            h_seed.to_string(),
            recovered.to_string(),
            ratio.to_string(),
        ]);
    }

    Ok(BoundsOutput {
        trace_csv: trace.to_csv(),
        noise_csv: noise.to_csv(),
        recovery_csv: recovery.to_csv(),
        violations,
        noise_violations,
        recovery_failures,
        deltas,
    })
}
