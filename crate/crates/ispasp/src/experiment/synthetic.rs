//! Compressibility sweep: prune synthetic hidden representations at every
//! target size and fit the decay of the squared output residual.
//!
//! One weight matrix is shared by all cells with the same hidden dimension;
//! each (p, d_hid) cell draws its own compressible matrices. Cells run
//! concurrently up to the configured worker count, each owning its seeded
//! streams, and rows are merged in run-id order so the output is identical
//! regardless of scheduling.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::matrix::DenseMatrix;
use crate::pruner::{ispasp_prune_matrix, PruneParams};
use crate::rng::derive_seed;
use crate::synth::{gen_compressible, gen_gaussian_weight, CompressibleSpec};

use super::config::SyntheticConfig;
use super::csvfmt::Table;
use super::slope::{fit_loglog_slope, SlopeFit};

pub const SYNTHETIC_SCHEMA: &str = "synthetic-v1";
pub const SLOPES_SCHEMA: &str = "synthetic-slopes-v1";

/// One pruning run (a single target size on one matrix).
#[derive(Debug, Clone)]
pub struct SyntheticRecord {
    pub run_id: usize,
    pub p: f64,
    pub d_hid: usize,
    pub matrix: usize,
    pub matrix_seed: u64,
    pub w1_seed: u64,
    pub s: usize,
    pub v_frob_sq: f64,
    pub wall_ms: f64,
}

/// Slope fit for one (p, d_hid) cell.
#[derive(Debug, Clone)]
pub struct SlopeRecord {
    pub p: f64,
    pub d_hid: usize,
    pub fit: SlopeFit,
    pub s_lo: usize,
    pub s_hi: usize,
    /// Reference exponent of the theoretical rate, reported alongside.
    pub theory_exponent: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticOutput {
    pub runs_csv: String,
    pub slopes_csv: String,
    pub records: Vec<SyntheticRecord>,
    pub slopes: Vec<SlopeRecord>,
    /// Generated matrices, labeled, when `dump_matrices` is set.
    pub matrices: Vec<(String, DenseMatrix)>,
}

struct Cell {
    first_run_id: usize,
    p: f64,
    d_hid: usize,
    matrix: usize,
    matrix_seed: u64,
    w1_seed: u64,
}

fn run_cell(cell: &Cell, cfg: &SyntheticConfig, w1: &DenseMatrix) -> Result<Vec<SyntheticRecord>> {
    let spec = CompressibleSpec {
        d_hid: cell.d_hid,
        b: cfg.b,
        p: cell.p,
        r: cfg.r_magnitude,
        seed: cell.matrix_seed,
    };
    let h = gen_compressible(&spec)?;
    let mut records = Vec::new();
    for (offset, s) in (1..=cell.d_hid).step_by(cfg.s_stride).enumerate() {
        let params = PruneParams::new(s, cfg.iterations);
        let started = Instant::now();
        let outcome = ispasp_prune_matrix(w1, &h, &params)?;
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let v_frob = outcome
            .trace
            .residual_norms
            .last()
            .copied()
            .unwrap_or(outcome.trace.initial_residual_norm);
        records.push(SyntheticRecord {
            run_id: cell.first_run_id + offset,
            p: cell.p,
            d_hid: cell.d_hid,
            matrix: cell.matrix,
            matrix_seed: cell.matrix_seed,
            w1_seed: cell.w1_seed,
            s,
            v_frob_sq: v_frob * v_frob,
            wall_ms,
        });
    }
    Ok(records)
}

pub fn run_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticOutput> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut next_run_id = 0usize;
    for &d_hid in &cfg.d_hid_values {
        let w1_seed = derive_seed(cfg.seed, &format!("synthetic/w1/d{d_hid}"));
        for &p in &cfg.p_values {
            for matrix in 0..cfg.matrices_per_cell {
                let matrix_seed =
                    derive_seed(cfg.seed, &format!("synthetic/h/d{d_hid}/p{p}/m{matrix}"));
                cells.push(Cell {
                    first_run_id: next_run_id,
                    p,
                    d_hid,
                    matrix,
                    matrix_seed,
                    w1_seed,
                });
                next_run_id += (1..=d_hid).step_by(cfg.s_stride).count();
            }
        }
    }

    // one shared weight matrix per hidden dimension
    let shared_w1: Vec<(usize, DenseMatrix)> = cfg
        .d_hid_values
        .iter()
        .map(|&d_hid| {
            let seed = derive_seed(cfg.seed, &format!("synthetic/w1/d{d_hid}"));
            (d_hid, gen_gaussian_weight(cfg.d_out, d_hid, seed))
        })
        .collect();
    let w1_for = |d_hid: usize| -> &DenseMatrix {
        &shared_w1
            .iter()
            .find(|(d, _)| *d == d_hid)
            .expect("weight generated for every hidden dimension")
            .1
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| crate::error::Error::Config(format!("worker pool: {e}")))?;
    let cell_results: Vec<Result<Vec<SyntheticRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell(cell, cfg, w1_for(cell.d_hid)))
            .collect()
    });
    let mut records = Vec::with_capacity(next_run_id);
    for result in cell_results {
        records.extend(result?);
    }
    records.sort_by_key(|r| r.run_id);

    let mut runs = Table::new(&[
        "schema",
        "run_id",
        "p",
        "d_hid",
        "b",
        "r_magnitude",
        "d_out",
        "iterations",
        "matrix",
        "matrix_seed",
        "w1_seed",
        "s",
        "v_frob_sq",
        "wall_ms",
    ]);
    for r in &records {
        runs.push(vec![
            SYNTHETIC_SCHEMA.into(),
            r.run_id.to_string(),
            r.p.to_string(),
            r.d_hid.to_string(),
            cfg.b.to_string(),
            cfg.r_magnitude.to_string(),
            cfg.d_out.to_string(),
            cfg.iterations.to_string(),
            r.matrix.to_string(),
            r.matrix_seed.to_string(),
            r.w1_seed.to_string(),
            r.s.to_string(),
            r.v_frob_sq.to_string(),
            r.wall_ms.to_string(),
        ]);
    }

    let slopes = fit_slopes(cfg, &records)?;
    let mut slopes_table = Table::new(&[
        "schema",
        "p",
        "d_hid",
        "s_lo",
        "s_hi",
        "n_used",
        "n_excluded",
        "slope",
        "intercept",
        "r_squared",
        "theory_exponent",
    ]);
    for s in &slopes {
        slopes_table.push(vec![
            SLOPES_SCHEMA.into(),
            s.p.to_string(),
            s.d_hid.to_string(),
            s.s_lo.to_string(),
            s.s_hi.to_string(),
            s.fit.n_used.to_string(),
            s.fit.n_excluded.to_string(),
            s.fit.slope.to_string(),
            s.fit.intercept.to_string(),
            s.fit.r_squared.to_string(),
            s.theory_exponent.to_string(),
        ]);
    }

    let mut matrices = Vec::new();
    if cfg.dump_matrices {
        for cell in &cells {
            let spec = CompressibleSpec {
                d_hid: cell.d_hid,
                b: cfg.b,
                p: cell.p,
                r: cfg.r_magnitude,
                seed: cell.matrix_seed,
            };
            let label = format!("h_d{}_p{}_m{}", cell.d_hid, cell.p, cell.matrix);
            matrices.push((label, gen_compressible(&spec)?));
        }
        for (d_hid, w1) in &shared_w1 {
            matrices.push((format!("w1_d{d_hid}"), w1.clone()));
        }
    }

    Ok(SyntheticOutput {
        runs_csv: runs.to_csv(),
        slopes_csv: slopes_table.to_csv(),
        records,
        slopes,
        matrices,
    })
}

/// Average the squared residual over the matrices of each (p, d_hid) cell
/// and fit a log-log slope over the configured window.
fn fit_slopes(cfg: &SyntheticConfig, records: &[SyntheticRecord]) -> Result<Vec<SlopeRecord>> {
    let mut slopes = Vec::new();
    for &d_hid in &cfg.d_hid_values {
        let s_lo = (cfg.fit_lo * d_hid as f64).ceil() as usize;
        let s_hi = (cfg.fit_hi * d_hid as f64).floor() as usize;
        for &p in &cfg.p_values {
            let mut points = Vec::new();
            for s in (1..=d_hid).step_by(cfg.s_stride) {
                if s < s_lo || s > s_hi {
                    continue;
                }
                let values: Vec<f64> = records
                    .iter()
                    .filter(|r| r.d_hid == d_hid && r.p == p && r.s == s)
                    .map(|r| r.v_frob_sq)
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                points.push((s as f64, mean));
            }
            let fit = fit_loglog_slope(&points)?;
            slopes.push(SlopeRecord {
                p,
                d_hid,
                fit,
                s_lo,
                s_hi,
                theory_exponent: crate::bounds::theorem_final_rate(p)?,
            });
        }
    }
    Ok(slopes)
}

/// Re-fit slopes from a previously written runs CSV (the `slope` command).
pub fn slopes_from_runs_csv(csv: &str, fit_lo: f64, fit_hi: f64) -> Result<String> {
    use crate::error::Error;
    let (header, rows) = super::csvfmt::parse_csv(csv)?;
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("runs csv missing column `{name}`")))
    };
    let (c_p, c_d, c_s, c_v) = (col("p")?, col("d_hid")?, col("s")?, col("v_frob_sq")?);
    let mut parsed: Vec<(f64, usize, usize, f64)> = Vec::new();
    for row in &rows {
        let p: f64 = row[c_p]
            .parse()
            .map_err(|_| Error::Config("bad p value".into()))?;
        let d: usize = row[c_d]
            .parse()
            .map_err(|_| Error::Config("bad d_hid value".into()))?;
        let s: usize = row[c_s]
            .parse()
            .map_err(|_| Error::Config("bad s value".into()))?;
        let v: f64 = row[c_v]
            .parse()
            .map_err(|_| Error::Config("bad v_frob_sq value".into()))?;
        parsed.push((p, d, s, v));
    }
    let mut cells: Vec<(f64, usize)> = parsed.iter().map(|&(p, d, _, _)| (p, d)).collect();
    cells.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)));
    cells.dedup();
    let mut table = Table::new(&[
        "schema",
        "p",
        "d_hid",
        "s_lo",
        "s_hi",
        "n_used",
        "n_excluded",
        "slope",
        "intercept",
        "r_squared",
        "theory_exponent",
    ]);
    for (p, d_hid) in cells {
        let s_lo = (fit_lo * d_hid as f64).ceil() as usize;
        let s_hi = (fit_hi * d_hid as f64).floor() as usize;
        let mut by_s: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for &(rp, rd, rs, rv) in &parsed {
            if rp == p && rd == d_hid && rs >= s_lo && rs <= s_hi {
                by_s.entry(rs).or_default().push(rv);
            }
        }
        let points: Vec<(f64, f64)> = by_s
            .iter()
            .map(|(&s, vs)| (s as f64, vs.iter().sum::<f64>() / vs.len() as f64))
            .collect();
        let fit = fit_loglog_slope(&points)?;
        table.push(vec![
            SLOPES_SCHEMA.into(),
            p.to_string(),
            d_hid.to_string(),
            s_lo.to_string(),
            s_hi.to_string(),
            fit.n_used.to_string(),
            fit.n_excluded.to_string(),
            fit.slope.to_string(),
            fit.intercept.to_string(),
            fit.r_squared.to_string(),
            crate::bounds::theorem_final_rate(p)?.to_string(),
        ]);
    }
    Ok(table.to_csv())
}
