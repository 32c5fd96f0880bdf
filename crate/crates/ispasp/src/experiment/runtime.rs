//! Wall-clock comparison of the pruners on identical synthetic two-layer
//! instances across a grid of target sizes.
//!
//! One network and dataset are shared by every timed run; for a given
//! (size, repeat) pair all algorithms see the same batch stream, so the
//! comparison isolates algorithmic cost. Medians are reported over the
//! repeats.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::Result;
use crate::mlp::TwoLayerNet;
use crate::mnist::{BatchSampler, Dataset, SplitTag};
use crate::pruner::{gfs_prune, ispasp_prune_net, PruneParams};
use crate::rng::{derive_seed, Prng};
use crate::synth::{gen_gaussian, gen_gaussian_weight};

use super::config::RuntimeConfig;
use super::csvfmt::Table;

pub const RUNTIME_SCHEMA: &str = "runtime-v1";

#[derive(Debug, Clone)]
pub struct RuntimeOutput {
    pub csv: String,
    /// Median wall-clock in milliseconds per (algorithm, s).
    pub medians: BTreeMap<(String, usize), f64>,
    /// Every timed run respected the size contract.
    pub all_sizes_ok: bool,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn run_runtime(cfg: &RuntimeConfig) -> Result<RuntimeOutput> {
    cfg.validate()?;
    let net = TwoLayerNet::new(
        gen_gaussian_weight(cfg.d_hid, cfg.d_in, derive_seed(cfg.seed, "runtime/w0")),
        gen_gaussian_weight(cfg.d_out, cfg.d_hid, derive_seed(cfg.seed, "runtime/w1")),
    )?;
    let features = gen_gaussian(
        cfg.d_in,
        cfg.dataset_size,
        1.0,
        derive_seed(cfg.seed, "runtime/x"),
    );
    let mut label_rng = Prng::stream(cfg.seed, "runtime/labels");
    let labels: Vec<u8> = (0..cfg.dataset_size)
        .map(|_| label_rng.below(cfg.d_out) as u8)
        .collect();
    let data = Dataset::from_parts(features, labels, SplitTag::Train)?;

    let mut table = Table::new(&[
        "schema",
        "run_id",
        "algorithm",
        "d_hid",
        "s",
        "repeat",
        "batch_size",
        "iterations",
        "gfs_pool",
        "selected_size",
        "wall_ms",
    ]);
    let mut samples: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    let mut all_sizes_ok = true;
    let mut run_id = 0usize;
    for &s in &cfg.s_grid() {
        for repeat in 0..cfg.repeats {
            let batch_seed = derive_seed(cfg.seed, &format!("runtime/batches/s{s}/r{repeat}"));
            let gfs_seed = derive_seed(cfg.seed, &format!("runtime/gfs/s{s}/r{repeat}"));

            let timed = |algorithm: &str| -> Result<(usize, f64)> {
                let mut sampler = BatchSampler::new(&data, cfg.batch_size, batch_seed)?;
                let started = Instant::now();
                let selected = match algorithm {
                    "ispasp" => {
                        let mut params = PruneParams::new(s, cfg.iterations);
                        params.batch_size = cfg.batch_size;
                        params.resample = true;
                        ispasp_prune_net(&net, &mut sampler, &params)?.selected
                    }
                    "gfs" => gfs_prune(&net, &mut sampler, s, None, gfs_seed)?,
                    "gfs_pool" => {
                        gfs_prune(&net, &mut sampler, s, Some(cfg.gfs_pool), gfs_seed)?
                    }
                    other => unreachable!("unknown timed algorithm {other}"),
                };
                Ok((selected.len(), started.elapsed().as_secs_f64() * 1e3))
            };

            for algorithm in ["ispasp", "gfs", "gfs_pool"] {
                let (size, wall_ms) = timed(algorithm)?;
                if size > s {
                    all_sizes_ok = false;
                }
                samples
                    .entry((algorithm.to_string(), s))
                    .or_default()
                    .push(wall_ms);
                table.push(vec![
                    RUNTIME_SCHEMA.into(),
                    run_id.to_string(),
                    algorithm.to_string(),
                    cfg.d_hid.to_string(),
                    s.to_string(),
                    repeat.to_string(),
                    cfg.batch_size.to_string(),
                    cfg.iterations.to_string(),
                    cfg.gfs_pool.to_string(),
                    size.to_string(),
                    wall_ms.to_string(),
                ]);
                run_id += 1;
            }
        }
    }
    let medians = samples
        .into_iter()
        .map(|(key, values)| (key, median(values)))
        .collect();
    Ok(RuntimeOutput {
        csv: table.to_csv(),
        medians,
        all_sizes_ok,
    })
}
