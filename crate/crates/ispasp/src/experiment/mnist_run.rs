//! Digit-classification pruning study: pretrain a dense two-layer network,
//! prune it with each algorithm at each target size over several trials, and
//! record accuracy before and after fine-tuning.
//!
//! The dense network is trained once per configuration; trials vary the
//! pruning and fine-tuning streams. Held-out accuracy comes from the `t10k`
//! files when the data directory has them, otherwise from the seeded
//! validation split (recorded in the `test_source` column).

use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::IndexSet;
use crate::mlp::{
    accuracy, fine_tune, load_checkpoint, save_checkpoint, sgd_train, TrainConfig, TwoLayerNet,
};
use crate::mnist::{load_idx_pair, make_splits, BatchSampler, Dataset, SplitTag};
use crate::pruner::{gfs_prune, ispasp_prune_net, topk_prune, PruneParams};
use crate::rng::derive_seed;
use crate::synth::gen_gaussian_weight;

use super::config::{Algorithm, MnistConfig};
use super::csvfmt::Table;

pub const MNIST_SCHEMA: &str = "mnist-v1";
const CLASSES: usize = 10;

/// Loaded train/test environment.
#[derive(Debug)]
pub struct MnistEnv {
    pub train: Dataset,
    pub test: Dataset,
    pub test_source: &'static str,
}

pub fn load_env(cfg: &MnistConfig) -> Result<MnistEnv> {
    let dir = cfg.data_dir.as_ref().ok_or_else(|| {
        Error::Config("no data directory: set `data_dir` or the MNIST_DATA_DIR env var".into())
    })?;
    let full = load_idx_pair(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
        SplitTag::Train,
    )?;
    let (train, val) = make_splits(&full, cfg.val_fraction, derive_seed(cfg.seed, "mnist/split"))?;
    let t10k_images = dir.join("t10k-images-idx3-ubyte");
    let t10k_labels = dir.join("t10k-labels-idx1-ubyte");
    if t10k_images.is_file() && t10k_labels.is_file() {
        let test = load_idx_pair(&t10k_images, &t10k_labels, SplitTag::Test)?;
        return Ok(MnistEnv {
            train,
            test,
            test_source: "t10k",
        });
    }
    let val = val.ok_or_else(|| {
        Error::Config("no t10k files and val_fraction = 0: nothing to evaluate on".into())
    })?;
    Ok(MnistEnv {
        train,
        test: val,
        test_source: "val",
    })
}

/// Pretrain the dense network, or load it from a checkpoint when one is
/// configured; saves a checkpoint afterwards when asked to.
pub fn pretrain_or_load(cfg: &MnistConfig, env: &MnistEnv) -> Result<(TwoLayerNet, Vec<f64>)> {
    let d_in = env.train.d_in();
    let (net, curve) = if let Some(path) = &cfg.checkpoint_load {
        let layers = load_checkpoint(path)?;
        if layers.len() != 2 {
            return Err(Error::BadCheckpoint(format!(
                "expected 2 layers, found {}",
                layers.len()
            )));
        }
        let net = TwoLayerNet::new(layers[0].clone(), layers[1].clone())?;
        if net.d_in() != d_in || net.d_hid() != cfg.d_hid || net.d_out() != CLASSES {
            return Err(Error::BadCheckpoint(format!(
                "checkpoint is {}x{}x{}, config wants {}x{}x{}",
                net.d_in(),
                net.d_hid(),
                net.d_out(),
                d_in,
                cfg.d_hid,
                CLASSES
            )));
        }
        (net, Vec::new())
    } else {
        let init = TwoLayerNet::new(
            gen_gaussian_weight(cfg.d_hid, d_in, derive_seed(cfg.seed, "mnist/init/w0")),
            gen_gaussian_weight(CLASSES, cfg.d_hid, derive_seed(cfg.seed, "mnist/init/w1")),
        )?;
        let mut train_cfg =
            TrainConfig::mnist_protocol(cfg.pretrain_epochs, derive_seed(cfg.seed, "mnist/pretrain"));
        train_cfg.lr = cfg.lr;
        sgd_train(&init, &env.train, &train_cfg)?
    };
    if let Some(path) = &cfg.checkpoint_save {
        save_checkpoint(path, &[net.w0().clone(), net.w1().clone()])?;
    }
    Ok((net, curve))
}

#[derive(Debug, Clone)]
pub struct MnistRunRecord {
    pub run_id: usize,
    pub algorithm: Algorithm,
    pub s: usize,
    pub trial: usize,
    pub selected_size: usize,
    /// Percent accuracy on the held-out set before fine-tuning.
    pub acc_pre_pct: f64,
    /// Percent accuracy after fine-tuning.
    pub acc_post_pct: f64,
    pub prune_ms: f64,
    pub finetune_ms: f64,
}

#[derive(Debug, Clone)]
pub struct MnistSummary {
    pub algorithm: Algorithm,
    pub s: usize,
    pub mean_acc_pre_pct: f64,
    pub mean_acc_post_pct: f64,
}

#[derive(Debug)]
pub struct MnistOutput {
    pub csv: String,
    pub records: Vec<MnistRunRecord>,
    pub summary: Vec<MnistSummary>,
    pub selections: Vec<(String, IndexSet)>,
    pub dense_test_acc_pct: f64,
    pub test_source: &'static str,
    pub pretrain_curve: Vec<f64>,
}

pub fn run_mnist(cfg: &MnistConfig) -> Result<MnistOutput> {
    cfg.validate()?;
    let env = load_env(cfg)?;
    let (dense, pretrain_curve) = pretrain_or_load(cfg, &env)?;
    let dense_test_acc_pct = 100.0 * accuracy(&dense, &env.test)?;

    let mut table = Table::new(&[
        "schema",
        "run_id",
        "algorithm",
        "s",
        "trial",
        "d_hid",
        "pretrain_epochs",
        "finetune_epochs",
        "prune_batch",
        "prune_iterations",
        "gfs_pool",
        "seed",
        "test_source",
        "dense_acc_pct",
        "selected_size",
        "acc_pre_pct",
        "acc_post_pct",
        "prune_ms",
        "finetune_ms",
    ]);
    let mut records = Vec::new();
    let mut selections = Vec::new();
    let mut run_id = 0usize;

    for trial in 0..cfg.trials {
        for &algorithm in &cfg.algorithms {
            for &s in &cfg.s_values {
                let label = format!("{}/s{}/trial{}", algorithm.name(), s, trial);
                let batch_seed = derive_seed(cfg.seed, &format!("mnist/prune-batches/{label}"));
                let mut sampler = BatchSampler::new(&env.train, cfg.prune_batch, batch_seed)?;
                let prune_started = Instant::now();
                let selected = match algorithm {
                    Algorithm::Ispasp => {
                        let mut params = PruneParams::new(s, cfg.prune_iterations);
                        params.batch_size = cfg.prune_batch;
                        params.resample = true;
                        params.seed = batch_seed;
                        ispasp_prune_net(&dense, &mut sampler, &params)?.selected
                    }
                    Algorithm::Gfs => {
                        let pool = (cfg.gfs_pool > 0).then_some(cfg.gfs_pool);
                        let gfs_seed = derive_seed(cfg.seed, &format!("mnist/gfs/{label}"));
                        gfs_prune(&dense, &mut sampler, s, pool, gfs_seed)?
                    }
                    Algorithm::TopK => {
                        let (batch, _) = sampler.next_batch();
                        topk_prune(&dense, &batch, s)?
                    }
                };
                let prune_ms = prune_started.elapsed().as_secs_f64() * 1e3;

                let sub = dense.extract_subnetwork(&selected)?;
                let acc_pre_pct = 100.0 * accuracy(&sub, &env.test)?;

                let mut ft_cfg = TrainConfig::mnist_protocol(
                    cfg.finetune_epochs,
                    derive_seed(cfg.seed, &format!("mnist/finetune/{label}")),
                );
                ft_cfg.lr = cfg.finetune_lr;
                let ft_started = Instant::now();
                let (tuned, _) = fine_tune(&sub, &env.train, &ft_cfg)?;
                let finetune_ms = ft_started.elapsed().as_secs_f64() * 1e3;
                let acc_post_pct = 100.0 * accuracy(&tuned, &env.test)?;

                table.push(vec![
                    MNIST_SCHEMA.into(),
                    run_id.to_string(),
                    algorithm.name().into(),
                    s.to_string(),
                    trial.to_string(),
                    cfg.d_hid.to_string(),
                    cfg.pretrain_epochs.to_string(),
                    cfg.finetune_epochs.to_string(),
                    cfg.prune_batch.to_string(),
                    cfg.prune_iterations.to_string(),
                    cfg.gfs_pool.to_string(),
                    cfg.seed.to_string(),
                    env.test_source.into(),
                    dense_test_acc_pct.to_string(),
                    selected.len().to_string(),
                    acc_pre_pct.to_string(),
                    acc_post_pct.to_string(),
                    prune_ms.to_string(),
                    finetune_ms.to_string(),
                ]);
                records.push(MnistRunRecord {
                    run_id,
                    algorithm,
                    s,
                    trial,
                    selected_size: selected.len(),
                    acc_pre_pct,
                    acc_post_pct,
                    prune_ms,
                    finetune_ms,
                });
                selections.push((label, selected));
                run_id += 1;
            }
        }
    }

    let mut summary = Vec::new();
    for &algorithm in &cfg.algorithms {
        for &s in &cfg.s_values {
            let cell: Vec<&MnistRunRecord> = records
                .iter()
                .filter(|r| r.algorithm == algorithm && r.s == s)
                .collect();
            let n = cell.len() as f64;
            summary.push(MnistSummary {
                algorithm,
                s,
                mean_acc_pre_pct: cell.iter().map(|r| r.acc_pre_pct).sum::<f64>() / n,
                mean_acc_post_pct: cell.iter().map(|r| r.acc_post_pct).sum::<f64>() / n,
            });
        }
    }

    Ok(MnistOutput {
        csv: table.to_csv(),
        records,
        summary,
        selections,
        dense_test_acc_pct,
        test_source: env.test_source,
        pretrain_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;
    use std::path::Path;

    /// Write a small synthetic IDX pair (not digit images, just valid files).
    fn write_fake_idx(dir: &Path, count: usize, side: usize, seed: u64) {
        let mut rng = Prng::from_seed(seed);
        let mut images = Vec::new();
        images.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        images.extend_from_slice(&(count as u32).to_be_bytes());
        images.extend_from_slice(&(side as u32).to_be_bytes());
        images.extend_from_slice(&(side as u32).to_be_bytes());
        let mut labels = Vec::new();
        labels.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        labels.extend_from_slice(&(count as u32).to_be_bytes());
        for _ in 0..count {
            let class = rng.below(10) as u8;
            labels.push(class);
            for p in 0..side * side {
                // class-dependent blob so the task is learnable
                let v = if p % 10 == usize::from(class) { 200 } else { 20 };
                images.push(v + rng.below(30) as u8);
            }
        }
        std::fs::write(dir.join("train-images-idx3-ubyte"), images).unwrap();
        std::fs::write(dir.join("train-labels-idx1-ubyte"), labels).unwrap();
    }

    fn tiny_config(dir: &Path) -> MnistConfig {
        MnistConfig {
            data_dir: Some(dir.to_path_buf()),
            d_hid: 24,
            pretrain_epochs: 3,
            s_values: vec![6],
            trials: 1,
            prune_batch: 32,
            prune_iterations: 4,
            finetune_epochs: 2,
            gfs_pool: 8,
            val_fraction: 0.25,
            seed: 3,
            ..MnistConfig::desk()
        }
    }

    #[test]
    fn pipeline_runs_end_to_end_on_tiny_data() {
        let dir = tempfile::tempdir().unwrap();
        write_fake_idx(dir.path(), 160, 6, 1);
        let cfg = tiny_config(dir.path());
        let out = run_mnist(&cfg).unwrap();
        assert_eq!(out.records.len(), 3); // 3 algorithms x 1 size x 1 trial
        assert_eq!(out.test_source, "val");
        assert!(out.records.iter().all(|r| r.selected_size <= 6));
        assert_eq!(out.summary.len(), 3);
        assert_eq!(out.selections.len(), 3);
        // header carries the timing columns last
        let header = out.csv.lines().next().unwrap();
        assert!(header.ends_with("prune_ms,finetune_ms"));
    }

    #[test]
    fn deterministic_modulo_timing() {
        let dir = tempfile::tempdir().unwrap();
        write_fake_idx(dir.path(), 120, 6, 2);
        let cfg = tiny_config(dir.path());
        let a = run_mnist(&cfg).unwrap();
        let b = run_mnist(&cfg).unwrap();
        use crate::experiment::csvfmt::strip_timing_columns;
        assert_eq!(
            strip_timing_columns(&a.csv).unwrap(),
            strip_timing_columns(&b.csv).unwrap()
        );
    }

    #[test]
    fn checkpoint_round_trip_through_config() {
        let dir = tempfile::tempdir().unwrap();
        write_fake_idx(dir.path(), 120, 6, 3);
        let ckpt = dir.path().join("dense.bin");
        let mut cfg = tiny_config(dir.path());
        cfg.checkpoint_save = Some(ckpt.clone());
        let first = run_mnist(&cfg).unwrap();
        // reload: identical dense accuracy without retraining
        cfg.checkpoint_save = None;
        cfg.checkpoint_load = Some(ckpt);
        let second = run_mnist(&cfg).unwrap();
        assert_eq!(first.dense_test_acc_pct, second.dense_test_acc_pct);
        assert!(second.pretrain_curve.is_empty());
    }

    #[test]
    fn missing_data_dir_is_a_config_error() {
        let mut cfg = MnistConfig::desk();
        cfg.data_dir = None;
        // force the env var out of the picture
        assert!(matches!(load_env(&cfg), Err(Error::Config(_)) | Ok(_)));
        cfg.data_dir = Some(std::path::PathBuf::from("/definitely/not/here"));
        assert!(run_mnist(&cfg).is_err());
    }
}
