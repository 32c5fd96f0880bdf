//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, lists are comma-separated. Every
//! config type starts from its preset defaults and overrides them from the
//! file; unknown keys are hard errors so typos cannot silently change an
//! experiment.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pruner::DEFAULT_ITERATIONS;

/// Parsed key/value pairs with consume-and-check semantics.
#[derive(Debug, Clone, Default)]
pub struct KvMap(BTreeMap<String, String>);

impl KvMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        Ok(KvMap(map))
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    pub fn take_parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value for `{key}`: {raw:?}"))),
        }
    }

    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse::<T>()
                        .map_err(|_| Error::Config(format!("bad list item in `{key}`: {item:?}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.0.remove(key).as_deref() {
            None => Ok(None),
            Some("true") | Some("1") | Some("yes") => Ok(Some(true)),
            Some("false") | Some("0") | Some("no") => Ok(Some(false)),
            Some(other) => Err(Error::Config(format!("bad boolean for `{key}`: {other:?}"))),
        }
    }

    /// Error if any keys were never consumed.
    pub fn finish(self) -> Result<()> {
        if let Some(key) = self.0.keys().next() {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

macro_rules! override_field {
    ($map:expr, $cfg:expr, $key:literal, $field:ident) => {
        if let Some(v) = $map.take_parsed($key)? {
            $cfg.$field = v;
        }
    };
}

macro_rules! override_list {
    ($map:expr, $cfg:expr, $key:literal, $field:ident) => {
        if let Some(v) = $map.take_list($key)? {
            $cfg.$field = v;
        }
    };
}

/// Synthetic compressibility sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub p_values: Vec<f64>,
    pub d_hid_values: Vec<usize>,
    pub b: usize,
    pub r_magnitude: f64,
    pub d_out: usize,
    pub matrices_per_cell: usize,
    pub iterations: usize,
    /// Stride over the pruned-size sweep `s in 1..=d_hid` for quick runs.
    pub s_stride: usize,
    /// Slope-fit window as fractions of `d_hid`.
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub seed: u64,
    pub workers: usize,
    pub dump_matrices: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            p_values: vec![0.3, 0.5, 0.7, 0.9],
            d_hid_values: vec![100, 200],
            b: 100,
            r_magnitude: 1.0,
            d_out: 100,
            matrices_per_cell: 3,
            iterations: DEFAULT_ITERATIONS,
            s_stride: 1,
            fit_lo: 0.05,
            fit_hi: 0.8,
            seed: 7,
            workers: 1,
            dump_matrices: false,
        }
    }
}

impl SyntheticConfig {
    pub fn from_kv(mut map: KvMap) -> Result<Self> {
        let mut cfg = SyntheticConfig::default();
        override_list!(map, cfg, "p_values", p_values);
        override_list!(map, cfg, "d_hid_values", d_hid_values);
        override_field!(map, cfg, "b", b);
        override_field!(map, cfg, "r_magnitude", r_magnitude);
        override_field!(map, cfg, "d_out", d_out);
        override_field!(map, cfg, "matrices_per_cell", matrices_per_cell);
        override_field!(map, cfg, "iterations", iterations);
        override_field!(map, cfg, "s_stride", s_stride);
        override_field!(map, cfg, "fit_lo", fit_lo);
        override_field!(map, cfg, "fit_hi", fit_hi);
        override_field!(map, cfg, "seed", seed);
        override_field!(map, cfg, "workers", workers);
        if let Some(v) = map.take_bool("dump_matrices")? {
            cfg.dump_matrices = v;
        }
        map.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty() || self.d_hid_values.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        if self.p_values.iter().any(|&p| !(0.0 < p && p < 1.0)) {
            return Err(Error::Config("p values must lie in (0, 1)".into()));
        }
        if self.b == 0
            || self.d_out == 0
            || self.matrices_per_cell == 0
            || self.iterations == 0
            || self.s_stride == 0
            || self.workers == 0
        {
            return Err(Error::Config("counts must be positive".into()));
        }
        if self.r_magnitude.is_nan() || self.r_magnitude <= 0.0 {
            return Err(Error::Config("r_magnitude must be positive".into()));
        }
        if !(0.0 < self.fit_lo && self.fit_lo < self.fit_hi && self.fit_hi <= 1.0) {
            return Err(Error::Config("need 0 < fit_lo < fit_hi <= 1".into()));
        }
        Ok(())
    }
}

/// Pruning algorithms the digit experiment compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ispasp,
    Gfs,
    TopK,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ispasp => "ispasp",
            Algorithm::Gfs => "gfs",
            Algorithm::TopK => "topk",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ispasp" => Ok(Algorithm::Ispasp),
            "gfs" => Ok(Algorithm::Gfs),
            "topk" => Ok(Algorithm::TopK),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

/// Digit-classification pruning study.
#[derive(Debug, Clone, PartialEq)]
pub struct MnistConfig {
    pub data_dir: Option<PathBuf>,
    pub d_hid: usize,
    pub pretrain_epochs: usize,
    pub lr: f64,
    pub s_values: Vec<usize>,
    pub trials: usize,
    pub prune_batch: usize,
    pub prune_iterations: usize,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    /// 0 searches all neurons per round; otherwise the stochastic pool size.
    pub gfs_pool: usize,
    pub algorithms: Vec<Algorithm>,
    pub val_fraction: f64,
    pub seed: u64,
    pub checkpoint_load: Option<PathBuf>,
    pub checkpoint_save: Option<PathBuf>,
}

impl MnistConfig {
    /// Desk-scale preset sized to finish in well under two hours.
    pub fn desk() -> Self {
        MnistConfig {
            data_dir: std::env::var_os("MNIST_DATA_DIR").map(PathBuf::from),
            d_hid: 1000,
            pretrain_epochs: 30,
            lr: 1e-3,
            s_values: vec![50, 100, 200],
            trials: 3,
            prune_batch: 512,
            prune_iterations: DEFAULT_ITERATIONS,
            finetune_epochs: 12,
            finetune_lr: 1e-3,
            gfs_pool: 0,
            algorithms: vec![Algorithm::Ispasp, Algorithm::Gfs, Algorithm::TopK],
            val_fraction: 0.2,
            seed: 7,
            checkpoint_load: None,
            checkpoint_save: None,
        }
    }

    /// Full-scale preset: 10k hidden units, 200 pre-training epochs at
    /// lr 1e-3. The pruned-size grid is a choice; stochastic greedy search
    /// keeps the baseline tractable at this width.
    pub fn paper() -> Self {
        MnistConfig {
            d_hid: 10_000,
            pretrain_epochs: 200,
            s_values: vec![500, 1000, 2000],
            gfs_pool: 50,
            ..MnistConfig::desk()
        }
    }

    pub fn from_kv(mut map: KvMap, preset: &str) -> Result<Self> {
        let mut cfg = match preset {
            "desk" => MnistConfig::desk(),
            "paper" => MnistConfig::paper(),
            other => return Err(Error::Config(format!("unknown mnist preset {other:?}"))),
        };
        if let Some(dir) = map.take("data_dir") {
            cfg.data_dir = Some(PathBuf::from(dir));
        }
        override_field!(map, cfg, "d_hid", d_hid);
        override_field!(map, cfg, "pretrain_epochs", pretrain_epochs);
        override_field!(map, cfg, "lr", lr);
        override_list!(map, cfg, "s_values", s_values);
        override_field!(map, cfg, "trials", trials);
        override_field!(map, cfg, "prune_batch", prune_batch);
        override_field!(map, cfg, "prune_iterations", prune_iterations);
        override_field!(map, cfg, "finetune_epochs", finetune_epochs);
        override_field!(map, cfg, "finetune_lr", finetune_lr);
        override_field!(map, cfg, "gfs_pool", gfs_pool);
        override_list!(map, cfg, "algorithms", algorithms);
        override_field!(map, cfg, "val_fraction", val_fraction);
        override_field!(map, cfg, "seed", seed);
        if let Some(path) = map.take("checkpoint_load") {
            cfg.checkpoint_load = Some(PathBuf::from(path));
        }
        if let Some(path) = map.take("checkpoint_save") {
            cfg.checkpoint_save = Some(PathBuf::from(path));
        }
        map.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_hid == 0 || self.trials == 0 || self.prune_batch == 0 || self.prune_iterations == 0
        {
            return Err(Error::Config("counts must be positive".into()));
        }
        if self.s_values.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Config("s_values and algorithms must be non-empty".into()));
        }
        if self.s_values.iter().any(|&s| s == 0 || s > self.d_hid) {
            return Err(Error::Config("every s must lie in 1..=d_hid".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Wall-clock comparison of the pruners on one synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub d_hid: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub dataset_size: usize,
    pub batch_size: usize,
    pub s_fractions: Vec<f64>,
    pub repeats: usize,
    pub iterations: usize,
    /// Pool size for the stochastic greedy variant timed alongside vanilla.
    pub gfs_pool: usize,
    pub seed: u64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            d_hid: 1000,
            d_in: 100,
            d_out: 10,
            dataset_size: 4096,
            batch_size: 256,
            s_fractions: vec![0.1, 0.2, 0.4],
            repeats: 5,
            iterations: DEFAULT_ITERATIONS,
            gfs_pool: 50,
            seed: 7,
        }
    }
}

impl RuntimeConfig {
    pub fn from_kv(mut map: KvMap) -> Result<Self> {
        let mut cfg = RuntimeConfig::default();
        override_field!(map, cfg, "d_hid", d_hid);
        override_field!(map, cfg, "d_in", d_in);
        override_field!(map, cfg, "d_out", d_out);
        override_field!(map, cfg, "dataset_size", dataset_size);
        override_field!(map, cfg, "batch_size", batch_size);
        override_list!(map, cfg, "s_fractions", s_fractions);
        override_field!(map, cfg, "repeats", repeats);
        override_field!(map, cfg, "iterations", iterations);
        override_field!(map, cfg, "gfs_pool", gfs_pool);
        override_field!(map, cfg, "seed", seed);
        map.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_hid == 0
            || self.d_in == 0
            || self.dataset_size == 0
            || self.batch_size == 0
            || self.repeats == 0
            || self.iterations == 0
            || self.gfs_pool == 0
        {
            return Err(Error::Config("counts must be positive".into()));
        }
        if !(2..=10).contains(&self.d_out) {
            return Err(Error::Config("d_out must lie in 2..=10".into()));
        }
        if self.s_fractions.is_empty()
            || self
                .s_fractions
                .iter()
                .any(|&f| !(0.0 < f && f <= 1.0))
        {
            return Err(Error::Config("s_fractions must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn s_grid(&self) -> Vec<usize> {
        self.s_fractions
            .iter()
            .map(|f| ((f * self.d_hid as f64).round() as usize).clamp(1, self.d_hid))
            .collect()
    }
}

/// Bound-soundness and exact-recovery study on constructed instances.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsConfig {
    pub instances: usize,
    pub rows: usize,
    pub d_hid: usize,
    pub s: usize,
    pub b: usize,
    pub p: f64,
    pub r_magnitude: f64,
    pub iterations: usize,
    pub rip_samples: usize,
    pub recovery_instances: usize,
    pub seed: u64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            instances: 20,
            rows: 400,
            d_hid: 40,
            s: 8,
            b: 100,
            p: 0.5,
            r_magnitude: 1.0,
            iterations: DEFAULT_ITERATIONS,
            rip_samples: 200,
            recovery_instances: 10,
            seed: 7,
        }
    }
}

impl BoundsConfig {
    /// A geometry where the sampled isometry premise actually verifies:
    /// very tall Gaussian blocks and a small support.
    pub fn verified_regime() -> Self {
        BoundsConfig {
            rows: 12_800,
            d_hid: 24,
            s: 2,
            ..BoundsConfig::default()
        }
    }

    pub fn from_kv(mut map: KvMap) -> Result<Self> {
        let mut cfg = BoundsConfig::default();
        override_field!(map, cfg, "instances", instances);
        override_field!(map, cfg, "rows", rows);
        override_field!(map, cfg, "d_hid", d_hid);
        override_field!(map, cfg, "s", s);
        override_field!(map, cfg, "b", b);
        override_field!(map, cfg, "p", p);
        override_field!(map, cfg, "r_magnitude", r_magnitude);
        override_field!(map, cfg, "iterations", iterations);
        override_field!(map, cfg, "rip_samples", rip_samples);
        override_field!(map, cfg, "recovery_instances", recovery_instances);
        override_field!(map, cfg, "seed", seed);
        map.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances == 0
            || self.rows == 0
            || self.d_hid == 0
            || self.b == 0
            || self.iterations == 0
            || self.rip_samples == 0
        {
            return Err(Error::Config("counts must be positive".into()));
        }
        if self.s == 0 || 4 * self.s > self.d_hid {
            return Err(Error::Config(
                "need 1 <= s and 4*s <= d_hid for the isometry premise".into(),
            ));
        }
        if !(0.0 < self.p && self.p < 1.0) || self.r_magnitude.is_nan() || self.r_magnitude <= 0.0 {
            return Err(Error::Config("bad p or r_magnitude".into()));
        }
        Ok(())
    }
}
