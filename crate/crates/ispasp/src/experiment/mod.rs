//! Seeded experiment harness: typed configurations parsed from flat
//! `key = value` files, deterministic CSV outputs, and the four studies the
//! CLI exposes (synthetic decay, digit pruning, runtime, bound soundness).
//!
//! Identical configuration and seed produce byte-identical CSVs; wall-clock
//! measurements live in trailing `_ms` columns so everything else diffs
//! clean across reruns.

pub mod bounds_run;
pub mod config;
pub mod csvfmt;
pub mod mnist_run;
pub mod runtime;
pub mod slope;
pub mod synthetic;

pub use bounds_run::{run_bounds, BoundsOutput};
pub use config::{Algorithm, BoundsConfig, KvMap, MnistConfig, RuntimeConfig, SyntheticConfig};
pub use csvfmt::{
    index_set_lines, parse_csv, read_matrix_csv, strip_timing_columns, write_matrix_csv,
};
pub use mnist_run::{load_env, pretrain_or_load, run_mnist, MnistOutput};
pub use runtime::{run_runtime, RuntimeOutput};
pub use slope::{fit_loglog_slope, SlopeFit};
pub use synthetic::{run_synthetic, slopes_from_runs_csv, SyntheticOutput};
