//! Iterative sparse structured pruning for ReLU feed-forward networks.
//!
//! The crate bundles the numerical pieces needed to study structured pruning
//! end to end at desk scale:
//!
//! * [`matrix`] — dense column-major matrices and the operators the pruning
//!   algebra is written in (column sums, restrictions, supports, top-k).
//! * [`synth`] — seeded generators for row-compressible hidden
//!   representations, Gaussian weights, and planted row-sparse instances.
//! * [`mlp`] — two-layer and multi-layer ReLU networks, SGD training with
//!   momentum, sub-network extraction, and binary checkpoints.
//! * [`pruner`] — the iterative sparse structured pruning loop plus greedy
//!   forward selection and top-k activation baselines.
//! * [`bounds`] — restricted isometry estimation, best row-sparse splits,
//!   and evaluators for the pruning error bounds.
//! * [`mnist`] — IDX parsing, dataset assembly, splits, and batch sampling.
//! * [`experiment`] — the seeded experiment harness behind the CLI, emitting
//!   deterministic CSV results.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod mlp;
pub mod mnist;
pub mod pruner;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, IndexSet};
