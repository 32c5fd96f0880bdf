//! Experiment runner CLI.
//!
//! Every experiment reads a flat `key = value` config (all keys optional,
//! preset defaults otherwise), runs fully seeded, and writes CSV results
//! into the output directory. See the repository README for the key lists
//! and CSV schemas.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ispasp::experiment::{
    self, index_set_lines, run_bounds, run_mnist, run_runtime, run_synthetic, write_matrix_csv,
    BoundsConfig, KvMap, MnistConfig, RuntimeConfig, SyntheticConfig,
};

#[derive(Parser)]
#[command(name = "ispasp", about = "Structured pruning experiments", version)]
struct Cli {
    /// Flat key = value config file; missing keys fall back to the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV results.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads for grid experiments (overrides the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Named preset: `desk` or `paper` for mnist, `default` or
    /// `verified-regime` for bounds.
    #[arg(long, global = true, default_value = "default")]
    preset: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compressibility sweep: residual decay versus pruned size.
    Synthetic,
    /// Digit-classification pruning study (needs IDX data files).
    Mnist,
    /// Wall-clock comparison of the pruners.
    Runtime,
    /// Bound-soundness traces, noise-bound sweep, and exact recovery.
    Bounds,
    /// Re-fit log-log slopes from an existing synthetic runs CSV.
    Slope {
        /// Input runs CSV (as written by `synthetic`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        fit_lo: f64,
        #[arg(long, default_value_t = 0.8)]
        fit_hi: f64,
    },
    /// Pretrain the dense digit network and write a checkpoint.
    Checkpoint {
        /// Checkpoint path (defaults to <out>/dense.ckpt).
        #[arg(long)]
        save: Option<PathBuf>,
    },
}

fn load_kv(path: &Option<PathBuf>) -> Result<KvMap> {
    match path {
        None => Ok(KvMap::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(KvMap::parse(&text)?)
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Synthetic => {
            let mut cfg = SyntheticConfig::from_kv(load_kv(&cli.config)?)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(workers) = cli.workers {
                cfg.workers = workers;
            }
            let out = run_synthetic(&cfg)?;
            let runs = write_file(&cli.out, "synthetic_runs.csv", &out.runs_csv)?;
            let slopes = write_file(&cli.out, "synthetic_slopes.csv", &out.slopes_csv)?;
            if cfg.dump_matrices {
                let dir = cli.out.join("matrices");
                for (label, matrix) in &out.matrices {
                    write_file(&dir, &format!("{label}.csv"), &write_matrix_csv(matrix))?;
                }
            }
            println!("wrote {} and {}", runs.display(), slopes.display());
            for s in &out.slopes {
                println!(
                    "p={} d_hid={}: slope {:.4} (r^2 {:.4}, theory exponent {})",
                    s.p, s.d_hid, s.fit.slope, s.fit.r_squared, s.theory_exponent
                );
            }
        }
        Command::Mnist => {
            let mut cfg = mnist_config(&cli)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let out = run_mnist(&cfg)?;
            let runs = write_file(&cli.out, "mnist_runs.csv", &out.csv)?;
            let sel_dir = cli.out.join("selections");
            for (label, set) in &out.selections {
                let name = format!("{}.txt", label.replace('/', "_"));
                write_file(&sel_dir, &name, &index_set_lines(set))?;
            }
            println!(
                "wrote {} (dense accuracy {:.2}% on {})",
                runs.display(),
                out.dense_test_acc_pct,
                out.test_source
            );
            for s in &out.summary {
                println!(
                    "{} s={}: pre {:.2}% post {:.2}%",
                    s.algorithm.name(),
                    s.s,
                    s.mean_acc_pre_pct,
                    s.mean_acc_post_pct
                );
            }
        }
        Command::Runtime => {
            let mut cfg = RuntimeConfig::from_kv(load_kv(&cli.config)?)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let out = run_runtime(&cfg)?;
            let runs = write_file(&cli.out, "runtime_runs.csv", &out.csv)?;
            println!("wrote {}", runs.display());
            for ((algorithm, s), ms) in &out.medians {
                println!("{algorithm} s={s}: median {ms:.1} ms");
            }
            if !out.all_sizes_ok {
                bail!("a timed run returned more than s neurons");
            }
        }
        Command::Bounds => {
            let mut cfg = bounds_config(&cli)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let out = run_bounds(&cfg)?;
            write_file(&cli.out, "bounds_trace.csv", &out.trace_csv)?;
            write_file(&cli.out, "bounds_noise.csv", &out.noise_csv)?;
            write_file(&cli.out, "bounds_recovery.csv", &out.recovery_csv)?;
            println!(
                "wrote bounds CSVs to {} (sampled delta_4s lower bounds: {:?})",
                cli.out.display(),
                out.deltas.iter().map(|d| (d * 1e3).round() / 1e3).collect::<Vec<_>>()
            );
            println!(
                "noise-bound violations: {}, recovery failures: {}",
                out.noise_violations, out.recovery_failures
            );
            if !out.violations.is_empty() {
                for v in &out.violations {
                    eprintln!("VIOLATION: {v}");
                }
                bail!("{} bound violations", out.violations.len());
            }
            println!("all bound checks passed");
        }
        Command::Slope { input, fit_lo, fit_hi } => {
            let csv = fs::read_to_string(input)
                .with_context(|| format!("reading {}", input.display()))?;
            let slopes = experiment::slopes_from_runs_csv(&csv, *fit_lo, *fit_hi)?;
            let path = write_file(&cli.out, "synthetic_slopes.csv", &slopes)?;
            println!("wrote {}", path.display());
            print!("{slopes}");
        }
        Command::Checkpoint { save } => {
            let mut cfg = mnist_config(&cli)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let path = save
                .clone()
                .unwrap_or_else(|| cli.out.join("dense.ckpt"));
            fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
            cfg.checkpoint_save = Some(path.clone());
            let env = experiment::load_env(&cfg)?;
            let (net, curve) = experiment::pretrain_or_load(&cfg, &env)?;
            let acc = 100.0 * ispasp::mlp::accuracy(&net, &env.test)?;
            println!(
                "trained {} epochs (final loss {:.4}); test accuracy {:.2}% on {}; saved {}",
                curve.len(),
                curve.last().copied().unwrap_or(f64::NAN),
                acc,
                env.test_source,
                path.display()
            );
        }
    }
    Ok(())
}

fn mnist_config(cli: &Cli) -> Result<MnistConfig> {
    let preset = match cli.preset.as_str() {
        "default" | "desk" => "desk",
        "paper" => "paper",
        other => bail!("unknown mnist preset {other:?} (expected desk or paper)"),
    };
    Ok(MnistConfig::from_kv(load_kv(&cli.config)?, preset)?)
}

fn bounds_config(cli: &Cli) -> Result<BoundsConfig> {
    let base = match cli.preset.as_str() {
        "default" => BoundsConfig::default(),
        "verified-regime" => BoundsConfig::verified_regime(),
        other => bail!("unknown bounds preset {other:?} (expected default or verified-regime)"),
    };
    // config overrides sit on top of the preset
    let mut map = load_kv(&cli.config)?;
    let mut cfg = base;
    if let Some(v) = map.take_parsed("instances")? {
        cfg.instances = v;
    }
    if let Some(v) = map.take_parsed("rows")? {
        cfg.rows = v;
    }
    if let Some(v) = map.take_parsed("d_hid")? {
        cfg.d_hid = v;
    }
    if let Some(v) = map.take_parsed("s")? {
        cfg.s = v;
    }
    if let Some(v) = map.take_parsed("b")? {
        cfg.b = v;
    }
    if let Some(v) = map.take_parsed("p")? {
        cfg.p = v;
    }
    if let Some(v) = map.take_parsed("r_magnitude")? {
        cfg.r_magnitude = v;
    }
    if let Some(v) = map.take_parsed("iterations")? {
        cfg.iterations = v;
    }
    if let Some(v) = map.take_parsed("rip_samples")? {
        cfg.rip_samples = v;
    }
    if let Some(v) = map.take_parsed("recovery_instances")? {
        cfg.recovery_instances = v;
    }
    if let Some(v) = map.take_parsed("seed")? {
        cfg.seed = v;
    }
    map.finish()?;
    cfg.validate()?;
    Ok(cfg)
}
