use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qpg::algos::AlgoKey;
use qpg::harness::criteria::{self, CriterionOutcome};
use qpg::harness::{compare_runs, evaluate, run_experiment, Checkpoint, ExperimentConfig, PRESETS};

#[derive(Parser)]
#[command(name = "qpg", version, about = "Quantile-criterion policy gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every replication of a config and write its artifacts.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with mode actions and print one return per line.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        /// Write the returns as CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantile and mean of two runs' evaluation returns with bootstrap intervals.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
    /// Run the acceptance criteria (all, or the listed ids).
    Verify { ids: Vec<u8> },
    /// Write a preset config as JSON.
    Preset {
        /// One of the preset names; omit to list them.
        name: Option<String>,
        #[arg(long, default_value = "qppo")]
        algo: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_algo(s: &str) -> Result<AlgoKey> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .with_context(|| format!("unknown algorithm {s:?} (expected qpo, qppo, reinforce, ppo or spsa)"))
}

fn train(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    let dir = run_experiment(&cfg)?;
    println!("{}", dir.display());
    Ok(())
}

type Check = Box<dyn Fn() -> qpg::Result<CriterionOutcome>>;

fn verify(ids: &[u8]) -> Result<bool> {
    let scratch = std::env::temp_dir().join(format!("qpg-verify-{}", std::process::id()));
    let scratch_path = scratch.clone();
    let rerun = move || {
        let out = criteria::byte_identical_reruns(&scratch_path);
        let _ = std::fs::remove_dir_all(&scratch_path);
        out
    };
    let checks: Vec<(u8, Check)> = vec![
        (1, Box::new(criteria::zero_mean_separation)),
        (2, Box::new(criteria::tracker_convergence)),
        (3, Box::new(criteria::estimator_unbiasedness)),
        (4, Box::new(criteria::norm_bound)),
        (5, Box::new(criteria::truncation_bound)),
        (6, Box::new(criteria::markowitz_agreement)),
        (7, Box::new(criteria::inventory_ordering)),
        (8, Box::new(criteria::toy_mse_decay)),
        (9, Box::new(rerun)),
    ];
    if let Some(bad) = ids.iter().find(|id| !(1..=9).contains(*id)) {
        bail!("no criterion {bad}; ids run from 1 to 9");
    }
    let mut total = 0;
    let mut passed = 0;
    for (id, check) in checks.iter().filter(|(id, _)| ids.is_empty() || ids.contains(id)) {
        let started = Instant::now();
        total += 1;
        let line = match check() {
            Ok(o) => {
                passed += o.pass as usize;
                o.to_string()
            }
            Err(e) => format!("criterion {id} [FAIL] error: {e}"),
        };
        println!("{line} ({:.0}s)", started.elapsed().as_secs_f64());
    }
    println!("verify: {passed} of {total} criteria passed");
    Ok(passed == total)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config, seed, out } => train(config, seed, out)?,
        Command::Evaluate { checkpoint, episodes, out } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let returns = evaluate(&ckpt, episodes)?;
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    qpg::harness::write_returns(&returns, f)?;
                }
                None => returns.iter().for_each(|r| println!("{r}")),
            }
        }
        Command::Compare { a, b, alpha } => print!("{}", compare_runs(&a, &b, alpha)?),
        Command::Verify { ids } => return verify(&ids),
        Command::Preset { name: None, .. } => PRESETS.iter().for_each(|p| println!("{p}")),
        Command::Preset { name: Some(name), algo, out } => {
            let json = ExperimentConfig::preset(&name, parse_algo(&algo)?)?.to_json()?;
            match out {
                Some(path) => std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
