use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{build_policy, ExperimentConfig, SCHEMA_VERSION};
use super::metrics::{write_metrics, write_returns, MetricsRow, RollingWindow};
use super::report::emit_kde_data;
use crate::algos::{build_agent, rollout, Diagnostics, Streams, Trajectory};
use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::seeds::{stream_rng, Stream};

/// Final state of one training run, enough to re-evaluate the policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub replication: usize,
    /// Episodes simulated during training.
    pub episodes: u64,
    pub env: EnvConfig,
    pub alpha: f64,
    pub discount: f64,
    pub q_tracker: Option<f64>,
    pub diagnostics: Diagnostics,
    pub policy: PolicyParams,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let ckpt: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if ckpt.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!("checkpoint schema version {} unsupported", ckpt.schema_version)));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ReplicationResult {
    pub rows: Vec<MetricsRow>,
    pub checkpoint: Checkpoint,
}

impl ReplicationResult {
    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }
}

/// Trains replication `index` of `cfg` in memory.
///
/// Training stops at the first iteration boundary at or past the episode
/// budget; batch algorithms may overshoot by less than one batch.
pub fn run_replication(cfg: &ExperimentConfig, index: usize) -> Result<ReplicationResult> {
    let idx = index as u64;
    let mut env = cfg.env.build()?;
    let mut init = stream_rng(cfg.seed, Stream::Init, idx);
    let policy = build_policy(env.as_ref(), &cfg.policy, &mut init)?;
    let mut agent = build_agent(&cfg.algo, policy, env.as_ref(), &mut init)?;
    let mut streams = Streams {
        env: stream_rng(cfg.seed, Stream::Env, idx),
        policy: stream_rng(cfg.seed, Stream::Policy, idx),
        shuffle: stream_rng(cfg.seed, Stream::Shuffle, idx),
    };
    let mut window = RollingWindow::new(cfg.window, cfg.algo.alpha)?;
    let mut rows = Vec::with_capacity(cfg.episodes as usize);
    while (rows.len() as u64) < cfg.episodes {
        let summaries = agent.train(env.as_mut(), &mut streams)?;
        let q = agent.tracker();
        for s in summaries {
            rows.push(window.push(s.ret, s.accuracy, q)?);
        }
    }
    let checkpoint = Checkpoint {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        seed: cfg.seed,
        replication: index,
        episodes: rows.len() as u64,
        env: cfg.env.clone(),
        alpha: cfg.algo.alpha,
        discount: cfg.algo.discount,
        q_tracker: agent.tracker(),
        diagnostics: agent.diagnostics(),
        policy: agent.policy().clone(),
    };
    Ok(ReplicationResult { rows, checkpoint })
}

/// Mode-action rollouts of `policy` on the evaluation stream of replication
/// `index`.
pub fn evaluation_rollouts(
    policy: &PolicyParams,
    env: &EnvConfig,
    discount: f64,
    episodes: usize,
    seed: u64,
    index: usize,
) -> Result<Vec<Trajectory>> {
    let mut env = env.build()?;
    let mut env_rng = stream_rng(seed, Stream::Eval, index as u64);
    // mode actions never draw from this stream
    let mut unused = stream_rng(seed, Stream::Policy, index as u64);
    (0..episodes).map(|_| rollout(env.as_mut(), policy, discount, &mut env_rng, &mut unused, true)).collect()
}

/// Discounted returns of `episodes` evaluation runs of a checkpoint.
pub fn evaluate(checkpoint: &Checkpoint, episodes: usize) -> Result<Vec<f64>> {
    let trajs =
        evaluation_rollouts(&checkpoint.policy, &checkpoint.env, checkpoint.discount, episodes, checkpoint.seed, checkpoint.replication)?;
    Ok(trajs.iter().map(Trajectory::ret).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicationManifest {
    pub index: usize,
    pub dir: PathBuf,
    pub episodes: u64,
    pub diagnostics: Diagnostics,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub crate_version: String,
    pub rustc_target: String,
    pub config: ExperimentConfig,
    pub replications: Vec<ReplicationManifest>,
}

pub fn replication_dir(out_dir: &Path, index: usize) -> PathBuf {
    out_dir.join(format!("rep_{index:03}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs every replication concurrently and writes, per replication,
/// `metrics.csv`, `eval_returns.csv`, `kde.csv` and `checkpoint.json`, plus a
/// top-level `config.json` and `manifest.json`. Returns the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.json"), cfg.to_json()?)?;

    let reps = (0..cfg.replications)
        .into_par_iter()
        .map(|i| -> Result<ReplicationManifest> {
            let started = Instant::now();
            let res = run_replication(cfg, i)?;
            let returns = evaluate(&res.checkpoint, cfg.eval_episodes)?;
            let dir = replication_dir(&out, i);
            fs::create_dir_all(&dir)?;
            write_metrics(&res.rows, create(&dir.join("metrics.csv"))?)?;
            write_returns(&returns, create(&dir.join("eval_returns.csv"))?)?;
            if returns.len() >= 2 {
                emit_kde_data(&returns, create(&dir.join("kde.csv"))?)?;
            }
            res.checkpoint.save(&dir.join("checkpoint.json"))?;
            Ok(ReplicationManifest {
                index: i,
                dir: dir.strip_prefix(&out).unwrap_or(&dir).to_path_buf(),
                episodes: res.checkpoint.episodes,
                diagnostics: res.checkpoint.diagnostics,
                wall_clock_seconds: started.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        config_hash: cfg.hash()?,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        rustc_target: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        config: cfg.clone(),
        replications: reps,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(out)
}
