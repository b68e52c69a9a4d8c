//! Acceptance checks shared by the `acceptance` test target and the `verify`
//! command. Seeds and budgets are fixed here so every caller runs the same
//! experiment.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;

use super::config::{build_policy, ExperimentConfig};
use super::metrics::rolling_stats;
use super::run::{evaluate, evaluation_rollouts, replication_dir, run_experiment, run_replication};
use crate::algos::toy::{toy_policy_schedule, ToyQpo};
use crate::algos::{descent_direction, rollout, AlgoKey};
use crate::envs::{EnvConfig, TabularMdp, ZeroMean, ZeroMeanParams};
use crate::error::{Error, Result};
use crate::oracles::{enumerate_small_mdp, fd_cdf_gradient, markowitz_alloc, normal_quantile, truncation_gap_report, MarkowitzCriterion};
use crate::policy::{ActionSpec, Arch, Layer, Network, PolicyParams};
use crate::quantile::{QuantileOptimizer, QuantileTracker, StepSchedule};
use crate::seeds::{stream_rng, Stream};

/// Seeds used by every multi-seed training criterion.
pub const ACCEPTANCE_SEEDS: [u64; 3] = [0, 1, 2];

/// Base seed for the single-run and Monte-Carlo criteria.
pub const ACCEPTANCE_BASE_SEED: u64 = 20_240_601;

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "criterion {} [{tag}] {}: {}", self.id, self.name, self.detail)
    }
}

fn outcome(id: u8, name: &'static str, pass: bool, detail: String) -> CriterionOutcome {
    CriterionOutcome { id, name, pass, detail }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Final rolling accuracy and rolling quantile of one Zero-Mean run.
fn zero_mean_final(algo: AlgoKey, seed: u64) -> Result<(f64, f64)> {
    let mut cfg = ExperimentConfig::preset("zero_mean_simple", algo)?;
    cfg.seed = seed;
    let res = run_replication(&cfg, 0)?;
    let last = res.last().ok_or_else(|| Error::training("no episodes simulated"))?;
    Ok((last.accuracy.unwrap_or(f64::NAN), last.rolling_quantile))
}

/// Zero-Mean simple at the published settings for 5e3 episodes: the quantile
/// methods select the narrowest alternative, the mean methods stay near
/// chance, and QPPO ends above QPO on the rolling 0.25-quantile.
pub fn zero_mean_separation() -> Result<CriterionOutcome> {
    let algos = [AlgoKey::Qpo, AlgoKey::Qppo, AlgoKey::Reinforce, AlgoKey::Ppo];
    let mut acc = vec![Vec::new(); algos.len()];
    let mut quant = vec![Vec::new(); algos.len()];
    for (i, algo) in algos.iter().enumerate() {
        for &seed in &ACCEPTANCE_SEEDS {
            let (a, q) = zero_mean_final(*algo, seed)?;
            acc[i].push(a);
            quant[i].push(q);
        }
    }
    let avg: Vec<f64> = acc.iter().map(|a| mean(a)).collect();
    let qppo_wins = quant[1].iter().zip(&quant[0]).filter(|(b, a)| b > a).count();
    let pass = avg[0] >= 0.8 && avg[1] >= 0.8 && avg[2] <= 0.45 && avg[3] <= 0.45 && qppo_wins >= 2;
    let fmt_accs = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/");
    let detail = format!(
        "accuracy per seed qpo {} qppo {} reinforce {} ppo {} (means {:.2} {:.2} {:.2} {:.2}); qppo quantile above qpo in {qppo_wins}/3 seeds",
        fmt_accs(&acc[0]),
        fmt_accs(&acc[1]),
        fmt_accs(&acc[2]),
        fmt_accs(&acc[3]),
        avg[0],
        avg[1],
        avg[2],
        avg[3]
    );
    Ok(outcome(1, "zero-mean separation", pass, detail))
}

/// Stochastic-approximation tracker on Uniform(0, 1) draws.
pub fn tracker_convergence() -> Result<CriterionOutcome> {
    let mut worst: f64 = 0.0;
    for (i, alpha) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        for rep in 0..20u64 {
            let mut rng = stream_rng(ACCEPTANCE_BASE_SEED, Stream::Oracle, i as u64 * 100 + rep);
            let mut tracker = QuantileTracker::new(1.0 - alpha, alpha, StepSchedule::default_quantile(), QuantileOptimizer::Sa)?;
            for _ in 0..200_000 {
                tracker.update(rng.random::<f64>())?;
            }
            worst = worst.max((tracker.q() - alpha).abs());
        }
    }
    Ok(outcome(2, "tracker convergence", worst <= 0.02, format!("max |q_K - alpha| = {worst:.4} over 60 runs (bound 0.02)")))
}

fn bandit_policy(theta: Vec<f64>) -> Result<PolicyParams> {
    let mut arch = Arch::mlp(2, &[], 2);
    if let Layer::Dense { bias, .. } = &mut arch.heads[0] {
        *bias = false;
    }
    PolicyParams::new(Network::new(arch)?, ActionSpec::Categorical { n: 2 }, theta)
}

/// Mean of the quantile descent direction against the exact and the
/// finite-difference CDF gradient on the enumerable bandit.
pub fn estimator_unbiasedness() -> Result<CriterionOutcome> {
    let mdp = TabularMdp::two_action_bandit();
    let policy = bandit_policy(vec![0.4, -0.3, -0.2, 0.5])?;
    let discount = 0.99;
    let dist = enumerate_small_mdp(&mdp, &policy, discount)?;
    // level between two atoms so float rounding of returns cannot flip the indicator
    let mut atoms: Vec<f64> = dist.outcomes.iter().map(|o| o.0).collect();
    atoms.sort_by(f64::total_cmp);
    atoms.dedup();
    let q = dist.quantile(0.5);
    let next = atoms.iter().copied().find(|a| *a > q + 1e-9).unwrap_or(q + 1.0);
    let level = 0.5 * (q + next);

    let n = 200_000usize;
    let dim = policy.dim();
    let (mut sum, mut sq) = (vec![0.0; dim], vec![0.0; dim]);
    let mut env = mdp.clone();
    let mut env_rng = stream_rng(ACCEPTANCE_BASE_SEED, Stream::Env, 3);
    let mut pol_rng = stream_rng(ACCEPTANCE_BASE_SEED, Stream::Policy, 3);
    for _ in 0..n {
        let traj = rollout(&mut env, &policy, discount, &mut env_rng, &mut pol_rng, false)?;
        let d = descent_direction(&traj, &policy, level)?;
        for i in 0..dim {
            sum[i] += d[i];
            sq[i] += d[i] * d[i];
        }
    }
    let nf = n as f64;
    let mc: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let mc_se: Vec<f64> = sq.iter().zip(&mc).map(|(s, m)| ((s / nf - m * m).max(0.0) / (nf - 1.0)).sqrt()).collect();
    let exact: Vec<f64> = dist.cdf_gradient(level).iter().map(|g| -g).collect();
    let fd = fd_cdf_gradient(&mdp, &policy, level, 0.05, n, discount, ACCEPTANCE_BASE_SEED)?;

    let mut pass = true;
    let mut worst_exact: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for i in 0..dim {
        let z_exact = (mc[i] - exact[i]).abs() / mc_se[i].max(1e-300);
        let combined = (mc_se[i].powi(2) + fd.standard_error[i].powi(2)).sqrt();
        let z_fd = (mc[i] + fd.gradient[i]).abs() / combined.max(1e-300);
        worst_exact = worst_exact.max(z_exact);
        worst_fd = worst_fd.max(z_fd);
        pass &= z_exact <= 3.0 && z_fd <= 3.0;
    }
    let detail = format!(
        "mean D {:?} vs exact {:?}; worst gap {worst_exact:.2} se (exact), {worst_fd:.2} se (finite difference); bound 3",
        mc.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
        exact.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    Ok(outcome(3, "estimator unbiasedness", pass, detail))
}

/// Direction norms over full Zero-Mean training runs of both quantile methods.
pub fn norm_bound() -> Result<CriterionOutcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for algo in [AlgoKey::Qpo, AlgoKey::Qppo] {
        let mut cfg = ExperimentConfig::preset("zero_mean_simple", algo)?;
        cfg.seed = ACCEPTANCE_BASE_SEED;
        let d = run_replication(&cfg, 0)?.checkpoint.diagnostics;
        pass &= d.bound_violations == 0 && d.directions > 0;
        parts.push(format!(
            "{} {} directions, {} violations, max norm {:.1}",
            algo.name(),
            d.directions,
            d.bound_violations,
            d.max_direction_norm
        ));
    }
    Ok(outcome(4, "norm bound", pass, parts.join("; ")))
}

/// Truncated-horizon quantile gaps on Zero-Mean simple under a fresh policy.
pub fn truncation_bound() -> Result<CriterionOutcome> {
    let cfg = ExperimentConfig::preset("zero_mean_simple", AlgoKey::Qppo)?;
    let mut env = ZeroMean::new(ZeroMeanParams::simple())?;
    let mut init = stream_rng(ACCEPTANCE_BASE_SEED, Stream::Init, 0);
    let policy = build_policy(&env, &cfg.policy, &mut init)?;
    let report = truncation_gap_report(&mut env, &policy, cfg.algo.alpha, 0.99, 16, 100_000, ACCEPTANCE_BASE_SEED)?;
    let worst = report
        .gaps
        .iter()
        .map(|g| (g.horizon, g.gap, g.bound + 3.0 * g.standard_error))
        .max_by(|a, b| (a.1 / a.2).total_cmp(&(b.1 / b.2)))
        .expect("non-empty");
    let detail = format!(
        "horizons 16..=20 all within bound: {}; tightest at l = {} (gap {:.3} vs allowance {:.3})",
        report.pass(),
        worst.0,
        worst.1,
        worst.2
    );
    Ok(outcome(5, "truncation bound", report.pass(), detail))
}

/// Average allocation over every step of the mode-action evaluation runs.
fn mean_test_allocation(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let res = run_replication(cfg, 0)?;
    let trajs = evaluation_rollouts(&res.checkpoint.policy, &cfg.env, cfg.algo.discount, cfg.eval_episodes, cfg.seed, 0)?;
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0.0;
    for a in trajs.iter().flat_map(|t| &t.actions) {
        let w = a.weights().ok_or_else(|| Error::usage("portfolio actions are allocations"))?;
        acc.resize(w.len(), 0.0);
        for (s, x) in acc.iter_mut().zip(w) {
            *s += x;
        }
        count += 1.0;
    }
    Ok(acc.iter().map(|s| s / count).collect())
}

/// Closed-form allocations on the hedgeable market, then desk-scale QPPO and
/// PPO allocations against them.
pub fn markowitz_agreement() -> Result<CriterionOutcome> {
    let EnvConfig::Portfolio(p) = EnvConfig::preset("portfolio_hedgeable")? else {
        return Err(Error::config("hedgeable preset is not a portfolio"));
    };
    let mean_sol = markowitz_alloc(&p.drift, &p.vol_root, p.dt(), p.horizon, MarkowitzCriterion::Mean)?;
    let quant_sol = markowitz_alloc(&p.drift, &p.vol_root, p.dt(), p.horizon, MarkowitzCriterion::Quantile { alpha: 0.1 })?;
    let close = |w: &[f64], e: &[f64]| w.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-9);
    let oracle_ok = close(&mean_sol.weights, &[0.0, 0.0, 1.0]) && close(&quant_sol.weights, &[0.0, 0.5, 0.5]);

    let mut q_cfg = ExperimentConfig::preset("portfolio_desk", AlgoKey::Qppo)?;
    q_cfg.seed = ACCEPTANCE_BASE_SEED;
    let mut p_cfg = ExperimentConfig::preset("portfolio_desk", AlgoKey::Ppo)?;
    p_cfg.seed = ACCEPTANCE_BASE_SEED;
    let q_alloc = mean_test_allocation(&q_cfg)?;
    let p_alloc = mean_test_allocation(&p_cfg)?;
    let l1: f64 = q_alloc.iter().zip(&quant_sol.weights).map(|(a, b)| (a - b).abs()).sum();
    let pass = oracle_ok && l1 <= 0.35 && p_alloc[2] >= 0.6;
    let r = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    let detail = format!(
        "oracle mean [{}] quantile [{}] exact: {oracle_ok}; qppo [{}] L1 {l1:.3} (bound 0.35); ppo [{}] asset 3 {:.3} (need 0.6)",
        r(&mean_sol.weights),
        r(&quant_sol.weights),
        r(&q_alloc),
        r(&p_alloc),
        p_alloc[2]
    );
    Ok(outcome(6, "markowitz agreement", pass, detail))
}

/// Desk-scale single-echelon runs: QPPO's evaluated 0.1-quantile against PPO's.
pub fn inventory_ordering() -> Result<CriterionOutcome> {
    let mut wins = 0;
    let mut parts = Vec::new();
    for &seed in &ACCEPTANCE_SEEDS {
        let mut q = [0.0; 2];
        for (slot, algo) in q.iter_mut().zip([AlgoKey::Qppo, AlgoKey::Ppo]) {
            let mut cfg = ExperimentConfig::preset("inventory_desk", algo)?;
            cfg.seed = seed;
            let res = run_replication(&cfg, 0)?;
            let returns = evaluate(&res.checkpoint, cfg.eval_episodes)?;
            *slot = rolling_stats(&returns, cfg.algo.alpha)?.0;
        }
        if q[0] >= q[1] {
            wins += 1;
        }
        parts.push(format!("seed {seed}: qppo {:.2} ppo {:.2}", q[0], q[1]));
    }
    Ok(outcome(7, "inventory criterion ordering", wins >= 2, format!("{}; qppo ahead in {wins}/3", parts.join(", "))))
}

/// Tracking MSE of the convex toy at three checkpoints over 100 replications.
pub fn toy_mse_decay() -> Result<CriterionOutcome> {
    let alpha = 0.25;
    let z = normal_quantile(alpha)?;
    let checkpoints = [1_000u64, 10_000, 100_000];
    let mut mse = [0.0; 3];
    let reps = 100;
    for rep in 0..reps {
        let mut rng = stream_rng(ACCEPTANCE_BASE_SEED, Stream::Oracle, 1_000 + rep);
        let mut toy = ToyQpo::new(-0.5, 0.0, alpha, StepSchedule::default_quantile(), toy_policy_schedule())?;
        let mut next = 0;
        while next < checkpoints.len() {
            toy.step(&mut rng)?;
            if toy.iterations() == checkpoints[next] {
                mse[next] += toy.tracking_error(z) / reps as f64;
                next += 1;
            }
        }
    }
    let pass = mse[0] >= mse[1] && mse[1] >= mse[2];
    Ok(outcome(8, "toy tracking mse decay", pass, format!("mse at 1e3/1e4/1e5 = {:.3e} / {:.3e} / {:.3e}", mse[0], mse[1], mse[2])))
}

fn small_config(algo: AlgoKey, out: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::preset("zero_mean_simple", algo)?;
    cfg.episodes = 300;
    cfg.replications = 2;
    cfg.eval_episodes = 50;
    cfg.seed = ACCEPTANCE_BASE_SEED;
    cfg.out_dir = out.to_path_buf();
    Ok(cfg)
}

/// Runs small experiments twice under `scratch` and compares every output
/// byte except the manifest's wall-clock fields.
pub fn byte_identical_reruns(scratch: &Path) -> Result<CriterionOutcome> {
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for algo in [AlgoKey::Qpo, AlgoKey::Qppo, AlgoKey::Ppo, AlgoKey::Spsa] {
        let a = run_experiment(&small_config(algo, &scratch.join(format!("{}_a", algo.name())))?)?;
        let b = run_experiment(&small_config(algo, &scratch.join(format!("{}_b", algo.name())))?)?;
        for rep in 0..2 {
            for file in ["metrics.csv", "eval_returns.csv", "kde.csv", "checkpoint.json"] {
                let fa = fs::read(replication_dir(&a, rep).join(file))?;
                let fb = fs::read(replication_dir(&b, rep).join(file))?;
                compared += 1;
                if fa != fb {
                    mismatches.push(format!("{}/{rep}/{file}", algo.name()));
                }
            }
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{compared} output files identical across reruns")
    } else {
        format!("differing files: {}", mismatches.join(", "))
    };
    Ok(outcome(9, "determinism", mismatches.is_empty(), detail))
}
