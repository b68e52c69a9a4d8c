use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{bootstrap_quantile_se, select_quantile, BOOTSTRAP_RESAMPLES, MIN_MC_SAMPLES};
use crate::algos::rollout;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::seeds::{derive_seed, Stream};
use crate::SimRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationGap {
    pub horizon: usize,
    pub quantile: f64,
    pub gap: f64,
    /// `η^l C_r / (1 − η)`.
    pub bound: f64,
    /// Combined standard error of the two quantile estimates.
    pub standard_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub alpha: f64,
    pub discount: f64,
    pub reward_bound: f64,
    pub full_quantile: f64,
    pub full_standard_error: f64,
    pub episodes: usize,
    pub gaps: Vec<TruncationGap>,
}

impl TruncationReport {
    pub fn pass(&self) -> bool {
        self.gaps.iter().all(|g| g.pass)
    }
}

/// Monte-Carlo truncated-horizon quantiles from `n` common trajectories,
/// each compared with the full-horizon quantile against
/// `η^l C_r / (1 − η) + 3 se`.
pub fn truncation_gap_report(
    env: &mut dyn Environment,
    policy: &PolicyParams,
    alpha: f64,
    discount: f64,
    shortest: usize,
    n: usize,
    seed: u64,
) -> Result<TruncationReport> {
    let horizon = env.horizon();
    let reward_bound = env.reward_bound().ok_or_else(|| Error::config("truncation bound needs an environment with bounded rewards"))?;
    if shortest == 0 || shortest > horizon {
        return Err(Error::config(format!("shortest horizon {shortest} outside [1, {horizon}]")));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::config(format!("discount {discount} outside (0, 1)")));
    }
    if n < MIN_MC_SAMPLES {
        return Err(Error::config(format!("need at least {MIN_MC_SAMPLES} episodes")));
    }
    let mut env_rng = SimRng::seed_from_u64(derive_seed(seed, Stream::Env, 0));
    let mut policy_rng = SimRng::seed_from_u64(derive_seed(seed, Stream::Policy, 0));
    let mut boot_rng = SimRng::seed_from_u64(derive_seed(seed, Stream::Oracle, 0));
    let levels: Vec<usize> = (shortest..=horizon).collect();
    let mut returns = vec![Vec::with_capacity(n); levels.len()];
    for _ in 0..n {
        let traj = rollout(env, policy, discount, &mut env_rng, &mut policy_rng, false)?;
        for (slot, &l) in returns.iter_mut().zip(&levels) {
            slot.push(traj.prefix_return(l));
        }
    }
    let estimates: Vec<(f64, f64)> = returns
        .iter()
        .map(|r| {
            let q = select_quantile(&mut r.clone(), alpha);
            (q, bootstrap_quantile_se(r, alpha, BOOTSTRAP_RESAMPLES, &mut boot_rng))
        })
        .collect();
    let (full_quantile, full_se) = *estimates.last().expect("at least one level");
    let gaps = levels
        .iter()
        .zip(&estimates)
        .map(|(&l, &(q, se))| {
            let gap = (q - full_quantile).abs();
            let bound = discount.powi(l as i32) * reward_bound / (1.0 - discount);
            let standard_error = if l == horizon { 0.0 } else { (se * se + full_se * full_se).sqrt() };
            TruncationGap { horizon: l, quantile: q, gap, bound, standard_error, pass: gap <= bound + 3.0 * standard_error }
        })
        .collect();
    Ok(TruncationReport { alpha, discount, reward_bound, full_quantile, full_standard_error: full_se, episodes: n, gaps })
}

/// As [`truncation_gap_report`], failing with the first offending horizon.
pub fn truncation_gap_check(
    env: &mut dyn Environment,
    policy: &PolicyParams,
    alpha: f64,
    discount: f64,
    shortest: usize,
    n: usize,
    seed: u64,
) -> Result<TruncationReport> {
    let report = truncation_gap_report(env, policy, alpha, discount, shortest, n, seed)?;
    if let Some(bad) = report.gaps.iter().find(|g| !g.pass) {
        return Err(Error::check_failed(format!(
            "truncation gap {} at horizon {} exceeds bound {} + 3 x {}",
            bad.gap, bad.horizon, bad.bound, bad.standard_error
        )));
    }
    Ok(report)
}
