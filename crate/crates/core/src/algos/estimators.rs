use serde::{Deserialize, Serialize};

use super::rollout::Trajectory;
use crate::error::{Error, Result};
use crate::policy::{clip_norm, PolicyParams, SCORE_BOUND};

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `-1{U ≤ q} Σ_t ∇θ log π(a_t|s_t;θ)` over the first `l` steps, with `U`
/// the discounted return of those steps. Each per-step score is capped at
/// [`SCORE_BOUND`], so the result never exceeds `l * SCORE_BOUND` in norm.
pub fn descent_direction_prefix(traj: &Trajectory, policy: &PolicyParams, q: f64, l: usize) -> Result<Vec<f64>> {
    let l = l.min(traj.len());
    let mut d = vec![0.0; policy.dim()];
    if traj.prefix_return(l) > q {
        return Ok(d);
    }
    for t in 0..l {
        let s = policy.score(&traj.observations[t], &traj.actions[t])?;
        for (di, si) in d.iter_mut().zip(&s) {
            *di -= si;
        }
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::training("non-finite descent direction"));
    }
    Ok(d)
}

/// Full-episode descent direction.
pub fn descent_direction(traj: &Trajectory, policy: &PolicyParams, q: f64) -> Result<Vec<f64>> {
    descent_direction_prefix(traj, policy, q, traj.len())
}

/// `exp(Σ target - Σ behaviour)` over matching per-step log-densities.
pub fn ratio_from_log_probs(target: &[f64], behavior: &[f64]) -> Result<f64> {
    if target.len() != behavior.len() {
        return Err(Error::usage("log-density sequences differ in length"));
    }
    if behavior.contains(&f64::NEG_INFINITY) {
        return Err(Error::usage("behaviour policy has zero density at a taken action"));
    }
    let diff: f64 = target.iter().sum::<f64>() - behavior.iter().sum::<f64>();
    Ok(diff.exp())
}

/// `Π_{t<l} π(a_t|s_t;target) / π(a_t|s_t;behaviour)`.
pub fn importance_ratio(traj: &Trajectory, l: usize, target: &PolicyParams, behavior: &PolicyParams) -> Result<f64> {
    let l = l.min(traj.len());
    if l == 0 {
        return Ok(1.0);
    }
    let states = &traj.states()[..l];
    let actions = &traj.action_refs()[..l];
    let t = target.log_probs(states, actions)?;
    let b = behavior.log_probs(states, actions)?;
    ratio_from_log_probs(&t, &b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTerm {
    pub ratio: f64,
    /// Advantage-like target multiplying the ratio.
    pub target: f64,
    pub clip: f64,
}

impl SurrogateTerm {
    pub fn clipped_ratio(&self) -> f64 {
        self.ratio.clamp(1.0 - self.clip, 1.0 + self.clip)
    }

    /// `min{ρA, clip(ρ, 1-ε, 1+ε)A}`.
    pub fn value(&self) -> f64 {
        (self.ratio * self.target).min(self.clipped_ratio() * self.target)
    }

    /// Whether the minimum is attained by the unclipped product, so that the
    /// objective depends on θ through the ratio.
    pub fn gradient_active(&self) -> bool {
        self.ratio * self.target <= self.clipped_ratio() * self.target
    }
}

pub fn clipped_surrogate(term: SurrogateTerm) -> f64 {
    term.value()
}

/// Upper bound on a descent direction norm over `horizon` steps.
pub fn direction_bound(horizon: usize) -> f64 {
    horizon as f64 * SCORE_BOUND
}

/// Caps an aggregate gradient at `horizon * SCORE_BOUND`.
pub fn clip_aggregate(grad: &mut [f64], horizon: usize) -> bool {
    clip_norm(grad, direction_bound(horizon))
}
