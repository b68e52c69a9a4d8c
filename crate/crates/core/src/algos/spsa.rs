use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rollout, Agent, AlgoConfig, EpisodeSummary, Streams};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::{project, PolicyParams, PARAM_BOUND};
use crate::quantile::empirical_quantile;
use crate::SimRng;

/// Gain sequences `a_k = a / (k + 1 + A)^0.602` and `c_k = c / (k + 1)^0.101`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsaGains {
    pub a: f64,
    pub big_a: f64,
    pub c: f64,
    /// Episodes simulated at each perturbed parameter.
    pub batch: usize,
}

impl Default for SpsaGains {
    fn default() -> Self {
        Self { a: 1e-3, big_a: 100.0, c: 0.1, batch: 10 }
    }
}

impl SpsaGains {
    pub fn step_size(&self, k: u64) -> f64 {
        self.a / (k as f64 + 1.0 + self.big_a).powf(0.602)
    }

    pub fn perturbation(&self, k: u64) -> f64 {
        self.c / (k as f64 + 1.0).powf(0.101)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.c > 0.0 && self.big_a >= 0.0 && self.batch >= 1) {
            return Err(Error::config("SPSA gains must be positive with batch >= 1"));
        }
        Ok(())
    }
}

/// Independent ±1 components.
pub fn rademacher(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Two-sided estimate `(y+ − y−) / (2 c_k Δ_i)` for every component.
pub fn spsa_gradient(delta: &[f64], ck: f64, plus: f64, minus: f64) -> Vec<f64> {
    let diff = (plus - minus) / (2.0 * ck);
    delta.iter().map(|d| diff / d).collect()
}

/// One ascent step on `objective`, projecting onto the parameter box.
pub fn spsa_step(
    theta: &mut [f64],
    k: u64,
    gains: &SpsaGains,
    rng: &mut impl Rng,
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let delta = rademacher(theta.len(), rng);
    let ck = gains.perturbation(k);
    let shifted = |sign: f64| -> Vec<f64> { theta.iter().zip(&delta).map(|(t, d)| t + sign * ck * d).collect() };
    let plus = objective(&shifted(1.0))?;
    let minus = objective(&shifted(-1.0))?;
    let grad = spsa_gradient(&delta, ck, plus, minus);
    let ak = gains.step_size(k);
    for (t, g) in theta.iter_mut().zip(&grad) {
        *t += ak * g;
    }
    project(theta, PARAM_BOUND);
    Ok(grad)
}

/// Derivative-free quantile maximization: each iteration evaluates the
/// empirical α-quantile of a batch at `θ ± c_k Δ`.
#[derive(Clone, Debug)]
pub struct SpsaAgent {
    cfg: AlgoConfig,
    policy: PolicyParams,
    k: u64,
}

impl SpsaAgent {
    pub fn new(cfg: AlgoConfig, policy: PolicyParams) -> Self {
        Self { cfg, policy, k: 0 }
    }

    pub fn iteration(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<Vec<EpisodeSummary>> {
        let mut episodes = Vec::with_capacity(2 * self.cfg.spsa.batch);
        let Streams { env: env_rng, policy: policy_rng, shuffle } = streams;
        let base = self.policy.clone();
        let (alpha, discount, batch) = (self.cfg.alpha, self.cfg.discount, self.cfg.spsa.batch);
        let mut objective = |theta: &[f64]| -> Result<f64> {
            let p = base.with_theta(theta.to_vec());
            let mut rets = Vec::with_capacity(batch);
            for _ in 0..batch {
                let traj = rollout(env, &p, discount, env_rng, policy_rng, false)?;
                rets.push(traj.ret());
                episodes.push(EpisodeSummary::of(&traj));
            }
            empirical_quantile(&rets, alpha)
        };
        spsa_step(&mut self.policy.theta, self.k, &self.cfg.spsa, shuffle as &mut SimRng, &mut objective)?;
        self.k += 1;
        Ok(episodes)
    }
}

impl Agent for SpsaAgent {
    fn train(&mut self, env: &mut dyn Environment, streams: &mut Streams) -> Result<Vec<EpisodeSummary>> {
        self.iteration(env, streams)
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn equal_evaluations_give_zero_gradient() {
        let mut rng = SimRng::seed_from_u64(0);
        let delta = rademacher(5, &mut rng);
        assert!(spsa_gradient(&delta, 0.1, 2.5, 2.5).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn rademacher_components_are_signs() {
        let mut rng = SimRng::seed_from_u64(1);
        let d = rademacher(1000, &mut rng);
        assert!(d.iter().all(|v| *v == 1.0 || *v == -1.0));
        assert!(d.contains(&1.0) && d.contains(&-1.0));
    }

    #[test]
    fn converges_on_noisy_quadratic() {
        let target = [0.7, -1.2, 0.3];
        let gains = SpsaGains { a: 0.1, ..SpsaGains::default() };
        let mut rng = SimRng::seed_from_u64(2);
        let mut noise_rng = SimRng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut theta = vec![0.0; 3];
        for k in 0..10_000 {
            spsa_step(&mut theta, k, &gains, &mut rng, |x| {
                let f: f64 = x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum();
                Ok(-f + noise.sample(&mut noise_rng))
            })
            .unwrap();
        }
        for (t, s) in theta.iter().zip(&target) {
            assert!((t - s).abs() < 0.1, "{theta:?}");
        }
    }
}
