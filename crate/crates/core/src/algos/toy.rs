//! One-parameter quantile problem with a closed-form optimum: the return is
//! `θ + ε`, `ε ~ N(0, 1)`, so the α-quantile is `θ + z_α` and is maximized at
//! the upper end of the feasible interval.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quantile::{sa_step, StepSchedule};
use crate::SimRng;

pub const TOY_BOUND: f64 = 1.0;

/// Policy step sizes that converge on the toy within 5e4 iterations.
pub fn toy_policy_schedule() -> StepSchedule {
    StepSchedule::Polynomial { scale: 1.0, exponent: 0.9 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyQpo {
    pub theta: f64,
    pub q: f64,
    alpha: f64,
    quantile_lr: StepSchedule,
    policy_lr: StepSchedule,
    k: u64,
}

impl ToyQpo {
    pub fn new(theta0: f64, q0: f64, alpha: f64, quantile_lr: StepSchedule, policy_lr: StepSchedule) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || !theta0.is_finite() || !q0.is_finite() {
            return Err(Error::config("toy needs alpha in (0, 1) and finite starting values"));
        }
        Ok(Self { theta: theta0.clamp(-TOY_BOUND, TOY_BOUND), q: q0, alpha, quantile_lr, policy_lr, k: 0 })
    }

    pub fn iterations(&self) -> u64 {
        self.k
    }

    /// One coupled quantile and policy update from a single sampled return.
    pub fn step(&mut self, rng: &mut SimRng) -> Result<()> {
        let k = self.k + 1;
        let noise: f64 = StandardNormal.sample(rng);
        let ret = self.theta + noise;
        // score of N(θ, 1) at the sampled return is the noise itself
        let direction = if ret <= self.q { -noise } else { 0.0 };
        self.q = sa_step(self.q, self.alpha, self.quantile_lr.at(k, 0), ret)?;
        self.theta = (self.theta + self.policy_lr.at(k, 0) * direction).clamp(-TOY_BOUND, TOY_BOUND);
        self.k = k;
        Ok(())
    }

    /// Squared distance between the tracker and the true quantile, given
    /// the standard normal α-quantile `z_alpha`.
    pub fn tracking_error(&self, z_alpha: f64) -> f64 {
        (self.q - self.theta - z_alpha).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn converges_to_upper_bound() {
        let mut toy = ToyQpo::new(-0.5, 0.0, 0.25, StepSchedule::default_quantile(), toy_policy_schedule()).unwrap();
        let mut rng = SimRng::seed_from_u64(11);
        for _ in 0..50_000 {
            toy.step(&mut rng).unwrap();
        }
        assert!((toy.theta - 1.0).abs() <= 0.05, "theta {}", toy.theta);
    }

    #[test]
    fn zero_policy_rate_tracks_fixed_quantile() {
        let z = -0.674_489_750_196_081_7;
        let mut toy = ToyQpo::new(0.3, 0.0, 0.25, StepSchedule::default_quantile(), StepSchedule::Constant { value: 0.0 }).unwrap();
        let mut rng = SimRng::seed_from_u64(12);
        for _ in 0..200_000 {
            toy.step(&mut rng).unwrap();
        }
        assert_eq!(toy.theta, 0.3);
        assert!(toy.tracking_error(z).sqrt() < 0.03, "q {}", toy.q);
    }
}
