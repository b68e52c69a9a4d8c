use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SimRng;

/// Customer demand generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DemandModel {
    /// Uniform on `{0, ..., max}`.
    Uniform { max: u64 },
    /// `floor(scale * exp(J_t))` with a compound-Poisson jump log-process.
    Merton { drift: f64, sigma: f64, jump_mean: f64, jump_std: f64, scale: f64, jump_rate: f64 },
    /// `x_t + (t + offset) mod period` with `x_t` uniform on `{0, ..., noise_max}`.
    Saw { noise_max: u64, offset: u64, period: u64 },
}

impl DemandModel {
    pub fn uniform() -> Self {
        DemandModel::Uniform { max: 20 }
    }

    pub fn merton() -> Self {
        DemandModel::Merton { drift: 5e-5, sigma: 0.01, jump_mean: 0.0, jump_std: 0.01, scale: 10.0, jump_rate: 15.0 }
    }

    pub fn saw() -> Self {
        DemandModel::Saw { noise_max: 7, offset: 6, period: 15 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DemandModel::Uniform { .. } => true,
            DemandModel::Merton { drift, sigma, jump_mean, jump_std, scale, jump_rate } => {
                [drift, sigma, jump_mean, jump_std, scale].iter().all(|v| v.is_finite())
                    && sigma >= 0.0
                    && jump_std >= 0.0
                    && scale >= 0.0
                    && jump_rate > 0.0
                    && jump_rate.is_finite()
            }
            DemandModel::Saw { period, .. } => period > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid demand model {self:?}")))
        }
    }
}

/// A demand model together with its path state.
#[derive(Clone, Debug)]
pub struct DemandProcess {
    model: DemandModel,
    log_level: f64,
}

impl DemandProcess {
    pub fn new(model: DemandModel) -> Result<Self> {
        model.validate()?;
        Ok(Self { model, log_level: 0.0 })
    }

    pub fn reset(&mut self) {
        self.log_level = 0.0;
    }

    /// Demand for period `t` (1-based).
    pub fn next(&mut self, t: u64, rng: &mut SimRng) -> u64 {
        match self.model {
            DemandModel::Uniform { max } => rng.random_range(0..=max),
            DemandModel::Merton { drift, sigma, jump_mean, jump_std, scale, jump_rate } => {
                let z: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let jumps = Poisson::new(jump_rate).expect("validated rate").sample(rng);
                self.log_level += drift - 0.5 * sigma * sigma + sigma * z + jump_mean * jumps + jump_std * jumps.sqrt() * z2;
                (scale * self.log_level.exp()).floor().max(0.0) as u64
            }
            DemandModel::Saw { noise_max, offset, period } => self.saw_value(t, rng.random_range(0..=noise_max), offset, period),
        }
    }

    fn saw_value(&self, t: u64, noise: u64, offset: u64, period: u64) -> u64 {
        noise + (t + offset) % period
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn uniform_mean_is_ten() {
        let mut d = DemandProcess::new(DemandModel::uniform()).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        let n = 100_000;
        let mean = (1..=n).map(|t| d.next(t, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 10.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn saw_wave_zero_point() {
        let d = DemandProcess::new(DemandModel::saw()).unwrap();
        assert_eq!(d.saw_value(9, 0, 6, 15), 0);
        assert_eq!(d.saw_value(8, 0, 6, 15), 14);
        assert_eq!(d.saw_value(9, 7, 6, 15), 7);
    }

    #[test]
    fn saw_wave_stays_in_range() {
        let mut d = DemandProcess::new(DemandModel::saw()).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        for t in 1..2000 {
            assert!(d.next(t, &mut rng) <= 21);
        }
    }

    #[test]
    fn merton_path_is_nonnegative_integer_around_scale() {
        let mut d = DemandProcess::new(DemandModel::merton()).unwrap();
        let mut rng = SimRng::seed_from_u64(2);
        let mut total = 0u64;
        for t in 1..=100 {
            total += d.next(t, &mut rng);
        }
        // log level drifts slowly, so demand hovers near floor(10 e^J)
        let mean = total as f64 / 100.0;
        assert!((5.0..=15.0).contains(&mean), "{mean}");
        d.reset();
        assert_eq!(d.log_level, 0.0);
    }

    #[test]
    fn invalid_merton_rejected() {
        let bad = DemandModel::Merton { drift: 0.0, sigma: -1.0, jump_mean: 0.0, jump_std: 0.0, scale: 1.0, jump_rate: 1.0 };
        assert!(DemandProcess::new(bad).is_err());
    }
}
