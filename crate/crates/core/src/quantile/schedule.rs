use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decaying step-size sequence.
///
/// Polynomial forms are indexed by the 1-based update count, staircase forms
/// by the 0-based episode index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `scale * k^(-exponent)`.
    Polynomial {
        scale: f64,
        exponent: f64,
    },
    /// `initial * factor^floor(episode / interval)`.
    Staircase {
        initial: f64,
        factor: f64,
        interval: u64,
    },
    Constant {
        value: f64,
    },
}

impl StepSchedule {
    /// Quantile-tracker default `0.5 k^-0.7`.
    pub fn default_quantile() -> Self {
        StepSchedule::Polynomial { scale: 0.5, exponent: 0.7 }
    }

    /// Policy default `0.1 k^-0.9`.
    pub fn default_policy() -> Self {
        StepSchedule::Polynomial { scale: 0.1, exponent: 0.9 }
    }

    /// Companion staircase for a quantile tracker whose policy learning rate
    /// decays by `factor`: the quantile rate decays by `(1 + factor) / 2`
    /// over the same interval.
    pub fn quantile_companion(initial: f64, policy_factor: f64, interval: u64) -> Self {
        StepSchedule::Staircase { initial, factor: 0.5 * (1.0 + policy_factor), interval }
    }

    pub fn at(&self, step: u64, episode: u64) -> f64 {
        match *self {
            StepSchedule::Polynomial { scale, exponent } => scale * (step.max(1) as f64).powf(-exponent),
            StepSchedule::Staircase { initial, factor, interval } => initial * factor.powf((episode / interval.max(1)) as f64),
            StepSchedule::Constant { value } => value,
        }
    }

    /// Rejects schedules that are not strictly positive and non-increasing.
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Polynomial { scale, exponent } => scale > 0.0 && exponent >= 0.0 && scale.is_finite(),
            StepSchedule::Staircase { initial, factor, interval } => {
                initial > 0.0 && initial.is_finite() && factor > 0.0 && factor <= 1.0 && interval > 0
            }
            StepSchedule::Constant { value } => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid step schedule {self:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polynomial_values() {
        let s = StepSchedule::Polynomial { scale: 0.5, exponent: 0.7 };
        assert_eq!(s.at(1, 0), 0.5);
        assert!((s.at(10, 0) - 0.5 * 10f64.powf(-0.7)).abs() < 1e-15);
    }

    #[test]
    fn staircase_values() {
        let s = StepSchedule::Staircase { initial: 1e-3, factor: 0.8, interval: 2500 };
        assert_eq!(s.at(1, 0), 1e-3);
        assert_eq!(s.at(1, 2499), 1e-3);
        assert!((s.at(1, 2500) - 8e-4).abs() < 1e-18);
        assert!((s.at(1, 7500) - 1e-3 * 0.512).abs() < 1e-15);
        let q = StepSchedule::quantile_companion(0.01, 0.8, 2500);
        assert!((q.at(1, 2500) - 0.009).abs() < 1e-15);
    }

    #[test]
    fn defaults_respect_timescale_ordering() {
        let (StepSchedule::Polynomial { exponent: b, .. }, StepSchedule::Polynomial { exponent: g, .. }) =
            (StepSchedule::default_quantile(), StepSchedule::default_policy())
        else {
            unreachable!()
        };
        assert!(0.5 < b && b < g && g < 1.0);
    }

    #[test]
    fn invalid_schedules_rejected() {
        assert!(StepSchedule::Constant { value: 0.0 }.validate().is_err());
        assert!(StepSchedule::Staircase { initial: 1.0, factor: 1.2, interval: 3 }.validate().is_err());
        assert!(StepSchedule::Staircase { initial: 1.0, factor: 0.9, interval: 0 }.validate().is_err());
        assert!(StepSchedule::default_quantile().validate().is_ok());
    }

    proptest! {
        #[test]
        fn schedules_positive_and_non_increasing(
            scale in 1e-4f64..2.0,
            exponent in 0.0f64..1.0,
            factor in 0.5f64..1.0,
            interval in 1u64..100,
            k in 1u64..500,
        ) {
            let p = StepSchedule::Polynomial { scale, exponent };
            prop_assert!(p.at(k, 0) > 0.0 && p.at(k + 1, 0) <= p.at(k, 0));
            let s = StepSchedule::Staircase { initial: scale, factor, interval };
            prop_assert!(s.at(1, k) > 0.0 && s.at(1, k + 1) <= s.at(1, k));
        }
    }
}
