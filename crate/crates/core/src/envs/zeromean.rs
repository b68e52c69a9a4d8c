use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::policy::{Action, ActionSpec};
use crate::SimRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroMeanParams {
    /// Support half-widths; reshuffled every step.
    pub values: Vec<f64>,
    pub horizon: usize,
}

impl ZeroMeanParams {
    pub fn simple() -> Self {
        Self { values: vec![1.0, 4.0, 9.0], horizon: 20 }
    }

    pub fn hard() -> Self {
        Self { values: vec![0.1, 0.2, 0.3, 0.4, 0.5], horizon: 20 }
    }
}

/// Each step pays `Uniform(-s[a], s[a])` and then reshuffles `s`.
#[derive(Clone, Debug)]
pub struct ZeroMean {
    params: ZeroMeanParams,
    state: Vec<f64>,
    min: f64,
    t: usize,
}

impl ZeroMean {
    pub fn new(params: ZeroMeanParams) -> Result<Self> {
        if params.values.is_empty() || params.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config("zero-mean values must be positive and finite"));
        }
        if params.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        let min = params.values.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Self { state: params.values.clone(), params, min, t: 0 })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }
}

impl Environment for ZeroMean {
    fn observation_shape(&self) -> Vec<usize> {
        vec![self.params.values.len()]
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Categorical { n: self.params.values.len() }
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn reset(&mut self, rng: &mut SimRng) -> Vec<f64> {
        self.state = self.params.values.clone();
        self.state.shuffle(rng);
        self.t = 0;
        self.state.clone()
    }

    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<StepOutcome> {
        let a = match action.index() {
            Some(a) if a < self.state.len() => a,
            _ => return Err(Error::usage(format!("zero-mean action {action:?} out of range"))),
        };
        let s = self.state[a];
        let reward = rng.random_range(-s..=s);
        let optimal = s == self.min;
        self.state.shuffle(rng);
        self.t += 1;
        Ok(StepOutcome { observation: self.state.clone(), reward, optimal: Some(optimal) })
    }

    fn reward_bound(&self) -> Option<f64> {
        self.params.values.iter().cloned().reduce(f64::max)
    }
}
