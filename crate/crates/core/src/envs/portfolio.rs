use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::policy::{Action, ActionSpec};
use crate::SimRng;

/// Lower bound on the per-step gross price multiplier.
pub const PRICE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioParams {
    pub drift: Vec<f64>,
    /// Square-root covariance, row-major `n x n`.
    pub vol_root: Vec<Vec<f64>>,
    pub horizon: usize,
    pub fee: f64,
    pub initial_price: f64,
    pub initial_value: f64,
    /// Steps of profit margins summarized in the observation.
    pub window: usize,
}

impl PortfolioParams {
    /// Low-risk asset plus a pair of risky assets whose noise cancels.
    pub fn hedgeable() -> Self {
        Self {
            drift: vec![0.01, 0.08, 0.16],
            vol_root: vec![vec![0.01, 0.0, 0.0], vec![0.0, 0.08, -0.08], vec![0.0, -0.08, 0.08]],
            ..Self::base()
        }
    }

    pub fn imperfect() -> Self {
        Self {
            drift: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            vol_root: vec![
                vec![0.01, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.04, -0.055, 0.0, 0.0],
                vec![0.0, -0.055, 0.09, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 0.16, -0.19],
                vec![0.0, 0.0, 0.0, -0.19, 0.25],
            ],
            ..Self::base()
        }
    }

    fn base() -> Self {
        Self { drift: Vec::new(), vol_root: Vec::new(), horizon: 100, fee: 0.001, initial_price: 1.0, initial_value: 100.0, window: 25 }
    }

    pub fn assets(&self) -> usize {
        self.drift.len()
    }

    /// Time step so that drifts are per horizon.
    pub fn dt(&self) -> f64 {
        1.0 / self.horizon as f64
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.drift.len();
        if n == 0 || self.vol_root.len() != n || self.vol_root.iter().any(|r| r.len() != n) {
            return Err(Error::config("portfolio needs n drifts and an n x n volatility root"));
        }
        if self.drift.iter().chain(self.vol_root.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::config("portfolio parameters must be finite"));
        }
        if self.horizon == 0 || self.window == 0 {
            return Err(Error::config("portfolio horizon and window must be positive"));
        }
        if !(0.0..1.0).contains(&self.fee) {
            return Err(Error::config(format!("fee {} outside [0, 1)", self.fee)));
        }
        if !(self.initial_price > 0.0 && self.initial_value > 0.0) {
            return Err(Error::config("initial price and value must be positive"));
        }
        Ok(())
    }
}

/// Euler-Maruyama step `p ⊙ (1 + μΔt + R √Δt ε)` with the multiplier floored
/// at [`PRICE_FLOOR`].
pub fn gbm_step(prices: &[f64], drift: &[f64], vol_root: &[Vec<f64>], dt: f64, eps: &[f64]) -> Vec<f64> {
    let sq = dt.sqrt();
    prices
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let shock: f64 = vol_root[i].iter().zip(eps).map(|(r, e)| r * e).sum();
            p * (1.0 + drift[i] * dt + sq * shock).max(PRICE_FLOOR)
        })
        .collect()
}

/// Moves positions toward `alloc` of `value`; purchases lose fraction `fee`.
pub fn rebalance_positions(positions: &[f64], prices: &[f64], value: f64, alloc: &[f64], fee: f64) -> Vec<f64> {
    positions
        .iter()
        .zip(prices)
        .zip(alloc)
        .map(|((w, p), a)| {
            let gap = a * value / p - w;
            w + (1.0 - fee) * gap.max(0.0) - (-gap).max(0.0)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug)]
pub struct Portfolio {
    params: PortfolioParams,
    prices: Vec<f64>,
    positions: Vec<f64>,
    value: f64,
    margins: VecDeque<Vec<f64>>,
    t: usize,
}

impl Portfolio {
    pub fn new(params: PortfolioParams) -> Result<Self> {
        params.validate()?;
        let n = params.assets();
        Ok(Self {
            prices: vec![params.initial_price; n],
            positions: vec![0.0; n],
            value: params.initial_value,
            margins: VecDeque::with_capacity(params.window),
            t: 0,
            params,
        })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Share of value held in each asset.
    pub fn value_weights(&self) -> Vec<f64> {
        self.positions.iter().zip(&self.prices).map(|(w, p)| w * p / self.value).collect()
    }

    /// Overrides the internal state; used to script exact scenarios.
    pub fn set_state(&mut self, prices: Vec<f64>, positions: Vec<f64>) -> Result<()> {
        let n = self.params.assets();
        if prices.len() != n || positions.len() != n || prices.iter().any(|p| !(*p > 0.0)) || positions.iter().any(|w| *w < 0.0) {
            return Err(Error::usage("portfolio state needs n positive prices and n nonnegative positions"));
        }
        self.value = dot(&prices, &positions);
        self.prices = prices;
        self.positions = positions;
        Ok(())
    }

    fn observe(&self) -> Vec<f64> {
        let n = self.params.assets();
        let mut obs = self.value_weights();
        obs.extend_from_slice(&self.prices);
        let (mut mean, mut var) = (vec![0.0; n], vec![0.0; n]);
        let k = self.margins.len();
        if k > 0 {
            for m in &self.margins {
                for i in 0..n {
                    mean[i] += m[i] / k as f64;
                }
            }
            for m in &self.margins {
                for i in 0..n {
                    var[i] += (m[i] - mean[i]).powi(2) / k as f64;
                }
            }
        }
        // margins are O(Δt) in mean and O(√Δt) in spread; rescale to O(1)
        let dt = self.params.dt();
        obs.extend(mean.iter().map(|m| m / dt));
        obs.extend(var.iter().map(|v| v.sqrt() / dt.sqrt()));
        obs
    }

    /// Trades to `alloc`, advances prices with noise `eps` and returns the
    /// reward `v_{t+1} - v_t`.
    pub fn step_with_noise(&mut self, alloc: &[f64], eps: &[f64]) -> Result<f64> {
        let n = self.params.assets();
        if alloc.len() != n || alloc.iter().any(|a| !(*a >= -1e-6)) || (alloc.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::usage(format!("allocation {alloc:?} is off the simplex")));
        }
        let positions = rebalance_positions(&self.positions, &self.prices, self.value, alloc, self.params.fee);
        let next = gbm_step(&self.prices, &self.params.drift, &self.params.vol_root, self.params.dt(), eps);
        let margin: Vec<f64> = next.iter().zip(&self.prices).map(|(a, b)| (a - b) / b).collect();
        if self.margins.len() == self.params.window {
            self.margins.pop_front();
        }
        self.margins.push_back(margin);
        let value = dot(&next, &positions);
        let reward = value - self.value;
        self.positions = positions;
        self.prices = next;
        self.value = value;
        self.t += 1;
        Ok(reward)
    }
}

impl Environment for Portfolio {
    fn observation_shape(&self) -> Vec<usize> {
        vec![4 * self.params.assets()]
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Simplex { n: self.params.assets() }
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn reset(&mut self, rng: &mut SimRng) -> Vec<f64> {
        let n = self.params.assets();
        // uniform point on the simplex via normalized exponentials
        let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = e.iter().sum();
        self.prices = vec![self.params.initial_price; n];
        self.value = self.params.initial_value;
        self.positions = e.iter().map(|x| x / total * self.value / self.params.initial_price).collect();
        self.margins.clear();
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<StepOutcome> {
        let alloc = action.weights().ok_or_else(|| Error::usage("portfolio actions are allocations"))?.to_vec();
        let eps: Vec<f64> = (0..self.params.assets()).map(|_| rng.sample(StandardNormal)).collect();
        let reward = self.step_with_noise(&alloc, &eps)?;
        Ok(StepOutcome { observation: self.observe(), reward, optimal: None })
    }
}
