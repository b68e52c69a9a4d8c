//! Episodic simulation environments.

mod demand;
mod inventory;
mod portfolio;
mod tabular;
mod zeromean;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Action, ActionSpec};
use crate::SimRng;

pub use demand::{DemandModel, DemandProcess};
pub use inventory::{EchelonParams, Inventory, InventoryParams, InventoryStep};
pub use portfolio::{gbm_step, rebalance_positions, Portfolio, PortfolioParams, PRICE_FLOOR};
pub use tabular::TabularMdp;
pub use zeromean::{ZeroMean, ZeroMeanParams};

/// One environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Task metric for environments with a known per-step optimum (`Some(true)`
    /// when the chosen action was optimal).
    pub optimal: Option<bool>,
}

pub trait Environment: Send {
    /// Per-sample observation shape, flattened row-major into observations.
    fn observation_shape(&self) -> Vec<usize>;

    fn action_spec(&self) -> ActionSpec;

    /// Number of steps in every episode.
    fn horizon(&self) -> usize;

    fn reset(&mut self, rng: &mut SimRng) -> Vec<f64>;

    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<StepOutcome>;

    /// Bound on `|r_t|` when the rewards are bounded.
    fn reward_bound(&self) -> Option<f64> {
        None
    }

    fn observation_len(&self) -> usize {
        self.observation_shape().iter().product()
    }
}

/// Serializable environment selection with all exogenous parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    ZeroMean(ZeroMeanParams),
    Portfolio(PortfolioParams),
    Inventory(InventoryParams),
    Tabular(TabularMdp),
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvConfig::ZeroMean(p) => Box::new(ZeroMean::new(p.clone())?),
            EnvConfig::Portfolio(p) => Box::new(Portfolio::new(p.clone())?),
            EnvConfig::Inventory(p) => Box::new(Inventory::new(p.clone())?),
            EnvConfig::Tabular(m) => {
                m.validate()?;
                Box::new(m.clone())
            }
        })
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvConfig::ZeroMean(p) => p.horizon,
            EnvConfig::Portfolio(p) => p.horizon,
            EnvConfig::Inventory(p) => p.horizon,
            EnvConfig::Tabular(m) => m.horizon,
        }
    }

    /// Named presets carrying the documented default parameters.
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "zero_mean_simple" => EnvConfig::ZeroMean(ZeroMeanParams::simple()),
            "zero_mean_hard" => EnvConfig::ZeroMean(ZeroMeanParams::hard()),
            "portfolio_hedgeable" => EnvConfig::Portfolio(PortfolioParams::hedgeable()),
            "portfolio_imperfect" => EnvConfig::Portfolio(PortfolioParams::imperfect()),
            "inventory_uniform" => EnvConfig::Inventory(InventoryParams::single_echelon(DemandModel::uniform())),
            "inventory_merton" => EnvConfig::Inventory(InventoryParams::single_echelon(DemandModel::merton())),
            "inventory_saw" => EnvConfig::Inventory(InventoryParams::single_echelon(DemandModel::saw())),
            "inventory_multi" => EnvConfig::Inventory(InventoryParams::multi_echelon()),
            other => return Err(Error::config(format!("unknown environment preset {other:?}"))),
        })
    }
}

/// Discounted return `Σ η^t r_t`.
pub fn discounted_return(rewards: &[f64], discount: f64) -> f64 {
    let mut acc = 0.0;
    let mut w = 1.0;
    for r in rewards {
        acc += w * r;
        w *= discount;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn discounted_return_values() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.5), 1.75);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
    }

    #[test]
    fn presets_build_and_reset() {
        for name in [
            "zero_mean_simple",
            "zero_mean_hard",
            "portfolio_hedgeable",
            "portfolio_imperfect",
            "inventory_uniform",
            "inventory_merton",
            "inventory_saw",
            "inventory_multi",
        ] {
            let cfg = EnvConfig::preset(name).unwrap();
            let mut env = cfg.build().unwrap();
            let mut rng = SimRng::seed_from_u64(0);
            let obs = env.reset(&mut rng);
            assert_eq!(obs.len(), env.observation_len(), "{name}");
            assert_eq!(env.horizon(), cfg.horizon());
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<EnvConfig>(&json).unwrap(), cfg);
        }
        assert!(EnvConfig::preset("nope").is_err());
    }
}
