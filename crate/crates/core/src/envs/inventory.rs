use serde::{Deserialize, Serialize};

use super::demand::{DemandModel, DemandProcess};
use super::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::policy::{Action, ActionSpec};
use crate::SimRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchelonParams {
    pub lead_time: usize,
    pub price: f64,
    pub holding_cost: f64,
    pub lost_sale_penalty: f64,
    pub initial_inventory: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InventoryParams {
    /// Intermediate echelons, customer side first.
    pub echelons: Vec<EchelonParams>,
    /// Unit price charged by the unlimited manufacturer.
    pub manufacturer_price: f64,
    pub demand: DemandModel,
    pub horizon: usize,
    /// Orders are chosen from `{0, ..., max_order}`.
    pub max_order: u64,
}

impl InventoryParams {
    pub fn single_echelon(demand: DemandModel) -> Self {
        Self {
            echelons: vec![EchelonParams { lead_time: 3, price: 2.0, holding_cost: 0.15, lost_sale_penalty: 0.10, initial_inventory: 10 }],
            manufacturer_price: 1.5,
            demand,
            horizon: 50,
            max_order: 20,
        }
    }

    pub fn multi_echelon() -> Self {
        let e = |lead_time, price, holding_cost, lost_sale_penalty| EchelonParams {
            lead_time,
            price,
            holding_cost,
            lost_sale_penalty,
            initial_inventory: 10,
        };
        Self {
            echelons: vec![e(2, 2.0, 0.2, 0.125), e(3, 1.5, 0.15, 0.1), e(5, 1.0, 0.1, 0.075)],
            manufacturer_price: 0.5,
            demand: DemandModel::saw(),
            horizon: 100,
            max_order: 20,
        }
    }

    /// Observation look-back: the longest lead time.
    pub fn lookback(&self) -> usize {
        self.echelons.iter().map(|e| e.lead_time).max().unwrap_or(1).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.echelons.is_empty() || self.horizon == 0 || self.max_order == 0 {
            return Err(Error::config("inventory needs echelons, a positive horizon and a positive order cap"));
        }
        for e in &self.echelons {
            if e.lead_time == 0 {
                return Err(Error::config("lead times must be at least one period"));
            }
            if [e.price, e.holding_cost, e.lost_sale_penalty].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::config("inventory costs must be finite and nonnegative"));
            }
        }
        self.demand.validate()
    }
}

/// Per-echelon flows of one period.
#[derive(Clone, Debug, PartialEq)]
pub struct InventoryStep {
    pub shipped: Vec<u64>,
    pub lost: Vec<u64>,
    pub on_hand: Vec<u64>,
    pub arrivals: Vec<u64>,
    /// Orders placed upstream by each echelon, including the customer demand
    /// at index 0.
    pub orders: Vec<u64>,
    pub profits: Vec<f64>,
    pub reward: f64,
}

/// Lost-sales serial supply chain.
#[derive(Clone, Debug)]
pub struct Inventory {
    params: InventoryParams,
    demand: DemandProcess,
    on_hand: Vec<u64>,
    /// `shipped[i][t-1]` is the quantity shipped by echelon `i + 1` in period
    /// `t`; the last row belongs to the manufacturer.
    shipped: Vec<Vec<u64>>,
    /// Per-period `(I, U, S, q)` feature rows, oldest first.
    history: Vec<Vec<f64>>,
    t: usize,
}

impl Inventory {
    pub fn new(params: InventoryParams) -> Result<Self> {
        params.validate()?;
        let n = params.echelons.len();
        let mut env = Self {
            demand: DemandProcess::new(params.demand.clone())?,
            on_hand: vec![0; n],
            shipped: vec![Vec::new(); n + 1],
            history: Vec::new(),
            t: 0,
            params,
        };
        env.clear();
        Ok(env)
    }

    pub fn params(&self) -> &InventoryParams {
        &self.params
    }

    pub fn on_hand(&self) -> &[u64] {
        &self.on_hand
    }

    /// Resets stocks and pipelines without touching the demand path.
    pub fn clear(&mut self) {
        let n = self.params.echelons.len();
        self.on_hand = self.params.echelons.iter().map(|e| e.initial_inventory).collect();
        self.shipped = vec![Vec::with_capacity(self.params.horizon); n + 1];
        let scale = self.params.max_order as f64;
        let blank: Vec<f64> = (0..n).flat_map(|i| [self.on_hand[i] as f64 / scale, 0.0, 0.0, 0.0]).collect();
        self.history = vec![blank; self.params.lookback()];
        self.t = 0;
    }

    /// Sets on-hand stock directly; used to script exact scenarios.
    pub fn set_on_hand(&mut self, on_hand: Vec<u64>) -> Result<()> {
        if on_hand.len() != self.on_hand.len() {
            return Err(Error::usage("one stock level per echelon"));
        }
        self.on_hand = on_hand;
        Ok(())
    }

    fn shipped_at(&self, row: usize, t: isize) -> u64 {
        if t < 1 {
            0
        } else {
            self.shipped[row].get(t as usize - 1).copied().unwrap_or(0)
        }
    }

    /// Advances one period with explicit `orders` (one per echelon) and
    /// customer `demand`.
    pub fn step_orders(&mut self, orders: &[u64], demand: u64) -> Result<InventoryStep> {
        let n = self.params.echelons.len();
        if orders.len() != n {
            return Err(Error::usage(format!("expected {n} orders, got {}", orders.len())));
        }
        let t = self.t as isize + 1;
        let mut q = Vec::with_capacity(n + 1);
        q.push(demand);
        q.extend_from_slice(orders);

        let mut shipped = vec![0u64; n + 1];
        let mut lost = vec![0u64; n];
        let mut arrivals = vec![0u64; n];
        for i in 0..n {
            let lead = self.params.echelons[i].lead_time as isize;
            arrivals[i] = self.shipped_at(i + 1, t - lead);
            let available = self.on_hand[i] + arrivals[i];
            shipped[i] = q[i].min(available);
            lost[i] = q[i] - shipped[i];
            self.on_hand[i] = available - shipped[i];
        }
        shipped[n] = q[n];

        let mut profits = Vec::with_capacity(n);
        for i in 0..n {
            let e = &self.params.echelons[i];
            let upstream_price = if i + 1 < n { self.params.echelons[i + 1].price } else { self.params.manufacturer_price };
            profits.push(
                e.price * shipped[i] as f64
                    - upstream_price * shipped[i + 1] as f64
                    - e.holding_cost * self.on_hand[i] as f64
                    - e.lost_sale_penalty * lost[i] as f64,
            );
        }
        for (row, s) in shipped.iter().enumerate() {
            self.shipped[row].push(*s);
        }
        let scale = self.params.max_order as f64;
        let features =
            (0..n).flat_map(|i| [self.on_hand[i] as f64, lost[i] as f64, shipped[i] as f64, q[i + 1] as f64]).map(|v| v / scale).collect();
        self.history.remove(0);
        self.history.push(features);
        self.t += 1;
        let reward = profits.iter().sum();
        Ok(InventoryStep { shipped, lost, on_hand: self.on_hand.clone(), arrivals, orders: q, profits, reward })
    }

    fn observe(&self) -> Vec<f64> {
        self.history.concat()
    }
}

impl Environment for Inventory {
    fn observation_shape(&self) -> Vec<usize> {
        vec![self.params.lookback(), 4 * self.params.echelons.len()]
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::MultiDiscrete { n: self.params.max_order as usize + 1, groups: self.params.echelons.len() }
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn reset(&mut self, _rng: &mut SimRng) -> Vec<f64> {
        self.clear();
        self.demand.reset();
        self.observe()
    }

    fn step(&mut self, action: &Action, rng: &mut SimRng) -> Result<StepOutcome> {
        let orders: Vec<u64> = match action {
            Action::Discrete(v) if v.len() == self.params.echelons.len() && v.iter().all(|&a| a as u64 <= self.params.max_order) => {
                v.iter().map(|&a| a as u64).collect()
            }
            _ => return Err(Error::usage(format!("infeasible order vector {action:?}"))),
        };
        let demand = self.demand.next(self.t as u64 + 1, rng);
        let out = self.step_orders(&orders, demand)?;
        Ok(StepOutcome { observation: self.observe(), reward: out.reward, optimal: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn single() -> Inventory {
        Inventory::new(InventoryParams::single_echelon(DemandModel::uniform())).unwrap()
    }

    #[test]
    fn worked_single_echelon_period() {
        let mut env = single();
        let out = env.step_orders(&[5], 4).unwrap();
        assert_eq!(out.shipped[0], 4);
        assert_eq!(out.lost[0], 0);
        assert_eq!(out.on_hand[0], 6);
        assert_eq!(out.arrivals[0], 0);
        assert!((out.reward - (8.0 - 7.5 - 0.9)).abs() < 1e-12);
    }

    #[test]
    fn idle_empty_chain_earns_nothing() {
        let mut env = single();
        env.set_on_hand(vec![0]).unwrap();
        let out = env.step_orders(&[0], 0).unwrap();
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn excess_demand_is_lost() {
        let mut env = single();
        let out = env.step_orders(&[0], 20).unwrap();
        assert_eq!((out.shipped[0], out.lost[0], out.on_hand[0]), (10, 10, 0));
    }

    #[test]
    fn orders_arrive_after_lead_time() {
        let mut env = single();
        env.set_on_hand(vec![0]).unwrap();
        env.step_orders(&[7], 0).unwrap();
        assert_eq!(env.step_orders(&[0], 0).unwrap().arrivals[0], 0);
        assert_eq!(env.step_orders(&[0], 0).unwrap().arrivals[0], 0);
        let out = env.step_orders(&[0], 3).unwrap();
        assert_eq!(out.arrivals[0], 7);
        assert_eq!((out.shipped[0], out.on_hand[0]), (3, 4));
    }

    #[test]
    fn flow_conservation_multi_echelon() {
        let mut env = Inventory::new(InventoryParams::multi_echelon()).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..5 {
            env.reset(&mut rng);
            for _ in 0..env.horizon() {
                let before = env.on_hand().to_vec();
                let orders: Vec<u64> = (0..3).map(|_| rng.random_range(0..=20)).collect();
                let demand = rng.random_range(0..=25);
                let out = env.step_orders(&orders, demand).unwrap();
                for i in 0..3 {
                    assert_eq!(out.on_hand[i], before[i] + out.arrivals[i] - out.shipped[i]);
                    assert_eq!(out.shipped[i] + out.lost[i], out.orders[i]);
                    assert!(out.shipped[i] <= out.orders[i]);
                }
                assert_eq!(out.shipped[3], orders[2]);
                let total: f64 = out.profits.iter().sum();
                assert!((total - out.reward).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn observation_window_shape() {
        let mut env = Inventory::new(InventoryParams::multi_echelon()).unwrap();
        let mut rng = SimRng::seed_from_u64(4);
        let obs = env.reset(&mut rng);
        assert_eq!(env.observation_shape(), vec![5, 12]);
        assert_eq!(obs.len(), 60);
        let out = env.step(&Action::Discrete(vec![1, 2, 3]), &mut rng).unwrap();
        // newest row carries this period's orders
        let last = &out.observation[48..];
        assert_eq!([last[3], last[7], last[11]], [1.0 / 20.0, 2.0 / 20.0, 3.0 / 20.0]);
        assert!(matches!(env.step(&Action::Discrete(vec![21, 0, 0]), &mut rng), Err(Error::Usage(_))));
    }

    #[test]
    fn identical_seed_identical_rewards() {
        let run = |seed| {
            let mut env = Inventory::new(InventoryParams::single_echelon(DemandModel::merton())).unwrap();
            let mut rng = SimRng::seed_from_u64(seed);
            env.reset(&mut rng);
            (0..50).map(|k| env.step(&Action::Discrete(vec![k % 21]), &mut rng).unwrap().reward).collect::<Vec<_>>()
        };
        assert_eq!(run(1), run(1));
    }
}
