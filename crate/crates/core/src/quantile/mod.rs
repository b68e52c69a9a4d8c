//! Stochastic-approximation quantile trackers: a single running estimate, a
//! per-horizon bank for truncated trajectories, and importance-weighted
//! updates for off-policy samples.

mod schedule;

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamState;
use crate::error::{Error, Result};

pub use schedule::StepSchedule;

/// Number of pilot episodes used to seed a tracker.
pub const WARM_START_EPISODES: usize = 32;

/// How a tracker turns the indicator signal into a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileOptimizer {
    /// Plain recursion `q += β (α − 1{U ≤ q})`.
    #[default]
    Sa,
    /// Scalar Adam fed with the pseudo-gradient `1{U ≤ q} − α`; the schedule
    /// supplies its learning rate.
    Adam,
}

/// 1-based rank `⌈α n⌉` (at least 1) used by every empirical quantile here.
pub fn order_statistic_rank(alpha: f64, n: usize) -> usize {
    // tolerance keeps products like 0.3 * 10 from rounding up a rank
    (((alpha * n as f64) - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Order statistic `⌈α n⌉` of `samples`.
pub fn empirical_quantile(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::config("empirical quantile of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[order_statistic_rank(alpha, sorted.len()) - 1])
}

/// Initial tracker value from a pilot batch of returns.
pub fn warm_start(samples: &[f64], alpha: f64) -> Result<f64> {
    empirical_quantile(samples, alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("quantile level {alpha} outside (0, 1)")))
    }
}

fn indicator(ret: f64, q: f64) -> f64 {
    if ret <= q {
        1.0
    } else {
        0.0
    }
}

/// Single SA update: `q + β (α − 1{ret ≤ q})`.
pub fn sa_step(q: f64, alpha: f64, beta: f64, ret: f64) -> Result<f64> {
    if !ret.is_finite() {
        return Err(Error::training(format!("non-finite return {ret} passed to quantile tracker")));
    }
    Ok(q + beta * (alpha - indicator(ret, q)))
}

fn adam_step(adam: &mut AdamState, q: f64, lr: f64, signal: f64) -> Result<f64> {
    adam.lr = lr;
    let mut p = [q];
    adam.step(&mut p, &[signal])?;
    Ok(p[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileTracker {
    q: f64,
    alpha: f64,
    schedule: StepSchedule,
    optimizer: QuantileOptimizer,
    steps: u64,
    episode: u64,
    adam: AdamState,
}

impl QuantileTracker {
    pub fn new(q0: f64, alpha: f64, schedule: StepSchedule, optimizer: QuantileOptimizer) -> Result<Self> {
        check_alpha(alpha)?;
        if !q0.is_finite() {
            return Err(Error::config("initial quantile must be finite"));
        }
        Ok(Self { q: q0, alpha, schedule, optimizer, steps: 0, episode: 0, adam: AdamState::new(1, 0.0) })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Episode index driving staircase schedules.
    pub fn set_episode(&mut self, episode: u64) {
        self.episode = episode;
    }

    pub fn current_step_size(&self) -> f64 {
        self.schedule.at(self.steps + 1, self.episode)
    }

    pub fn update(&mut self, ret: f64) -> Result<f64> {
        let beta = self.current_step_size();
        let next = match self.optimizer {
            QuantileOptimizer::Sa => sa_step(self.q, self.alpha, beta, ret)?,
            QuantileOptimizer::Adam => {
                if !ret.is_finite() {
                    return Err(Error::training(format!("non-finite return {ret} passed to quantile tracker")));
                }
                adam_step(&mut self.adam, self.q, beta, indicator(ret, self.q) - self.alpha)?
            }
        };
        self.q = next;
        self.steps += 1;
        Ok(self.q)
    }
}

/// One quantile estimate per truncation horizon `l ∈ [t0, t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileBank {
    q: Vec<f64>,
    t0: usize,
    alpha: f64,
    schedule: StepSchedule,
    optimizer: QuantileOptimizer,
    steps: Vec<u64>,
    episode: u64,
    adams: Vec<AdamState>,
    skipped: u64,
}

impl QuantileBank {
    pub fn new(q0: &[f64], t0: usize, alpha: f64, schedule: StepSchedule, optimizer: QuantileOptimizer) -> Result<Self> {
        check_alpha(alpha)?;
        if q0.is_empty() || q0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("quantile bank needs finite initial values"));
        }
        Ok(Self {
            q: q0.to_vec(),
            t0,
            alpha,
            schedule,
            optimizer,
            steps: vec![0; q0.len()],
            episode: 0,
            adams: vec![AdamState::new(1, 0.0); q0.len()],
            skipped: 0,
        })
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    /// Largest horizon covered.
    pub fn t(&self) -> usize {
        self.t0 + self.q.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    /// Updates skipped because of a non-finite importance ratio.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn set_episode(&mut self, episode: u64) {
        self.episode = episode;
    }

    fn slot(&self, l: usize) -> Result<usize> {
        if l < self.t0 || l > self.t() {
            return Err(Error::usage(format!("horizon {l} outside [{}, {}]", self.t0, self.t())));
        }
        Ok(l - self.t0)
    }

    pub fn get(&self, l: usize) -> Result<f64> {
        Ok(self.q[self.slot(l)?])
    }

    pub fn update(&mut self, l: usize, ret: f64) -> Result<f64> {
        self.update_weighted(l, ret, 1.0).map(|v| v.expect("unit ratio is finite"))
    }

    /// `q^l += β (α − ρ 1{ret ≤ q^l})`; other entries are untouched. Returns
    /// `None` when the ratio is non-finite and the update was skipped.
    pub fn update_weighted(&mut self, l: usize, ret: f64, ratio: f64) -> Result<Option<f64>> {
        let i = self.slot(l)?;
        if !ret.is_finite() {
            return Err(Error::training(format!("non-finite return {ret} at horizon {l}")));
        }
        if !ratio.is_finite() {
            self.skipped += 1;
            return Ok(None);
        }
        if ratio < 0.0 {
            return Err(Error::usage(format!("negative importance ratio {ratio}")));
        }
        let beta = self.schedule.at(self.steps[i] + 1, self.episode);
        let hit = ratio * indicator(ret, self.q[i]);
        self.q[i] = match self.optimizer {
            QuantileOptimizer::Sa => self.q[i] + beta * (self.alpha - hit),
            QuantileOptimizer::Adam => adam_step(&mut self.adams[i], self.q[i], beta, hit - self.alpha)?,
        };
        self.steps[i] += 1;
        Ok(Some(self.q[i]))
    }
}
