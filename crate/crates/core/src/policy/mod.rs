//! Parameterized stochastic policies, their score functions, and the
//! baseline networks used by the proximal algorithms.

mod baseline;
mod network;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{log_sum_exp, Graph, NodeId};
use crate::error::{Error, Result};

pub use baseline::BaselineNet;
pub use network::{Arch, Layer, Network, ParamView};

/// Half-width of the parameter box Θ = [-B, B]^m.
pub const PARAM_BOUND: f64 = 1e3;

/// Per-step cap on ‖∇θ log π(a|s;θ)‖.
pub const SCORE_BOUND: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSpec {
    Categorical {
        n: usize,
    },
    /// Allocation over `n` assets, produced as the softmax of a Gaussian
    /// perturbed logit vector.
    Simplex {
        n: usize,
    },
    /// `groups` independent categorical choices over `n` classes each.
    MultiDiscrete {
        n: usize,
        groups: usize,
    },
}

impl ActionSpec {
    pub fn logits_width(&self) -> usize {
        match *self {
            ActionSpec::Categorical { n } | ActionSpec::Simplex { n } => n,
            ActionSpec::MultiDiscrete { n, groups } => n * groups,
        }
    }

    pub fn groups(&self) -> usize {
        match *self {
            ActionSpec::MultiDiscrete { groups, .. } => groups,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// One class index per group (a single entry for categorical actions).
    Discrete(Vec<usize>),
    /// Gaussian pre-image and the allocation it maps to.
    Simplex { pre_image: Vec<f64>, weights: Vec<f64> },
}

impl Action {
    pub fn index(&self) -> Option<usize> {
        match self {
            Action::Discrete(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            Action::Simplex { weights, .. } => Some(weights),
            _ => None,
        }
    }
}

/// Initialization knobs for a fresh policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyInit {
    /// Multiplier on the fan-in scale of the output head, keeping the initial
    /// policy close to uniform.
    pub head_scale: f64,
    pub init_log_std: f64,
}

impl Default for PolicyInit {
    fn default() -> Self {
        Self { head_scale: 0.01, init_log_std: -1.0 }
    }
}

/// Policy parameter snapshot: flat θ plus the architecture it lives on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub network: Network,
    pub action_spec: ActionSpec,
    pub theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(network: Network, action_spec: ActionSpec, theta: Vec<f64>) -> Result<Self> {
        if network.output_width() != action_spec.logits_width() {
            return Err(Error::config(format!(
                "network emits {} outputs, action spec {:?} needs {}",
                network.output_width(),
                action_spec,
                action_spec.logits_width()
            )));
        }
        let need_std = matches!(action_spec, ActionSpec::Simplex { .. });
        if need_std != (network.arch().log_std == action_spec.logits_width()) {
            return Err(Error::config("simplex heads need one log-std entry per logit; other heads none"));
        }
        if theta.len() != network.param_count() {
            return Err(Error::config(format!("theta has {} entries, network needs {}", theta.len(), network.param_count())));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("theta must be finite"));
        }
        Ok(Self { network, action_spec, theta })
    }

    pub fn init(network: Network, action_spec: ActionSpec, init: PolicyInit, rng: &mut impl Rng) -> Result<Self> {
        let theta = network.init_params(rng, init.head_scale, init.init_log_std);
        Self::new(network, action_spec, theta)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Self {
        Self { network: self.network.clone(), action_spec: self.action_spec, theta }
    }

    /// Records `log π(a_t|s_t;θ)` for a batch as a `[batch]` node.
    pub fn log_prob_node(&self, g: &mut Graph, states: &[&[f64]], actions: &[&Action]) -> Result<NodeId> {
        if states.len() != actions.len() {
            return Err(Error::usage("one action per state is required"));
        }
        let (out, log_std) = self.network.forward(g, &self.theta, states)?;
        self.log_prob_of(g, out, log_std, actions)
    }

    fn log_prob_of(&self, g: &mut Graph, out: NodeId, log_std: Option<NodeId>, actions: &[&Action]) -> Result<NodeId> {
        match self.action_spec {
            ActionSpec::Categorical { .. } | ActionSpec::MultiDiscrete { .. } => {
                let groups = self.action_spec.groups();
                let mut picks = Vec::with_capacity(actions.len() * groups);
                for a in actions {
                    match a {
                        Action::Discrete(v) if v.len() == groups => picks.extend_from_slice(v),
                        _ => return Err(Error::usage(format!("action {a:?} is infeasible for {:?}", self.action_spec))),
                    }
                }
                g.log_softmax_pick(out, groups, picks)
            }
            ActionSpec::Simplex { n } => {
                let mut sample = Vec::with_capacity(actions.len() * n);
                for a in actions {
                    match a {
                        Action::Simplex { pre_image, .. } if pre_image.len() == n => sample.extend_from_slice(pre_image),
                        _ => return Err(Error::usage(format!("action {a:?} is infeasible for {:?}", self.action_spec))),
                    }
                }
                let log_std = log_std.ok_or_else(|| Error::config("simplex policy without log-std parameters"))?;
                g.gaussian_log_density(out, log_std, sample)
            }
        }
    }

    pub fn log_probs(&self, states: &[&[f64]], actions: &[&Action]) -> Result<Vec<f64>> {
        let mut g = Graph::new(self.dim());
        let lp = self.log_prob_node(&mut g, states, actions)?;
        let values = g.value(lp).data().to_vec();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::training("non-finite log-density"));
        }
        Ok(values)
    }

    pub fn log_prob(&self, state: &[f64], action: &Action) -> Result<f64> {
        Ok(self.log_probs(&[state], &[action])?[0])
    }

    /// Samples `a ~ π(·|s;θ)` and returns it with `log π(a|s;θ)`.
    pub fn act(&self, state: &[f64], rng: &mut impl Rng) -> Result<(Action, f64)> {
        let mut g = Graph::new(self.dim());
        let (out, log_std) = self.network.forward(&mut g, &self.theta, &[state])?;
        let raw = g.value(out).data().to_vec();
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::training("policy network produced non-finite output"));
        }
        let action = match self.action_spec {
            ActionSpec::Categorical { n } | ActionSpec::MultiDiscrete { n, .. } => {
                let picks = raw.chunks(n).map(|logits| sample_categorical(logits, rng.random::<f64>())).collect();
                Action::Discrete(picks)
            }
            ActionSpec::Simplex { .. } => {
                let ls = g.value(log_std.expect("simplex log-std")).data();
                let pre_image: Vec<f64> = raw.iter().zip(ls).map(|(m, s)| m + s.exp() * rng.sample::<f64, _>(StandardNormal)).collect();
                let weights = softmax(&pre_image);
                Action::Simplex { pre_image, weights }
            }
        };
        let lp = self.log_prob_of(&mut g, out, log_std, &[&action])?;
        let logp = g.value(lp).data()[0];
        if !logp.is_finite() {
            return Err(Error::training("non-finite log-density for sampled action"));
        }
        Ok((action, logp))
    }

    /// Distribution mode: argmax classes, or the softmax of the mean logits.
    pub fn mode(&self, state: &[f64]) -> Result<Action> {
        let raw = self.network.evaluate(&self.theta, &[state])?;
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::training("policy network produced non-finite output"));
        }
        Ok(match self.action_spec {
            ActionSpec::Categorical { n } | ActionSpec::MultiDiscrete { n, .. } => Action::Discrete(raw.chunks(n).map(argmax).collect()),
            ActionSpec::Simplex { .. } => {
                let weights = softmax(&raw);
                Action::Simplex { pre_image: raw, weights }
            }
        })
    }

    /// Class probabilities for categorical heads, one vector per group.
    pub fn probabilities(&self, state: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = match self.action_spec {
            ActionSpec::Categorical { n } | ActionSpec::MultiDiscrete { n, .. } => n,
            ActionSpec::Simplex { .. } => return Err(Error::usage("simplex heads have no class probabilities")),
        };
        let raw = self.network.evaluate(&self.theta, &[state])?;
        Ok(raw.chunks(n).map(softmax).collect())
    }

    /// `∇θ log π(a|s;θ)`, rescaled to norm [`SCORE_BOUND`] if it exceeds it.
    pub fn score(&self, state: &[f64], action: &Action) -> Result<Vec<f64>> {
        let mut g = Graph::new(self.dim());
        let lp = self.log_prob_node(&mut g, &[state], &[action])?;
        let loss = g.sum(lp);
        let mut grad = g.backward(loss)?;
        clip_norm(&mut grad, SCORE_BOUND);
        Ok(grad)
    }

    /// Per-step log-densities and the gradient of `Σ_t w_t log π(a_t|s_t;θ)`.
    pub fn weighted_score(&self, states: &[&[f64]], actions: &[&Action], weights: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if weights.len() != states.len() {
            return Err(Error::usage("one weight per step is required"));
        }
        let mut g = Graph::new(self.dim());
        let lp = self.log_prob_node(&mut g, states, actions)?;
        let logps = g.value(lp).data().to_vec();
        let loss = g.weighted_sum(lp, weights.to_vec())?;
        let grad = g.backward(loss)?;
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::training("non-finite score"));
        }
        Ok((logps, grad))
    }

    /// Clamps every coordinate into the parameter box.
    pub fn project(&mut self) {
        project(&mut self.theta, PARAM_BOUND);
    }
}

/// Clamp onto `[-bound, bound]^m`; idempotent and non-expansive.
pub fn project(theta: &mut [f64], bound: f64) {
    for v in theta {
        *v = v.clamp(-bound, bound);
    }
}

/// Rescales `v` so that its Euclidean norm is at most `bound`.
pub fn clip_norm(v: &mut [f64], bound: f64) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > bound {
        let s = bound / norm;
        v.iter_mut().for_each(|x| *x *= s);
        true
    } else {
        false
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| (l - lse).exp()).collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from the softmax of `logits` with uniform `u`.
fn sample_categorical(logits: &[f64], u: f64) -> usize {
    let probs = softmax(logits);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
