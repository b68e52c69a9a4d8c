use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bias-corrected adaptive-moment optimizer state for one parameter vector.
///
/// `step` minimizes: pass the gradient of a loss, or the negated ascent
/// direction.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, first: vec![0.0; len], second: vec![0.0; len], steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.first.len() || grad.len() != self.first.len() {
            return Err(Error::config(format!(
                "adam state sized {} got params {} and grad {}",
                self.first.len(),
                params.len(),
                grad.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::training("non-finite gradient passed to adam"));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = AdamState::new(2, 0.01);
        let mut p = vec![0.0, 0.0];
        adam.step(&mut p, &[3.0, -0.2]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-8);
        assert!((p[1] - 0.01).abs() < 1e-7);
    }

    #[test]
    fn minimizes_shifted_quadratic() {
        let mut adam = AdamState::new(1, 0.1);
        let mut p = vec![0.0];
        for _ in 0..200 {
            let g = 2.0 * (p[0] - 3.0);
            adam.step(&mut p, &[g]).unwrap();
        }
        assert!((p[0] - 3.0).abs() < 0.05, "ended at {}", p[0]);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut adam = AdamState::new(1, 0.1);
        let mut p = vec![0.0];
        assert!(matches!(adam.step(&mut p, &[f64::NAN]), Err(Error::Training(_))));
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn step_counter_increases() {
        let mut adam = AdamState::new(1, 0.1);
        let mut p = vec![0.0];
        for k in 1..=5 {
            adam.step(&mut p, &[1.0]).unwrap();
            assert_eq!(adam.steps(), k);
        }
    }
}
