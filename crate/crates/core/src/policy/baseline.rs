use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{Arch, Network};
use crate::autodiff::{AdamState, Graph};
use crate::error::{Error, Result};

/// Scalar regression network `B(features, index)` fitted by mean squared
/// error with Adam.
///
/// The index (a horizon or time step) enters as `index / index_scale`
/// appended to the flattened features; predictions are `output_scale` times
/// the raw network output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineNet {
    network: Network,
    params: Vec<f64>,
    adam: AdamState,
    index_scale: f64,
    output_scale: f64,
    /// Targets outside this interval are rejected by [`BaselineNet::fit`].
    target_range: Option<(f64, f64)>,
}

impl BaselineNet {
    pub fn new(feature_len: usize, hidden: &[usize], index_scale: f64, lr: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(index_scale > 0.0) || !(lr > 0.0) {
            return Err(Error::config("baseline index scale and learning rate must be positive"));
        }
        let network = Network::new(Arch::mlp(feature_len + 1, hidden, 1))?;
        // zero head: the fresh baseline predicts 0 everywhere
        let params = network.init_params(rng, 0.0, 0.0);
        let adam = AdamState::new(params.len(), lr);
        Ok(Self { network, params, adam, index_scale, output_scale: 1.0, target_range: None })
    }

    pub fn with_output_scale(mut self, scale: f64) -> Self {
        self.output_scale = scale;
        self
    }

    pub fn with_target_range(mut self, lo: f64, hi: f64) -> Self {
        self.target_range = Some((lo, hi));
        self
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.adam.lr = lr;
    }

    fn row(&self, features: &[f64], index: usize) -> Vec<f64> {
        let mut row = Vec::with_capacity(features.len() + 1);
        row.extend_from_slice(features);
        row.push(index as f64 / self.index_scale);
        row
    }

    pub fn eval(&self, features: &[f64], index: usize) -> Result<f64> {
        let row = self.row(features, index);
        Ok(self.output_scale * self.network.evaluate(&self.params, &[&row])?[0])
    }

    pub fn eval_batch(&self, batch: &[(&[f64], usize)]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let rows: Vec<Vec<f64>> = batch.iter().map(|(f, i)| self.row(f, *i)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        Ok(self.network.evaluate(&self.params, &refs)?.into_iter().map(|v| v * self.output_scale).collect())
    }

    /// One Adam step on the mean squared error over the batch. Returns the
    /// loss before the step; an empty batch is a no-op.
    pub fn fit(&mut self, batch: &[(&[f64], usize, f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        if let Some((lo, hi)) = self.target_range {
            if let Some(bad) = batch.iter().find(|b| !(b.2 >= lo && b.2 <= hi)) {
                return Err(Error::usage(format!("baseline target {} outside [{lo}, {hi}]", bad.2)));
            }
        }
        let rows: Vec<Vec<f64>> = batch.iter().map(|(f, i, _)| self.row(f, *i)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let targets: Vec<f64> = batch.iter().map(|b| b.2 / self.output_scale).collect();
        let mut g = Graph::new(self.params.len());
        let (out, _) = self.network.forward(&mut g, &self.params, &refs)?;
        let loss = g.mean_squared_error(out, targets)?;
        let value = g.value(loss).data()[0];
        let grad = g.backward(loss)?;
        self.adam.step(&mut self.params, &grad)?;
        Ok(value * self.output_scale * self.output_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_baseline_predicts_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = BaselineNet::new(3, &[8], 20.0, 1e-3, &mut rng).unwrap();
        assert_eq!(b.eval(&[0.3, 1.0, -2.0], 17).unwrap(), 0.0);
    }

    #[test]
    fn matching_targets_leave_fresh_net_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = BaselineNet::new(2, &[4], 10.0, 1e-2, &mut rng).unwrap();
        let before = b.params().to_vec();
        let f = [0.1, 0.2];
        b.fit(&[(&f, 3, 0.0), (&f, 5, 0.0)]).unwrap();
        assert_eq!(b.params(), &before[..]);
    }

    #[test]
    fn fit_reduces_loss_on_constant_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut b = BaselineNet::new(1, &[8], 10.0, 1e-2, &mut rng).unwrap().with_target_range(-1.0, 0.0);
        let f = [0.5];
        let batch = [(&f[..], 1usize, -0.5), (&f[..], 2usize, -0.5)];
        let first = b.fit(&batch).unwrap();
        let mut last = first;
        for _ in 0..300 {
            last = b.fit(&batch).unwrap();
        }
        assert!(last < 0.01 * first, "loss {first} -> {last}");
        assert!((b.eval(&f, 1).unwrap() + 0.5).abs() < 0.05);
    }

    #[test]
    fn out_of_range_target_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut b = BaselineNet::new(1, &[4], 10.0, 1e-2, &mut rng).unwrap().with_target_range(-1.0, 0.0);
        assert!(matches!(b.fit(&[(&[0.0][..], 1, 0.5)]), Err(Error::Usage(_))));
        assert!(b.fit(&[]).is_ok());
    }

    #[test]
    fn output_scale_multiplies_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut b = BaselineNet::new(1, &[4], 1.0, 5e-2, &mut rng).unwrap().with_output_scale(100.0);
        let f = [0.2];
        for _ in 0..400 {
            b.fit(&[(&f[..], 0, 80.0)]).unwrap();
        }
        assert!((b.eval(&f, 0).unwrap() - 80.0).abs() < 2.0);
    }
}
