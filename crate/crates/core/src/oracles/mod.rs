//! Reference computations that tests and acceptance checks compare against.

mod enumerate;
mod fd;
mod markowitz;
mod normal;
mod truncation;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::order_statistic_rank;

pub use enumerate::{enumerate_small_mdp, ReturnDistribution, MAX_ENUM_ACTIONS, MAX_ENUM_HORIZON, MAX_ENUM_STATES};
pub use fd::{fd_cdf_gradient, FdGradient};
pub use markowitz::{markowitz_alloc, markowitz_objective, MarkowitzCriterion, MarkowitzSolution, MARKOWITZ_GRID};
pub use normal::{normal_cdf, normal_quantile};
pub use truncation::{truncation_gap_check, truncation_gap_report, TruncationGap, TruncationReport};

pub const MIN_MC_SAMPLES: usize = 100;
pub const BOOTSTRAP_RESAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub sample_count: usize,
}

/// Pass/fail record written by every oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub estimate: f64,
    pub bound: f64,
    pub standard_error: f64,
    pub pass: bool,
}

impl OracleReport {
    /// `|estimate − reference| ≤ bound`.
    pub fn within(name: impl Into<String>, estimate: f64, reference: f64, bound: f64, standard_error: f64) -> Self {
        Self { name: name.into(), estimate, bound, standard_error, pass: (estimate - reference).abs() <= bound }
    }
}

/// `⌈αn⌉`-th order statistic of `samples`, reordering them in place.
pub(crate) fn select_quantile(samples: &mut [f64], alpha: f64) -> f64 {
    let k = order_statistic_rank(alpha, samples.len()) - 1;
    let (_, v, _) = samples.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

/// Bootstrap standard error of the `alpha` order statistic.
pub fn bootstrap_quantile_se(samples: &[f64], alpha: f64, resamples: usize, rng: &mut impl Rng) -> f64 {
    let n = samples.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let mut buf = vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = samples[rng.random_range(0..n)];
        }
        stats.push(select_quantile(&mut buf, alpha));
    }
    let mean = stats.iter().sum::<f64>() / resamples as f64;
    (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt()
}

/// Quantile estimate from an existing sample set.
pub fn quantile_of_samples(samples: &[f64], alpha: f64, rng: &mut impl Rng) -> Result<QuantileEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha {alpha} outside (0, 1)")));
    }
    if samples.len() < MIN_MC_SAMPLES {
        return Err(Error::config(format!("need at least {MIN_MC_SAMPLES} samples, got {}", samples.len())));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::usage("non-finite sample"));
    }
    let mut work = samples.to_vec();
    let value = select_quantile(&mut work, alpha);
    let standard_error = bootstrap_quantile_se(samples, alpha, BOOTSTRAP_RESAMPLES, rng);
    Ok(QuantileEstimate { value, standard_error, sample_count: samples.len() })
}

/// Monte-Carlo α-quantile of `n` draws from `sampler`, with a bootstrap
/// standard error.
pub fn mc_quantile<R: Rng>(mut sampler: impl FnMut(&mut R) -> f64, alpha: f64, n: usize, rng: &mut R) -> Result<QuantileEstimate> {
    if n < MIN_MC_SAMPLES {
        return Err(Error::config(format!("need at least {MIN_MC_SAMPLES} samples, got {n}")));
    }
    let samples: Vec<f64> = (0..n).map(|_| sampler(rng)).collect();
    quantile_of_samples(&samples, alpha, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn uniform_median() {
        let mut rng = SimRng::seed_from_u64(0);
        let est = mc_quantile(|r: &mut SimRng| r.random::<f64>(), 0.5, 1_000_000, &mut rng).unwrap();
        assert!((est.value - 0.5).abs() < 0.002);
        assert!(est.standard_error > 0.0 && est.standard_error < 0.002);
        assert_eq!(est.sample_count, 1_000_000);
    }

    #[test]
    fn point_mass() {
        let mut rng = SimRng::seed_from_u64(1);
        for alpha in [0.01, 0.3, 0.99] {
            let est = mc_quantile(|_: &mut SimRng| 2.5, alpha, 500, &mut rng).unwrap();
            assert_eq!(est.value, 2.5);
            assert_eq!(est.standard_error, 0.0);
        }
    }

    #[test]
    fn normal_tail_quantile() {
        let mut rng = SimRng::seed_from_u64(2);
        let est = mc_quantile(|r: &mut SimRng| StandardNormal.sample(r), 0.1, 200_000, &mut rng).unwrap();
        let z = normal_quantile(0.1).unwrap();
        assert!((z + 1.2816).abs() < 1e-4);
        assert!((est.value - z).abs() < 0.01, "{} vs {z}", est.value);
    }

    #[test]
    fn too_few_samples() {
        let mut rng = SimRng::seed_from_u64(3);
        assert!(mc_quantile(|_: &mut SimRng| 0.0, 0.5, 99, &mut rng).is_err());
    }

    #[test]
    fn report_serializes() {
        let r = OracleReport::within("gap", 0.1, 0.0, 0.2, 0.01);
        assert!(r.pass);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["name", "estimate", "bound", "standard_error", "pass"] {
            assert!(v.get(key).is_some());
        }
    }

    proptest! {
        #[test]
        fn monotone_in_alpha_on_shared_samples(
            samples in proptest::collection::vec(-100.0f64..100.0, 100..300),
            a in 0.01f64..0.99,
            b in 0.01f64..0.99,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let mut rng = SimRng::seed_from_u64(4);
            let ql = quantile_of_samples(&samples, lo, &mut rng).unwrap();
            let qh = quantile_of_samples(&samples, hi, &mut rng).unwrap();
            prop_assert!(ql.value <= qh.value);
            let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(ql.value >= min && qh.value <= max);
            prop_assert!(ql.standard_error >= 0.0);
        }
    }
}
