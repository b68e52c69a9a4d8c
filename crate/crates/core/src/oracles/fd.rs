use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algos::rollout;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::seeds::{derive_seed, Stream};
use crate::SimRng;

pub const MAX_FD_DIM: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdGradient {
    pub gradient: Vec<f64>,
    pub standard_error: Vec<f64>,
}

fn below(env: &mut dyn Environment, policy: &PolicyParams, discount: f64, r: f64, seed: u64, j: u64) -> Result<f64> {
    let mut env_rng = SimRng::seed_from_u64(derive_seed(seed, Stream::Env, j));
    let mut policy_rng = SimRng::seed_from_u64(derive_seed(seed, Stream::Policy, j));
    let traj = rollout(env, policy, discount, &mut env_rng, &mut policy_rng, false)?;
    Ok(if traj.ret() <= r { 1.0 } else { 0.0 })
}

/// Central finite difference of the Monte-Carlo return CDF `F(r; θ)` in
/// every coordinate. Both legs of a coordinate replay the same random
/// numbers for each of the `n_per_point` episodes.
pub fn fd_cdf_gradient<E: Environment + Clone + Sync>(
    env: &E,
    policy: &PolicyParams,
    r: f64,
    delta: f64,
    n_per_point: usize,
    discount: f64,
    seed: u64,
) -> Result<FdGradient> {
    if !(delta > 0.0) || n_per_point < 2 {
        return Err(Error::config("finite differences need delta > 0 and at least two episodes"));
    }
    if policy.dim() > MAX_FD_DIM {
        return Err(Error::config(format!("{} parameters exceed the finite-difference limit {MAX_FD_DIM}", policy.dim())));
    }
    let per_coord: Vec<(f64, f64)> = (0..policy.dim())
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut plus = policy.theta.clone();
            let mut minus = policy.theta.clone();
            plus[i] += delta;
            minus[i] -= delta;
            let (plus, minus) = (policy.with_theta(plus), policy.with_theta(minus));
            let mut e = env.clone();
            let (mut sum, mut sq) = (0.0, 0.0);
            for j in 0..n_per_point as u64 {
                let d = (below(&mut e, &plus, discount, r, seed, j)? - below(&mut e, &minus, discount, r, seed, j)?) / (2.0 * delta);
                sum += d;
                sq += d * d;
            }
            let n = n_per_point as f64;
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
            Ok((mean, (var / n).sqrt()))
        })
        .collect::<Result<_>>()?;
    Ok(FdGradient { gradient: per_coord.iter().map(|p| p.0).collect(), standard_error: per_coord.iter().map(|p| p.1).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::TabularMdp;
    use crate::policy::{ActionSpec, Arch, Layer, Network};

    fn bandit_policy(theta: Vec<f64>) -> PolicyParams {
        let mut arch = Arch::mlp(1, &[], 2);
        if let Layer::Dense { bias, .. } = &mut arch.heads[0] {
            *bias = false;
        }
        PolicyParams::new(Network::new(arch).unwrap(), ActionSpec::Categorical { n: 2 }, theta).unwrap()
    }

    fn bandit(means: [f64; 2]) -> TabularMdp {
        TabularMdp::new(vec![1.0], vec![vec![vec![1.0], vec![1.0]]], vec![means.to_vec()], 1).unwrap()
    }

    #[test]
    fn flat_policy_dependence_gives_zero() {
        // equal rewards: the return distribution does not depend on θ
        let g = fd_cdf_gradient(&bandit([1.0, 1.0]), &bandit_policy(vec![0.2, -0.3]), 1.5, 0.05, 2000, 1.0, 0).unwrap();
        for (v, se) in g.gradient.iter().zip(&g.standard_error) {
            assert!(v.abs() <= 3.0 * se + 1e-12, "{v} {se}");
        }
    }

    #[test]
    fn bandit_signs_and_magnitudes() {
        // F(0.5) = P(arm 0) = 1 / (1 + e^{θ1 − θ0}); raising θ0 raises F
        let p = bandit_policy(vec![0.1, 0.4]);
        let g = fd_cdf_gradient(&bandit([0.0, 1.0]), &p, 0.5, 0.05, 20_000, 1.0, 1).unwrap();
        let p0 = 1.0 / (1.0 + (0.3f64).exp());
        let exact = p0 * (1.0 - p0);
        assert!(g.gradient[0] > 0.0 && g.gradient[1] < 0.0);
        assert!((g.gradient[0] - exact).abs() < 4.0 * g.standard_error[0] + 1e-3, "{:?} {exact}", g);
        assert!((g.gradient[1] + exact).abs() < 4.0 * g.standard_error[1] + 1e-3);
    }

    #[test]
    fn rejects_large_dimension() {
        let net = Network::new(Arch::mlp(1, &[8], 2)).unwrap();
        let p = PolicyParams::new(net.clone(), ActionSpec::Categorical { n: 2 }, vec![0.0; net.param_count()]).unwrap();
        assert!(fd_cdf_gradient(&bandit([0.0, 1.0]), &p, 0.5, 0.1, 10, 1.0, 0).is_err());
    }
}
