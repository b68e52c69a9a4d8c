//! Invariant checks shared by the property suite and the acceptance runner.
#![allow(dead_code)]

use qpg::algos::{clipped_surrogate, importance_ratio, rollout, SurrogateTerm};
use qpg::envs::{Environment, Inventory, InventoryParams, Portfolio, PortfolioParams, ZeroMean, ZeroMeanParams};
use qpg::harness::{build_policy, PolicyConfig};
use qpg::policy::Action;
use qpg::SimRng;
use rand::{Rng, SeedableRng};

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Portfolio value equals marked-to-market positions and rewards are value
/// increments, under random allocations.
pub fn portfolio_accounting(seed: u64, fee: f64) -> Check {
    let params = PortfolioParams { fee, horizon: 30, ..PortfolioParams::imperfect() };
    let mut env = Portfolio::new(params).map_err(|e| e.to_string())?;
    let mut rng = SimRng::seed_from_u64(seed);
    env.reset(&mut rng);
    for _ in 0..env.horizon() {
        let raw: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let before = env.value();
        let out = env.step(&Action::Simplex { pre_image: w.clone(), weights: w }, &mut rng).map_err(|e| e.to_string())?;
        let marked: f64 = env.prices().iter().zip(env.positions()).map(|(p, q)| p * q).sum();
        ensure((env.value() - marked).abs() <= 1e-9 * marked.abs().max(1.0), || format!("value {} vs marked {marked}", env.value()))?;
        ensure((out.reward - (env.value() - before)).abs() <= 1e-9 * before.abs().max(1.0), || "reward is not the value increment".into())?;
        ensure(env.positions().iter().all(|q| *q >= 0.0), || "negative position".into())?;
    }
    Ok(())
}

/// Stock, shipment and lost-sale flows balance at every echelon.
pub fn inventory_flow(seed: u64) -> Check {
    let mut env = Inventory::new(InventoryParams::multi_echelon()).map_err(|e| e.to_string())?;
    let mut rng = SimRng::seed_from_u64(seed);
    env.reset(&mut rng);
    for _ in 0..env.horizon() {
        let before = env.on_hand().to_vec();
        let orders: Vec<u64> = (0..3).map(|_| rng.random_range(0..=20)).collect();
        let demand = rng.random_range(0..=30);
        let out = env.step_orders(&orders, demand).map_err(|e| e.to_string())?;
        for i in 0..3 {
            ensure(out.on_hand[i] == before[i] + out.arrivals[i] - out.shipped[i], || format!("stock balance at echelon {i}"))?;
            ensure(out.shipped[i] + out.lost[i] == out.orders[i], || format!("order balance at echelon {i}"))?;
        }
        let total: f64 = out.profits.iter().sum();
        ensure((total - out.reward).abs() < 1e-9, || "profits do not sum to reward".into())?;
    }
    Ok(())
}

/// `ρ(θ, θ) = 1` on every prefix of a sampled trajectory.
pub fn ratio_identity(seed: u64) -> Check {
    let mut env = ZeroMean::new(ZeroMeanParams::simple()).map_err(|e| e.to_string())?;
    let mut rng = SimRng::seed_from_u64(seed);
    let policy = build_policy(&env, &PolicyConfig::mlp(&[8, 8]), &mut rng).map_err(|e| e.to_string())?;
    let mut prng = SimRng::seed_from_u64(seed ^ 0x5555);
    let traj = rollout(&mut env, &policy, 0.99, &mut rng, &mut prng, false).map_err(|e| e.to_string())?;
    for l in 0..=traj.len() {
        let r = importance_ratio(&traj, l, &policy, &policy).map_err(|e| e.to_string())?;
        ensure(r == 1.0, || format!("ratio {r} at prefix {l}"))?;
    }
    Ok(())
}

/// The clipped surrogate never exceeds the unclipped one.
pub fn clip_pessimism(ratio: f64, target: f64, clip: f64) -> Check {
    let v = clipped_surrogate(SurrogateTerm { ratio, target, clip });
    ensure(v <= ratio * target, || format!("surrogate {v} above {}", ratio * target))
}

/// Zero-Mean states stay permutations of the value set.
pub fn zero_mean_permutation(seed: u64) -> Check {
    let params = ZeroMeanParams::hard();
    let mut env = ZeroMean::new(params.clone()).map_err(|e| e.to_string())?;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut obs = env.reset(&mut rng);
    let mut want = params.values.clone();
    want.sort_by(f64::total_cmp);
    for _ in 0..env.horizon() {
        let mut got = obs.clone();
        got.sort_by(f64::total_cmp);
        ensure(got == want, || format!("state {obs:?} is not a permutation"))?;
        let a = rng.random_range(0..params.values.len());
        obs = env.step(&Action::Discrete(vec![a]), &mut rng).map_err(|e| e.to_string())?.observation;
    }
    Ok(())
}
