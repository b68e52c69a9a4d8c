use serde::{Deserialize, Serialize};

use super::normal_quantile;
use crate::error::{Error, Result};

/// Simplex grid spacing.
pub const MARKOWITZ_GRID: f64 = 1e-3;

const MAX_GRID_POINTS: u64 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum MarkowitzCriterion {
    Mean,
    Quantile { alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkowitzSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
}

fn check_inputs(drift: &[f64], vol_root: &[Vec<f64>], dt: f64, horizon: usize) -> Result<()> {
    let n = drift.len();
    if n == 0 || vol_root.len() != n || vol_root.iter().any(|r| r.is_empty() || r.len() != vol_root[0].len()) {
        return Err(Error::config("drift and volatility root must describe the same assets"));
    }
    if !(dt > 0.0) || horizon == 0 {
        return Err(Error::config("time step and horizon must be positive"));
    }
    Ok(())
}

/// Horizon mean `T wᵀμ Δt`, plus `z_α √(T Δt) ‖Σ^{1/2}ᵀ w‖` under the
/// quantile criterion, ignoring compounding and fees.
pub fn markowitz_objective(
    weights: &[f64],
    drift: &[f64],
    vol_root: &[Vec<f64>],
    dt: f64,
    horizon: usize,
    criterion: MarkowitzCriterion,
) -> Result<f64> {
    let t = horizon as f64;
    let mean = t * dt * weights.iter().zip(drift).map(|(w, m)| w * m).sum::<f64>();
    match criterion {
        MarkowitzCriterion::Mean => Ok(mean),
        MarkowitzCriterion::Quantile { alpha } => {
            let z = normal_quantile(alpha)?;
            let cols = vol_root[0].len();
            let spread =
                (0..cols).map(|j| weights.iter().zip(vol_root).map(|(w, row)| w * row[j]).sum::<f64>().powi(2)).sum::<f64>().sqrt();
            Ok(mean + z * (t * dt).sqrt() * spread)
        }
    }
}

fn grid_points(n: usize, steps: u64) -> u64 {
    // C(steps + n − 1, n − 1), saturating
    let mut c: u64 = 1;
    for i in 0..(n as u64 - 1) {
        c = c.saturating_mul(steps + 1 + i) / (i + 1);
    }
    c
}

fn enumerate(n: usize, steps: u64, prefix: &mut Vec<u64>, left: u64, visit: &mut impl FnMut(&[u64])) {
    if prefix.len() == n - 1 {
        prefix.push(left);
        visit(prefix);
        prefix.pop();
        return;
    }
    for k in 0..=left {
        prefix.push(k);
        enumerate(n, steps, prefix, left - k, visit);
        prefix.pop();
    }
}

fn project_simplex(v: &mut [f64]) {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (i, ui) in u.iter().enumerate() {
        acc += ui;
        let t = (acc - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            tau = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

fn snap(weights: &[f64]) -> Vec<f64> {
    let steps = (1.0 / MARKOWITZ_GRID).round();
    let mut units: Vec<f64> = weights.iter().map(|w| (w * steps).round()).collect();
    let diff = steps - units.iter().sum::<f64>();
    let imax = units.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|p| p.0).unwrap_or(0);
    units[imax] += diff;
    units.iter().map(|u| u / steps).collect()
}

/// Best simplex allocation under `criterion`. Small universes are searched
/// exhaustively on a grid of spacing [`MARKOWITZ_GRID`]; larger ones use
/// projected gradient ascent from every vertex and the barycentre, then snap
/// to the grid.
pub fn markowitz_alloc(
    drift: &[f64],
    vol_root: &[Vec<f64>],
    dt: f64,
    horizon: usize,
    criterion: MarkowitzCriterion,
) -> Result<MarkowitzSolution> {
    check_inputs(drift, vol_root, dt, horizon)?;
    if let MarkowitzCriterion::Quantile { alpha } = criterion {
        normal_quantile(alpha)?;
    }
    let n = drift.len();
    let steps = (1.0 / MARKOWITZ_GRID).round() as u64;
    let objective = |w: &[f64]| markowitz_objective(w, drift, vol_root, dt, horizon, criterion);
    let mut best = MarkowitzSolution { weights: vec![0.0; n], objective: f64::NEG_INFINITY };

    if grid_points(n, steps) <= MAX_GRID_POINTS {
        let mut err = None;
        let mut w = vec![0.0; n];
        enumerate(n, steps, &mut Vec::with_capacity(n), steps, &mut |units| {
            for (wi, u) in w.iter_mut().zip(units) {
                *wi = *u as f64 / steps as f64;
            }
            match objective(&w) {
                Ok(v) if v > best.objective + 1e-15 => best = MarkowitzSolution { weights: w.clone(), objective: v },
                Ok(_) => {}
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        return Ok(best);
    }

    let mut starts: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    starts.push(vec![1.0 / n as f64; n]);
    for mut w in starts {
        let mut lr = 0.5;
        let mut value = objective(&w)?;
        for _ in 0..20_000 {
            let h = 1e-7;
            let grad: Vec<f64> = (0..n)
                .map(|i| {
                    let mut up = w.clone();
                    let mut dn = w.clone();
                    up[i] += h;
                    dn[i] -= h;
                    Ok((objective(&up)? - objective(&dn)?) / (2.0 * h))
                })
                .collect::<Result<_>>()?;
            let mut cand: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x + lr * g).collect();
            project_simplex(&mut cand);
            let v = objective(&cand)?;
            if v >= value {
                let moved = cand.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum::<f64>();
                w = cand;
                value = v;
                if moved < 1e-12 {
                    break;
                }
            } else {
                lr *= 0.5;
                if lr < 1e-12 {
                    break;
                }
            }
        }
        let snapped = snap(&w);
        let v = objective(&snapped)?;
        if v > best.objective {
            best = MarkowitzSolution { weights: snapped, objective: v };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::PortfolioParams;

    fn hedgeable() -> (Vec<f64>, Vec<Vec<f64>>, f64, usize) {
        let p = PortfolioParams::hedgeable();
        (p.drift.clone(), p.vol_root.clone(), p.dt(), p.horizon)
    }

    #[test]
    fn mean_criterion_buys_best_drift() {
        let (mu, root, dt, t) = hedgeable();
        let s = markowitz_alloc(&mu, &root, dt, t, MarkowitzCriterion::Mean).unwrap();
        assert_eq!(s.weights, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn quantile_criterion_hedges() {
        let (mu, root, dt, t) = hedgeable();
        let s = markowitz_alloc(&mu, &root, dt, t, MarkowitzCriterion::Quantile { alpha: 0.1 }).unwrap();
        assert_eq!(s.weights, vec![0.0, 0.5, 0.5]);
        assert!((s.objective - 0.12).abs() < 1e-12);
    }

    #[test]
    fn beats_every_vertex() {
        let (mu, root, dt, t) = hedgeable();
        for criterion in
            [MarkowitzCriterion::Mean, MarkowitzCriterion::Quantile { alpha: 0.1 }, MarkowitzCriterion::Quantile { alpha: 0.4 }]
        {
            let s = markowitz_alloc(&mu, &root, dt, t, criterion).unwrap();
            for i in 0..3 {
                let mut v = vec![0.0; 3];
                v[i] = 1.0;
                assert!(s.objective >= markowitz_objective(&v, &mu, &root, dt, t, criterion).unwrap());
            }
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.weights.iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn single_asset() {
        for c in [MarkowitzCriterion::Mean, MarkowitzCriterion::Quantile { alpha: 0.05 }] {
            let s = markowitz_alloc(&[0.03], &[vec![0.2]], 0.01, 100, c).unwrap();
            assert_eq!(s.weights, vec![1.0]);
        }
    }

    #[test]
    fn five_assets_use_projected_ascent() {
        let p = PortfolioParams::imperfect();
        let c = MarkowitzCriterion::Quantile { alpha: 0.1 };
        let s = markowitz_alloc(&p.drift, &p.vol_root, p.dt(), p.horizon, c).unwrap();
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..5 {
            let mut v = vec![0.0; 5];
            v[i] = 1.0;
            assert!(s.objective >= markowitz_objective(&v, &p.drift, &p.vol_root, p.dt(), p.horizon, c).unwrap() - 1e-12);
        }
        let mean = markowitz_alloc(&p.drift, &p.vol_root, p.dt(), p.horizon, MarkowitzCriterion::Mean).unwrap();
        assert_eq!(mean.weights, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }
}
