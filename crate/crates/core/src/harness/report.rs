use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{read_returns, rolling_stats};
use crate::error::{Error, Result};
use crate::seeds::{stream_rng, Stream};

/// Bandwidth suggestion for a Gaussian kernel density estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeHint {
    pub bandwidth: f64,
    /// Zero spread: no positive bandwidth exists.
    pub degenerate: bool,
}

/// Silverman's rule `1.06 σ̂ n^{-1/5}` with the unbiased sample deviation.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<KdeHint> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::usage("bandwidth needs at least two samples"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(KdeHint { bandwidth: 0.0, degenerate: true });
    }
    Ok(KdeHint { bandwidth: 1.06 * sd * (n as f64).powf(-0.2), degenerate: false })
}

/// Writes the raw samples with the bandwidth hint repeated on every row.
pub fn emit_kde_data(samples: &[f64], out: impl Write) -> Result<KdeHint> {
    let hint = silverman_bandwidth(samples)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "bandwidth", "degenerate"])?;
    for x in samples {
        w.write_record([x.to_string(), hint.bandwidth.to_string(), hint.degenerate.to_string()])?;
    }
    w.flush()?;
    Ok(hint)
}

/// Resamples drawn for every confidence interval.
pub const BOOTSTRAP_DRAWS: usize = 2000;

/// Two-sided percentile bootstrap interval for `stat`.
pub fn bootstrap_ci(samples: &[f64], level: f64, draws: usize, rng: &mut impl Rng, stat: impl Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
    if samples.is_empty() || draws == 0 {
        return Err(Error::usage("bootstrap needs samples and at least one draw"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("confidence level {level} outside (0, 1)")));
    }
    let n = samples.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..draws)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lo = ((tail * draws as f64).floor() as usize).min(draws - 1);
    let hi = (((1.0 - tail) * draws as f64).ceil() as usize).clamp(1, draws) - 1;
    Ok((stats[lo], stats[hi]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub samples: usize,
    pub quantile: f64,
    pub quantile_ci: (f64, f64),
    pub mean: f64,
    pub mean_ci: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub level: f64,
    pub runs: Vec<RunSummary>,
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = (self.level * 100.0).round();
        writeln!(
            f,
            "{:<32} {:>6} {:>12} {:>25} {:>12} {:>25}",
            "run",
            "n",
            format!("q({})", self.alpha),
            format!("{pct}% CI"),
            "mean",
            format!("{pct}% CI")
        )?;
        for r in &self.runs {
            writeln!(
                f,
                "{:<32} {:>6} {:>12.4} {:>25} {:>12.4} {:>25}",
                r.dir.display(),
                r.samples,
                r.quantile,
                format!("[{:.4}, {:.4}]", r.quantile_ci.0, r.quantile_ci.1),
                r.mean,
                format!("[{:.4}, {:.4}]", r.mean_ci.0, r.mean_ci.1)
            )?;
        }
        Ok(())
    }
}

/// Evaluation returns under `dir`: its own `eval_returns.csv`, or every
/// replication's, pooled in directory order.
pub fn load_eval_returns(dir: &Path) -> Result<Vec<f64>> {
    let direct = dir.join("eval_returns.csv");
    if direct.exists() {
        return read_returns(File::open(direct)?);
    }
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> =
        fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path().join("eval_returns.csv"))).filter(|p| p.exists()).collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::MissingFile(direct));
    }
    let mut out = Vec::new();
    for f in files {
        out.extend(read_returns(File::open(f)?)?);
    }
    Ok(out)
}

pub fn summarize(dir: &Path, samples: &[f64], alpha: f64, level: f64) -> Result<RunSummary> {
    let (quantile, mean) = rolling_stats(samples, alpha)?;
    // one fixed resampling stream so equal inputs give equal intervals
    let mut rng = stream_rng(0, Stream::Oracle, 0);
    let quantile_ci =
        bootstrap_ci(samples, level, BOOTSTRAP_DRAWS, &mut rng, |s| rolling_stats(s, alpha).map(|r| r.0).unwrap_or(f64::NAN))?;
    let mut rng = stream_rng(0, Stream::Oracle, 1);
    let mean_ci = bootstrap_ci(samples, level, BOOTSTRAP_DRAWS, &mut rng, |s| s.iter().sum::<f64>() / s.len() as f64)?;
    Ok(RunSummary { dir: dir.to_path_buf(), samples: samples.len(), quantile, quantile_ci, mean, mean_ci })
}

/// α-quantile and mean of the evaluation returns in each directory, with
/// 95% bootstrap intervals.
pub fn compare_runs(dir_a: &Path, dir_b: &Path, alpha: f64) -> Result<ComparisonReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha {alpha} outside (0, 1)")));
    }
    let level = 0.95;
    let runs = [dir_a, dir_b].iter().map(|d| summarize(d, &load_eval_returns(d)?, alpha, level)).collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport { alpha, level, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::write_returns;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_point_kde_file() {
        let mut buf = Vec::new();
        let hint = emit_kde_data(&[0.0, 1.0], &mut buf).unwrap();
        assert!(hint.bandwidth > 0.0 && !hint.degenerate);
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,") && lines[2].starts_with("1,"));
    }

    #[test]
    fn constant_samples_are_degenerate() {
        assert_eq!(silverman_bandwidth(&[2.0; 10]).unwrap(), KdeHint { bandwidth: 0.0, degenerate: true });
        assert!(silverman_bandwidth(&[1.0]).is_err());
    }

    #[test]
    fn silverman_on_stored_normal_sample() {
        let mut rng = crate::SimRng::seed_from_u64(11);
        let xs: Vec<f64> = (0..500)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                3.0 + 2.0 * z
            })
            .collect();
        // two-pass reference with a compensated sum
        let n = xs.len() as f64;
        let mean = xs
            .iter()
            .fold((0.0f64, 0.0f64), |(s, c), &x| {
                let y = x - c;
                let t = s + y;
                (t, (t - s) - y)
            })
            .0
            / n;
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        let expect = 1.06 * (ss / (n - 1.0)).sqrt() / n.powf(0.2);
        let got = silverman_bandwidth(&xs).unwrap().bandwidth;
        assert!((got - expect).abs() < 1e-12 * expect, "{got} vs {expect}");
        // σ ≈ 2, n = 500: 1.06 · 2 · 500^-0.2 ≈ 0.61
        assert!((got - 0.61).abs() < 0.06);
    }

    fn write_dir(dir: &Path, xs: &[f64]) {
        fs::create_dir_all(dir).unwrap();
        write_returns(xs, File::create(dir.join("eval_returns.csv")).unwrap()).unwrap();
    }

    #[test]
    fn identical_and_shifted_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 * 0.25).collect();
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        let c = tmp.path().join("c");
        write_dir(&a, &xs);
        write_dir(&b, &xs);
        write_dir(&c, &xs.iter().map(|x| x + 1.0).collect::<Vec<_>>());

        let same = compare_runs(&a, &b, 0.1).unwrap();
        let (ra, rb) = (&same.runs[0], &same.runs[1]);
        assert_eq!((ra.quantile, ra.quantile_ci, ra.mean, ra.mean_ci), (rb.quantile, rb.quantile_ci, rb.mean, rb.mean_ci));

        let shifted = compare_runs(&a, &c, 0.1).unwrap();
        let (ra, rc) = (&shifted.runs[0], &shifted.runs[1]);
        assert_eq!(rc.quantile - ra.quantile, 1.0);
        assert_eq!(rc.mean - ra.mean, 1.0);
        assert_eq!(rc.quantile_ci.0 - ra.quantile_ci.0, 1.0);
        assert!(same.to_string().contains("q(0.1)"));
    }

    #[test]
    fn pooled_replication_directories() {
        let tmp = tempfile::tempdir().unwrap();
        write_dir(&tmp.path().join("rep_001"), &[3.0, 4.0]);
        write_dir(&tmp.path().join("rep_000"), &[1.0, 2.0]);
        assert_eq!(load_eval_returns(tmp.path()).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn missing_returns_are_reported() {
        let tmp = tempfile::tempdir().unwrap();
        let err = compare_runs(tmp.path(), &tmp.path().join("nope"), 0.1).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)), "{err}");
    }

    #[test]
    fn quantile_interval_coverage() {
        let alpha = 0.1;
        let mut oracle_rng = stream_rng(5, Stream::Oracle, 0);
        let truth =
            crate::oracles::mc_quantile(|r: &mut crate::SimRng| -> f64 { r.sample(rand_distr::Exp1) }, alpha, 400_000, &mut oracle_rng)
                .unwrap()
                .value;
        let mut covered = 0;
        for trial in 0..100 {
            let mut rng = stream_rng(5, Stream::Env, trial);
            let xs: Vec<f64> = (0..1000).map(|_| rng.sample(rand_distr::Exp1)).collect();
            let mut boot = stream_rng(5, Stream::Shuffle, trial);
            let (lo, hi) = bootstrap_ci(&xs, 0.95, 1000, &mut boot, |s| rolling_stats(s, alpha).unwrap().0).unwrap();
            if lo <= truth && truth <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 93, "coverage {covered}/100");
    }
}
