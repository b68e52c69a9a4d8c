use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::order_statistic_rank;

/// `(⌈α n⌉-th order statistic, mean)` of a non-empty window.
pub fn rolling_stats(window: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if window.is_empty() {
        return Err(Error::usage("rolling statistics of an empty window"));
    }
    let mut sorted = window.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = sorted[order_statistic_rank(alpha, sorted.len()) - 1];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    Ok((q, mean))
}

/// One line of `metrics.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// 1-based episode index.
    pub episode: u64,
    pub rolling_quantile: f64,
    pub rolling_mean: f64,
    /// Rolling mean of per-episode selection accuracy, when the task has one.
    pub accuracy: Option<f64>,
    pub q_tracker: Option<f64>,
}

/// Last `capacity` returns and accuracies.
#[derive(Clone, Debug)]
pub struct RollingWindow {
    capacity: usize,
    alpha: f64,
    returns: VecDeque<f64>,
    accuracy: VecDeque<f64>,
    episodes: u64,
}

impl RollingWindow {
    pub fn new(capacity: usize, alpha: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("rolling window must be at least 1"));
        }
        Ok(Self { capacity, alpha, returns: VecDeque::new(), accuracy: VecDeque::new(), episodes: 0 })
    }

    pub fn push(&mut self, ret: f64, accuracy: Option<f64>, q_tracker: Option<f64>) -> Result<MetricsRow> {
        self.episodes += 1;
        if self.returns.len() == self.capacity {
            self.returns.pop_front();
        }
        self.returns.push_back(ret);
        if let Some(a) = accuracy {
            if self.accuracy.len() == self.capacity {
                self.accuracy.pop_front();
            }
            self.accuracy.push_back(a);
        }
        let (rolling_quantile, rolling_mean) = rolling_stats(self.returns.make_contiguous(), self.alpha)?;
        let accuracy = accuracy.map(|_| self.accuracy.iter().sum::<f64>() / self.accuracy.len() as f64);
        Ok(MetricsRow { episode: self.episodes, rolling_quantile, rolling_mean, accuracy, q_tracker })
    }
}

pub fn write_metrics(rows: &[MetricsRow], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["episode", "rolling_quantile", "rolling_mean", "accuracy", "q_tracker"])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(input: impl std::io::Read) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// One-column CSV of returns under the header `return`.
pub fn write_returns(returns: &[f64], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["return"])?;
    for r in returns {
        w.write_record([r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_returns(input: impl std::io::Read) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = rec.get(0).ok_or_else(|| Error::usage("empty row in returns file"))?;
        out.push(field.parse::<f64>().map_err(|e| Error::usage(format!("bad return {field:?}: {e}")))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn order_statistic_examples() {
        assert_eq!(rolling_stats(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), (1.0, 2.5));
        assert_eq!(rolling_stats(&[5.0, 1.0], 0.5).unwrap().0, 1.0);
        assert_eq!(rolling_stats(&[3.5; 7], 0.9).unwrap(), (3.5, 3.5));
        assert!(rolling_stats(&[], 0.5).is_err());
    }

    #[test]
    fn window_keeps_most_recent() {
        let mut w = RollingWindow::new(2, 0.5).unwrap();
        w.push(10.0, None, None).unwrap();
        w.push(20.0, None, None).unwrap();
        let row = w.push(30.0, None, Some(1.0)).unwrap();
        assert_eq!(row.episode, 3);
        assert_eq!(row.rolling_quantile, 20.0);
        assert_eq!(row.rolling_mean, 25.0);
        assert_eq!(row.q_tracker, Some(1.0));
        assert_eq!(row.accuracy, None);
    }

    #[test]
    fn metrics_csv_round_trip() {
        let rows = vec![
            MetricsRow { episode: 1, rolling_quantile: -1.5, rolling_mean: 0.25, accuracy: Some(0.5), q_tracker: None },
            MetricsRow { episode: 2, rolling_quantile: 0.1, rolling_mean: 1e-9, accuracy: None, q_tracker: Some(3.0) },
        ];
        let mut buf = Vec::new();
        write_metrics(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("episode,rolling_quantile,rolling_mean,accuracy,q_tracker\n"));
        assert_eq!(read_metrics(buf.as_slice()).unwrap(), rows);

        let mut empty = Vec::new();
        write_metrics(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "episode,rolling_quantile,rolling_mean,accuracy,q_tracker\n");
    }

    #[test]
    fn returns_round_trip() {
        let v = vec![0.1, -2.0, 1e300, 5e-324];
        let mut buf = Vec::new();
        write_returns(&v, &mut buf).unwrap();
        assert_eq!(read_returns(buf.as_slice()).unwrap(), v);
    }

    fn brute_quantile(xs: &[f64], alpha: f64) -> f64 {
        // smallest sample whose empirical cdf reaches alpha
        let n = xs.len() as f64;
        let mut best = f64::INFINITY;
        for &x in xs {
            let below = xs.iter().filter(|&&y| y <= x).count() as f64;
            if below / n >= alpha - 1e-9 && x < best {
                best = x;
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_empirical_cdf_inverse(xs in prop::collection::vec(-100.0f64..100.0, 1..60), alpha in 0.01f64..0.99) {
            let (q, mean) = rolling_stats(&xs, alpha).unwrap();
            prop_assert_eq!(q, brute_quantile(&xs, alpha));
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(mean >= lo - 1e-9 && mean <= hi + 1e-9);
        }

        #[test]
        fn rows_strictly_increase(rets in prop::collection::vec(-10.0f64..10.0, 1..200), cap in 1usize..20) {
            let mut w = RollingWindow::new(cap, 0.3).unwrap();
            let mut prev = 0;
            for (i, r) in rets.iter().enumerate() {
                let row = w.push(*r, None, None).unwrap();
                prop_assert!(row.episode > prev);
                prev = row.episode;
                let start = (i + 1).saturating_sub(cap);
                let expect = rolling_stats(&rets[start..=i], 0.3).unwrap();
                prop_assert_eq!((row.rolling_quantile, row.rolling_mean), expect);
            }
        }
    }
}
