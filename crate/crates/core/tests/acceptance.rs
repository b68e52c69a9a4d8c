//! Acceptance suite: runs every criterion, prints one line each and exits
//! non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestError, TestRunner};
use qpg::harness::criteria::{self, CriterionOutcome};

fn record<T: std::fmt::Debug>(failures: &mut Vec<String>, name: &str, result: Result<(), TestError<T>>) {
    if let Err(e) = result {
        failures.push(format!("{name}: {e}"));
    }
}

/// Byte-identical reruns plus the cross-module invariant suites.
fn determinism_and_invariants() -> qpg::Result<CriterionOutcome> {
    let scratch = tempfile::tempdir()?;
    let mut out = criteria::byte_identical_reruns(scratch.path())?;
    let mut runner = TestRunner::new(Config { cases: 128, failure_persistence: None, ..Config::default() });
    let mut failures = Vec::new();
    let r = runner.run(&(any::<u64>(), 0.0f64..0.05), |(s, fee)| common::portfolio_accounting(s, fee).map_err(TestCaseError::fail));
    record(&mut failures, "portfolio accounting", r);
    let r = runner.run(&any::<u64>(), |s| common::inventory_flow(s).map_err(TestCaseError::fail));
    record(&mut failures, "inventory flow", r);
    let r = runner.run(&any::<u64>(), |s| common::ratio_identity(s).map_err(TestCaseError::fail));
    record(&mut failures, "ratio identity", r);
    let r = runner
        .run(&(0.0f64..10.0, -5.0f64..5.0, 0.01f64..0.99), |(rho, a, c)| common::clip_pessimism(rho, a, c).map_err(TestCaseError::fail));
    record(&mut failures, "clip pessimism", r);
    let r = runner.run(&any::<u64>(), |s| common::zero_mean_permutation(s).map_err(TestCaseError::fail));
    record(&mut failures, "zero-mean permutation", r);

    if failures.is_empty() {
        out.detail.push_str("; 5 invariant suites x 128 cases passed");
    } else {
        out.pass = false;
        out.detail.push_str(&format!("; invariant failures: {}", failures.join(" | ")));
    }
    Ok(out)
}

type Check = fn() -> qpg::Result<CriterionOutcome>;

fn main() -> ExitCode {
    let checks: [(u8, Check); 9] = [
        (1, criteria::zero_mean_separation),
        (2, criteria::tracker_convergence),
        (3, criteria::estimator_unbiasedness),
        (4, criteria::norm_bound),
        (5, criteria::truncation_bound),
        (6, criteria::markowitz_agreement),
        (7, criteria::inventory_ordering),
        (8, criteria::toy_mse_decay),
        (9, determinism_and_invariants),
    ];
    // numeric arguments select a subset, e.g. `cargo test --test acceptance -- 3 5`
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected: Vec<_> = checks.into_iter().filter(|(id, _)| only.is_empty() || only.contains(id)).collect();
    let total = selected.len();
    let mut failed = 0;
    for (id, check) in selected {
        let started = Instant::now();
        let line = match check() {
            Ok(o) => {
                if !o.pass {
                    failed += 1;
                }
                o.to_string()
            }
            Err(e) => {
                failed += 1;
                format!("criterion {id} [FAIL] error: {e}")
            }
        };
        println!("{line} ({:.0}s)", started.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {total} criteria passed", total - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
