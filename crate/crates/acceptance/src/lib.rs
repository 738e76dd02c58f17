//! Reporting helpers for the acceptance runner in `tests/acceptance.rs`.
//!
//! The runner lives in its own package so that cargo finishes the `simvi`
//! suites before it starts the long acceptance runs.

use std::time::{Duration, Instant};

/// Outcome of one criterion, before the runtime budget is applied.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

/// Runs `f`, prints one `PASS`/`FAIL` line and returns whether it passed.
/// A criterion fails if it errors, panics or runs over `budget`.
pub fn run_criterion<E: std::fmt::Display>(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Result<Verdict, E>) -> bool {
    let start = Instant::now();
    let verdict = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => Verdict::new(false, format!("error: {e}")),
        Err(_) => Verdict::new(false, "panicked"),
    };
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let passed = verdict.passed && in_time;
    let mut line = format!(
        "{} criterion {id} ({name}): {} [{:.1} s of {} s]",
        if passed { "PASS" } else { "FAIL" },
        verdict.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    if !in_time {
        line.push_str(" over the runtime budget");
    }
    println!("{line}");
    passed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_errors_and_panics_are_reported() {
        let budget = Duration::from_secs(5);
        assert!(run_criterion::<String>(0, "ok", budget, || Ok(Verdict::new(true, "fine"))));
        assert!(!run_criterion::<String>(0, "no", budget, || Ok(Verdict::new(false, "bad"))));
        assert!(!run_criterion(0, "err", budget, || Err("boom")));
        assert!(!run_criterion::<String>(0, "panic", budget, || panic!("boom")));
        assert!(!run_criterion::<String>(0, "slow", Duration::ZERO, || {
            std::thread::sleep(Duration::from_millis(2));
            Ok(Verdict::new(true, "late"))
        }));
    }
}
