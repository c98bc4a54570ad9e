//! Per-run verdict and the exit code derived from it.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use crate::sim::log::{Metrics, TrajectoryLog};
use crate::sim::scenario::{Scenario, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
    Fell,
}

impl Outcome {
    /// Process exit code: 0 pass, 3 criteria failed, 4 the robot fell.
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Passed => 0,
            Outcome::Failed => 3,
            Outcome::Fell => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub metrics: Metrics,
    pub artifacts: Vec<PathBuf>,
    pub runtime: Duration,
}

impl RunReport {
    pub fn new(scenario: &Scenario, log: &TrajectoryLog, artifacts: Vec<PathBuf>, runtime: Duration) -> Self {
        Self {
            scenario: log.scenario.clone(),
            seed: log.seed,
            verdict: scenario.evaluate(&log.metrics),
            metrics: log.metrics.clone(),
            artifacts,
            runtime,
        }
    }

    /// Depends on the stored metrics and thresholds only.
    pub fn outcome(&self) -> Outcome {
        if self.verdict.terminated.is_some() {
            Outcome::Fell
        } else if self.verdict.passed() {
            Outcome::Passed
        } else {
            Outcome::Failed
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let outcome = match self.outcome() {
            Outcome::Passed => "PASS",
            Outcome::Failed => "FAIL",
            Outcome::Fell => "FELL",
        };
        let _ = writeln!(s, "scenario {} (seed {}): {outcome}", self.scenario, self.seed);
        if let Some(t) = &self.verdict.terminated {
            let _ = writeln!(s, "  run ended early: {t}");
        }
        for c in &self.verdict.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = writeln!(s, "  [{mark}] {:.4} (required {})", c.measured, c.requirement());
        }
        for n in &self.verdict.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        let _ = write!(
            s,
            "  {} rows, {:.2} s simulated, {} saturated ticks",
            self.metrics.rows, self.metrics.duration, self.metrics.saturated_ticks
        );
        if !self.runtime.is_zero() {
            let _ = write!(s, ", wall clock {:.2} s", self.runtime.as_secs_f64());
        }
        s.push('\n');
        for a in &self.artifacts {
            let _ = writeln!(s, "  wrote {}", a.display());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::log::LogRow;
    use crate::sim::scenario::scenario_by_name;

    fn report(gamma: f64, termination: Option<&str>) -> RunReport {
        let sc = scenario_by_name("flat_tracking").unwrap();
        let rows = vec![LogRow { gamma, ..Default::default() }, LogRow { t: 0.002, ..Default::default() }];
        let log = TrajectoryLog::new(&sc.name, 0, rows, termination.map(String::from));
        RunReport::new(&sc, &log, vec![], Duration::ZERO)
    }

    #[test]
    fn exit_codes_follow_the_verdict() {
        assert_eq!(report(0.01, None).outcome().exit_code(), 0);
        assert_eq!(report(0.2, None).outcome().exit_code(), 3);
        assert_eq!(report(0.01, Some("fallen at 1 s")).outcome().exit_code(), 4);
    }

    #[test]
    fn render_lists_checks() {
        let text = report(0.2, None).render();
        assert!(text.starts_with("scenario flat_tracking (seed 0): FAIL"), "{text}");
        assert!(text.contains("[FAIL] 0.2000 (required max |gamma| <= 0.05)"), "{text}");
    }
}
