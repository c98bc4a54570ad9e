//! Acceptance gate. Each test prints one PASS/FAIL line.

use std::io::Write;

use wheelleg_core::params::{ControllerGains, RobotParams};
use wheelleg_core::verify::{run_criterion, CriterionResult};

fn check(id: u8) -> CriterionResult {
    let r = run_criterion(id, &RobotParams::default(), &ControllerGains::default(), None);
    // Written to the stream directly so the harness does not capture it.
    let _ = writeln!(std::io::stderr().lock(), "{r}");
    r
}

macro_rules! criterion {
    ($name:ident, $id:expr) => {
        #[test]
        fn $name() {
            let r = check($id);
            assert!(r.passed, "{r}");
        }
    };
}

criterion!(criterion_01_linearization_consistency, 1);
criterion!(criterion_02_controllability, 2);
criterion!(criterion_03_dare_correctness, 3);
criterion!(criterion_04_flat_tracking, 4);
criterion!(criterion_05_pitch_hold, 5);
criterion!(criterion_06_slope_roll, 6);
criterion!(criterion_07_spacewalk, 7);
criterion!(criterion_08_energy_conservation, 8);
criterion!(criterion_09_determinism, 9);
criterion!(criterion_10_oracle_equivalence, 10);
