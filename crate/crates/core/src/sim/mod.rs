//! Deterministic fixed-step simulation of the full robot.

pub mod log;
pub mod plant;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sensors;

pub use log::{compute_metrics, read_csv, LogRow, Metrics, SummaryPlacement, TrajectoryLog};
pub use plant::{FullPlantState, Plant, Termination, Terrain};
pub use report::{Outcome, RunReport};
pub use runner::run_scenario;
pub use scenario::{builtin_scenarios, scenario_by_name, Scenario, SCENARIO_NAMES};
pub use sensors::NoiseConfig;
