//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! Every entry point takes the config as TOML text (empty for the
//! defaults) so the page can edit parameters without a rebuild.

use nalgebra::Complex;
use wasm_bindgen::prelude::*;
use wheelleg_core::dynamics::linearize_at;
use wheelleg_core::lqr::{build_gain_schedule, discretize, GainSchedule};
use wheelleg_core::params::{Config, ControllerGains, RobotParams};
use wheelleg_core::sim::{
    run_scenario, scenario_by_name, LogRow, NoiseConfig, Outcome, RunReport, SCENARIO_NAMES,
};

fn config(toml: &str) -> Result<(RobotParams, ControllerGains), String> {
    Config::from_toml_str(toml).map(|c| (c.robot, c.gains)).map_err(|e| e.to_string())
}

fn schedule(params: &RobotParams, gains: &ControllerGains) -> Result<GainSchedule, String> {
    build_gain_schedule(params, gains, gains.n_grid).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn scenario_names() -> Vec<String> {
    SCENARIO_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Column traces of one scenario run, decimated for plotting.
#[wasm_bindgen]
#[derive(Debug)]
pub struct Trace {
    t: Vec<f64>,
    gamma: Vec<f64>,
    gamma_d: Vec<f64>,
    theta: Vec<f64>,
    x_dot: Vec<f64>,
    v_d: Vec<f64>,
    psi: Vec<f64>,
    split: Vec<f64>,
    report: String,
    outcome: String,
}

#[wasm_bindgen]
impl Trace {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }
    pub fn gamma(&self) -> Vec<f64> {
        self.gamma.clone()
    }
    pub fn gamma_d(&self) -> Vec<f64> {
        self.gamma_d.clone()
    }
    pub fn theta(&self) -> Vec<f64> {
        self.theta.clone()
    }
    pub fn x_dot(&self) -> Vec<f64> {
        self.x_dot.clone()
    }
    pub fn v_d(&self) -> Vec<f64> {
        self.v_d.clone()
    }
    pub fn psi(&self) -> Vec<f64> {
        self.psi.clone()
    }
    pub fn split(&self) -> Vec<f64> {
        self.split.clone()
    }
    pub fn report(&self) -> String {
        self.report.clone()
    }
    /// `"PASS"`, `"FAIL"` or `"FELL"`.
    pub fn outcome(&self) -> String {
        self.outcome.clone()
    }
}

/// Keeps one row in `every` (about 100 points per second at the defaults).
const DECIMATE: usize = 5;

/// `noise` is `"on"`, `"off"`, or anything else for the scenario's own setting.
pub fn simulate_trace(config_toml: &str, name: &str, seed: u64, noise: &str) -> Result<Trace, String> {
    let (params, gains) = config(config_toml)?;
    let mut scenario = scenario_by_name(name).map_err(|e| e.to_string())?;
    scenario.seed = seed;
    match noise {
        "on" => scenario.noise = NoiseConfig::default(),
        "off" => scenario.noise = NoiseConfig::off(),
        _ => {}
    }
    let sched = schedule(&params, &gains)?;
    let log = run_scenario(&scenario, &params, &gains, &sched).map_err(|e| e.to_string())?;
    let report = RunReport::new(&scenario, &log, Vec::new(), Default::default());
    let rows: Vec<_> = log.rows.iter().step_by(DECIMATE).collect();
    let col = |f: fn(&LogRow) -> f64| rows.iter().map(|r| f(r)).collect();
    Ok(Trace {
        t: col(|r| r.t),
        gamma: col(|r| r.gamma),
        gamma_d: col(|r| r.gamma_d),
        theta: col(|r| r.theta),
        x_dot: col(|r| r.x_dot),
        v_d: col(|r| r.v_d),
        psi: col(|r| r.psi),
        split: col(|r| r.split),
        outcome: match report.outcome() {
            Outcome::Passed => "PASS",
            Outcome::Failed => "FAIL",
            Outcome::Fell => "FELL",
        }
        .to_string(),
        report: report.render(),
    })
}

/// Runs a built-in scenario and returns its traces and report.
#[wasm_bindgen]
pub fn simulate(config_toml: &str, name: &str, seed: u32, noise: &str) -> Result<Trace, JsError> {
    simulate_trace(config_toml, name, seed as u64, noise).map_err(|e| JsError::new(&e))
}

/// Gain entry `K[row][col]` at every schedule point, interleaved as
/// `[L0, k0, L1, k1, ...]`.
pub fn gain_curve_points(config_toml: &str, row: usize, col: usize) -> Result<Vec<f64>, String> {
    if row >= 2 || col >= 8 {
        return Err(format!("no gain entry ({row}, {col}) in a 2x8 matrix"));
    }
    let (params, gains) = config(config_toml)?;
    let sched = schedule(&params, &gains)?;
    Ok(sched
        .grid
        .iter()
        .zip(&sched.gains)
        .flat_map(|(&l, k)| [l, k[(row, col)]])
        .collect())
}

#[wasm_bindgen]
pub fn gain_curve(config_toml: &str, row: usize, col: usize) -> Result<Vec<f64>, JsError> {
    gain_curve_points(config_toml, row, col).map_err(|e| JsError::new(&e))
}

/// Discrete closed-loop eigenvalues at `leg_length` using the scheduled
/// gain, interleaved as `[re0, im0, re1, im1, ...]`.
pub fn pole_points(config_toml: &str, leg_length: f64) -> Result<Vec<f64>, String> {
    let (params, gains) = config(config_toml)?;
    let sched = schedule(&params, &gains)?;
    let lin = linearize_at(&params, leg_length, 0.0).map_err(|e| e.to_string())?;
    let (a, b) = discretize(&lin.a, &lin.b, gains.control_dt);
    let closed = a - b * sched.lookup(leg_length);
    let mut poles: Vec<Complex<f64>> = closed.complex_eigenvalues().iter().copied().collect();
    poles.sort_by(|p, q| q.norm().total_cmp(&p.norm()));
    Ok(poles.iter().flat_map(|z| [z.re, z.im]).collect())
}

#[wasm_bindgen]
pub fn closed_loop_poles(config_toml: &str, leg_length: f64) -> Result<Vec<f64>, JsError> {
    pole_points(config_toml, leg_length).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_tracking_trace_passes() {
        let trace = simulate_trace("", "flat_tracking", 0, "default").unwrap();
        assert_eq!(trace.outcome, "PASS");
        assert_eq!(trace.t.len(), 5001usize.div_ceil(DECIMATE));
        assert!(trace.v_d.contains(&2.0));
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(simulate_trace("", "nope", 0, "on").unwrap_err().contains("flat_tracking"));
        assert!(simulate_trace("bogus = 1", "flat_tracking", 0, "off").is_err());
        assert!(gain_curve_points("", 2, 0).is_err());
    }

    #[test]
    fn gain_curve_spans_the_grid() {
        let pts = gain_curve_points("", 1, 0).unwrap();
        let g = ControllerGains::default();
        assert_eq!(pts.len(), 2 * g.n_grid);
        assert_eq!(pts[0], g.leg_min);
        assert_eq!(pts[pts.len() - 2], g.leg_max);
    }

    #[test]
    fn poles_are_stable_and_sorted() {
        let pts = pole_points("", 0.2).unwrap();
        assert_eq!(pts.len(), 16);
        let mags: Vec<f64> = pts.chunks(2).map(|p| p[0].hypot(p[1])).collect();
        assert!(mags[0] < 1.0);
        assert!(mags.windows(2).all(|w| w[0] >= w[1]));
    }
}
