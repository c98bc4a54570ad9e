//! Trajectory rows, CSV round trip and the metrics computed from them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Pitch band for settling, rad.
pub const SETTLE_PITCH_BAND: f64 = 0.02;

/// One control tick. Angles are world-frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    #[serde(rename = "t [s]")]
    pub t: f64,
    #[serde(rename = "gamma [rad]")]
    pub gamma: f64,
    #[serde(rename = "theta [rad]")]
    pub theta: f64,
    #[serde(rename = "x [m]")]
    pub x: f64,
    #[serde(rename = "gamma_dot [rad/s]")]
    pub gamma_dot: f64,
    #[serde(rename = "theta_dot [rad/s]")]
    pub theta_dot: f64,
    #[serde(rename = "x_dot [m/s]")]
    pub x_dot: f64,
    #[serde(rename = "leg_l [m]")]
    pub leg_l: f64,
    #[serde(rename = "leg_r [m]")]
    pub leg_r: f64,
    #[serde(rename = "psi [rad]")]
    pub psi: f64,
    #[serde(rename = "yaw [rad]")]
    pub yaw: f64,
    #[serde(rename = "split [rad]")]
    pub split: f64,
    #[serde(rename = "slope [rad]")]
    pub slope: f64,
    #[serde(rename = "gamma_hat [rad]")]
    pub gamma_hat: f64,
    #[serde(rename = "theta_hat [rad]")]
    pub theta_hat: f64,
    #[serde(rename = "x_hat [m]")]
    pub x_hat: f64,
    #[serde(rename = "x_dot_hat [m/s]")]
    pub x_dot_hat: f64,
    #[serde(rename = "psi_hat [rad]")]
    pub psi_hat: f64,
    #[serde(rename = "gamma_d [rad]")]
    pub gamma_d: f64,
    #[serde(rename = "theta_d [rad]")]
    pub theta_d: f64,
    #[serde(rename = "x_d [m]")]
    pub x_d: f64,
    #[serde(rename = "v_d [m/s]")]
    pub v_d: f64,
    #[serde(rename = "split_d [rad]")]
    pub split_d: f64,
    #[serde(rename = "tau_hip_l [N m]")]
    pub tau_hip_l: f64,
    #[serde(rename = "tau_hip_r [N m]")]
    pub tau_hip_r: f64,
    #[serde(rename = "tau_knee_l [N m]")]
    pub tau_knee_l: f64,
    #[serde(rename = "tau_knee_r [N m]")]
    pub tau_knee_r: f64,
    #[serde(rename = "tau_wheel_l [N m]")]
    pub tau_wheel_l: f64,
    #[serde(rename = "tau_wheel_r [N m]")]
    pub tau_wheel_r: f64,
    /// Number of saturated motor channels this tick.
    #[serde(rename = "saturated [count]")]
    pub saturated: u8,
    #[serde(rename = "f_friction [N]")]
    pub f_friction: f64,
    #[serde(rename = "f_normal [N]")]
    pub f_normal: f64,
}

impl LogRow {
    pub fn commands(&self) -> [f64; 6] {
        [
            self.tau_hip_l,
            self.tau_hip_r,
            self.tau_knee_l,
            self.tau_knee_r,
            self.tau_wheel_l,
            self.tau_wheel_r,
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub rows: usize,
    pub duration: f64,
    pub max_abs_gamma: f64,
    pub max_abs_theta: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    /// Mean |gamma - gamma_d| over the second half of the run.
    pub steady_pitch_error: f64,
    pub roll_variation: f64,
    pub max_abs_split: f64,
    pub rms_velocity_error: f64,
    /// Last time the head pitch was outside the settling band, 0 if never.
    pub settling_time: f64,
    pub saturated_ticks: usize,
    pub max_abs_command: f64,
    pub min_normal_force: f64,
    /// `"fallen at 3.2 s"` style note when the run ended early.
    pub termination: Option<String>,
}

pub fn compute_metrics(rows: &[LogRow], termination: Option<String>) -> Metrics {
    let Some(last) = rows.last() else {
        return Metrics { termination, ..Default::default() };
    };
    let fold = |f: &dyn Fn(&LogRow) -> f64, init: f64, op: fn(f64, f64) -> f64| {
        rows.iter().map(f).fold(init, op)
    };
    let steady: Vec<&LogRow> = rows.iter().filter(|r| r.t >= 0.5 * last.t).collect();
    let steady_pitch_error =
        steady.iter().map(|r| (r.gamma - r.gamma_d).abs()).sum::<f64>() / steady.len() as f64;
    let rms_velocity_error = (rows.iter().map(|r| (r.x_dot - r.v_d).powi(2)).sum::<f64>()
        / rows.len() as f64)
        .sqrt();
    let settling_time = rows
        .iter()
        .rev()
        .find(|r| (r.gamma - r.gamma_d).abs() > SETTLE_PITCH_BAND)
        .map_or(0.0, |r| r.t);
    Metrics {
        rows: rows.len(),
        duration: last.t,
        max_abs_gamma: fold(&|r| r.gamma.abs(), 0.0, f64::max),
        max_abs_theta: fold(&|r| r.theta.abs(), 0.0, f64::max),
        min_theta: fold(&|r| r.theta, f64::INFINITY, f64::min),
        max_theta: fold(&|r| r.theta, f64::NEG_INFINITY, f64::max),
        steady_pitch_error,
        roll_variation: fold(&|r| r.psi, f64::NEG_INFINITY, f64::max)
            - fold(&|r| r.psi, f64::INFINITY, f64::min),
        max_abs_split: fold(&|r| r.split.abs(), 0.0, f64::max),
        rms_velocity_error,
        settling_time,
        saturated_ticks: rows.iter().filter(|r| r.saturated > 0).count(),
        max_abs_command: rows
            .iter()
            .flat_map(|r| r.commands())
            .fold(0.0, |a, c| a.max(c.abs())),
        min_normal_force: fold(&|r| r.f_normal, f64::INFINITY, f64::min),
        termination,
    }
}

impl Metrics {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("rows", self.rows.to_string());
        line("duration", self.duration.to_string());
        line("max_abs_gamma", self.max_abs_gamma.to_string());
        line("max_abs_theta", self.max_abs_theta.to_string());
        line("min_theta", self.min_theta.to_string());
        line("max_theta", self.max_theta.to_string());
        line("steady_pitch_error", self.steady_pitch_error.to_string());
        line("roll_variation", self.roll_variation.to_string());
        line("max_abs_split", self.max_abs_split.to_string());
        line("rms_velocity_error", self.rms_velocity_error.to_string());
        line("settling_time", self.settling_time.to_string());
        line("saturated_ticks", self.saturated_ticks.to_string());
        line("max_abs_command", self.max_abs_command.to_string());
        line("min_normal_force", self.min_normal_force.to_string());
        if let Some(t) = &self.termination {
            line("termination", format!("\"{t}\""));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummaryPlacement {
    /// `<stem>.summary.txt` next to the CSV.
    Sidecar,
    /// `#`-prefixed block after the last row.
    TrailingComment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<LogRow>,
    pub metrics: Metrics,
}

pub fn rows_to_csv(rows: &[LogRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<LogRow>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<LogRow>, _>>()
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.summary.txt"))
}

impl TrajectoryLog {
    pub fn new(scenario: &str, seed: u64, rows: Vec<LogRow>, termination: Option<String>) -> Self {
        let metrics = compute_metrics(&rows, termination);
        Self {
            scenario: scenario.to_string(),
            seed,
            rows,
            metrics,
        }
    }

    fn summary(&self) -> String {
        format!("scenario = \"{}\"\nseed = {}\n{}", self.scenario, self.seed, self.metrics.summary())
    }

    /// Writes the CSV (and sidecar) atomically; returns the files written.
    pub fn write(&self, path: impl AsRef<Path>, placement: SummaryPlacement) -> Result<Vec<PathBuf>> {
        let path = path.as_ref();
        let mut bytes = rows_to_csv(&self.rows)?;
        match placement {
            SummaryPlacement::TrailingComment => {
                for l in self.summary().lines() {
                    bytes.extend_from_slice(format!("# {l}\n").as_bytes());
                }
                write_atomic(path, &bytes)?;
                Ok(vec![path.to_path_buf()])
            }
            SummaryPlacement::Sidecar => {
                let side = sidecar_path(path);
                write_atomic(path, &bytes)?;
                write_atomic(&side, self.summary().as_bytes())?;
                Ok(vec![path.to_path_buf(), side])
            }
        }
    }

    /// Reads a log written by [`TrajectoryLog::write`]. Scenario, seed and
    /// termination come from the trailing comment block, or the sidecar
    /// when there is none; the stored metrics must match the recomputed ones.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_csv(path)?;
        let text = std::fs::read_to_string(path)?;
        let mut summary: String = text
            .lines()
            .filter_map(|l| l.strip_prefix("# "))
            .map(|l| format!("{l}\n"))
            .collect();
        if summary.is_empty() {
            summary = std::fs::read_to_string(sidecar_path(path))?;
        }
        let format_err = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut scenario = None;
        let mut seed = None;
        let mut termination = None;
        for l in summary.lines() {
            let (k, v) = l
                .split_once(" = ")
                .ok_or_else(|| format_err(format!("summary line `{l}`")))?;
            let unquoted = v.trim_matches('"').to_string();
            match k {
                "scenario" => scenario = Some(unquoted),
                "seed" => seed = Some(v.parse().map_err(|_| format_err(format!("seed `{v}`")))?),
                "termination" => termination = Some(unquoted),
                _ => {}
            }
        }
        let (Some(scenario), Some(seed)) = (scenario, seed) else {
            return Err(format_err("summary lacks scenario or seed".into()));
        };
        let log = Self::new(&scenario, seed, rows, termination);
        if log.summary().trim_end() != summary.trim_end() {
            return Err(format_err("stored summary does not match the rows".into()));
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<LogRow> {
        (0..=10)
            .map(|i| {
                let t = i as f64 * 0.1;
                LogRow {
                    t,
                    gamma: 0.1 * (t * 3.0).sin(),
                    theta: -0.05 + 0.01 * t,
                    psi: 0.01 * t,
                    x_dot: t,
                    v_d: 1.0,
                    split: -0.3 * t,
                    saturated: (i % 4 == 0) as u8,
                    tau_wheel_r: -2.0 * t,
                    f_normal: 200.0 - t,
                    ..Default::default()
                }
            })
            .collect()
    }

    #[test]
    fn metrics_by_hand() {
        let m = compute_metrics(&rows(), None);
        assert_eq!(m.rows, 11);
        assert!((m.roll_variation - 0.01).abs() < 1e-15);
        assert!((m.max_abs_split - 0.3).abs() < 1e-15);
        assert_eq!(m.saturated_ticks, 3);
        assert!((m.max_abs_command - 2.0).abs() < 1e-15);
        assert_eq!(m.min_normal_force, 199.0);
        let rms = ((0..=10).map(|i| (i as f64 * 0.1 - 1.0).powi(2)).sum::<f64>() / 11.0).sqrt();
        assert!((m.rms_velocity_error - rms).abs() < 1e-15);
        assert!((m.min_theta + 0.05).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let log = TrajectoryLog::new("demo", 3, rows(), None);
        for placement in [SummaryPlacement::Sidecar, SummaryPlacement::TrailingComment] {
            let path = dir.path().join("run.csv");
            let files = log.write(&path, placement).unwrap();
            let back = read_csv(&path).unwrap();
            assert_eq!(back, log.rows);
            assert_eq!(compute_metrics(&back, None), log.metrics);
            if placement == SummaryPlacement::Sidecar {
                assert_eq!(files.len(), 2);
                let text = std::fs::read_to_string(&files[1]).unwrap();
                assert!(text.contains("rows = 11"));
            }
        }
    }

    #[test]
    fn read_recovers_log_and_rejects_edits() {
        let dir = tempfile::tempdir().unwrap();
        let log = TrajectoryLog::new("demo", u64::MAX, rows(), Some("fallen at 0.9 s".into()));
        for (name, placement) in
            [("a.csv", SummaryPlacement::Sidecar), ("b.csv", SummaryPlacement::TrailingComment)]
        {
            let path = dir.path().join(name);
            log.write(&path, placement).unwrap();
            assert_eq!(TrajectoryLog::read(&path).unwrap(), log);
        }
        let path = dir.path().join("b.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("# rows = 11", "# rows = 12")).unwrap();
        assert!(matches!(TrajectoryLog::read(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn header_carries_units() {
        let bytes = rows_to_csv(&rows()[..1]).unwrap();
        let header = String::from_utf8(bytes).unwrap();
        let first = header.lines().next().unwrap();
        assert!(first.starts_with("t [s],gamma [rad]"));
        assert!(first.contains("tau_wheel_r [N m]"));
    }

    #[test]
    fn bad_csv_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t [s]\nnot-a-number\n").unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Format { .. })));
    }
}
