use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::mode::{ModeSwitch, NavMode};
use crate::control::FaultLatch;
use crate::error::Result;

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Completed,
    Fdir(FaultLatch),
    PathBlocked,
    OutOfBounds,
    Timeout,
    /// The rover never moved.
    NoMotion,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Fdir(latch) => latch.as_str(),
            RunStatus::PathBlocked => "path_blocked",
            RunStatus::OutOfBounds => "out_of_bounds",
            RunStatus::Timeout => "timeout",
            RunStatus::NoMotion => "no_motion",
        }
    }

    pub fn is_fault(&self) -> bool {
        *self != RunStatus::Completed
    }
}

/// One attempt at absolute correction. Errors are measured against the true pose and
/// only ever reach the metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionRecord {
    pub time: f64,
    pub distance: f64,
    pub accepted: bool,
    pub applied: bool,
    pub peak: f64,
    pub sharpness: f64,
    pub delta: (f64, f64),
    pub error_before: f64,
    pub error_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub seed: u64,
    pub policy: String,
    pub status: RunStatus,
    pub planned: f64,
    pub traversed: f64,
    /// Detour episodes: repairs started while the rover was on the global path.
    pub replans: usize,
    /// Every call to the repair planner, including refinements of a running detour.
    pub repairs: usize,
    pub final_error: f64,
    pub odometry_error: f64,
    pub corrections: Vec<CorrectionRecord>,
    pub mode_switches: Vec<ModeSwitch>,
    pub sim_time: f64,
}

/// traversed / planned − 1.
pub fn overhead(traversed: f64, planned: f64) -> f64 {
    traversed / planned - 1.0
}

pub const CSV_HEADER: &str = "scenario,seed,policy,status,planned_m,traversed_m,overhead,replans,repairs,final_error_m,final_error_pct,odometry_error_m,correction_errors_m,mode_switches,sim_time_s";

impl RunMetrics {
    /// Overhead, or `None` when the run has no meaningful length.
    pub fn overhead(&self) -> Option<f64> {
        (self.planned > 0.0 && self.traversed > 0.0).then(|| overhead(self.traversed, self.planned))
    }

    /// Final error as a percentage of the distance driven.
    pub fn final_error_pct(&self) -> Option<f64> {
        (self.traversed > 0.0).then(|| 100.0 * self.final_error / self.traversed)
    }

    /// Errors after each applied correction.
    pub fn correction_errors(&self) -> Vec<f64> {
        self.corrections
            .iter()
            .filter(|c| c.applied)
            .map(|c| c.error_after)
            .collect()
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>, digits: usize| v.map_or(String::new(), |v| format!("{v:.digits$}"));
        let corrections = self
            .correction_errors()
            .iter()
            .map(|e| format!("{e:.4}"))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{},{},{},{},{:.4},{:.4},{},{},{},{:.4},{},{:.4},{},{},{:.1}",
            self.scenario,
            self.seed,
            self.policy,
            self.status.as_str(),
            self.planned,
            self.traversed,
            opt(self.overhead(), 4),
            self.replans,
            self.repairs,
            self.final_error,
            opt(self.final_error_pct(), 3),
            self.odometry_error,
            corrections,
            self.mode_switches.len(),
            self.sim_time,
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}\n", self.csv_row())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// One simulation tick as written to trajectory.csv.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub truth: (f64, f64, f64),
    pub estimate: (f64, f64, f64),
    pub mode: NavMode,
}

pub const TRAJECTORY_HEADER: &str = "t,truth_x,truth_y,truth_heading,est_x,est_y,est_heading,mode";

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{:.2},{:.4},{:.4},{:.5},{:.4},{:.4},{:.5},{}",
            r.time, r.truth.0, r.truth.1, r.truth.2, r.estimate.0, r.estimate.1, r.estimate.2, r.mode
        );
    }
    s
}

/// Parse trajectory.csv back; used by `replay`.
pub fn parse_trajectory(text: &str) -> Result<Vec<TrajectoryRow>> {
    use crate::error::NavError;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRAJECTORY_HEADER => {}
        _ => return Err(NavError::Parse("not a trajectory file (bad header)".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(NavError::Parse(format!("line {}: expected 8 fields", i + 2)));
        }
        let num = |k: usize| {
            f[k].trim()
                .parse::<f64>()
                .map_err(|e| NavError::Parse(format!("line {}: {e}", i + 2)))
        };
        let mode = match f[7].trim() {
            "efficient" => NavMode::Efficient,
            "full" => NavMode::Full,
            other => return Err(NavError::Parse(format!("line {}: unknown mode {other}", i + 2))),
        };
        rows.push(TrajectoryRow {
            time: num(0)?,
            truth: (num(1)?, num(2)?, num(3)?),
            estimate: (num(4)?, num(5)?, num(6)?),
            mode,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(traversed: f64, status: RunStatus) -> RunMetrics {
        RunMetrics {
            scenario: "t".into(),
            seed: 1,
            policy: "auto".into(),
            status,
            planned: 10.0,
            traversed,
            replans: 0,
            repairs: 0,
            final_error: 0.0,
            odometry_error: 0.0,
            corrections: vec![],
            mode_switches: vec![],
            sim_time: 0.0,
        }
    }

    #[test]
    fn overhead_of_the_field_totals() {
        assert!((overhead(176.9, 148.2) - 0.1937).abs() < 5e-5);
    }

    #[test]
    fn zero_length_row_has_fault_status_and_no_overhead() {
        let m = metrics(0.0, RunStatus::NoMotion);
        let row = m.csv_row();
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), CSV_HEADER.split(',').count());
        assert_eq!(f[3], "no_motion");
        assert_eq!(f[6], "");
        assert!(m.status.is_fault());
    }

    #[test]
    fn trajectory_round_trip() {
        let rows = vec![
            TrajectoryRow {
                time: 0.1,
                truth: (1.0, 2.0, 0.5),
                estimate: (1.1, 2.1, 0.25),
                mode: NavMode::Full,
            },
            TrajectoryRow {
                time: 0.2,
                truth: (-1.0, 0.0, 0.0),
                estimate: (0.0, 0.0, -3.0),
                mode: NavMode::Efficient,
            },
        ];
        assert_eq!(parse_trajectory(&trajectory_csv(&rows)).unwrap(), rows);
        assert!(parse_trajectory("x,y\n").is_err());
    }
}
