use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};

/// Which navigation levels a run may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModePolicy {
    EfficientOnly,
    FullOnly,
    #[default]
    Auto,
}

impl ModePolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModePolicy::EfficientOnly => "efficient_only",
            ModePolicy::FullOnly => "full_only",
            ModePolicy::Auto => "auto",
        }
    }

    pub fn initial_mode(&self) -> NavMode {
        match self {
            ModePolicy::FullOnly => NavMode::Full,
            _ => NavMode::Efficient,
        }
    }
}

impl fmt::Display for ModePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavMode {
    Efficient,
    Full,
}

impl NavMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NavMode::Efficient => "efficient",
            NavMode::Full => "full",
        }
    }
}

impl fmt::Display for NavMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeThresholds {
    /// Switch up when replans per 100 m exceed this.
    pub replans_up: f64,
    /// Odometry distance over which replans are counted, meters.
    pub window: f64,
    /// Hazard-free distance in full mode before switching back down, meters.
    pub hysteresis: f64,
    /// Optional second trigger: hazard area in m² per 100 m² around the rover.
    pub hazard_density_up: Option<f64>,
}

impl Default for ModeThresholds {
    fn default() -> Self {
        Self {
            replans_up: 5.0,
            window: 100.0,
            hysteresis: 50.0,
            hazard_density_up: None,
        }
    }
}

impl ModeThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.hysteresis >= 0.0 && self.replans_up >= 0.0) {
            return Err(NavError::Config(
                "mode thresholds must be non-negative with a positive window".into(),
            ));
        }
        Ok(())
    }
}

/// What the rover has seen recently, as the selector needs it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeInputs {
    /// Replans per 100 m of travel over the window.
    pub replan_rate: f64,
    /// Hazard area per 100 m².
    pub hazard_density: f64,
    /// Distance traveled since the last hazard (or since entering full mode).
    pub hazard_free: f64,
}

/// Stateless arbitration between the two levels.
pub fn select_mode(policy: ModePolicy, current: NavMode, inputs: &ModeInputs, th: &ModeThresholds) -> NavMode {
    match policy {
        ModePolicy::EfficientOnly => NavMode::Efficient,
        ModePolicy::FullOnly => NavMode::Full,
        ModePolicy::Auto => match current {
            NavMode::Efficient => {
                let dense = th.hazard_density_up.is_some_and(|d| inputs.hazard_density > d);
                if inputs.replan_rate > th.replans_up || dense {
                    NavMode::Full
                } else {
                    NavMode::Efficient
                }
            }
            NavMode::Full => {
                if inputs.hazard_free >= th.hysteresis {
                    NavMode::Efficient
                } else {
                    NavMode::Full
                }
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSwitch {
    pub time: f64,
    /// Odometry distance at the switch.
    pub distance: f64,
    pub from: NavMode,
    pub to: NavMode,
    pub cause: String,
}

/// Feeds [`select_mode`] from the event stream of a run.
///
/// Distances are odometry distances, so the selector never depends on the true pose.
#[derive(Debug, Clone)]
pub struct ModeSelector {
    policy: ModePolicy,
    thresholds: ModeThresholds,
    mode: NavMode,
    replans: VecDeque<f64>,
    last_hazard: f64,
    entered: f64,
}

impl ModeSelector {
    pub fn new(policy: ModePolicy, thresholds: ModeThresholds) -> Self {
        Self {
            policy,
            thresholds,
            mode: policy.initial_mode(),
            replans: VecDeque::new(),
            last_hazard: 0.0,
            entered: 0.0,
        }
    }

    pub fn mode(&self) -> NavMode {
        self.mode
    }

    pub fn record_replan(&mut self, distance: f64) {
        self.replans.push_back(distance);
    }

    pub fn record_hazard(&mut self, distance: f64) {
        self.last_hazard = distance;
    }

    pub fn inputs(&mut self, distance: f64, hazard_density: f64) -> ModeInputs {
        let w = self.thresholds.window;
        while self.replans.front().is_some_and(|&d| d < distance - w) {
            self.replans.pop_front();
        }
        ModeInputs {
            replan_rate: self.replans.len() as f64 * 100.0 / w,
            hazard_density,
            hazard_free: distance - self.last_hazard.max(self.entered),
        }
    }

    /// Re-evaluate at odometry distance `distance`. Returns the switch if one happened.
    pub fn update(&mut self, time: f64, distance: f64, hazard_density: f64) -> Option<ModeSwitch> {
        let inputs = self.inputs(distance, hazard_density);
        let next = select_mode(self.policy, self.mode, &inputs, &self.thresholds);
        if next == self.mode {
            return None;
        }
        let cause = match next {
            NavMode::Full if inputs.replan_rate > self.thresholds.replans_up => {
                format!(
                    "replan rate {:.1}/100 m above {:.1}",
                    inputs.replan_rate, self.thresholds.replans_up
                )
            }
            NavMode::Full => format!("hazard density {:.1} m²/100 m²", inputs.hazard_density),
            NavMode::Efficient => format!("{:.1} m without hazards", inputs.hazard_free),
        };
        let switch = ModeSwitch {
            time,
            distance,
            from: self.mode,
            to: next,
            cause,
        };
        self.mode = next;
        self.entered = distance;
        // A fresh window per mode; otherwise the old replans would bounce the rover
        // straight back up after the hysteresis.
        self.replans.clear();
        Some(switch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(replan_rate: f64, hazard_free: f64) -> ModeInputs {
        ModeInputs {
            replan_rate,
            hazard_density: 0.0,
            hazard_free,
        }
    }

    #[test]
    fn fixed_policies_never_switch() {
        let th = ModeThresholds::default();
        for current in [NavMode::Efficient, NavMode::Full] {
            assert_eq!(
                select_mode(ModePolicy::EfficientOnly, current, &inputs(50.0, 0.0), &th),
                NavMode::Efficient
            );
            assert_eq!(
                select_mode(ModePolicy::FullOnly, current, &inputs(0.0, 1e6), &th),
                NavMode::Full
            );
        }
    }

    #[test]
    fn auto_rules() {
        let th = ModeThresholds::default();
        assert_eq!(
            select_mode(ModePolicy::Auto, NavMode::Efficient, &inputs(0.0, 0.0), &th),
            NavMode::Efficient
        );
        assert_eq!(
            select_mode(ModePolicy::Auto, NavMode::Efficient, &inputs(5.0, 0.0), &th),
            NavMode::Efficient
        );
        assert_eq!(
            select_mode(ModePolicy::Auto, NavMode::Efficient, &inputs(8.0, 0.0), &th),
            NavMode::Full
        );
        assert_eq!(
            select_mode(ModePolicy::Auto, NavMode::Full, &inputs(0.0, 49.9), &th),
            NavMode::Full
        );
        assert_eq!(
            select_mode(ModePolicy::Auto, NavMode::Full, &inputs(0.0, 50.0), &th),
            NavMode::Efficient
        );
        let dense = ModeThresholds {
            hazard_density_up: Some(3.0),
            ..th
        };
        let crowded = ModeInputs {
            hazard_density: 4.0,
            ..inputs(0.0, 0.0)
        };
        assert_eq!(
            select_mode(ModePolicy::Auto, NavMode::Efficient, &crowded, &dense),
            NavMode::Full
        );
    }

    /// Scripted run: eight replans in the first 40 m, then clear ground.
    #[test]
    fn trace_matches_scripted_oracle() {
        let mut sel = ModeSelector::new(ModePolicy::Auto, ModeThresholds::default());
        let replans_at = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
        let mut trace = Vec::new();
        for step in 0..=2000 {
            let d = step as f64 * 0.1;
            if replans_at.iter().any(|r| (r - d).abs() < 1e-9) {
                sel.record_replan(d);
                sel.record_hazard(d);
            }
            if let Some(s) = sel.update(d, d, 0.0) {
                trace.push((s.distance, s.from, s.to));
            }
        }
        // Five replans per 100 m is not above the threshold; the sixth is (at 30 m).
        // Hazards keep coming until 40 m, so the way back down is at 40 + 50 m.
        let expected = vec![
            (30.0, NavMode::Efficient, NavMode::Full),
            (90.0, NavMode::Full, NavMode::Efficient),
        ];
        assert_eq!(trace.len(), expected.len());
        for ((d, f, t), (ed, ef, et)) in trace.iter().zip(&expected) {
            assert!((d - ed).abs() < 1e-6, "switch at {d}, expected {ed}");
            assert_eq!((f, t), (ef, et));
        }
    }

    #[test]
    fn replans_age_out_of_the_window() {
        let th = ModeThresholds {
            window: 10.0,
            ..ModeThresholds::default()
        };
        let mut sel = ModeSelector::new(ModePolicy::EfficientOnly, th);
        sel.record_replan(1.0);
        sel.record_replan(2.0);
        assert_eq!(sel.inputs(5.0, 0.0).replan_rate, 20.0);
        assert_eq!(sel.inputs(11.5, 0.0).replan_rate, 10.0);
        assert_eq!(sel.inputs(20.0, 0.0).replan_rate, 0.0);
    }
}
