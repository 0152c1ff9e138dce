//! Pure-pursuit path following and the FDIR monitors (slip, attitude, corridor, motor proxy).

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::{normalize_angle, project_on_segment, Point2};
use crate::sim::{OdometryDelta, RoverPose};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    /// Forward speed, m/s.
    pub speed: f64,
    /// Turn rate, rad/s (positive = counter-clockwise).
    pub turn_rate: f64,
}

impl ControlCommand {
    pub const STOP: ControlCommand = ControlCommand {
        speed: 0.0,
        turn_rate: 0.0,
    };

    pub fn is_stop(&self) -> bool {
        self.speed == 0.0 && self.turn_rate == 0.0
    }

    /// Clamp both components into the actuator envelope.
    pub fn saturate(self, v_max: f64, omega_max: f64) -> Self {
        let clamp = |x: f64, m: f64| if x.is_nan() { 0.0 } else { x.clamp(-m, m) };
        Self {
            speed: clamp(self.speed, v_max),
            turn_rate: clamp(self.turn_rate, omega_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlParams {
    /// Lookahead arc length along the path, meters.
    pub lookahead: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// Speed is divided by `1 + curvature_gain·|κ|`.
    pub curvature_gain: f64,
    pub goal_tolerance: f64,
    /// Rotate in place instead of driving an arc when the target is further off the
    /// heading than this, radians.
    pub max_drive_angle: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            lookahead: 1.0,
            v_max: 0.5,
            omega_max: 0.6,
            curvature_gain: 1.0,
            goal_tolerance: 0.2,
            max_drive_angle: std::f64::consts::FRAC_PI_3,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lookahead > 0.0 && self.v_max > 0.0 && self.omega_max > 0.0) {
            return Err(NavError::Config(
                "lookahead, v_max and omega_max must be positive".into(),
            ));
        }
        if !(self.curvature_gain >= 0.0 && self.goal_tolerance >= 0.0 && self.max_drive_angle > 0.0) {
            return Err(NavError::Config(
                "curvature_gain and goal_tolerance must be non-negative, max_drive_angle positive".into(),
            ));
        }
        Ok(())
    }
}

/// Closest point on a polyline, searched over segments `first_segment..`.
/// Returns (arc length of the projection, distance to it).
pub fn project_on_polyline(path: &[Point2], p: Point2, first_segment: usize) -> (f64, f64) {
    if path.len() == 1 {
        return (0.0, p.distance(path[0]));
    }
    let mut s_before = 0.0;
    let mut best = (0.0, f64::INFINITY);
    for (i, w) in path.windows(2).enumerate() {
        let len = w[0].distance(w[1]);
        if i >= first_segment {
            let t = project_on_segment(p, w[0], w[1]);
            let d = p.distance(w[0].lerp(w[1], t));
            if d < best.1 {
                best = (s_before + t * len, d);
            }
        }
        s_before += len;
    }
    best
}

/// Point at arc length `s` along the polyline, clamped to its ends.
pub fn point_at_arclength(path: &[Point2], s: f64) -> Point2 {
    let mut remaining = s.max(0.0);
    for w in path.windows(2) {
        let len = w[0].distance(w[1]);
        if remaining <= len && len > 0.0 {
            return w[0].lerp(w[1], remaining / len);
        }
        remaining -= len;
    }
    *path.last().expect("non-empty path")
}

/// Pure-pursuit command steering toward the lookahead point of `path`.
pub fn control_step(pose: &RoverPose, path: &[Point2], params: &ControlParams) -> ControlCommand {
    if path.is_empty() {
        return ControlCommand::STOP;
    }
    let (s, _) = project_on_polyline(path, pose.position(), 0);
    pursue(pose, path, s, params)
}

fn pursue(pose: &RoverPose, path: &[Point2], s: f64, params: &ControlParams) -> ControlCommand {
    let goal = *path.last().expect("non-empty path");
    if pose.position().distance(goal) <= params.goal_tolerance {
        return ControlCommand::STOP;
    }
    let target = point_at_arclength(path, s + params.lookahead);
    let local = (target - pose.position()).rotate(-pose.heading);
    let cmd = if local.x <= 0.0 || local.y.atan2(local.x).abs() > params.max_drive_angle {
        // Target well off the nose: rotate in place toward it.
        let dir = if local.y < 0.0 { -1.0 } else { 1.0 };
        ControlCommand {
            speed: 0.0,
            turn_rate: dir * params.omega_max,
        }
    } else {
        let kappa = 2.0 * local.y / (local.x * local.x + local.y * local.y);
        let mut speed = params.v_max / (1.0 + params.curvature_gain * kappa.abs());
        let mut turn_rate = speed * kappa;
        if turn_rate.abs() > params.omega_max {
            turn_rate = params.omega_max * turn_rate.signum();
            speed = params.omega_max / kappa.abs();
        }
        ControlCommand { speed, turn_rate }
    };
    cmd.saturate(params.v_max, params.omega_max)
}

/// Stateful follower: keeps a progress hint so paths that pass close to themselves
/// are not short-circuited.
#[derive(Debug, Clone)]
pub struct PathFollower {
    path: Vec<Point2>,
    segment: usize,
    progress: f64,
}

impl PathFollower {
    pub fn new(path: Vec<Point2>) -> Result<Self> {
        if path.is_empty() {
            return Err(NavError::Contract("path must not be empty".into()));
        }
        Ok(Self {
            path,
            segment: 0,
            progress: 0.0,
        })
    }

    pub fn path(&self) -> &[Point2] {
        &self.path
    }

    /// Arc length of the last projection.
    pub fn progress(&self) -> f64 {
        self.progress
    }

    /// Update progress from `position` and return (arc length, cross-track distance).
    pub fn track(&mut self, position: Point2) -> (f64, f64) {
        // Only look a few segments back so progress cannot jump to an earlier pass.
        let first = self.segment.saturating_sub(1);
        let (s, d) = project_on_polyline(&self.path, position, first);
        self.progress = s;
        let mut acc = 0.0;
        self.segment = 0;
        for (i, w) in self.path.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if acc + len >= s {
                self.segment = i;
                break;
            }
            acc += len;
            self.segment = i;
        }
        (s, d)
    }

    pub fn command(&mut self, pose: &RoverPose, params: &ControlParams) -> ControlCommand {
        let (s, _) = self.track(pose.position());
        pursue(pose, &self.path, s, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultLatch {
    #[default]
    Nominal,
    SlipFault,
    AttitudeFault,
    CorridorFault,
    MotorFault,
}

impl FaultLatch {
    pub fn as_str(&self) -> &'static str {
        match self {
            FaultLatch::Nominal => "nominal",
            FaultLatch::SlipFault => "slip_fault",
            FaultLatch::AttitudeFault => "attitude_fault",
            FaultLatch::CorridorFault => "corridor_fault",
            FaultLatch::MotorFault => "motor_fault",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdirLimits {
    pub slip_limit: f64,
    /// Roll and pitch limit, degrees.
    pub attitude_limit_deg: f64,
    /// Corridor half-width, meters.
    pub corridor: f64,
    /// Motor current proxy limit on |speed · slope|.
    pub motor_limit: f64,
    /// Slip denominator floor, meters.
    pub epsilon: f64,
}

impl Default for FdirLimits {
    fn default() -> Self {
        Self {
            slip_limit: 0.4,
            attitude_limit_deg: 20.0,
            corridor: 1.5,
            motor_limit: 0.2,
            epsilon: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdirState {
    pub slip_ratio: f64,
    pub roll_exceeded: bool,
    pub pitch_exceeded: bool,
    pub corridor_deviation: f64,
    pub motor_load: f64,
    pub latch: FaultLatch,
}

impl FdirState {
    pub fn is_faulted(&self) -> bool {
        self.latch != FaultLatch::Nominal
    }

    pub fn reset(&mut self) {
        *self = FdirState::default();
    }

    /// A latched fault overrides any command with a stop.
    pub fn gate(&self, cmd: ControlCommand) -> ControlCommand {
        if self.is_faulted() {
            ControlCommand::STOP
        } else {
            cmd
        }
    }
}

/// One FDIR evaluation. `corridor_deviation` is the measured distance from the
/// reference path; `speed` feeds the motor-current proxy. A latch already set on
/// `previous` is kept.
pub fn fdir_check(
    previous: &FdirState,
    estimated_delta: &OdometryDelta,
    commanded_delta: &OdometryDelta,
    pose: &RoverPose,
    corridor_deviation: f64,
    speed: f64,
    limits: &FdirLimits,
) -> FdirState {
    let commanded = commanded_delta.forward.abs();
    let estimated = estimated_delta.forward.abs();
    let slip_ratio = (commanded - estimated).abs() / commanded.max(limits.epsilon);
    let attitude_limit = limits.attitude_limit_deg.to_radians();
    let roll_exceeded = pose.roll.abs() > attitude_limit;
    let pitch_exceeded = pose.pitch.abs() > attitude_limit;
    let motor_load = (speed * pose.pitch.tan()).abs();

    let detected = if slip_ratio > limits.slip_limit {
        FaultLatch::SlipFault
    } else if roll_exceeded || pitch_exceeded {
        FaultLatch::AttitudeFault
    } else if corridor_deviation > limits.corridor {
        FaultLatch::CorridorFault
    } else if motor_load > limits.motor_limit {
        FaultLatch::MotorFault
    } else {
        FaultLatch::Nominal
    };
    let latch = if previous.is_faulted() {
        previous.latch
    } else {
        detected
    };
    FdirState {
        slip_ratio,
        roll_exceeded,
        pitch_exceeded,
        corridor_deviation,
        motor_load,
        latch,
    }
}

/// Signed heading error helper used by callers that align before driving.
pub fn heading_error(pose: &RoverPose, target: Point2) -> f64 {
    let d = target - pose.position();
    normalize_angle(d.y.atan2(d.x) - pose.heading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::integrate_unicycle;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn straight() -> Vec<Point2> {
        vec![Point2::new(0.0, 0.0), Point2::new(20.0, 0.0)]
    }

    #[test]
    fn aligned_on_straight_path() {
        let p = ControlParams::default();
        let cmd = control_step(&RoverPose::planar(1.0, 0.0, 0.0), &straight(), &p);
        assert_eq!(cmd.turn_rate, 0.0);
        assert_eq!(cmd.speed, p.v_max);
    }

    #[test]
    fn offset_left_steers_right() {
        let cmd = control_step(
            &RoverPose::planar(1.0, 0.5, 0.0),
            &straight(),
            &ControlParams::default(),
        );
        assert!(cmd.turn_rate < 0.0);
    }

    #[test]
    fn circle_curvature() {
        let r = 5.0;
        let path: Vec<Point2> = (0..=2000)
            .map(|i| {
                let a = i as f64 / 2000.0 * PI;
                Point2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        let params = ControlParams {
            omega_max: 10.0,
            ..ControlParams::default()
        };
        // On the circle at angle 0.3, heading tangent.
        let a: f64 = 0.3;
        let pose = RoverPose::planar(r * a.cos(), r * a.sin(), a + PI / 2.0);
        let cmd = control_step(&pose, &path, &params);
        let kappa = cmd.turn_rate / cmd.speed;
        assert!((kappa - 1.0 / r).abs() < 0.05 / r, "kappa {kappa}");
    }

    #[test]
    fn stops_at_goal() {
        let cmd = control_step(
            &RoverPose::planar(19.9, 0.0, 0.0),
            &straight(),
            &ControlParams::default(),
        );
        assert!(cmd.is_stop());
    }

    #[test]
    fn target_behind_turns_in_place() {
        let cmd = control_step(&RoverPose::planar(1.0, 0.0, PI), &straight(), &ControlParams::default());
        assert_eq!(cmd.speed, 0.0);
        assert!(cmd.turn_rate != 0.0);
    }

    #[test]
    fn closed_loop_converges_from_offset() {
        let params = ControlParams::default();
        let path = straight();
        let mut f = PathFollower::new(path).unwrap();
        let (mut x, mut y, mut h) = (0.0, 0.5, 0.0);
        let dt = 0.1;
        while x < 5.0 {
            let cmd = f.command(&RoverPose::planar(x, y, h), &params);
            (x, y, h) = integrate_unicycle(x, y, h, cmd.speed, cmd.turn_rate, dt);
        }
        assert!(y.abs() <= 0.1, "cross-track {y}");
    }

    #[test]
    fn slip_examples() {
        let l = FdirLimits::default();
        let pose = RoverPose::planar(0.0, 0.0, 0.0);
        let none = FdirState::default();
        let c = OdometryDelta::new(0.1, 0.0);
        let s = fdir_check(&none, &c, &c, &pose, 0.0, 0.1, &l);
        assert_eq!(s.slip_ratio, 0.0);
        assert_eq!(s.latch, FaultLatch::Nominal);
        let half = OdometryDelta::new(0.05, 0.0);
        let tight = FdirLimits { slip_limit: 0.3, ..l };
        let s = fdir_check(&none, &half, &c, &pose, 0.0, 0.1, &tight);
        assert!((s.slip_ratio - 0.5).abs() < 1e-12);
        assert_eq!(s.latch, FaultLatch::SlipFault);
    }

    #[test]
    fn attitude_and_latch() {
        let l = FdirLimits::default();
        let mut pose = RoverPose::planar(0.0, 0.0, 0.0);
        pose.pitch = 25f64.to_radians();
        let c = OdometryDelta::new(0.1, 0.0);
        let s = fdir_check(&FdirState::default(), &c, &c, &pose, 0.0, 0.0, &l);
        assert_eq!(s.latch, FaultLatch::AttitudeFault);
        pose.pitch = 0.0;
        let mut s2 = fdir_check(&s, &c, &c, &pose, 0.0, 0.0, &l);
        assert_eq!(s2.latch, FaultLatch::AttitudeFault);
        assert!(s2
            .gate(ControlCommand {
                speed: 0.3,
                turn_rate: 0.1
            })
            .is_stop());
        s2.reset();
        assert_eq!(s2.latch, FaultLatch::Nominal);
        let s3 = fdir_check(&s2, &c, &c, &pose, 2.0, 0.0, &l);
        assert_eq!(s3.latch, FaultLatch::CorridorFault);
    }

    #[test]
    fn motor_proxy() {
        let mut pose = RoverPose::planar(0.0, 0.0, 0.0);
        pose.pitch = 0.3f64.atan();
        let c = OdometryDelta::new(0.1, 0.0);
        let s = fdir_check(&FdirState::default(), &c, &c, &pose, 0.0, 1.0, &FdirLimits::default());
        assert_eq!(s.latch, FaultLatch::MotorFault);
    }

    proptest! {
        #[test]
        fn commands_respect_saturation(
            x in -30.0f64..30.0, y in -30.0f64..30.0, h in -10.0f64..10.0,
            wx in proptest::collection::vec(-30.0f64..30.0, 2..6),
            wy in proptest::collection::vec(-30.0f64..30.0, 2..6),
            v_max in 0.01f64..3.0, omega_max in 0.01f64..3.0,
        ) {
            let path: Vec<Point2> = wx.iter().zip(&wy).map(|(a, b)| Point2::new(*a, *b)).collect();
            let params = ControlParams { v_max, omega_max, ..ControlParams::default() };
            let cmd = control_step(&RoverPose::planar(x, y, h), &path, &params);
            prop_assert!(cmd.speed.abs() <= v_max && cmd.turn_rate.abs() <= omega_max);
        }
    }
}
