use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::config::ScenarioConfig;
use super::metrics::{trajectory_csv, CorrectionRecord, RunMetrics, RunStatus, TrajectoryRow};
use super::mode::{ModeSelector, ModeSwitch, NavMode};
use crate::control::{fdir_check, point_at_arclength, ControlCommand, FdirState, PathFollower};
use crate::error::{NavError, Result};
use crate::geometry::Point2;
use crate::global::{describe, localize, relief_triggered, MatchResult};
use crate::hazard::{Bumper, CalibrationTable, Frame, TraversabilityGrid};
use crate::repair::{polyline_free, repair_with_clearance, segment_free, GlobalPath};
use crate::sim::{
    apply_delta, render_pointcloud, simulate_odometry, step_kinematics, to_level_rover_frame, CameraModel, DepthFrame,
    OdometryDelta, RayCaster, RoverPose,
};
use crate::slam::SlamFilter;
use crate::terrain::{derive_orbital_map, generate_terrain, place_obstacles, read_asc, ElevationGrid};

const ODOMETRY: u64 = 1;
const LOCCAM: u64 = 2;
const NAVCAM: u64 = 3;
const FILTER: u64 = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for draw `k` of an independent stream derived from the scenario seed.
pub fn stream_seed(seed: u64, stream: u64, k: u64) -> u64 {
    splitmix(seed ^ splitmix(stream ^ splitmix(k)))
}

/// Everything a run needs that does not change while it runs.
pub struct Scene {
    pub truth: ElevationGrid,
    /// Present unless the policy rules out full mode.
    pub orbital: Option<ElevationGrid>,
    pub global: GlobalPath,
    pub bumper: Bumper,
    pub loccam: CameraModel,
    pub navcam: CameraModel,
}

/// Calibrate the hazard camera, or load the table named in the scenario.
pub fn load_bumper(config: &ScenarioConfig, loccam: &CameraModel) -> Result<Bumper> {
    match &config.hazard.calibration_file {
        Some(file) => Bumper::new(CalibrationTable::load(file)?, config.hazard.params),
        None => Bumper::calibrate_camera(loccam, config.hazard.params),
    }
}

impl Scene {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        let base = match &config.terrain.dem {
            Some(dem) => read_asc(dem)?,
            None => generate_terrain(config.terrain_seed(), &config.terrain.spec)?,
        };
        let truth = if config.obstacles.is_empty() {
            base
        } else {
            place_obstacles(&base, &config.obstacles)?
        };
        let orbital = match config.mode {
            super::ModePolicy::EfficientOnly => None,
            _ if !config.global.enabled => None,
            _ => Some(derive_orbital_map(&truth, config.global.orbital_resolution)?),
        };
        let loccam = CameraModel::pinhole(&config.cameras.loccam)?;
        let navcam = CameraModel::pinhole(&config.cameras.navcam)?;
        let bumper = load_bumper(config, &loccam)?;
        Ok(Self {
            truth,
            orbital,
            global: config.global_path()?,
            bumper,
            loccam,
            navcam,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct MatchRecord {
    pub result: MatchResult,
    pub summary: String,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trajectory: Vec<TrajectoryRow>,
    pub events: Vec<Event>,
    pub matches: Vec<MatchRecord>,
}

impl RunOutput {
    pub fn events_log(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            let _ = writeln!(s, "{:10.2} {}", e.time, e.text);
        }
        s
    }

    pub fn trajectory_csv(&self) -> String {
        trajectory_csv(&self.trajectory)
    }
}

/// Write metrics.csv, trajectory.csv, events.log and one match_NNN.csv per match.
pub fn emit_metrics(output: &RunOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    output.metrics.write_csv(dir.join("metrics.csv"))?;
    std::fs::write(dir.join("trajectory.csv"), output.trajectory_csv())?;
    std::fs::write(dir.join("events.log"), output.events_log())?;
    for (i, m) in output.matches.iter().enumerate() {
        m.result.write_csv(dir.join(format!("match_{:03}.csv", i + 1)))?;
    }
    Ok(())
}

/// The simulated rover and terrain. Navigation only sees what comes out of
/// `render`, `cloud`, `step` (as odometry) and `attitude`.
struct World<'a> {
    caster: RayCaster<'a>,
    truth: &'a ElevationGrid,
    pose: RoverPose,
}

impl<'a> World<'a> {
    fn render(&self, cam: &CameraModel, noise: f64, seed: u64) -> Result<DepthFrame> {
        let frame = self.caster.render(&self.pose, cam)?;
        Ok(if noise > 0.0 {
            frame.with_noise(noise, seed)
        } else {
            frame
        })
    }

    /// Gravity-aligned, rover-centered pointcloud.
    fn cloud(&self, cam: &CameraModel, noise: f64, seed: u64) -> Result<Vec<Vector3<f64>>> {
        let frame = self.render(cam, noise, seed)?;
        Ok(to_level_rover_frame(
            &render_pointcloud(&frame, cam, &self.pose),
            &self.pose,
        ))
    }

    /// Move and return the true motion; the caller turns it into odometry.
    fn step(&mut self, cmd: &ControlCommand, dt: f64) -> Result<(OdometryDelta, f64)> {
        let next = step_kinematics(&self.pose, cmd, dt, self.truth)?;
        let delta = OdometryDelta::between(&self.pose, &next);
        let moved = self.pose.position().distance(next.position());
        self.pose = next;
        Ok((delta, moved))
    }

    /// Inclinometer reading.
    fn attitude(&self) -> (f64, f64) {
        (self.pose.roll, self.pose.pitch)
    }
}

struct Mission<'a> {
    cfg: &'a ScenarioConfig,
    scene: &'a Scene,
    world: World<'a>,
    estimate: RoverPose,
    dead_reckoning: (f64, f64, f64),
    odometer: f64,
    traversed: f64,
    tick: u64,
    trav: TraversabilityGrid,
    /// Undilated hazard cells; an escape from a margin must not cross one.
    cores: TraversabilityGrid,
    follower: PathFollower,
    committed_s: f64,
    /// Arc length of the active path still inside a hazard margin after an escape.
    escape_until: f64,
    replans: usize,
    repairs: usize,
    /// Arc length on the active path where the current detour ends; 0 on the global path.
    detour_until: f64,
    selector: ModeSelector,
    slam: Option<SlamFilter>,
    pending: OdometryDelta,
    since_global: f64,
    injected: bool,
    fdir: FdirState,
    events: Vec<Event>,
    trajectory: Vec<TrajectoryRow>,
    corrections: Vec<CorrectionRecord>,
    matches: Vec<MatchRecord>,
    switches: Vec<ModeSwitch>,
}

/// Run a scenario to the goal or to the first fault.
///
/// Faults end the run with a fault status and partial metrics; only setup problems
/// and internal errors come back as `Err`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    config.validate()?;
    let scene = Scene::build(config)?;
    run_in_scene(config, &scene)
}

pub fn run_in_scene(config: &ScenarioConfig, scene: &Scene) -> Result<RunOutput> {
    let global = &scene.global;
    let wp = global.waypoints();
    let start = wp[0];
    let heading = (wp[1] - wp[0]).y.atan2((wp[1] - wp[0]).x);
    let pose = RoverPose::on_terrain(start.x, start.y, heading, &scene.truth)?;
    let trav = TraversabilityGrid::covering(
        scene.truth.extent_min(),
        scene.truth.extent_max(),
        config.hazard.params.resolution,
        Frame::World,
    )?;
    let selector = ModeSelector::new(config.mode, config.modes);
    let mut m = Mission {
        cfg: config,
        scene,
        world: World {
            caster: RayCaster::new(&scene.truth),
            truth: &scene.truth,
            pose,
        },
        estimate: RoverPose::planar(pose.x, pose.y, pose.heading),
        dead_reckoning: (pose.x, pose.y, pose.heading),
        odometer: 0.0,
        traversed: 0.0,
        tick: 0,
        cores: trav.clone(),
        trav,
        follower: PathFollower::new(wp.to_vec())?,
        committed_s: 0.0,
        escape_until: 0.0,
        replans: 0,
        repairs: 0,
        detour_until: 0.0,
        selector,
        slam: None,
        pending: OdometryDelta::default(),
        since_global: 0.0,
        injected: false,
        fdir: FdirState::default(),
        events: Vec::new(),
        trajectory: Vec::new(),
        corrections: Vec::new(),
        matches: Vec::new(),
        switches: Vec::new(),
    };
    m.log(format!(
        "start {} seed {} policy {} path {:.2} m",
        config.name,
        config.seed,
        config.mode,
        global.length()
    ));
    if m.selector.mode() == NavMode::Full {
        m.start_slam()?;
    }
    m.record();

    let max_time = config
        .run
        .max_time
        .unwrap_or(3.0 * global.length() / config.control.v_max + 120.0);
    let status = loop {
        if m.time() >= max_time {
            m.log(format!("timeout after {:.1} s", m.time()));
            break RunStatus::Timeout;
        }
        match m.tick() {
            Ok(None) => {}
            Ok(Some(status)) => break status,
            Err(NavError::OutOfBounds(msg)) => {
                m.log(format!("fault: {msg}"));
                break RunStatus::OutOfBounds;
            }
            Err(e) => return Err(e),
        }
    };
    m.finish(status)
}

impl<'a> Mission<'a> {
    fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.run.dt
    }

    fn seed(&self, stream: u64, k: u64) -> u64 {
        stream_seed(self.cfg.seed, stream, k)
    }

    fn log(&mut self, text: String) {
        self.events.push(Event {
            time: self.time(),
            text,
        });
    }

    fn mode(&self) -> NavMode {
        self.selector.mode()
    }

    fn record(&mut self) {
        let t = self.world.pose;
        let e = self.estimate;
        self.trajectory.push(TrajectoryRow {
            time: self.time(),
            truth: (t.x, t.y, t.heading),
            estimate: (e.x, e.y, e.heading),
            mode: self.mode(),
        });
    }

    fn start_slam(&mut self) -> Result<()> {
        let seed = self.seed(FILTER, self.tick);
        let mut slam = SlamFilter::new(&self.estimate, self.cfg.slam.params, seed)?;
        let cloud = self.world.cloud(
            &self.scene.navcam,
            self.cfg.odometry.depth_noise,
            self.seed(NAVCAM, self.tick),
        )?;
        slam.start(&cloud)?;
        self.slam = Some(slam);
        self.pending = OdometryDelta::default();
        self.since_global = 0.0;
        Ok(())
    }

    /// Feed the odometry accumulated since the last filter update.
    fn slam_update(&mut self) -> Result<()> {
        let Some(slam) = self.slam.as_mut() else {
            return Ok(());
        };
        if self.pending == OdometryDelta::default() {
            return Ok(());
        }
        let cloud = self.world.cloud(
            &self.scene.navcam,
            self.cfg.odometry.depth_noise,
            stream_seed(self.cfg.seed, NAVCAM, self.tick),
        )?;
        let e = slam.update(&self.pending, &cloud)?;
        self.estimate = RoverPose::planar(e.x, e.y, e.heading);
        self.pending = OdometryDelta::default();
        Ok(())
    }

    fn tick(&mut self) -> Result<Option<RunStatus>> {
        let goal = *self.scene.global.waypoints().last().expect("validated path");
        if self.estimate.position().distance(goal) <= self.cfg.control.goal_tolerance {
            self.log("goal reached".into());
            return Ok(Some(RunStatus::Completed));
        }

        if self.mode() == NavMode::Efficient || self.cfg.run.bumper_in_full {
            self.sense_hazards()?;
        }
        if !self.ahead_free() {
            if let Some(status) = self.repair()? {
                return Ok(Some(status));
            }
            self.tick += 1;
            self.record();
            return Ok(None);
        }

        let cmd = self.follower.command(&self.estimate, &self.cfg.control);
        if let Some(status) = self.advance(self.fdir.gate(cmd), true)? {
            return Ok(Some(status));
        }

        if self.mode() == NavMode::Full {
            let p = self.pending;
            if p.forward.abs() >= self.cfg.slam.update_distance || p.heading_change.abs() >= self.cfg.slam.update_turn {
                self.slam_update()?;
            }
        }
        if let Some(inj) = self.cfg.global.drift_injection {
            if !self.injected && self.odometer >= inj.at {
                self.injected = true;
                self.shift_estimate(Point2::new(inj.dx, inj.dy));
                self.log(format!("drift injected ({:.2}, {:.2})", inj.dx, inj.dy));
            }
        }
        if self.mode() == NavMode::Full && self.since_global >= self.cfg.global.interval {
            self.since_global = 0.0;
            if let Some(status) = self.global_correction()? {
                return Ok(Some(status));
            }
        }
        self.update_mode()?;
        self.record();
        Ok(None)
    }

    /// Move the rover one tick under `cmd`, update odometry and run FDIR. The corridor
    /// monitor only applies while `following` the active path.
    fn advance(&mut self, cmd: ControlCommand, following: bool) -> Result<Option<RunStatus>> {
        let dt = self.cfg.run.dt;
        let (truth_delta, moved) = self.world.step(&cmd, dt)?;
        self.tick += 1;
        self.traversed += moved;
        let odo = simulate_odometry(
            &truth_delta,
            self.seed(ODOMETRY, self.tick),
            self.cfg.odometry.drift_rate,
        );
        let e = self.estimate;
        let (x, y, h) = apply_delta(e.x, e.y, e.heading, &odo);
        self.estimate = RoverPose::planar(x, y, h);
        let (dx, dy, dh) = self.dead_reckoning;
        self.dead_reckoning = apply_delta(dx, dy, dh, &odo);
        self.odometer += odo.forward.abs();
        if self.mode() == NavMode::Full {
            self.pending = self.pending.compose(&odo);
            self.since_global += odo.forward.abs();
        }
        // Progress along the global path only counts while the rover is on it, not
        // while a detour runs beside it.
        let (s, d) = self.scene.global.project(self.estimate.position(), self.committed_s);
        if d <= self.scene.global.corridor() {
            self.committed_s = self.committed_s.max(s);
        }

        let commanded = OdometryDelta::new(cmd.speed * dt, cmd.turn_rate * dt);
        let mut sensed = self.estimate;
        (sensed.roll, sensed.pitch) = self.world.attitude();
        let deviation = if following {
            self.follower.track(self.estimate.position()).1
        } else {
            0.0
        };
        let state = fdir_check(
            &self.fdir,
            &odo,
            &commanded,
            &sensed,
            deviation,
            cmd.speed,
            &self.cfg.fdir,
        );
        if state.is_faulted() && !self.fdir.is_faulted() {
            self.fdir = state;
            self.log(format!(
                "fdir {}: slip {:.3} roll {:.1} deg pitch {:.1} deg corridor {:.2} m motor {:.3}",
                state.latch.as_str(),
                state.slip_ratio,
                sensed.roll.to_degrees(),
                sensed.pitch.to_degrees(),
                state.corridor_deviation,
                state.motor_load
            ));
            self.record();
            return Ok(Some(RunStatus::Fdir(state.latch)));
        }
        self.fdir = state;
        Ok(None)
    }

    fn shift_estimate(&mut self, delta: Point2) {
        match self.slam.as_mut() {
            Some(slam) => {
                slam.correct_position(slam.estimate().position() + delta);
                let e = slam.estimate();
                // Keep odometry that the filter has not consumed yet.
                let (x, y, h) = apply_delta(e.x, e.y, e.heading, &self.pending);
                self.estimate = RoverPose::planar(x, y, h);
            }
            None => {
                self.estimate.x += delta.x;
                self.estimate.y += delta.y;
            }
        }
    }

    fn sense_hazards(&mut self) -> Result<()> {
        let frame = self.world.render(
            &self.scene.loccam,
            self.cfg.odometry.depth_noise,
            self.seed(LOCCAM, self.tick),
        )?;
        let mask = self.scene.bumper.detect(&frame)?;
        if !mask.has_hazard() {
            return Ok(());
        }
        let local = self.scene.bumper.project(&mask, &self.estimate)?;
        self.cores
            .merge(&self.scene.bumper.project_cores(&mask, &self.estimate)?);
        let added = self.trav.merge(&local);
        if added > 0 {
            self.selector.record_hazard(self.odometer);
            self.log(format!(
                "hazard: {} pixels, {added} new cells",
                mask.hazard_pixels().len()
            ));
        }
        Ok(())
    }

    fn ahead_free(&self) -> bool {
        let s0 = self.follower.progress().max(self.escape_until);
        let ahead = sub_polyline(self.follower.path(), s0, s0 + self.cfg.repair.check_ahead);
        polyline_free(&ahead, &self.trav)
    }

    /// Nearest free cell within the escape radius, for when new hazard margins cover the rover.
    /// Cells behind a hazard core are skipped unless nothing else is in reach.
    fn escape_point(&self, p: Point2) -> Option<Point2> {
        self.nearest_free(p, true).or_else(|| self.nearest_free(p, false))
    }

    fn nearest_free(&self, p: Point2, avoid_cores: bool) -> Option<Point2> {
        let res = self.trav.resolution();
        let (r0, c0) = self.trav.cell_of(p)?;
        let k = (self.cfg.repair.escape_radius / res).ceil() as isize;
        let mut best: Option<(f64, Point2)> = None;
        for dr in -k..=k {
            for dc in -k..=k {
                let (r, c) = (r0 as isize + dr, c0 as isize + dc);
                if r < 0 || c < 0 || r >= self.trav.rows() as isize || c >= self.trav.cols() as isize {
                    continue;
                }
                if self.trav.get(r as usize, c as usize) != 0 {
                    continue;
                }
                let q = self.trav.world_of(r as usize, c as usize);
                let d = q.distance(p);
                if d > self.cfg.repair.escape_radius || best.is_some_and(|(bd, _)| d >= bd) {
                    continue;
                }
                if !avoid_cores || segment_free(p, q, &self.cores) {
                    best = Some((d, q));
                }
            }
        }
        best.map(|(_, q)| q)
    }

    fn repair(&mut self) -> Result<Option<RunStatus>> {
        let pos = self.estimate.position();
        let (start, escaped) = if self.trav.is_hazard_at(pos) {
            match self.escape_point(pos) {
                Some(q) => (q, true),
                None => {
                    self.log("fault: rover enclosed by hazards".into());
                    return Ok(Some(RunStatus::PathBlocked));
                }
            }
        } else {
            (pos, false)
        };
        let repaired = match repair_with_clearance(
            start,
            &self.scene.global,
            &self.trav,
            self.cfg.repair.max_rejoin,
            self.committed_s,
            self.cfg.repair.check_ahead,
        ) {
            Ok(r) => r,
            Err(NavError::PathBlocked(msg)) => {
                self.log(format!("fault: path blocked: {msg}"));
                return Ok(Some(RunStatus::PathBlocked));
            }
            Err(e) => return Err(e),
        };
        let mut path = repaired.then_global(&self.scene.global);
        self.escape_until = 0.0;
        if escaped {
            path.insert(0, pos);
            self.escape_until = pos.distance(start);
        }
        let on_global = self.follower.progress() >= self.detour_until;
        self.repairs += 1;
        if on_global {
            self.replans += 1;
            self.selector.record_replan(self.odometer);
        }
        self.detour_until = repaired.length() + if escaped { pos.distance(start) } else { 0.0 };
        self.log(format!(
            "{} {}: detour {:.2} m, rejoin at s = {:.2} m{}",
            if on_global { "replan" } else { "refine" },
            self.replans,
            repaired.length(),
            repaired.rejoin_s,
            if escaped {
                ", after escaping a hazard margin"
            } else {
                ""
            }
        ));
        self.follower = PathFollower::new(path)?;
        self.follower.track(pos);
        if !self.ahead_free() {
            self.log("fault: repaired path is not free ahead".into());
            return Ok(Some(RunStatus::PathBlocked));
        }
        Ok(None)
    }

    fn global_correction(&mut self) -> Result<Option<RunStatus>> {
        let Some(orbital) = self.scene.orbital.as_ref() else {
            return Ok(None);
        };
        let matching = self.cfg.global.matching;
        let relief = self.slam.as_ref().is_some_and(|s| relief_triggered(s.map(), &matching));
        if !relief && !self.cfg.global.force_trigger {
            self.log("global correction skipped: local relief below trigger".into());
            return Ok(None);
        }
        if self.cfg.global.panorama {
            if let Some(status) = self.panorama()? {
                return Ok(Some(status));
            }
        }
        self.slam_update()?;
        let Some(slam) = self.slam.as_ref() else {
            return Ok(None);
        };
        let fix = match localize(slam.map(), orbital, &slam.estimate(), &matching) {
            Ok(fix) => fix,
            Err(NavError::InsufficientData(msg)) => {
                self.log(format!("global correction skipped: {msg}"));
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let truth = self.world.pose.position();
        let error_before = self.estimate.position().distance(truth);
        if fix.correction.applied {
            self.shift_estimate(fix.correction.delta);
        }
        let error_after = self.estimate.position().distance(truth);
        let summary = describe(&fix);
        self.log(format!("global match {}: {summary}", self.matches.len() + 1));
        self.corrections.push(CorrectionRecord {
            time: self.time(),
            distance: self.odometer,
            accepted: fix.result.accepted,
            applied: fix.correction.applied,
            peak: fix.result.peak,
            sharpness: fix.result.sharpness,
            delta: (fix.correction.delta.x, fix.correction.delta.y),
            error_before,
            error_after,
        });
        self.matches.push(MatchRecord {
            result: fix.result,
            summary,
        });
        Ok(None)
    }

    /// Turn once on the spot so the map covers all sides of the rover.
    fn panorama(&mut self) -> Result<Option<RunStatus>> {
        let rate = 0.5 * self.cfg.control.omega_max;
        let cmd = ControlCommand {
            speed: 0.0,
            turn_rate: rate,
        };
        let steps = (TAU / rate / self.cfg.run.dt).ceil() as usize;
        self.log(format!("panorama: {steps} steps"));
        for _ in 0..steps {
            if let Some(status) = self.advance(cmd, false)? {
                return Ok(Some(status));
            }
            if self.pending.heading_change.abs() >= self.cfg.slam.update_turn {
                self.slam_update()?;
            }
            self.record();
        }
        Ok(None)
    }

    fn hazard_density(&self) -> f64 {
        if self.cfg.modes.hazard_density_up.is_none() {
            return 0.0;
        }
        let res = self.trav.resolution();
        let p = self.estimate.position();
        let k = (5.0 / res).round() as isize;
        let Some((r0, c0)) = self.trav.cell_of(p) else {
            return 0.0;
        };
        let mut n = 0usize;
        for r in (r0 as isize - k).max(0)..(r0 as isize + k).min(self.trav.rows() as isize) {
            for c in (c0 as isize - k).max(0)..(c0 as isize + k).min(self.trav.cols() as isize) {
                n += usize::from(self.trav.get(r as usize, c as usize) != 0);
            }
        }
        n as f64 * res * res
    }

    fn update_mode(&mut self) -> Result<()> {
        let density = self.hazard_density();
        let Some(switch) = self.selector.update(self.time(), self.odometer, density) else {
            return Ok(());
        };
        self.log(format!("mode {} -> {}: {}", switch.from, switch.to, switch.cause));
        match switch.to {
            NavMode::Full => self.start_slam()?,
            NavMode::Efficient => {
                self.slam = None;
                self.pending = OdometryDelta::default();
            }
        }
        self.switches.push(switch);
        Ok(())
    }

    fn finish(mut self, mut status: RunStatus) -> Result<RunOutput> {
        if self.slam.is_some() {
            self.slam_update()?;
        }
        if self.traversed == 0.0 && !status.is_fault() {
            status = RunStatus::NoMotion;
        }
        let truth = self.world.pose.position();
        let (dx, dy, _) = self.dead_reckoning;
        let metrics = RunMetrics {
            scenario: self.cfg.name.clone(),
            seed: self.cfg.seed,
            policy: self.cfg.mode.as_str().into(),
            status,
            planned: self.scene.global.length(),
            traversed: self.traversed,
            replans: self.replans,
            repairs: self.repairs,
            final_error: self.estimate.position().distance(truth),
            odometry_error: Point2::new(dx, dy).distance(truth),
            corrections: self.corrections,
            mode_switches: self.switches,
            sim_time: self.tick as f64 * self.cfg.run.dt,
        };
        self.events.push(Event {
            time: metrics.sim_time,
            text: format!(
                "end {}: traversed {:.2} m, replans {} ({} repairs), final error {:.3} m",
                status.as_str(),
                metrics.traversed,
                metrics.replans,
                metrics.repairs,
                metrics.final_error
            ),
        });
        Ok(RunOutput {
            metrics,
            trajectory: self.trajectory,
            events: self.events,
            matches: self.matches,
        })
    }
}

/// The part of `path` between arc lengths `s0` and `s1`.
fn sub_polyline(path: &[Point2], s0: f64, s1: f64) -> Vec<Point2> {
    let mut out = vec![point_at_arclength(path, s0)];
    let mut acc = 0.0;
    for w in path.windows(2) {
        acc += w[0].distance(w[1]);
        if acc > s0 && acc < s1 {
            out.push(w[1]);
        }
    }
    let end = point_at_arclength(path, s1);
    // Past the last vertex the end point is that vertex again.
    if out.last() != Some(&end) {
        out.push(end);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_polyline_keeps_inner_corners() {
        let path = [Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(2.0, 2.0)];
        let sub = sub_polyline(&path, 1.0, 3.0);
        assert_eq!(
            sub,
            vec![Point2::new(1.0, 0.0), Point2::new(2.0, 0.0), Point2::new(2.0, 1.0)]
        );
        assert_eq!(
            sub_polyline(&path, 3.5, 9.0),
            vec![Point2::new(2.0, 1.5), Point2::new(2.0, 2.0)]
        );
    }

    #[test]
    fn streams_are_distinct() {
        let a = stream_seed(1, ODOMETRY, 5);
        assert_ne!(a, stream_seed(1, LOCCAM, 5));
        assert_ne!(a, stream_seed(2, ODOMETRY, 5));
        assert_ne!(a, stream_seed(1, ODOMETRY, 6));
        assert_eq!(a, stream_seed(1, ODOMETRY, 5));
    }
}
