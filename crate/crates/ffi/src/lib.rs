//! C ABI over the rovernav scenario runner and DEM matcher.
//!
//! Every entry point returns an [`RnStatus`]. On anything but `RN_STATUS_OK` the message for
//! the calling thread is available through [`rn_last_error`]. Handles are opaque and
//! must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rovernav::control::FaultLatch;
use rovernav::global::{localize_grid, MatchParams, Metric};
use rovernav::hazard::min_tolerated_distance;
use rovernav::mission::{emit_metrics, run_scenario, ModePolicy, NavMode, RunOutput, RunStatus, ScenarioConfig};
use rovernav::sim::RoverPose;
use rovernav::terrain::read_asc;
use rovernav::NavError;

pub const RN_METRIC_RAW: u32 = 0;
pub const RN_METRIC_NCC: u32 = 1;

pub const RN_MODE_EFFICIENT_ONLY: u32 = 0;
pub const RN_MODE_FULL_ONLY: u32 = 1;
pub const RN_MODE_AUTO: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    InsufficientData = 6,
    OutOfRange = 7,
    Internal = 8,
    Panic = 9,
}

/// How a run ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnRunEnd {
    Completed = 0,
    SlipFault = 1,
    AttitudeFault = 2,
    CorridorFault = 3,
    MotorFault = 4,
    PathBlocked = 5,
    OutOfBounds = 6,
    Timeout = 7,
    NoMotion = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RnMetrics {
    pub end: u32,
    pub planned_m: f64,
    pub traversed_m: f64,
    pub replans: u64,
    pub repairs: u64,
    pub final_error_m: f64,
    pub odometry_error_m: f64,
    pub corrections_applied: u64,
    pub mode_switches: u64,
    pub sim_time_s: f64,
    pub trajectory_len: u64,
}

/// `full` is 1 when the sample was taken in full navigation mode.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RnSample {
    pub time: f64,
    pub truth_x: f64,
    pub truth_y: f64,
    pub truth_heading: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_heading: f64,
    pub full: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RnMatch {
    pub best_row: u64,
    pub best_col: u64,
    pub subcell_row: f64,
    pub subcell_col: f64,
    pub peak: f64,
    pub sharpness: f64,
    pub valid_fraction: f64,
    pub accepted: u32,
    /// Correction that moves the local map onto the orbital map, meters.
    pub dx: f64,
    pub dy: f64,
}

/// Opaque scenario handle.
pub struct RnScenario {
    config: ScenarioConfig,
}

/// Opaque handle on a finished run.
pub struct RnRun {
    output: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(RnStatus, String);

impl From<NavError> for Failure {
    fn from(e: NavError) -> Self {
        let status = match &e {
            NavError::Config(_) | NavError::Calibration(_) => RnStatus::Config,
            NavError::Io(_) => RnStatus::Io,
            NavError::Parse(_) => RnStatus::Parse,
            NavError::InsufficientData(_) => RnStatus::InsufficientData,
            NavError::OutOfBounds(_) | NavError::UnknownCell { .. } => RnStatus::OutOfRange,
            _ => RnStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RnStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RnStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RnStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn end_of(status: RunStatus) -> RnRunEnd {
    match status {
        RunStatus::Completed => RnRunEnd::Completed,
        RunStatus::Fdir(FaultLatch::SlipFault) => RnRunEnd::SlipFault,
        RunStatus::Fdir(FaultLatch::AttitudeFault) => RnRunEnd::AttitudeFault,
        RunStatus::Fdir(FaultLatch::CorridorFault) => RnRunEnd::CorridorFault,
        RunStatus::Fdir(FaultLatch::MotorFault) => RnRunEnd::MotorFault,
        // A nominal latch never ends a run; report it as completed rather than invent a code.
        RunStatus::Fdir(FaultLatch::Nominal) => RnRunEnd::Completed,
        RunStatus::PathBlocked => RnRunEnd::PathBlocked,
        RunStatus::OutOfBounds => RnRunEnd::OutOfBounds,
        RunStatus::Timeout => RnRunEnd::Timeout,
        RunStatus::NoMotion => RnRunEnd::NoMotion,
    }
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated, truncated
/// to `len`). Returns the length the full message needs, including the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rn_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Static name of a status code, or "unknown status" for anything else.
#[no_mangle]
pub extern "C" fn rn_status_name(code: i32) -> *const c_char {
    let s: &'static CStr = match code {
        0 => c"ok",
        1 => c"null pointer",
        2 => c"invalid argument",
        3 => c"configuration error",
        4 => c"i/o error",
        5 => c"parse error",
        6 => c"insufficient data",
        7 => c"out of range",
        8 => c"internal error",
        9 => c"panic",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// Load a scenario file. Relative paths inside it resolve next to the file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rn_scenario_load(path: *const c_char, out: *mut *mut RnScenario) -> RnStatus {
    guard(|| {
        let path = text(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ScenarioConfig::load(path)?;
        put(out, Box::into_raw(Box::new(RnScenario { config })), "out")
    })
}

/// Parse scenario TOML from memory.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rn_scenario_parse(toml: *const c_char, out: *mut *mut RnScenario) -> RnStatus {
    guard(|| {
        let toml = text(toml, "toml")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ScenarioConfig::parse(toml)?;
        put(out, Box::into_raw(Box::new(RnScenario { config })), "out")
    })
}

/// # Safety
/// `scenario` must come from `rn_scenario_load` or `rn_scenario_parse`.
#[no_mangle]
pub unsafe extern "C" fn rn_scenario_set_seed(scenario: *mut RnScenario, seed: u64) -> RnStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.config.seed = seed;
        Ok(())
    })
}

/// Override the navigation mode policy with one of the `RN_MODE_*` values.
///
/// # Safety
/// `scenario` must come from `rn_scenario_load` or `rn_scenario_parse`.
#[no_mangle]
pub unsafe extern "C" fn rn_scenario_set_mode(scenario: *mut RnScenario, mode: u32) -> RnStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.config.mode = match mode {
            RN_MODE_EFFICIENT_ONLY => ModePolicy::EfficientOnly,
            RN_MODE_FULL_ONLY => ModePolicy::FullOnly,
            RN_MODE_AUTO => ModePolicy::Auto,
            _ => return Err(Failure(RnStatus::InvalidArgument, format!("unknown mode {mode}"))),
        };
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rn_scenario_free(scenario: *mut RnScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run a scenario to completion. A run that ends in a fault still returns `RN_OK`;
/// the ending is in the metrics.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rn_run(scenario: *const RnScenario, out: *mut *mut RnRun) -> RnStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let output = run_scenario(&s.config)?;
        put(out, Box::into_raw(Box::new(RnRun { output })), "out")
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rn_run_metrics(run: *const RnRun, out: *mut RnMetrics) -> RnStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let m = &r.output.metrics;
        let metrics = RnMetrics {
            end: end_of(m.status) as u32,
            planned_m: m.planned,
            traversed_m: m.traversed,
            replans: m.replans as u64,
            repairs: m.repairs as u64,
            final_error_m: m.final_error,
            odometry_error_m: m.odometry_error,
            corrections_applied: m.correction_errors().len() as u64,
            mode_switches: m.mode_switches.len() as u64,
            sim_time_s: m.sim_time,
            trajectory_len: r.output.trajectory.len() as u64,
        };
        put(out, metrics, "out")
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rn_run_sample(run: *const RnRun, index: u64, out: *mut RnSample) -> RnStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let row = usize::try_from(index)
            .ok()
            .and_then(|i| r.output.trajectory.get(i))
            .ok_or_else(|| {
                Failure(
                    RnStatus::OutOfRange,
                    format!("sample {index} of {}", r.output.trajectory.len()),
                )
            })?;
        let sample = RnSample {
            time: row.time,
            truth_x: row.truth.0,
            truth_y: row.truth.1,
            truth_heading: row.truth.2,
            est_x: row.estimate.0,
            est_y: row.estimate.1,
            est_heading: row.estimate.2,
            full: (row.mode == NavMode::Full) as u32,
        };
        put(out, sample, "out")
    })
}

/// Write metrics.csv, trajectory.csv and events.log into `dir`, creating it.
///
/// # Safety
/// `run` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rn_run_write(run: *const RnRun, dir: *const c_char) -> RnStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let dir = text(dir, "dir")?;
        emit_metrics(&r.output, dir)?;
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rn_run_free(run: *mut RnRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Match a local DEM against an orbital DEM, both ESRI ASCII grids. The search window
/// of `search_radius` meters is centered on the local map's own georeference; pass a
/// negative radius for the default.
///
/// # Safety
/// `local` and `orbital` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rn_match_dem_files(
    local: *const c_char,
    orbital: *const c_char,
    metric: u32,
    search_radius: f64,
    out: *mut RnMatch,
) -> RnStatus {
    guard(|| {
        let local = read_asc(text(local, "local")?)?;
        let orbital = read_asc(text(orbital, "orbital")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut params = MatchParams {
            metric: match metric {
                RN_METRIC_RAW => Metric::Raw,
                RN_METRIC_NCC => Metric::Ncc,
                _ => return Err(Failure(RnStatus::InvalidArgument, format!("unknown metric {metric}"))),
            },
            ..MatchParams::default()
        };
        if search_radius >= 0.0 {
            params.search_radius = search_radius;
        }
        let mid = local.origin().lerp(local.extent_max(), 0.5);
        let fix = localize_grid(&local, &orbital, &RoverPose::planar(mid.x, mid.y, 0.0), &params)?;
        let m = &fix.result;
        let result = RnMatch {
            best_row: m.best.0 as u64,
            best_col: m.best.1 as u64,
            subcell_row: m.subcell.0,
            subcell_col: m.subcell.1,
            peak: m.peak,
            sharpness: m.sharpness,
            valid_fraction: m.valid_fraction,
            accepted: m.accepted as u32,
            dx: fix.correction.delta.x,
            dy: fix.correction.delta.y,
        };
        put(out, result, "out")
    })
}

/// Shortest range the hazard detector tolerates for a pixel whose flat-ground range is
/// `d_cal`, with the camera `h_cam` above ground and obstacles flagged above `t_near`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rn_min_tolerated_distance(d_cal: f64, h_cam: f64, t_near: f64, out: *mut f64) -> RnStatus {
    guard(|| {
        if !(h_cam > 0.0 && (0.0..h_cam).contains(&t_near) && d_cal > 0.0) {
            return Err(Failure(
                RnStatus::InvalidArgument,
                format!("need d_cal > 0 and 0 <= t_near < h_cam, got {d_cal}, {h_cam}, {t_near}"),
            ));
        }
        put(out, min_tolerated_distance(d_cal, h_cam, t_near), "out")
    })
}
