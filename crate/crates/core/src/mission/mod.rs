//! Scenario orchestration: configuration, mode arbitration, the closed navigation
//! loop against the simulator, and the files a run leaves behind.

mod config;
mod metrics;
mod mode;
mod run;

pub use config::{
    CameraConfig, DriftInjection, GlobalConfig, HazardConfig, OdometryConfig, PathConfig, RepairConfig, RunConfig,
    ScenarioConfig, SlamConfig, TerrainConfig,
};
pub use metrics::{
    overhead, parse_trajectory, trajectory_csv, CorrectionRecord, RunMetrics, RunStatus, TrajectoryRow, CSV_HEADER,
    TRAJECTORY_HEADER,
};
pub use mode::{select_mode, ModeInputs, ModePolicy, ModeSelector, ModeSwitch, ModeThresholds, NavMode};
pub use run::{
    emit_metrics, load_bumper, run_in_scene, run_scenario, stream_seed, Event, MatchRecord, RunOutput, Scene,
};
