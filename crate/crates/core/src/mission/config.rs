use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mode::{ModePolicy, ModeThresholds};
use crate::control::{ControlParams, FdirLimits};
use crate::error::{NavError, Result};
use crate::geometry::Point2;
use crate::global::MatchParams;
use crate::hazard::HazardParams;
use crate::repair::GlobalPath;
use crate::sim::PinholeSpec;
use crate::slam::SlamParams;
use crate::terrain::{ObstacleSpec, TerrainSpec};

/// A run description as read from a scenario file.
///
/// Relative file names are resolved against the scenario file's directory by
/// [`ScenarioConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// Master seed. Terrain, odometry noise, depth noise and the filter all derive
    /// from it; it has no default on purpose.
    pub seed: u64,
    #[serde(default)]
    pub mode: ModePolicy,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub terrain: TerrainConfig,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub path: PathConfig,
    #[serde(default)]
    pub cameras: CameraConfig,
    #[serde(default)]
    pub hazard: HazardConfig,
    #[serde(default)]
    pub repair: RepairConfig,
    #[serde(default)]
    pub control: ControlParams,
    #[serde(default)]
    pub fdir: FdirLimits,
    #[serde(default)]
    pub odometry: OdometryConfig,
    #[serde(default)]
    pub slam: SlamConfig,
    #[serde(default)]
    pub global: GlobalConfig,
    #[serde(default)]
    pub modes: ModeThresholds,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TerrainConfig {
    /// ESRI ASCII grid to load instead of generating terrain.
    pub dem: Option<PathBuf>,
    /// Terrain seed; the scenario seed when absent.
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub spec: TerrainSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Plain text file with one "x y" pair per line.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default = "default_corridor")]
    pub corridor: f64,
}

fn default_corridor() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub loccam: PinholeSpec,
    pub navcam: PinholeSpec,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            loccam: PinholeSpec::loccam(),
            navcam: PinholeSpec::navcam(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct HazardConfig {
    /// Calibration table to load instead of calibrating on simulated flat ground.
    pub calibration_file: Option<PathBuf>,
    #[serde(flatten)]
    pub params: HazardParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairConfig {
    pub max_rejoin: f64,
    /// Length of the active path ahead of the rover checked against new hazards.
    /// A rejoin point needs this much free global path after it, otherwise the
    /// repaired path would fail its own check.
    pub check_ahead: f64,
    /// How far the rover looks for a free cell when it finds itself inside a margin.
    pub escape_radius: f64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            max_rejoin: 10.0,
            check_ahead: 3.0,
            escape_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryConfig {
    /// Odometry drift as a fraction of distance traveled.
    pub drift_rate: f64,
    /// Relative depth noise of both cameras.
    pub depth_noise: f64,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            drift_rate: 0.02,
            depth_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlamConfig {
    /// Travel between filter updates, meters.
    pub update_distance: f64,
    /// Rotation between filter updates, radians (for turns in place).
    pub update_turn: f64,
    #[serde(flatten)]
    pub params: SlamParams,
}

impl Default for SlamConfig {
    fn default() -> Self {
        Self {
            update_distance: 0.5,
            update_turn: 0.15,
            params: SlamParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftInjection {
    /// Odometry distance at which the offset is added to the estimate.
    pub at: f64,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalConfig {
    /// Off leaves full mode with SLAM only.
    pub enabled: bool,
    pub orbital_resolution: f64,
    /// Travel in full mode between correction attempts, meters.
    pub interval: f64,
    /// Spin in place before matching to fill the local map around the rover.
    pub panorama: bool,
    /// Attempt the match even when the relief trigger does not fire.
    pub force_trigger: bool,
    pub drift_injection: Option<DriftInjection>,
    #[serde(flatten)]
    pub matching: MatchParams,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            orbital_resolution: 0.5,
            interval: 25.0,
            panorama: true,
            force_trigger: false,
            drift_injection: None,
            matching: MatchParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Simulation step, seconds.
    pub dt: f64,
    /// Give up after this much simulated time; derived from the path length when absent.
    pub max_time: Option<f64>,
    /// Keep the hazard bumper running in full mode.
    pub bumper_in_full: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_time: None,
            bumper_in_full: true,
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| NavError::Parse(e.to_string()))
    }

    /// Read a scenario file, resolve its relative paths and validate it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| NavError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| NavError::Parse(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.terrain.dem);
        fix(&mut self.path.file);
        fix(&mut self.hazard.calibration_file);
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        for file in [&self.terrain.dem, &self.path.file, &self.hazard.calibration_file]
            .into_iter()
            .flatten()
        {
            if !file.is_file() {
                return Err(NavError::Config(format!(
                    "referenced file {} does not exist",
                    file.display()
                )));
            }
        }
        if self.path.file.is_none() && self.path.waypoints.len() < 2 {
            return Err(NavError::Config("path needs a file or at least two waypoints".into()));
        }
        if !(self.run.dt > 0.0) {
            return Err(NavError::Config("run.dt must be positive".into()));
        }
        if !(self.odometry.drift_rate >= 0.0 && self.odometry.depth_noise >= 0.0) {
            return Err(NavError::Config("odometry rates must be non-negative".into()));
        }
        if !(self.slam.update_distance > 0.0 && self.slam.update_turn > 0.0) {
            return Err(NavError::Config("slam update triggers must be positive".into()));
        }
        if !(self.global.interval > 0.0 && self.global.orbital_resolution > 0.0) {
            return Err(NavError::Config(
                "global interval and orbital_resolution must be positive".into(),
            ));
        }
        if !(self.repair.max_rejoin > 0.0 && self.repair.check_ahead > 0.0) {
            return Err(NavError::Config("repair distances must be positive".into()));
        }
        self.control.validate()?;
        self.slam.params.validate()?;
        self.global.matching.validate()?;
        self.modes.validate()?;
        Ok(())
    }

    pub fn global_path(&self) -> Result<GlobalPath> {
        match &self.path.file {
            Some(file) => GlobalPath::load(file, self.path.corridor),
            None => GlobalPath::new(
                self.path.waypoints.iter().map(|w| Point2::new(w[0], w[1])).collect(),
                self.path.corridor,
            ),
        }
    }

    pub fn terrain_seed(&self) -> u64 {
        self.terrain.seed.unwrap_or(self.seed)
    }
}
