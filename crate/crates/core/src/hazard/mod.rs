//! Electronic bumper: flat-ground calibration, per-pixel hazard thresholds, and
//! projection of detected hazards into traversability grids.

mod calibration;
mod detect;
mod perspective;
mod traversability;

pub use calibration::{
    calibrate, corner_pairs_from_camera, max_tolerated_distance, min_tolerated_distance, CalibrationTable, CornerPair,
};
pub use detect::{detect, HazardMask, PixelClass, DEFAULT_MIN_CLUSTER};
pub use perspective::{fit_perspective, PerspectiveTransform};
pub use traversability::{hazard_points_rover, project_hazards, project_hazards_rover, Frame, TraversabilityGrid};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::{CameraModel, DepthFrame, RoverPose};
use crate::terrain::ElevationGrid;

/// Detector tuning as it appears in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HazardParams {
    pub t_near: f64,
    pub t_far: f64,
    pub min_cluster: usize,
    pub safety_margin: f64,
    /// Traversability grid resolution, meters.
    pub resolution: f64,
}

impl Default for HazardParams {
    fn default() -> Self {
        Self {
            t_near: 0.1,
            t_far: 0.1,
            min_cluster: DEFAULT_MIN_CLUSTER,
            safety_margin: 0.6,
            resolution: 0.1,
        }
    }
}

/// Calibration table plus the homography fitted to its corners.
#[derive(Debug, Clone)]
pub struct Bumper {
    pub table: CalibrationTable,
    pub transform: PerspectiveTransform,
    pub params: HazardParams,
}

impl Bumper {
    pub fn new(table: CalibrationTable, params: HazardParams) -> Result<Self> {
        let transform = fit_perspective(&table.corners)?;
        Ok(Self {
            table,
            transform,
            params,
        })
    }

    /// Calibrate a camera by rendering it level on flat ground.
    pub fn calibrate_camera(cam: &CameraModel, params: HazardParams) -> Result<Self> {
        let reach = cam.max_range + 2.0;
        let res = 0.05;
        let n = (2.0 * reach / res).ceil() as usize + 1;
        let flat = ElevationGrid::filled(crate::Point2::new(-reach, -reach), res, n, n, 0.0)?;
        let pose = RoverPose::planar(0.0, 0.0, 0.0);
        let frame = crate::sim::render_depth(&pose, cam, &flat)?;
        let table = calibrate(
            &frame,
            cam.h_cam,
            params.t_near,
            params.t_far,
            corner_pairs_from_camera(cam)?,
        )?;
        Self::new(table, params)
    }

    pub fn detect(&self, frame: &DepthFrame) -> Result<HazardMask> {
        detect(frame, &self.table, self.params.min_cluster)
    }

    pub fn project(&self, mask: &HazardMask, pose: &RoverPose) -> Result<TraversabilityGrid> {
        project_hazards(
            mask,
            &self.transform,
            pose,
            self.params.safety_margin,
            self.params.resolution,
        )
    }

    /// Hazard cells without the safety margin.
    pub fn project_cores(&self, mask: &HazardMask, pose: &RoverPose) -> Result<TraversabilityGrid> {
        project_hazards(mask, &self.transform, pose, 0.0, self.params.resolution)
    }
}
