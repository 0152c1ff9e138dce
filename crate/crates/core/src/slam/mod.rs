//! Full-navigation SLAM: rover-centered rolling elevation map with Kalman cell fusion
//! and a particle filter weighted by scan matching against that map.

mod map;
mod particles;

pub use map::{kalman_fuse, LocalRollingMap};
pub use particles::{
    estimate_pose, init_particles, predict, scan_residuals, score_scan, systematic_resample,
    update_weights_and_resample, Particle, ParticleSet, StepNoise, MIN_SCORE,
};

use nalgebra::Vector3;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::Point2;
use crate::sim::{apply_delta, OdometryDelta, RoverPose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlamParams {
    pub particles: usize,
    /// Resampling threshold as a fraction of N.
    pub ess_threshold: f64,
    pub top_fraction: f64,
    pub sigma_z: f64,
    /// Map edge length in cells (square map).
    pub map_cells: usize,
    pub map_resolution: f64,
    pub init_sigma_xy: f64,
    pub init_sigma_heading: f64,
    /// Prediction noise: σ = base + per_meter · |distance| for each update.
    pub noise_xy_base: f64,
    pub noise_xy_per_meter: f64,
    pub noise_heading_base: f64,
    pub noise_heading_per_meter: f64,
    /// Scoring uses at most this many cloud points (evenly strided).
    pub max_scan_points: usize,
}

impl Default for SlamParams {
    fn default() -> Self {
        Self {
            particles: 200,
            ess_threshold: 0.5,
            top_fraction: 0.1,
            sigma_z: 0.05,
            map_cells: 200,
            map_resolution: 0.1,
            init_sigma_xy: 0.02,
            init_sigma_heading: 0.005,
            noise_xy_base: 0.005,
            noise_xy_per_meter: 0.02,
            noise_heading_base: 0.001,
            noise_heading_per_meter: 0.01,
            max_scan_points: 1500,
        }
    }
}

impl SlamParams {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.map_cells < 3 {
            return Err(NavError::Config("slam needs particles ≥ 1 and map_cells ≥ 3".into()));
        }
        if !(self.sigma_z > 0.0 && self.map_resolution > 0.0) {
            return Err(NavError::Config("sigma_z and map_resolution must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) || !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(NavError::Config(
                "ess_threshold and top_fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn step_noise(&self, distance: f64) -> StepNoise {
        StepNoise {
            sigma_xy: self.noise_xy_base + self.noise_xy_per_meter * distance.abs(),
            sigma_heading: self.noise_heading_base + self.noise_heading_per_meter * distance.abs(),
        }
    }
}

/// Particle-filter SLAM loop: predict → score → resample → estimate → fuse → shift.
#[derive(Debug, Clone)]
pub struct SlamFilter {
    params: SlamParams,
    particles: ParticleSet,
    map: LocalRollingMap,
    /// Height of the rover reference point in the map's vertical datum.
    z_base: f64,
    estimate: RoverPose,
    rng: ChaCha8Rng,
    divergences: usize,
}

impl SlamFilter {
    pub fn new(initial: &RoverPose, params: SlamParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut particles = init_particles(
            initial,
            params.particles,
            params.init_sigma_xy,
            params.init_sigma_heading,
            rng.next_u64(),
        )?;
        particles.resample_threshold = params.ess_threshold;
        let map = LocalRollingMap::new(
            initial.position(),
            params.map_cells,
            params.map_cells,
            params.map_resolution,
        )?;
        Ok(Self {
            params,
            particles,
            map,
            z_base: 0.0,
            estimate: RoverPose::planar(initial.x, initial.y, initial.heading),
            rng,
            divergences: 0,
        })
    }

    pub fn params(&self) -> &SlamParams {
        &self.params
    }

    pub fn map(&self) -> &LocalRollingMap {
        &self.map
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn estimate(&self) -> RoverPose {
        self.estimate
    }

    pub fn z_base(&self) -> f64 {
        self.z_base
    }

    pub fn divergences(&self) -> usize {
        self.divergences
    }

    /// Seed the map with a first scan taken at the initial pose.
    pub fn start(&mut self, cloud: &[Vector3<f64>]) -> Result<()> {
        self.fuse(cloud)
    }

    /// One full update with the odometry accumulated since the last call and a
    /// rover-frame (gravity-aligned) cloud.
    pub fn update(&mut self, odo: &OdometryDelta, cloud: &[Vector3<f64>]) -> Result<RoverPose> {
        let noise = self.params.step_noise(odo.forward);
        let predicted = predict(&self.particles, odo, noise, self.rng.next_u64());
        let scan = subsample(cloud, self.params.max_scan_points);
        let scores: Vec<f64> = predicted
            .particles
            .iter()
            .map(|p| score_scan(p, &scan, &self.map, self.params.sigma_z))
            .collect();
        let resample_seed = self.rng.next_u64();
        match update_weights_and_resample(&predicted, &scores, resample_seed) {
            Ok(set) => {
                self.particles = set;
                self.estimate = estimate_pose(&self.particles, self.params.top_fraction);
            }
            Err(NavError::FilterDivergence(_)) => {
                self.divergences += 1;
                let (x, y, h) = apply_delta(self.estimate.x, self.estimate.y, self.estimate.heading, odo);
                self.estimate = RoverPose::planar(x, y, h);
                self.particles = init_particles(
                    &self.estimate,
                    self.params.particles,
                    self.params.init_sigma_xy,
                    self.params.init_sigma_heading,
                    self.rng.next_u64(),
                )?;
                self.particles.resample_threshold = self.params.ess_threshold;
            }
            Err(e) => return Err(e),
        }
        self.fuse(cloud)?;
        Ok(self.estimate)
    }

    fn fuse(&mut self, cloud: &[Vector3<f64>]) -> Result<()> {
        let e = self.estimate;
        let residuals = scan_residuals(e.x, e.y, e.heading, cloud, &self.map);
        if !residuals.is_empty() {
            self.z_base = residuals.iter().sum::<f64>() / residuals.len() as f64;
        }
        self.estimate.z = self.z_base;
        let (s, c) = e.heading.sin_cos();
        let world: Vec<Vector3<f64>> = cloud
            .iter()
            .map(|p| Vector3::new(e.x + c * p.x - s * p.y, e.y + s * p.x + c * p.y, p.z + self.z_base))
            .collect();
        self.map.fuse_observation(&world, self.params.sigma_z)?;
        self.map.shift_map(e.position());
        Ok(())
    }

    /// Apply an absolute position correction: particles, estimate and map move together.
    pub fn correct_position(&mut self, corrected: Point2) {
        let delta = corrected - self.estimate.position();
        for p in &mut self.particles.particles {
            p.x += delta.x;
            p.y += delta.y;
        }
        self.estimate.x = corrected.x;
        self.estimate.y = corrected.y;
        self.map.translate_frame(delta);
    }
}

fn subsample(cloud: &[Vector3<f64>], max_points: usize) -> Vec<Vector3<f64>> {
    if max_points == 0 || cloud.len() <= max_points {
        return cloud.to_vec();
    }
    let stride = cloud.len().div_ceil(max_points);
    cloud.iter().step_by(stride).copied().collect()
}
