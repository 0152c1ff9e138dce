//! Rover simulator: unicycle kinematics on the truth terrain, a noisy odometry model
//! standing in for visual odometry, and ray-cast depth sensing.

use nalgebra::{Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::ControlCommand;
use crate::error::{NavError, Result};
use crate::geometry::{normalize_angle, Point2};
use crate::terrain::{ElevationGrid, SampleFail};

/// Forward odometry noise: σ = gain · drift_rate · sqrt(step length).
pub const FORWARD_NOISE_GAIN: f64 = 0.5;
/// Heading odometry noise: σ = gain · drift_rate · sqrt(step length).
///
/// Heading error random-walks with distance, so the lateral error after a straight
/// traverse of length D has σ = gain · drift · sqrt(D³/3). The gain makes the expected
/// final error magnitude equal `drift_rate · D` for D = 100 m.
pub const HEADING_NOISE_GAIN: f64 = 0.2171;

/// Planar rover pose plus the attitude and height imposed by the terrain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoverPose {
    pub x: f64,
    pub y: f64,
    /// Height of the rover reference point (ground contact), meters.
    pub z: f64,
    /// Radians in `(-π, π]`, counter-clockwise from +x.
    pub heading: f64,
    /// Positive when the left side is up.
    pub roll: f64,
    /// Positive when the nose is up.
    pub pitch: f64,
}

impl RoverPose {
    pub fn planar(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
            ..Self::default()
        }
    }

    /// Place the rover on the terrain: height and attitude from the surface at `(x, y)`.
    pub fn on_terrain(x: f64, y: f64, heading: f64, truth: &ElevationGrid) -> Result<Self> {
        let p = Point2::new(x, y);
        let z = truth.sample_height(p)?;
        let (gx, gy) = truth.gradient_at(p)?;
        let heading = normalize_angle(heading);
        let (roll, pitch) = attitude_from_gradient(heading, gx, gy);
        Ok(Self {
            x,
            y,
            z,
            heading,
            roll,
            pitch,
        })
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Body-to-world rotation (x forward, y left, z up).
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, -self.pitch, self.heading)
    }
}

/// Roll and pitch of a rover resting on a surface with gradient `(gx, gy)`.
pub fn attitude_from_gradient(heading: f64, gx: f64, gy: f64) -> (f64, f64) {
    let (s, c) = heading.sin_cos();
    let slope_forward = gx * c + gy * s;
    let forward = Vector3::new(c, s, slope_forward).normalize();
    let normal = Vector3::new(-gx, -gy, 1.0).normalize();
    let left = normal.cross(&forward);
    let pitch = slope_forward.atan();
    let roll = left.z.atan2(normal.z);
    (roll, pitch)
}

/// Advance the rover with a unicycle model for `dt` seconds.
///
/// The command is integrated in closed form over the horizontal plane; height and
/// attitude are then re-derived from the terrain.
pub fn step_kinematics(pose: &RoverPose, cmd: &ControlCommand, dt: f64, truth: &ElevationGrid) -> Result<RoverPose> {
    if !(dt > 0.0) {
        return Err(NavError::Contract(format!("dt must be positive, got {dt}")));
    }
    if cmd.speed == 0.0 && cmd.turn_rate == 0.0 {
        if !truth.contains(pose.position()) {
            return Err(NavError::OutOfBounds("rover outside terrain".into()));
        }
        return Ok(*pose);
    }
    let (x, y, heading) = integrate_unicycle(pose.x, pose.y, pose.heading, cmd.speed, cmd.turn_rate, dt);
    if !truth.contains(Point2::new(x, y)) {
        return Err(NavError::OutOfBounds(format!(
            "rover left the terrain at ({x:.2}, {y:.2})"
        )));
    }
    RoverPose::on_terrain(x, y, heading, truth)
}

/// Closed-form unicycle arc.
pub fn integrate_unicycle(x: f64, y: f64, heading: f64, speed: f64, turn_rate: f64, dt: f64) -> (f64, f64, f64) {
    let dtheta = turn_rate * dt;
    let (nx, ny) = if dtheta.abs() < 1e-12 {
        (x + speed * dt * heading.cos(), y + speed * dt * heading.sin())
    } else {
        let r = speed / turn_rate;
        (
            x + r * ((heading + dtheta).sin() - heading.sin()),
            y - r * ((heading + dtheta).cos() - heading.cos()),
        )
    };
    (nx, ny, normalize_angle(heading + dtheta))
}

/// Relative motion reported by odometry between two instants.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdometryDelta {
    /// Chord length travelled (meters, negative when reversing).
    pub forward: f64,
    pub heading_change: f64,
    /// Drift rate of the source, as a fraction of distance travelled.
    pub drift_rate: f64,
}

impl OdometryDelta {
    pub fn new(forward: f64, heading_change: f64) -> Self {
        Self {
            forward,
            heading_change,
            drift_rate: 0.0,
        }
    }

    /// Exact delta between two planar poses, as an ideal odometer would report it.
    pub fn between(from: &RoverPose, to: &RoverPose) -> Self {
        let dtheta = normalize_angle(to.heading - from.heading);
        let chord = to.position() - from.position();
        let mid = from.heading + dtheta / 2.0;
        let forward = chord.dot(Point2::new(mid.cos(), mid.sin()));
        Self::new(forward, dtheta)
    }

    /// Chain two deltas; exact for motion along a single arc.
    pub fn compose(&self, next: &OdometryDelta) -> OdometryDelta {
        let (x, y, h) = apply_delta(0.0, 0.0, 0.0, self);
        let (x, y, h) = apply_delta(x, y, h, next);
        let mid = h / 2.0;
        OdometryDelta {
            forward: x * mid.cos() + y * mid.sin(),
            heading_change: h,
            drift_rate: self.drift_rate.max(next.drift_rate),
        }
    }
}

/// Dead-reckon a planar pose by one odometry delta (midpoint heading).
pub fn apply_delta(x: f64, y: f64, heading: f64, delta: &OdometryDelta) -> (f64, f64, f64) {
    let mid = heading + delta.heading_change / 2.0;
    (
        x + delta.forward * mid.cos(),
        y + delta.forward * mid.sin(),
        normalize_angle(heading + delta.heading_change),
    )
}

/// Perturb a true odometry delta with zero-mean Gaussian noise in (forward, heading).
pub fn simulate_odometry(true_delta: &OdometryDelta, seed: u64, drift_rate: f64) -> OdometryDelta {
    let drift_rate = drift_rate.clamp(0.0, 0.1);
    if drift_rate == 0.0 {
        return OdometryDelta {
            drift_rate,
            ..*true_delta
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = true_delta.forward.abs().sqrt();
    let forward_sigma = FORWARD_NOISE_GAIN * drift_rate * root;
    let heading_sigma = HEADING_NOISE_GAIN * drift_rate * root;
    let forward_noise = gaussian(&mut rng, forward_sigma);
    let heading_noise = gaussian(&mut rng, heading_sigma);
    OdometryDelta {
        forward: true_delta.forward + forward_noise,
        heading_change: true_delta.heading_change + heading_noise,
        drift_rate,
    }
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

/// Pinhole parameters for building a [`CameraModel`] over a pixel region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PinholeSpec {
    /// Camera height above the rover ground contact point (meters).
    pub h_cam: f64,
    pub pitch_down_deg: f64,
    /// Focal length in pixels.
    pub focal_px: f64,
    pub rows: usize,
    pub cols: usize,
    /// Image row of the first RoI row relative to the principal point (positive = below).
    pub first_row: f64,
    /// Camera position in the rover frame (meters forward / left of the reference point).
    pub mount_x: f64,
    pub mount_y: f64,
    pub max_range: f64,
}

impl PinholeSpec {
    /// Hazard camera looking at roughly 1 m × 1.2 m of ground just ahead of the wheels.
    pub fn loccam() -> Self {
        Self {
            h_cam: 1.0,
            pitch_down_deg: 30.0,
            focal_px: 88.0,
            rows: 32,
            cols: 64,
            first_row: -3.4,
            mount_x: 0.5,
            mount_y: 0.0,
            max_range: 6.0,
        }
    }

    /// Wide mapping camera covering about 1.6 m to 9 m ahead.
    pub fn navcam() -> Self {
        Self {
            h_cam: 1.3,
            pitch_down_deg: 20.0,
            focal_px: 70.0,
            rows: 40,
            cols: 90,
            first_row: -14.5,
            mount_x: 0.3,
            mount_y: 0.0,
            max_range: 15.0,
        }
    }
}

impl Default for PinholeSpec {
    fn default() -> Self {
        Self::loccam()
    }
}

/// Camera geometry: mount pose on the rover and one unit ray per RoI pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub h_cam: f64,
    pub pitch_down: f64,
    pub mount: Point2,
    pub rows: usize,
    pub cols: usize,
    pub max_range: f64,
    /// Unit rays in the camera frame (x along the optical axis, y left, z up), row-major.
    rays_camera: Vec<Vector3<f64>>,
    /// The same rays rotated into the rover frame.
    rays_rover: Vec<Vector3<f64>>,
}

impl CameraModel {
    pub fn pinhole(spec: &PinholeSpec) -> Result<Self> {
        if !(spec.h_cam > 0.0) {
            return Err(NavError::Config(format!("h_cam must be positive, got {}", spec.h_cam)));
        }
        if !(spec.focal_px > 0.0) || spec.rows == 0 || spec.cols == 0 {
            return Err(NavError::Config(
                "camera needs a positive focal length and RoI size".into(),
            ));
        }
        if !(spec.max_range > 0.0) {
            return Err(NavError::Config("camera max_range must be positive".into()));
        }
        let pitch = spec.pitch_down_deg.to_radians();
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), pitch);
        let center_col = (spec.cols - 1) as f64 / 2.0;
        let mut rays_camera = Vec::with_capacity(spec.rows * spec.cols);
        for r in 0..spec.rows {
            for c in 0..spec.cols {
                let u = c as f64 - center_col;
                let v = spec.first_row + r as f64;
                rays_camera.push(Vector3::new(1.0, -u / spec.focal_px, -v / spec.focal_px).normalize());
            }
        }
        let rays_rover = rays_camera.iter().map(|d| rot * d).collect();
        Ok(Self {
            h_cam: spec.h_cam,
            pitch_down: pitch,
            mount: Point2::new(spec.mount_x, spec.mount_y),
            rows: spec.rows,
            cols: spec.cols,
            max_range: spec.max_range,
            rays_camera,
            rays_rover,
        })
    }

    pub fn ray_camera(&self, row: usize, col: usize) -> Vector3<f64> {
        self.rays_camera[row * self.cols + col]
    }

    pub fn ray_rover(&self, row: usize, col: usize) -> Vector3<f64> {
        self.rays_rover[row * self.cols + col]
    }

    /// Camera center in the rover frame.
    pub fn position_rover(&self) -> Vector3<f64> {
        Vector3::new(self.mount.x, self.mount.y, self.h_cam)
    }

    pub fn position_world(&self, pose: &RoverPose) -> Vector3<f64> {
        Vector3::new(pose.x, pose.y, pose.z) + pose.rotation() * self.position_rover()
    }

    /// Distance along a pixel ray to the plane `z = 0` of a level rover.
    pub fn flat_ground_distance(&self, row: usize, col: usize) -> Option<f64> {
        let d = self.ray_rover(row, col);
        (d.z < 0.0).then(|| self.h_cam / -d.z)
    }

    /// Rover-frame ground point seen by a pixel when the rover stands level on flat ground.
    pub fn flat_ground_point(&self, row: usize, col: usize) -> Option<Point2> {
        let t = self.flat_ground_distance(row, col)?;
        let p = self.position_rover() + self.ray_rover(row, col) * t;
        Some(Point2::new(p.x, p.y))
    }
}

/// Per-pixel distances from the camera center to the first terrain intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub rows: usize,
    pub cols: usize,
    distances: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthFrame {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            distances: vec![0.0; rows * cols],
            valid: vec![false; rows * cols],
        }
    }

    /// Frame with every pixel valid; non-positive or non-finite distances become invalid.
    pub fn from_distances(rows: usize, cols: usize, distances: Vec<f64>) -> Result<Self> {
        if distances.len() != rows * cols {
            return Err(NavError::Contract(format!(
                "expected {} distances, got {}",
                rows * cols,
                distances.len()
            )));
        }
        let valid = distances.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self {
            rows,
            cols,
            distances,
            valid,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.cols + col;
        self.valid[i].then(|| self.distances[i])
    }

    pub fn set(&mut self, row: usize, col: usize, distance: Option<f64>) {
        let i = row * self.cols + col;
        match distance {
            Some(d) if d.is_finite() && d > 0.0 => {
                self.distances[i] = d;
                self.valid[i] = true;
            }
            _ => {
                self.distances[i] = 0.0;
                self.valid[i] = false;
            }
        }
    }

    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|v| *v)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Multiplicative Gaussian range noise, σ = `relative_sigma` · distance.
    pub fn with_noise(&self, relative_sigma: f64, seed: u64) -> DepthFrame {
        let mut out = self.clone();
        if relative_sigma <= 0.0 {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, relative_sigma).expect("finite sigma");
        for (d, v) in out.distances.iter_mut().zip(&out.valid) {
            let n = unit.sample(&mut rng);
            if *v {
                *d *= (1.0 + n).max(0.1);
            }
        }
        out
    }
}

/// Ray caster bound to one terrain; caches the terrain maximum used to skip empty space.
pub struct RayCaster<'a> {
    truth: &'a ElevationGrid,
    max_height: f64,
}

impl<'a> RayCaster<'a> {
    pub fn new(truth: &'a ElevationGrid) -> Self {
        Self {
            truth,
            max_height: truth.max_height().unwrap_or(0.0),
        }
    }

    /// Render the depth frame seen from `pose`. Rays that leave the grid, hit unknown
    /// cells or exceed the camera range are invalid.
    pub fn render(&self, pose: &RoverPose, cam: &CameraModel) -> Result<DepthFrame> {
        let origin = cam.position_world(pose);
        let below = match self.truth.bilinear(origin.x, origin.y) {
            Ok(h) => origin.z <= h,
            Err(SampleFail::Unknown(..)) => false,
            Err(SampleFail::OutOfExtent) => return Err(NavError::Geometry("camera outside terrain extent".into())),
        };
        if below {
            return Err(NavError::Geometry("camera at or below the terrain".into()));
        }
        let rot = pose.rotation();
        let mut frame = DepthFrame::new(cam.rows, cam.cols);
        for r in 0..cam.rows {
            for c in 0..cam.cols {
                let dir = rot * cam.ray_rover(r, c);
                frame.set(r, c, self.cast(&origin, &dir, cam.max_range));
            }
        }
        Ok(frame)
    }

    /// March along the ray in half-cell steps, then refine the crossing by bisection
    /// to 1 mm and a final secant step inside the bracket.
    fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, max_range: f64) -> Option<f64> {
        let step = self.truth.resolution() / 2.0;
        let gap = |t: f64| -> Option<f64> {
            let p = origin + dir * t;
            self.truth.bilinear(p.x, p.y).ok().map(|h| p.z - h)
        };
        let mut t = if origin.z > self.max_height {
            if dir.z >= 0.0 {
                return None;
            }
            ((origin.z - self.max_height) / -dir.z - 1e-6).max(0.0)
        } else {
            0.0
        };
        if t > max_range {
            return None;
        }
        let mut prev_t = t;
        let mut prev_gap = gap(t)?;
        if prev_gap <= 0.0 {
            return None;
        }
        loop {
            t = (t + step).min(max_range);
            let g = gap(t)?;
            if g <= 0.0 {
                let (mut lo, mut hi, mut g_lo, mut g_hi) = (prev_t, t, prev_gap, g);
                while hi - lo > 1e-3 {
                    let mid = 0.5 * (lo + hi);
                    let gm = gap(mid)?;
                    if gm > 0.0 {
                        lo = mid;
                        g_lo = gm;
                    } else {
                        hi = mid;
                        g_hi = gm;
                    }
                }
                let frac = if g_lo - g_hi > 0.0 { g_lo / (g_lo - g_hi) } else { 1.0 };
                return Some(lo + frac * (hi - lo));
            }
            if t >= max_range {
                return None;
            }
            prev_t = t;
            prev_gap = g;
        }
    }
}

/// Render a depth frame; see [`RayCaster::render`].
pub fn render_depth(pose: &RoverPose, cam: &CameraModel, truth: &ElevationGrid) -> Result<DepthFrame> {
    RayCaster::new(truth).render(pose, cam)
}

/// Unproject every valid pixel into world coordinates.
pub fn render_pointcloud(frame: &DepthFrame, cam: &CameraModel, pose: &RoverPose) -> Vec<Vector3<f64>> {
    let origin = cam.position_world(pose);
    let rot = pose.rotation();
    let mut points = Vec::with_capacity(frame.valid_count());
    for r in 0..frame.rows.min(cam.rows) {
        for c in 0..frame.cols.min(cam.cols) {
            if let Some(d) = frame.get(r, c) {
                points.push(origin + (rot * cam.ray_rover(r, c)) * d);
            }
        }
    }
    points
}

/// Express world points in the gravity-aligned, heading-rotated frame centered at the
/// rover reference point. This is what an attitude-aware rover can compute without
/// knowing its absolute position.
pub fn to_level_rover_frame(points: &[Vector3<f64>], pose: &RoverPose) -> Vec<Vector3<f64>> {
    let (s, c) = pose.heading.sin_cos();
    points
        .iter()
        .map(|p| {
            let dx = p.x - pose.x;
            let dy = p.y - pose.y;
            Vector3::new(c * dx + s * dy, -s * dx + c * dy, p.z - pose.z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{place_obstacles, ObstacleSpec};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn flat(extent: f64, res: f64) -> ElevationGrid {
        let n = (extent / res).round() as usize + 1;
        ElevationGrid::filled(Point2::new(-extent / 2.0, -extent / 2.0), res, n, n, 0.0).unwrap()
    }

    fn cmd(speed: f64, turn_rate: f64) -> ControlCommand {
        ControlCommand { speed, turn_rate }
    }

    #[test]
    fn zero_command_keeps_pose() {
        let g = flat(20.0, 0.1);
        let p = RoverPose::on_terrain(1.0, 2.0, 0.3, &g).unwrap();
        assert_eq!(step_kinematics(&p, &cmd(0.0, 0.0), 0.1, &g).unwrap(), p);
    }

    #[test]
    fn straight_line() {
        let g = flat(20.0, 0.1);
        let p = RoverPose::on_terrain(0.0, 0.0, 0.0, &g).unwrap();
        let q = step_kinematics(&p, &cmd(1.0, 0.0), 1.0, &g).unwrap();
        assert!((q.x - 1.0).abs() < 1e-12 && q.y.abs() < 1e-12);
    }

    #[test]
    fn arc_matches_fine_euler() {
        let g = flat(20.0, 0.1);
        let p = RoverPose::on_terrain(0.0, 0.0, 0.4, &g).unwrap();
        let q = step_kinematics(&p, &cmd(1.0, FRAC_PI_2), 1.0, &g).unwrap();
        let (mut x, mut y, mut h) = (0.0, 0.0, 0.4f64);
        let n = 10_000;
        let dt = 1.0 / n as f64;
        for _ in 0..n {
            x += dt * h.cos();
            y += dt * h.sin();
            h += FRAC_PI_2 * dt;
        }
        assert!(Point2::new(x, y).distance(q.position()) < 1e-3);
        assert!((normalize_angle(h) - q.heading).abs() < 1e-9);
    }

    #[test]
    fn kinematics_out_of_bounds() {
        let g = flat(4.0, 0.1);
        let p = RoverPose::on_terrain(1.9, 0.0, 0.0, &g).unwrap();
        assert!(matches!(
            step_kinematics(&p, &cmd(1.0, 0.0), 1.0, &g),
            Err(NavError::OutOfBounds(_))
        ));
        assert!(matches!(
            step_kinematics(&p, &cmd(1.0, 0.0), 0.0, &g),
            Err(NavError::Contract(_))
        ));
    }

    #[test]
    fn attitude_matches_gradient_on_slope() {
        let g = ElevationGrid::from_fn(Point2::new(-5.0, -5.0), 0.1, 101, 101, |p| 0.2 * p.x - 0.1 * p.y).unwrap();
        for heading in [0.0, 0.7, -2.0, PI] {
            let p = RoverPose::on_terrain(0.3, 0.2, heading, &g).unwrap();
            let (gx, gy) = g.gradient_at(p.position()).unwrap();
            let (roll, pitch) = attitude_from_gradient(p.heading, gx, gy);
            assert!((roll - p.roll).abs() < 1e-6 && (pitch - p.pitch).abs() < 1e-6);
            // Body z axis equals the surface normal.
            let n = Vector3::new(-0.2, 0.1, 1.0).normalize();
            let z_body = p.rotation() * Vector3::z();
            assert!((z_body - n).norm() < 1e-9, "heading {heading}");
        }
        let up = RoverPose::on_terrain(0.0, 0.0, 0.0, &g).unwrap();
        assert!(up.pitch > 0.0);
    }

    #[test]
    fn odometry_noiseless_and_deterministic() {
        let d = OdometryDelta::new(0.1, 0.01);
        let exact = simulate_odometry(&d, 3, 0.0);
        assert_eq!((exact.forward, exact.heading_change), (0.1, 0.01));
        let a = simulate_odometry(&d, 3, 0.02);
        let b = simulate_odometry(&d, 3, 0.02);
        assert_eq!(a, b);
        assert_ne!(a.forward, d.forward);
    }

    #[test]
    fn delta_between_reproduces_arc() {
        let p0 = RoverPose::planar(1.0, 2.0, 0.3);
        let (x, y, h) = integrate_unicycle(1.0, 2.0, 0.3, 0.7, -0.4, 0.5);
        let p1 = RoverPose::planar(x, y, h);
        let d = OdometryDelta::between(&p0, &p1);
        let (x2, y2, h2) = apply_delta(p0.x, p0.y, p0.heading, &d);
        assert!((x2 - x).abs() < 1e-12 && (y2 - y).abs() < 1e-12 && (h2 - h).abs() < 1e-12);
    }

    #[test]
    fn compose_deltas_along_arc() {
        let (x1, y1, h1) = integrate_unicycle(0.0, 0.0, 0.0, 0.5, 0.3, 0.2);
        let (x2, y2, h2) = integrate_unicycle(x1, y1, h1, 0.5, 0.3, 0.2);
        let p0 = RoverPose::planar(0.0, 0.0, 0.0);
        let p1 = RoverPose::planar(x1, y1, h1);
        let p2 = RoverPose::planar(x2, y2, h2);
        let c = OdometryDelta::between(&p0, &p1).compose(&OdometryDelta::between(&p1, &p2));
        let (x, y, h) = apply_delta(0.0, 0.0, 0.0, &c);
        assert!((x - x2).abs() < 1e-12 && (y - y2).abs() < 1e-12 && (h - h2).abs() < 1e-12);
    }

    #[test]
    fn camera_rays_are_unit() {
        for spec in [PinholeSpec::loccam(), PinholeSpec::navcam()] {
            let cam = CameraModel::pinhole(&spec).unwrap();
            for r in 0..cam.rows {
                for c in 0..cam.cols {
                    assert!((cam.ray_camera(r, c).norm() - 1.0).abs() < 1e-9);
                    assert!((cam.ray_rover(r, c).norm() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn loccam_footprint_is_about_one_meter() {
        let cam = CameraModel::pinhole(&PinholeSpec::loccam()).unwrap();
        let far = cam.flat_ground_point(0, cam.cols / 2).unwrap();
        let near = cam.flat_ground_point(cam.rows - 1, cam.cols / 2).unwrap();
        let depth = far.x - near.x;
        assert!((0.9..1.1).contains(&depth), "footprint depth {depth}");
        let left = cam.flat_ground_point(cam.rows / 2, 0).unwrap();
        let right = cam.flat_ground_point(cam.rows / 2, cam.cols - 1).unwrap();
        let width = left.y - right.y;
        assert!((1.1..1.35).contains(&width), "footprint width {width}");
    }

    #[test]
    fn flat_ground_depth_matches_closed_form() {
        let g = flat(10.0, 0.05);
        let cam = CameraModel::pinhole(&PinholeSpec::loccam()).unwrap();
        let pose = RoverPose::on_terrain(0.0, 0.0, 0.0, &g).unwrap();
        let frame = render_depth(&pose, &cam, &g).unwrap();
        assert!(frame.all_valid());
        for r in 0..cam.rows {
            for c in 0..cam.cols {
                // h / cos(alpha), alpha measured from the downward vertical.
                let cos_alpha = -cam.ray_rover(r, c).z;
                let expected = cam.h_cam / cos_alpha;
                assert!((frame.get(r, c).unwrap() - expected).abs() < 1e-3);
            }
        }
    }

    fn rendered_with(obstacle: ObstacleSpec) -> (DepthFrame, DepthFrame) {
        let g = flat(10.0, 0.02);
        let cam = CameraModel::pinhole(&PinholeSpec::loccam()).unwrap();
        let pose = RoverPose::on_terrain(0.0, 0.0, 0.0, &g).unwrap();
        let with = place_obstacles(&g, &[obstacle]).unwrap();
        (
            render_depth(&pose, &cam, &g).unwrap(),
            render_depth(&pose, &cam, &with).unwrap(),
        )
    }

    #[test]
    fn rock_shortens_and_pit_lengthens() {
        let center = Point2::new(1.9, 0.0);
        let (flat_frame, rock) = rendered_with(ObstacleSpec::new(center, 0.25, 0.3));
        let (_, pit) = rendered_with(ObstacleSpec::new(center, 0.25, -0.3));
        let mut shorter = 0;
        let mut longer = 0;
        for r in 0..flat_frame.rows {
            for c in 0..flat_frame.cols {
                let f = flat_frame.get(r, c).unwrap();
                let a = rock.get(r, c).unwrap();
                assert!(a <= f + 1e-3);
                if a < f - 0.01 {
                    shorter += 1;
                }
                if let Some(b) = pit.get(r, c) {
                    assert!(b >= f - 1e-3);
                    if b > f + 0.01 {
                        longer += 1;
                    }
                }
            }
        }
        assert!(shorter > 20, "rock affected {shorter} pixels");
        assert!(longer > 20, "pit affected {longer} pixels");
    }

    #[test]
    fn camera_below_ground_is_a_fault() {
        let g = ElevationGrid::filled(Point2::new(-5.0, -5.0), 0.1, 101, 101, 0.0).unwrap();
        let cam = CameraModel::pinhole(&PinholeSpec::loccam()).unwrap();
        let mut pose = RoverPose::on_terrain(0.0, 0.0, 0.0, &g).unwrap();
        pose.z = -2.0;
        assert!(matches!(render_depth(&pose, &cam, &g), Err(NavError::Geometry(_))));
    }

    #[test]
    fn flat_pointcloud_lies_on_ground() {
        let g = flat(10.0, 0.05);
        let cam = CameraModel::pinhole(&PinholeSpec::navcam()).unwrap();
        let pose = RoverPose::on_terrain(-1.0, 0.5, 0.6, &g).unwrap();
        let frame = render_depth(&pose, &cam, &g).unwrap();
        let pts = render_pointcloud(&frame, &cam, &pose);
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| p.z.abs() < 1e-3));
    }

    #[test]
    fn downward_ray_unprojects_below_camera() {
        let spec = PinholeSpec {
            pitch_down_deg: 90.0,
            rows: 1,
            cols: 1,
            first_row: 0.0,
            mount_x: 0.0,
            ..PinholeSpec::loccam()
        };
        let cam = CameraModel::pinhole(&spec).unwrap();
        let pose = RoverPose::planar(0.0, 0.0, 0.0);
        let frame = DepthFrame::from_distances(1, 1, vec![cam.h_cam]).unwrap();
        let p = render_pointcloud(&frame, &cam, &pose)[0];
        let cam_pos = cam.position_world(&pose);
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12);
        assert!((p.z - cam_pos.z + cam.h_cam).abs() < 1e-12);
    }

    #[test]
    fn noise_is_deterministic_and_relative() {
        let frame = DepthFrame::from_distances(1, 3, vec![1.0, 2.0, 4.0]).unwrap();
        let a = frame.with_noise(0.005, 9);
        assert_eq!(a, frame.with_noise(0.005, 9));
        for c in 0..3 {
            let d = frame.get(0, c).unwrap();
            assert!((a.get(0, c).unwrap() - d).abs() < 0.05 * d);
        }
    }
}
