#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rovernav::hazard::{Bumper, HazardParams};
use rovernav::sim::{CameraModel, PinholeSpec, RayCaster, RoverPose};
use rovernav::terrain::{place_obstacles, ElevationGrid, ObstacleSpec};
use rovernav::Point2;

/// Solve a dense linear system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-14 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Outcome of one rock placement in front of a level rover on flat ground.
pub struct RockTrial {
    pub height: f64,
    pub detected: bool,
}

/// Place a rock of the given height fully inside the LocCam footprint at a random
/// spot and rover heading, render noiseless depth and run the bumper.
pub fn rock_trial(bumper: &Bumper, cam: &CameraModel, rng: &mut ChaCha8Rng, height: f64) -> RockTrial {
    let res = 0.02;
    let n = (8.0 / res) as usize + 1;
    let flat = ElevationGrid::filled(Point2::new(-4.0, -4.0), res, n, n, 0.0).unwrap();
    let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let pose = RoverPose::on_terrain(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), heading, &flat).unwrap();
    let radius = rng.gen_range(0.2..0.3);
    // Footprint spans roughly 1.42..2.40 m ahead and +-0.55 m sideways.
    let ahead = rng.gen_range(1.45 + radius..2.35 - radius);
    let side = rng.gen_range(-(0.55 - radius)..(0.55 - radius));
    let center = pose.position() + Point2::new(ahead, side).rotate(pose.heading);
    let rock = place_obstacles(&flat, &[ObstacleSpec::new(center, radius, height)]).unwrap();
    let frame = RayCaster::new(&rock).render(&pose, cam).unwrap();
    let mask = bumper.detect(&frame).unwrap();
    RockTrial {
        height,
        detected: mask.has_hazard(),
    }
}

pub fn loccam_bumper() -> (CameraModel, Bumper) {
    let cam = CameraModel::pinhole(&PinholeSpec::loccam()).unwrap();
    let bumper = Bumper::calibrate_camera(&cam, HazardParams::default()).unwrap();
    (cam, bumper)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distance along the ray from a camera at height `h` through the ground point
/// `(gx, gy, 0)` to where it crosses the plane `z = t`.
pub fn ray_plane_distance(h: f64, gx: f64, gy: f64, t: f64) -> f64 {
    let (dx, dy, dz) = (gx, gy, -h);
    let n = (dx * dx + dy * dy + dz * dz).sqrt();
    (t - h) / (dz / n)
}

/// One random draw of camera height, ground hit and near threshold.
pub fn d_min_draw(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64, f64) {
    let h = rng.gen_range(0.2..3.0);
    let range = rng.gen_range(0.1..20.0);
    let az = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let t_near = rng.gen_range(0.0..0.99) * h;
    (h, range * az.cos(), range * az.sin(), t_near, range)
}
