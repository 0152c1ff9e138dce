use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rovernav::control::ControlCommand;
use rovernav::sim::{
    apply_delta, render_depth, render_pointcloud, simulate_odometry, step_kinematics, CameraModel, OdometryDelta,
    PinholeSpec, RayCaster, RoverPose,
};
use rovernav::terrain::{generate_terrain, ElevationGrid, TerrainSpec};
use rovernav::Point2;

#[test]
fn odometry_drift_is_two_percent_over_100m() {
    let steps = 1000;
    let seeds = 500;
    let mut total = 0.0;
    for seed in 0..seeds {
        let (mut x, mut y, mut h) = (0.0, 0.0, 0.0);
        for k in 0..steps {
            let noisy = simulate_odometry(&OdometryDelta::new(0.1, 0.0), seed * 10_000 + k, 0.02);
            (x, y, h) = apply_delta(x, y, h, &noisy);
        }
        total += Point2::new(x, y).distance(Point2::new(100.0, 0.0));
    }
    let mean = total / seeds as f64;
    assert!((mean - 2.0).abs() < 0.5, "mean final error {mean}");
}

fn smooth_terrain() -> ElevationGrid {
    let spec = TerrainSpec {
        extent_x: 16.0,
        extent_y: 16.0,
        origin_x: -8.0,
        origin_y: -8.0,
        resolution: 0.05,
        amplitude: 0.25,
        feature_scale: 6.0,
        roughness: 0.3,
        octaves: 2,
        craters: 0,
        ripples: 0,
    };
    generate_terrain(11, &spec).unwrap()
}

#[test]
fn pointcloud_recovers_terrain_heights() {
    let truth = smooth_terrain();
    for spec in [PinholeSpec::loccam(), PinholeSpec::navcam()] {
        let cam = CameraModel::pinhole(&spec).unwrap();
        let pose = RoverPose::on_terrain(-1.0, 0.5, 0.4, &truth).unwrap();
        let frame = render_depth(&pose, &cam, &truth).unwrap();
        let pts = render_pointcloud(&frame, &cam, &pose);
        assert!(pts.len() > frame.rows * frame.cols / 2);
        for p in pts {
            let h = truth.sample_height(Point2::new(p.x, p.y)).unwrap();
            assert!((p.z - h).abs() < 0.02, "residual {}", p.z - h);
        }
    }
}

#[test]
fn raising_terrain_never_lengthens_rays() {
    let base = smooth_terrain();
    let cam = CameraModel::pinhole(&PinholeSpec::loccam()).unwrap();
    let pose = RoverPose::on_terrain(0.0, 0.0, 0.0, &base).unwrap();
    let before = render_depth(&pose, &cam, &base).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mut raised = base.clone();
        // Perturb cells under the footprint, 1.4 m to 2.4 m ahead.
        for _ in 0..40 {
            let p = Point2::new(rng.gen_range(1.3..2.5), rng.gen_range(-0.7..0.7));
            let (r, c) = raised.grid_of(p).unwrap();
            let h = raised.get(r, c).unwrap();
            raised.set(r, c, h + rng.gen_range(0.0..0.3));
        }
        let after = RayCaster::new(&raised).render(&pose, &cam).unwrap();
        for r in 0..cam.rows {
            for c in 0..cam.cols {
                if let (Some(a), Some(b)) = (after.get(r, c), before.get(r, c)) {
                    assert!(a <= b + 1e-3, "pixel ({r},{c}) {a} > {b}");
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn kinematics_keeps_heading_normalized(
        heading in -20.0f64..20.0,
        speed in -1.0f64..1.0,
        turn in -5.0f64..5.0,
        dt in 0.01f64..2.0,
    ) {
        let g = ElevationGrid::filled(Point2::new(-10.0, -10.0), 0.1, 201, 201, 0.0).unwrap();
        let pose = RoverPose::on_terrain(0.0, 0.0, heading, &g).unwrap();
        let next = step_kinematics(&pose, &ControlCommand { speed, turn_rate: turn }, dt, &g).unwrap();
        prop_assert!(next.heading > -std::f64::consts::PI && next.heading <= std::f64::consts::PI);
    }
}
