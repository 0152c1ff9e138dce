use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rovernav::global::{cross_correlate, gradient_magnitude, localize_grid, MatchParams, MatchResult, Metric};
use rovernav::sim::RoverPose;
use rovernav::terrain::{derive_orbital_map, generate_terrain, ElevationGrid, TerrainSpec};
use rovernav::Point2;

fn random_grid(rng: &mut ChaCha8Rng, n: usize) -> ElevationGrid {
    let heights = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ElevationGrid::from_heights(Point2::new(0.0, 0.0), 1.0, n, n, heights).unwrap()
}

/// Sliding-window sum of products, written out independently of the library.
fn brute_force_argmax(l: &ElevationGrid, o: &ElevationGrid) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=o.rows() - l.rows() {
        for j in 0..=o.cols() - l.cols() {
            let mut v = 0.0;
            for r in 0..l.rows() {
                for c in 0..l.cols() {
                    v += l.get(r, c).unwrap() * o.get(i + r, j + c).unwrap();
                }
            }
            if v > best_v {
                best_v = v;
                best = (i, j);
            }
        }
    }
    best
}

fn permissive() -> MatchParams {
    MatchParams {
        min_valid_fraction: 1.0,
        ..MatchParams::default()
    }
}

#[test]
fn crop_argmax_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let o = random_grid(&mut rng, 64);
        let (r0, c0) = (rng.gen_range(0..=48), rng.gen_range(0..=48));
        let l = o.crop(r0, c0, 16, 16).unwrap();
        let m = cross_correlate(&l, &o, &permissive()).unwrap();
        assert_eq!(m.best, brute_force_argmax(&l, &o));
    }
}

#[test]
fn ncc_finds_the_crop_location() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let o = random_grid(&mut rng, 64);
        let (r0, c0) = (rng.gen_range(0..=48), rng.gen_range(0..=48));
        let l = o.crop(r0, c0, 16, 16).unwrap();
        let params = MatchParams {
            metric: Metric::Ncc,
            ..permissive()
        };
        let m = cross_correlate(&l, &o, &params).unwrap();
        assert_eq!(m.best, (r0, c0));
        assert!((m.peak - 1.0).abs() < 1e-12);
        assert!(m.accepted);
    }
}

fn bits(m: &MatchResult) -> Vec<u64> {
    m.scores.iter().map(|v| v.to_bits()).collect()
}

/// Heights on a 1/64 m lattice and a dyadic offset keep every difference exact, so the
/// gradient images and everything after them must agree to the bit.
#[test]
fn elevation_offset_is_invisible_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 48;
    let heights = (0..n * n)
        .map(|_| f64::from(rng.gen_range(-64i32..64)) / 64.0)
        .collect();
    let orbital = ElevationGrid::from_heights(Point2::new(0.0, 0.0), 0.5, n, n, heights).unwrap();
    let local = orbital.crop(14, 17, 12, 12).unwrap().translated(Point2::new(1.5, -1.0));
    let estimate = RoverPose::planar(local.origin().x + 3.0, local.origin().y + 3.0, 0.0);
    let params = MatchParams {
        search_radius: 6.0,
        ..MatchParams::default()
    };
    let a = localize_grid(&local, &orbital, &estimate, &params).unwrap();
    for offset in [2.5, -17.25, 1024.0] {
        let b = localize_grid(&local.offset_heights(offset), &orbital, &estimate, &params).unwrap();
        assert_eq!(bits(&a.result), bits(&b.result), "offset {offset}");
        assert_eq!(a.result.best, b.result.best);
        assert_eq!(a.correction.delta.x.to_bits(), b.correction.delta.x.to_bits());
        assert_eq!(a.correction.delta.y.to_bits(), b.correction.delta.y.to_bits());
    }
    let g = gradient_magnitude(&local);
    let h = gradient_magnitude(&local.offset_heights(2.5));
    assert!(g
        .heights()
        .iter()
        .zip(h.heights())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

fn textured(seed: u64) -> ElevationGrid {
    let spec = TerrainSpec {
        extent_x: 40.0,
        extent_y: 40.0,
        amplitude: 0.6,
        feature_scale: 20.0,
        octaves: 6,
        craters: 3,
        ripples: 2,
        ..TerrainSpec::default()
    };
    generate_terrain(seed, &spec).unwrap()
}

#[test]
fn misplaced_local_map_is_moved_back() {
    for seed in 1..=5 {
        let truth = textured(seed);
        let orbital = derive_orbital_map(&truth, 0.5).unwrap();
        // A 12 m patch believed to lie 3.1 m east and 3.9 m south of where it is.
        let error = Point2::new(3.1, -3.9);
        let local = truth.crop(140, 120, 120, 120).unwrap().translated(error);
        let mid = local.origin().lerp(local.extent_max(), 0.5);
        let estimate = RoverPose::planar(mid.x, mid.y, 0.0);
        let params = MatchParams {
            metric: Metric::Ncc,
            ..MatchParams::default()
        };
        let fix = localize_grid(&local, &orbital, &estimate, &params).unwrap();
        assert!(fix.result.accepted, "seed {seed}: {}", fix.result.summary());
        assert!(fix.correction.applied);
        let residual = (fix.correction.delta + error).norm();
        assert!(residual < 0.5, "seed {seed}: residual {residual}");
    }
}

#[test]
fn flat_orbital_map_is_refused() {
    let orbital = ElevationGrid::filled(Point2::new(0.0, 0.0), 0.5, 80, 80, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let heights = (0..240 * 240).map(|_| rng.gen_range(-0.005..0.005)).collect();
    let local = ElevationGrid::from_heights(Point2::new(10.0, 10.0), 0.1, 240, 240, heights).unwrap();
    let estimate = RoverPose::planar(22.0, 22.0, 0.0);
    for metric in [Metric::Raw, Metric::Ncc] {
        let params = MatchParams {
            metric,
            ..MatchParams::default()
        };
        let fix = localize_grid(&local, &orbital, &estimate, &params).unwrap();
        assert!(!fix.result.accepted, "{metric:?}");
        assert!(!fix.correction.applied);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn peak_is_the_maximum_and_subcell_is_bounded(seed in 0u64..10_000, r0 in 0usize..=16, c0 in 0usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = random_grid(&mut rng, 24);
        let l = o.crop(r0, c0, 8, 8).unwrap();
        let m = cross_correlate(&l, &o, &permissive()).unwrap();
        let max = m.scores.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(m.peak, max);
        prop_assert!(m.subcell.0.abs() <= 0.5 && m.subcell.1.abs() <= 0.5);
        prop_assert!(m.sharpness >= 1.0);
    }
}
