//! Synthetic ground-truth terrain: fractal value noise, craters and ripple fields,
//! plus cosine-tapered rocks and pits.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ElevationGrid;
use crate::error::{NavError, Result};
use crate::geometry::Point2;

/// Parameters of a generated terrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerrainSpec {
    /// Distance from the first to the last cell center along x (meters).
    pub extent_x: f64,
    /// Distance from the first to the last cell center along y (meters).
    pub extent_y: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub resolution: f64,
    /// Largest absolute height of the generated surface (meters).
    pub amplitude: f64,
    /// Wavelength of the coarsest noise octave (meters); crater and ripple sizes scale with it.
    pub feature_scale: f64,
    /// Weight of the fractal noise relative to craters and ripples.
    pub roughness: f64,
    pub octaves: u32,
    pub craters: usize,
    pub ripples: usize,
}

impl Default for TerrainSpec {
    fn default() -> Self {
        Self {
            extent_x: 40.0,
            extent_y: 40.0,
            origin_x: 0.0,
            origin_y: 0.0,
            resolution: 0.1,
            amplitude: 0.3,
            feature_scale: 8.0,
            roughness: 1.0,
            octaves: 4,
            craters: 2,
            ripples: 2,
        }
    }
}

impl TerrainSpec {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.extent_x) || !positive(self.extent_y) {
            return Err(NavError::Config(format!(
                "terrain extent must be positive, got {} x {}",
                self.extent_x, self.extent_y
            )));
        }
        if !positive(self.resolution) {
            return Err(NavError::Config(format!(
                "terrain resolution must be positive, got {}",
                self.resolution
            )));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(NavError::Config("terrain amplitude must be >= 0".into()));
        }
        if !positive(self.feature_scale) {
            return Err(NavError::Config("feature_scale must be positive".into()));
        }
        if !(self.roughness >= 0.0) {
            return Err(NavError::Config("roughness must be >= 0".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        (self.extent_y / self.resolution).round() as usize + 1
    }

    pub fn cols(&self) -> usize {
        (self.extent_x / self.resolution).round() as usize + 1
    }
}

/// Lattice of random values in `[-1, 1]`, interpolated with a quintic fade.
struct ValueNoise {
    wavelength: f64,
    origin: Point2,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, origin: Point2, extent: Point2, wavelength: f64) -> Self {
        let nx = (extent.x / wavelength).ceil() as usize + 2;
        let ny = (extent.y / wavelength).ceil() as usize + 2;
        let values = (0..nx * ny).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self {
            wavelength,
            origin,
            nx,
            ny,
            values,
        }
    }

    fn at(&self, p: Point2) -> f64 {
        let fx = ((p.x - self.origin.x) / self.wavelength).max(0.0);
        let fy = ((p.y - self.origin.y) / self.wavelength).max(0.0);
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let tx = fade((fx - ix as f64).clamp(0.0, 1.0));
        let ty = fade((fy - iy as f64).clamp(0.0, 1.0));
        let v = |x: usize, y: usize| self.values[y * self.nx + x];
        let a = v(ix, iy) + tx * (v(ix + 1, iy) - v(ix, iy));
        let b = v(ix, iy + 1) + tx * (v(ix + 1, iy + 1) - v(ix, iy + 1));
        a + ty * (b - a)
    }
}

struct Crater {
    center: Point2,
    radius: f64,
}

impl Crater {
    fn at(&self, p: Point2) -> f64 {
        let rho = p.distance(self.center) / self.radius;
        let bowl = if rho < 1.0 { -(1.0 - rho * rho) } else { 0.0 };
        let rim = 0.3 * (-((rho - 1.0) / 0.3).powi(2)).exp();
        bowl + rim
    }
}

struct RippleField {
    center: Point2,
    radius: f64,
    direction: Point2,
    wavelength: f64,
    phase: f64,
}

impl RippleField {
    fn at(&self, p: Point2) -> f64 {
        let d = p - self.center;
        let envelope = (-(d.dot(d)) / (self.radius * self.radius)).exp();
        0.4 * envelope * (TAU * d.dot(self.direction) / self.wavelength + self.phase).sin()
    }
}

/// Generate a deterministic terrain whose heights are scaled so that `max |h| = amplitude`.
pub fn generate_terrain(seed: u64, spec: &TerrainSpec) -> Result<ElevationGrid> {
    spec.validate()?;
    let origin = Point2::new(spec.origin_x, spec.origin_y);
    let extent = Point2::new(spec.extent_x, spec.extent_y);
    let (rows, cols) = (spec.rows(), spec.cols());
    if spec.amplitude == 0.0 {
        return ElevationGrid::filled(origin, spec.resolution, rows, cols, 0.0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let octaves: Vec<(f64, ValueNoise)> = (0..spec.octaves.max(1))
        .map(|o| {
            let wavelength = spec.feature_scale / f64::from(1u32 << o);
            let weight = 0.5f64.powi(o as i32);
            (weight, ValueNoise::new(&mut rng, origin, extent, wavelength))
        })
        .collect();
    let uniform_point = |rng: &mut ChaCha8Rng| {
        Point2::new(
            origin.x + rng.gen_range(0.0..=spec.extent_x),
            origin.y + rng.gen_range(0.0..=spec.extent_y),
        )
    };
    let craters: Vec<Crater> = (0..spec.craters)
        .map(|_| Crater {
            center: uniform_point(&mut rng),
            radius: spec.feature_scale * rng.gen_range(0.25..0.6),
        })
        .collect();
    let ripples: Vec<RippleField> = (0..spec.ripples)
        .map(|_| {
            let angle = rng.gen_range(0.0..PI);
            RippleField {
                center: uniform_point(&mut rng),
                radius: spec.feature_scale * rng.gen_range(0.8..1.6),
                direction: Point2::new(angle.cos(), angle.sin()),
                wavelength: spec.feature_scale * rng.gen_range(0.15..0.3),
                phase: rng.gen_range(0.0..TAU),
            }
        })
        .collect();

    let raw = ElevationGrid::from_fn(origin, spec.resolution, rows, cols, |p| {
        let noise: f64 = octaves.iter().map(|(w, n)| w * n.at(p)).sum();
        let features: f64 = craters.iter().map(|c| c.at(p)).sum::<f64>() + ripples.iter().map(|r| r.at(p)).sum::<f64>();
        spec.roughness * noise + features
    })?;

    let peak = raw.valid_heights().fold(0.0f64, |m, h| m.max(h.abs()));
    if peak == 0.0 {
        return ElevationGrid::filled(origin, spec.resolution, rows, cols, 0.0);
    }
    let scale = spec.amplitude / peak;
    let heights = raw
        .heights()
        .iter()
        .map(|h| (h * scale).clamp(-spec.amplitude, spec.amplitude))
        .collect();
    ElevationGrid::from_heights(origin, spec.resolution, rows, cols, heights)
}

/// A rock (positive height) or pit (negative height) with a cosine-tapered profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub height: f64,
}

impl ObstacleSpec {
    pub fn new(center: Point2, radius: f64, height: f64) -> Self {
        Self {
            x: center.x,
            y: center.y,
            radius,
            height,
        }
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Bump height at horizontal distance `rho` from the center; zero outside the disc.
    pub fn profile(&self, rho: f64) -> f64 {
        if rho < self.radius {
            self.height * 0.5 * (1.0 + (PI * rho / self.radius).cos())
        } else {
            0.0
        }
    }
}

/// Add obstacles to a grid. Where footprints overlap the bump of largest magnitude wins.
pub fn place_obstacles(grid: &ElevationGrid, obstacles: &[ObstacleSpec]) -> Result<ElevationGrid> {
    for o in obstacles {
        if !(o.radius > 0.0 && o.radius.is_finite()) || o.height == 0.0 || !o.height.is_finite() {
            return Err(NavError::Config(format!(
                "obstacle at ({}, {}) needs radius > 0 and height != 0",
                o.x, o.y
            )));
        }
        if !grid.contains(o.center()) {
            return Err(NavError::Config(format!(
                "obstacle center ({}, {}) outside terrain extent",
                o.x, o.y
            )));
        }
    }
    let mut bump = vec![0.0f64; grid.rows() * grid.cols()];
    let res = grid.resolution();
    let origin = grid.origin();
    for o in obstacles {
        let c = o.center();
        let c0 = (((c.x - o.radius - origin.x) / res).floor().max(0.0)) as usize;
        let c1 = (((c.x + o.radius - origin.x) / res).ceil() as usize).min(grid.cols() - 1);
        let r0 = (((c.y - o.radius - origin.y) / res).floor().max(0.0)) as usize;
        let r1 = (((c.y + o.radius - origin.y) / res).ceil() as usize).min(grid.rows() - 1);
        for r in r0..=r1 {
            for col in c0..=c1 {
                let v = o.profile(grid.world_of(r, col).distance(c));
                let i = grid.index(r, col);
                if v.abs() > bump[i].abs() {
                    bump[i] = v;
                }
            }
        }
    }
    let mut out = grid.clone();
    for r in 0..grid.rows() {
        for col in 0..grid.cols() {
            let b = bump[grid.index(r, col)];
            if b != 0.0 {
                if let Some(h) = grid.get(r, col) {
                    out.set(r, col, h + b);
                }
            }
        }
    }
    Ok(out)
}

/// Block-average the truth terrain down to the orbital resolution.
pub fn derive_orbital_map(truth: &ElevationGrid, orbital_resolution: f64) -> Result<ElevationGrid> {
    let ratio = integer_ratio(orbital_resolution, truth.resolution())?;
    truth.block_mean(ratio, 0.0)
}

/// `coarse / fine` as an integer, or a configuration error if it is not one.
pub fn integer_ratio(coarse: f64, fine: f64) -> Result<usize> {
    let ratio = coarse / fine;
    let rounded = ratio.round();
    if !(rounded >= 1.0) || (ratio - rounded).abs() > 1e-6 * rounded {
        return Err(NavError::Config(format!(
            "resolution {coarse} is not an integer multiple of {fine}"
        )));
    }
    Ok(rounded as usize)
}
