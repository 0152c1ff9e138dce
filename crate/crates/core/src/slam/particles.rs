use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LocalRollingMap;
use crate::error::{NavError, Result};
use crate::geometry::{normalize_angle, Point2};
use crate::sim::{apply_delta, gaussian, OdometryDelta, RoverPose};

/// Score given to particles whose scan lands on no known cell.
pub const MIN_SCORE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub weight: f64,
    /// Scan-matching score from the last update.
    pub score: f64,
}

impl Particle {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Resample when ESS drops below this fraction of N.
    pub resample_threshold: f64,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size 1/Σw² of the normalized weights.
    pub fn ess(&self) -> f64 {
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        let sq: f64 = self.particles.iter().map(|p| (p.weight / total).powi(2)).sum();
        1.0 / sq
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }
}

/// Gaussian scatter around the initial pose with uniform weights.
pub fn init_particles(
    initial: &RoverPose,
    n: usize,
    sigma_xy: f64,
    sigma_heading: f64,
    seed: u64,
) -> Result<ParticleSet> {
    if n == 0 {
        return Err(NavError::Contract("particle count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 1.0 / n as f64;
    let particles = (0..n)
        .map(|_| Particle {
            x: initial.x + gaussian(&mut rng, sigma_xy),
            y: initial.y + gaussian(&mut rng, sigma_xy),
            heading: normalize_angle(initial.heading + gaussian(&mut rng, sigma_heading)),
            weight: w,
            score: 1.0,
        })
        .collect();
    Ok(ParticleSet {
        particles,
        resample_threshold: 0.5,
    })
}

/// Per-step diffusion added after the odometry motion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepNoise {
    pub sigma_xy: f64,
    pub sigma_heading: f64,
}

/// Move every particle by the odometry delta in its own frame, then add independent
/// Gaussian noise to x, y and heading.
pub fn predict(set: &ParticleSet, odo: &OdometryDelta, noise: StepNoise, seed: u64) -> ParticleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = set.clone();
    for p in &mut out.particles {
        let (x, y, h) = apply_delta(p.x, p.y, p.heading, odo);
        p.x = x + gaussian(&mut rng, noise.sigma_xy);
        p.y = y + gaussian(&mut rng, noise.sigma_xy);
        p.heading = normalize_angle(h + gaussian(&mut rng, noise.sigma_heading));
    }
    out
}

/// Height residuals of a rover-frame cloud placed at `(x, y, heading)`, against the
/// map cell under each point. The cloud's vertical datum is unknown, so callers
/// compare residuals up to a common offset.
pub fn scan_residuals(x: f64, y: f64, heading: f64, cloud: &[Vector3<f64>], map: &LocalRollingMap) -> Vec<f64> {
    let (s, c) = heading.sin_cos();
    cloud
        .iter()
        .filter_map(|p| {
            let w = Point2::new(x + c * p.x - s * p.y, y + s * p.x + c * p.y);
            map.height_at(w).map(|h| h - p.z)
        })
        .collect()
}

/// Scan-matching likelihood `exp(-SSE / (2 σ_z² m))` over the `m` points landing on
/// known cells. SSE is taken about the mean residual, which absorbs the unknown
/// height of the rover in the map datum.
pub fn score_scan(particle: &Particle, cloud: &[Vector3<f64>], map: &LocalRollingMap, sigma_z: f64) -> f64 {
    let r = scan_residuals(particle.x, particle.y, particle.heading, cloud, map);
    if r.is_empty() {
        return MIN_SCORE;
    }
    let m = r.len() as f64;
    let mean = r.iter().sum::<f64>() / m;
    let sse: f64 = r.iter().map(|v| (v - mean).powi(2)).sum();
    (-sse / (2.0 * sigma_z * sigma_z * m)).exp().max(MIN_SCORE)
}

/// Reweight by the scores and resample systematically when the ESS drops below the
/// threshold. Fails when every particle was vetoed.
pub fn update_weights_and_resample(set: &ParticleSet, scores: &[f64], seed: u64) -> Result<ParticleSet> {
    if scores.len() != set.len() {
        return Err(NavError::Contract(format!(
            "{} scores for {} particles",
            scores.len(),
            set.len()
        )));
    }
    if scores.iter().all(|s| !(*s > MIN_SCORE)) {
        return Err(NavError::FilterDivergence(
            "every particle scored at the sentinel".into(),
        ));
    }
    let logs: Vec<f64> = set
        .particles
        .iter()
        .zip(scores)
        .map(|(p, s)| p.weight.ln() + s.max(MIN_SCORE).ln())
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    let mut out = set.clone();
    for ((p, w), s) in out.particles.iter_mut().zip(&raw).zip(scores) {
        p.weight = w / total;
        p.score = *s;
    }
    if out.ess() < set.resample_threshold * set.len() as f64 {
        let picks = systematic_resample(&out.weights(), seed);
        let n = out.len() as f64;
        out.particles = picks
            .into_iter()
            .map(|i| Particle {
                weight: 1.0 / n,
                ..out.particles[i]
            })
            .collect();
    }
    Ok(out)
}

/// Systematic resampling: one uniform offset, N evenly spaced pointers.
pub fn systematic_resample(weights: &[f64], seed: u64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u0: f64 = rng.gen_range(0.0..1.0);
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0] / total;
    let mut i = 0;
    for k in 0..n {
        let u = (u0 + k as f64) / n as f64;
        while u > cumulative && i < n - 1 {
            i += 1;
            cumulative += weights[i] / total;
        }
        out.push(i);
    }
    out
}

/// Weighted mean of the best `top_fraction` particles (by weight, then by last
/// score); heading is averaged on the circle.
pub fn estimate_pose(set: &ParticleSet, top_fraction: f64) -> RoverPose {
    let n = set.len();
    let k = ((top_fraction.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&set.particles[a], &set.particles[b]);
        pb.weight
            .total_cmp(&pa.weight)
            .then(pb.score.total_cmp(&pa.score))
            .then(a.cmp(&b))
    });
    let chosen = &order[..k];
    let mut total: f64 = chosen.iter().map(|&i| set.particles[i].weight).sum();
    let uniform = !(total > 0.0);
    if uniform {
        total = k as f64;
    }
    let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for &i in chosen {
        let p = &set.particles[i];
        let w = if uniform { 1.0 } else { p.weight } / total;
        x += w * p.x;
        y += w * p.y;
        s += w * p.heading.sin();
        c += w * p.heading.cos();
    }
    RoverPose::planar(x, y, s.atan2(c))
}
