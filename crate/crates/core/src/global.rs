//! Absolute position correction by matching the SLAM map against the orbital map.
//!
//! The local map is block-averaged onto the orbital lattice, both maps are turned into
//! gradient magnitude images (which removes any height datum offset), and the local
//! image is slid over a window of the orbital image.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::Point2;
use crate::sim::RoverPose;
use crate::slam::LocalRollingMap;
use crate::terrain::{integer_ratio, ElevationGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Plain sum of products, divided by the number of contributing pixels.
    #[default]
    Raw,
    /// Zero-mean normalized cross-correlation over the contributing pixels.
    Ncc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    pub metric: Metric,
    /// Peak must beat the best non-adjacent local maximum by this ratio.
    pub min_sharpness: f64,
    /// Fraction of the valid local-image pixels that must land on valid orbital
    /// pixels. Offsets with less overlap than this are not scored at all.
    pub min_valid_fraction: f64,
    /// Largest correction accepted, meters.
    pub gate: f64,
    /// How far from the current estimate the match is searched, meters.
    pub search_radius: f64,
    /// Height variance (m²) of the local map that triggers a match attempt.
    pub relief_variance: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            metric: Metric::Raw,
            min_sharpness: 1.2,
            min_valid_fraction: 0.6,
            gate: 10.0,
            search_radius: 10.0,
            relief_variance: 0.05,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_sharpness >= 1.0) {
            return Err(NavError::Config("min_sharpness must be >= 1".into()));
        }
        if !(self.min_valid_fraction >= 0.0 && self.min_valid_fraction <= 1.0) {
            return Err(NavError::Config("min_valid_fraction must lie in [0, 1]".into()));
        }
        if !(self.gate > 0.0 && self.search_radius >= 0.0) {
            return Err(NavError::Config("gate must be positive and search_radius >= 0".into()));
        }
        Ok(())
    }
}

/// Correlation surface and its peak.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Row-major scores; NaN where the offset had too little overlap.
    pub scores: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    /// Orbital index of `scores[0]`.
    pub row0: usize,
    pub col0: usize,
    /// Orbital indices (row, col) where the local map's first cell lands at the peak.
    pub best: (usize, usize),
    /// Parabolic sub-cell refinement of `best`, in cells, each within ±0.5.
    pub subcell: (f64, f64),
    pub peak: f64,
    pub sharpness: f64,
    pub valid_fraction: f64,
    pub accepted: bool,
}

impl MatchResult {
    pub fn score(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.scores[row * self.cols + col];
        (!v.is_nan()).then_some(v)
    }

    /// The full score matrix; unscored offsets are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|c| self.score(r, c).map(|v| format!("{v:.9e}")).unwrap_or_default())
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "match offset=({},{}) subcell=({:.3},{:.3}) peak={:.6e} sharpness={:.4} valid_fraction={:.3} accepted={}",
            self.best.0,
            self.best.1,
            self.subcell.0,
            self.subcell.1,
            self.peak,
            self.sharpness,
            self.valid_fraction,
            self.accepted
        )
    }
}

/// Block-average the local map to the orbital resolution, starting at its first cell.
/// Blocks with fewer than half their cells known are invalid.
pub fn downsample_local(local: &LocalRollingMap, orbital_resolution: f64) -> Result<ElevationGrid> {
    downsample_grid(local.grid(), orbital_resolution)
}

/// Same as [`downsample_local`], but blocks are phased so their centers fall on the
/// orbital lattice (to within one local cell).
pub fn downsample_onto(local: &LocalRollingMap, orbital: &ElevationGrid) -> Result<ElevationGrid> {
    downsample_grid_onto(local.grid(), orbital)
}

/// [`downsample_onto`] for any georeferenced elevation grid.
pub fn downsample_grid_onto(grid: &ElevationGrid, orbital: &ElevationGrid) -> Result<ElevationGrid> {
    let k = integer_ratio(orbital.resolution(), grid.resolution())?;
    let phase = |lo: f64, oo: f64| {
        let s = ((oo - lo) / grid.resolution() - (k - 1) as f64 / 2.0).round() as i64;
        s.rem_euclid(k as i64) as usize
    };
    let r0 = phase(grid.origin().y, orbital.origin().y);
    let c0 = phase(grid.origin().x, orbital.origin().x);
    if r0 >= grid.rows() || c0 >= grid.cols() {
        return Err(NavError::InsufficientData(
            "local map smaller than one orbital cell".into(),
        ));
    }
    let cropped = grid.crop(r0, c0, grid.rows() - r0, grid.cols() - c0)?;
    downsample_grid(&cropped, orbital.resolution())
}

fn downsample_grid(grid: &ElevationGrid, orbital_resolution: f64) -> Result<ElevationGrid> {
    let k = integer_ratio(orbital_resolution, grid.resolution())?;
    if grid.block_mean(k, 1.0)?.valid_count() == 0 {
        return Err(NavError::InsufficientData(
            "local map has no fully known orbital-sized block".into(),
        ));
    }
    grid.block_mean(k, 0.5)
}

/// Gradient magnitude by central differences, one-sided on the border. A cell is
/// invalid when it or any neighbor used for its differences is invalid.
pub fn gradient_magnitude(grid: &ElevationGrid) -> ElevationGrid {
    let (rows, cols, res) = (grid.rows(), grid.cols(), grid.resolution());
    let mut out = grid.clone();
    let axis = |i: usize, n: usize, at: &dyn Fn(usize) -> Option<f64>| -> Option<f64> {
        if n == 1 {
            return Some(0.0);
        }
        if i == 0 {
            Some((at(1)? - at(0)?) / res)
        } else if i == n - 1 {
            Some((at(n - 1)? - at(n - 2)?) / res)
        } else {
            Some((at(i + 1)? - at(i - 1)?) / (2.0 * res))
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            let g = grid.get(r, c).and_then(|_| {
                let gx = axis(c, cols, &|cc| grid.get(r, cc))?;
                let gy = axis(r, rows, &|rr| grid.get(rr, c))?;
                Some(gx.hypot(gy))
            });
            match g {
                Some(v) => out.set(r, c, v),
                None => out.invalidate(r, c),
            }
        }
    }
    out
}

/// Slide `l` over every position inside `o` and score each placement.
pub fn cross_correlate(l: &ElevationGrid, o: &ElevationGrid, params: &MatchParams) -> Result<MatchResult> {
    if l.rows() > o.rows() || l.cols() > o.cols() {
        return Err(NavError::Contract(format!(
            "local image {}x{} larger than orbital image {}x{}",
            l.rows(),
            l.cols(),
            o.rows(),
            o.cols()
        )));
    }
    let rows = o.rows() - l.rows() + 1;
    let cols = o.cols() - l.cols() + 1;
    let valid = l.valid_count();
    let min_overlap = ((params.min_valid_fraction * valid as f64).ceil() as usize).max(1);
    let mut scores = vec![f64::NAN; rows * cols];
    let mut counts = vec![0usize; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let (score, count) = match params.metric {
                Metric::Raw => raw_score(l, o, i, j),
                Metric::Ncc => ncc_score(l, o, i, j),
            };
            counts[i * cols + j] = count;
            if count >= min_overlap {
                scores[i * cols + j] = score;
            }
        }
    }

    let mut best: Option<(usize, f64)> = None;
    for (k, &v) in scores.iter().enumerate() {
        if !v.is_nan() && best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    let Some((bk, peak)) = best else {
        return Ok(MatchResult {
            scores,
            rows,
            cols,
            row0: 0,
            col0: 0,
            best: (0, 0),
            subcell: (0.0, 0.0),
            peak: 0.0,
            sharpness: 1.0,
            valid_fraction: 0.0,
            accepted: false,
        });
    };
    let (bi, bj) = (bk / cols, bk % cols);
    let second = second_peak(&scores, rows, cols, bi, bj);
    let sharpness = match second {
        _ if peak <= 0.0 => 1.0,
        Some(s) if s > 0.0 => peak / s,
        _ => f64::INFINITY,
    };
    let valid_fraction = counts[bk] as f64 / valid as f64;
    let at = |i: isize, j: isize| -> Option<f64> {
        if i < 0 || j < 0 || i as usize >= rows || j as usize >= cols {
            return None;
        }
        let v = scores[i as usize * cols + j as usize];
        (!v.is_nan()).then_some(v)
    };
    let (bi_s, bj_s) = (bi as isize, bj as isize);
    let subcell = (
        parabolic(at(bi_s - 1, bj_s), peak, at(bi_s + 1, bj_s)),
        parabolic(at(bi_s, bj_s - 1), peak, at(bi_s, bj_s + 1)),
    );
    Ok(MatchResult {
        scores,
        rows,
        cols,
        row0: 0,
        col0: 0,
        best: (bi, bj),
        subcell,
        peak,
        sharpness,
        valid_fraction,
        accepted: peak > 0.0 && sharpness >= params.min_sharpness && valid_fraction >= params.min_valid_fraction,
    })
}

fn raw_score(l: &ElevationGrid, o: &ElevationGrid, i: usize, j: usize) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for r in 0..l.rows() {
        for c in 0..l.cols() {
            if let (Some(a), Some(b)) = (l.get(r, c), o.get(i + r, j + c)) {
                sum += a * b;
                count += 1;
            }
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

fn ncc_score(l: &ElevationGrid, o: &ElevationGrid, i: usize, j: usize) -> (f64, usize) {
    let mut pairs = Vec::with_capacity(l.rows() * l.cols());
    for r in 0..l.rows() {
        for c in 0..l.cols() {
            if let (Some(a), Some(b)) = (l.get(r, c), o.get(i + r, j + c)) {
                pairs.push((a, b));
            }
        }
    }
    if pairs.is_empty() {
        return (0.0, 0);
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    let den = (saa * sbb).sqrt();
    (if den > 0.0 { sab / den } else { 0.0 }, pairs.len())
}

/// Largest local maximum outside the 8-neighborhood of the peak.
fn second_peak(scores: &[f64], rows: usize, cols: usize, bi: usize, bj: usize) -> Option<f64> {
    let mut second: Option<f64> = None;
    for i in 0..rows {
        for j in 0..cols {
            if i.abs_diff(bi) <= 1 && j.abs_diff(bj) <= 1 {
                continue;
            }
            let v = scores[i * cols + j];
            if v.is_nan() {
                continue;
            }
            let mut is_max = true;
            for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni as usize >= rows || nj as usize >= cols {
                        continue;
                    }
                    let w = scores[ni as usize * cols + nj as usize];
                    if w > v {
                        is_max = false;
                    }
                }
            }
            if is_max && second.is_none_or(|s| v > s) {
                second = Some(v);
            }
        }
    }
    second
}

fn parabolic(minus: Option<f64>, center: f64, plus: Option<f64>) -> f64 {
    match (minus, plus) {
        (Some(a), Some(b)) => {
            let den = a - 2.0 * center + b;
            if den < 0.0 {
                (0.5 * (a - b) / den).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// Outcome of turning a match into a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub pose: RoverPose,
    /// Correction that was (or would have been) applied.
    pub delta: Point2,
    pub applied: bool,
    pub note: String,
}

/// Move the estimate so that the local map's first cell, believed to be at
/// `local_origin`, sits where the match put it on the orbital map. Heading is kept.
pub fn apply_correction(
    m: &MatchResult,
    estimate: &RoverPose,
    orbital: &ElevationGrid,
    local_origin: Point2,
    gate: f64,
) -> Correction {
    let res = orbital.resolution();
    let matched = orbital.world_of(m.best.0, m.best.1) + Point2::new(m.subcell.1 * res, m.subcell.0 * res);
    let delta = matched - local_origin;
    if !m.accepted {
        return Correction {
            pose: *estimate,
            delta,
            applied: false,
            note: "match not accepted".into(),
        };
    }
    if delta.norm() > gate {
        return Correction {
            pose: *estimate,
            delta,
            applied: false,
            note: format!("correction {:.2} m exceeds gate {gate:.2} m", delta.norm()),
        };
    }
    let mut pose = *estimate;
    pose.x += delta.x;
    pose.y += delta.y;
    Correction {
        pose,
        delta,
        applied: true,
        note: format!("corrected by ({:.3}, {:.3})", delta.x, delta.y),
    }
}

/// Whether the local map has enough relief to be worth matching.
pub fn relief_triggered(local: &LocalRollingMap, params: &MatchParams) -> bool {
    local
        .grid()
        .height_variance()
        .is_some_and(|v| v >= params.relief_variance)
}

/// Everything produced by one global localization attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFix {
    pub result: MatchResult,
    /// Believed world position of the first cell of the downsampled local map.
    pub local_origin: Point2,
    pub correction: Correction,
}

/// Full pipeline: downsample onto the orbital lattice, take gradients, correlate
/// within the search window around the estimate and derive the correction.
pub fn localize(
    local: &LocalRollingMap,
    orbital: &ElevationGrid,
    estimate: &RoverPose,
    params: &MatchParams,
) -> Result<GlobalFix> {
    localize_grid(local.grid(), orbital, estimate, params)
}

/// [`localize`] for a local elevation grid georeferenced by the pose estimate.
pub fn localize_grid(
    local: &ElevationGrid,
    orbital: &ElevationGrid,
    estimate: &RoverPose,
    params: &MatchParams,
) -> Result<GlobalFix> {
    params.validate()?;
    let coarse = downsample_grid_onto(local, orbital)?;
    let grad = gradient_magnitude(&coarse);
    let (r0, c0, nr, nc) = grad
        .valid_bounds()
        .ok_or_else(|| NavError::InsufficientData("no valid gradient in local map".into()))?;
    let l = grad.crop(r0, c0, nr, nc)?;
    let local_origin = l.origin();

    let res = orbital.resolution();
    let bi = ((local_origin.y - orbital.origin().y) / res).round() as isize;
    let bj = ((local_origin.x - orbital.origin().x) / res).round() as isize;
    let s = (params.search_radius / res).ceil() as isize;
    let lo_r = (bi - s).max(0);
    let lo_c = (bj - s).max(0);
    let hi_r = (bi + s + nr as isize).min(orbital.rows() as isize);
    let hi_c = (bj + s + nc as isize).min(orbital.cols() as isize);
    if hi_r - lo_r < nr as isize || hi_c - lo_c < nc as isize {
        return Err(NavError::InsufficientData(
            "search window around the estimate leaves the orbital map".into(),
        ));
    }
    let o = gradient_magnitude(orbital).crop(
        lo_r as usize,
        lo_c as usize,
        (hi_r - lo_r) as usize,
        (hi_c - lo_c) as usize,
    )?;
    let mut result = cross_correlate(&l, &o, params)?;
    result.row0 = lo_r as usize;
    result.col0 = lo_c as usize;
    result.best = (result.best.0 + result.row0, result.best.1 + result.col0);
    let correction = apply_correction(&result, estimate, orbital, local_origin, params.gate);
    Ok(GlobalFix {
        result,
        local_origin,
        correction,
    })
}

/// Text block written next to the CSV: one summary line plus the correction note.
pub fn describe(fix: &GlobalFix) -> String {
    let mut s = fix.result.summary();
    let _ = write!(s, " applied={} {}", fix.correction.applied, fix.correction.note);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn grid(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> ElevationGrid {
        let mut g = ElevationGrid::filled(Point2::new(0.0, 0.0), 1.0, rows, cols, 0.0).unwrap();
        for r in 0..rows {
            for c in 0..cols {
                g.set(r, c, f(r, c));
            }
        }
        g
    }

    #[test]
    fn gradient_examples() {
        let flat = grid(5, 6, |_, _| 3.0);
        assert!(gradient_magnitude(&flat).valid_heights().all(|v| v == 0.0));
        let ramp = grid(5, 6, |r, c| 0.5 * c as f64 + 0.25 * r as f64);
        let g = gradient_magnitude(&ramp);
        let want = 0.5f64.hypot(0.25);
        assert!(g.valid_heights().all(|v| (v - want).abs() < 1e-12));
    }

    #[test]
    fn invalid_neighbor_propagates() {
        let mut g = grid(5, 5, |r, c| (r * c) as f64);
        g.invalidate(2, 2);
        let out = gradient_magnitude(&g);
        for (r, c) in [(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)] {
            assert!(out.get(r, c).is_none(), "({r},{c})");
        }
        assert!(out.get(1, 1).is_some());
    }

    #[test]
    fn single_pixel_kernel_reads_orbital() {
        let o = grid(6, 7, |r, c| (r * 7 + c) as f64 * 0.1 + 0.05);
        let mut l = ElevationGrid::unknown(Point2::new(0.0, 0.0), 1.0, 2, 2).unwrap();
        l.set(0, 0, 1.0);
        let m = cross_correlate(&l, &o, &MatchParams::default()).unwrap();
        for i in 0..m.rows {
            for j in 0..m.cols {
                assert_eq!(m.score(i, j), o.get(i, j));
            }
        }
        let one = grid(1, 1, |_, _| 1.0);
        let m = cross_correlate(&one, &o, &MatchParams::default()).unwrap();
        assert_eq!(m.scores, o.heights());
    }

    #[test]
    fn zero_kernel_is_not_accepted() {
        let o = grid(10, 10, |r, c| ((r * 3 + c * 5) % 7) as f64);
        let l = grid(4, 4, |_, _| 0.0);
        for metric in [Metric::Raw, Metric::Ncc] {
            let m = cross_correlate(
                &l,
                &o,
                &MatchParams {
                    metric,
                    ..MatchParams::default()
                },
            )
            .unwrap();
            assert!(m.scores.iter().all(|&v| v == 0.0));
            assert!(!m.accepted);
            assert!(m.sharpness >= 1.0);
        }
    }

    #[test]
    fn larger_kernel_is_a_contract_error() {
        let o = grid(4, 4, |_, _| 1.0);
        let l = grid(5, 3, |_, _| 1.0);
        assert!(matches!(
            cross_correlate(&l, &o, &MatchParams::default()),
            Err(NavError::Contract(_))
        ));
    }

    #[test]
    fn correction_examples() {
        let orbital = ElevationGrid::filled(Point2::new(0.0, 0.0), 0.5, 100, 100, 0.0).unwrap();
        let est = RoverPose::planar(20.0, 20.0, 0.3);
        let mut m = MatchResult {
            scores: vec![1.0],
            rows: 1,
            cols: 1,
            row0: 0,
            col0: 0,
            best: (20, 30),
            subcell: (0.0, 0.0),
            peak: 1.0,
            sharpness: 2.0,
            valid_fraction: 1.0,
            accepted: true,
        };
        let same = apply_correction(&m, &est, &orbital, Point2::new(15.0, 10.0), 10.0);
        assert!(same.applied && same.delta == Point2::new(0.0, 0.0) && same.pose == est);
        let west = apply_correction(&m, &est, &orbital, Point2::new(17.0, 10.0), 10.0);
        assert_eq!(west.pose.x, 18.0);
        assert_eq!(west.pose.heading, 0.3);
        m.best = (20, 130);
        let far = apply_correction(&m, &est, &orbital, Point2::new(15.0, 10.0), 10.0);
        assert!(!far.applied && far.pose == est);
        m.best = (20, 30);
        m.accepted = false;
        assert!(!apply_correction(&m, &est, &orbital, Point2::new(17.0, 10.0), 10.0).applied);
    }

    #[test]
    fn downsample_examples() {
        let mut map = LocalRollingMap::new(Point2::new(0.0, 0.0), 20, 20, 0.1).unwrap();
        assert!(matches!(
            downsample_local(&map, 0.5),
            Err(NavError::InsufficientData(_))
        ));
        for r in 0..20 {
            for c in 0..20 {
                map.set_cell(r, c, 2.0, 0.1);
            }
        }
        let d = downsample_local(&map, 0.5).unwrap();
        assert_eq!((d.rows(), d.cols()), (4, 4));
        assert!(d.valid_heights().all(|v| v == 2.0));
        let same = downsample_local(&map, 0.1).unwrap();
        assert_eq!(same.heights(), map.grid().heights());
    }

    #[test]
    fn onto_lattice_centers_match() {
        let orbital = ElevationGrid::filled(Point2::new(0.2, 0.2), 0.5, 40, 40, 0.0).unwrap();
        let mut map = LocalRollingMap::new(Point2::new(7.3, 6.1), 60, 60, 0.1).unwrap();
        let cloud: Vec<Vector3<f64>> = (0..60)
            .flat_map(|r| (0..60).map(move |c| (r, c)))
            .map(|(r, c)| {
                let p = map.grid().world_of(r, c);
                Vector3::new(p.x, p.y, 0.0)
            })
            .collect();
        map.fuse_observation(&cloud, 0.1).unwrap();
        let d = downsample_onto(&map, &orbital).unwrap();
        let o = d.origin() - orbital.origin();
        let frac = |v: f64| (v / 0.5 - (v / 0.5).round()).abs();
        assert!(frac(o.x) < 1e-9 && frac(o.y) < 1e-9, "{o:?}");
    }
}
