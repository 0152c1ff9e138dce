//! Local path repair: a grid Dijkstra detour around registered hazards that rejoins
//! the global path as early as possible, then line-of-sight smoothing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{NavError, Result};
use crate::geometry::{polyline_length, project_on_segment, Point2};
use crate::hazard::TraversabilityGrid;

/// Ground-planned waypoint route with its safety corridor half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPath {
    waypoints: Vec<Point2>,
    corridor: f64,
    cumulative: Vec<f64>,
}

impl GlobalPath {
    pub fn new(waypoints: Vec<Point2>, corridor: f64) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(NavError::Config("a global path needs at least two waypoints".into()));
        }
        if !(corridor > 0.0) {
            return Err(NavError::Config(format!("corridor must be positive, got {corridor}")));
        }
        let mut cumulative = vec![0.0];
        for (i, w) in waypoints.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if !(len > 0.0) {
                return Err(NavError::Config(format!("waypoints {i} and {} coincide", i + 1)));
            }
            cumulative.push(cumulative[i] + len);
        }
        Ok(Self {
            waypoints,
            corridor,
            cumulative,
        })
    }

    /// Parse one `x y` pair per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, corridor: f64) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| NavError::Parse(format!("path line {}: {e}", n + 1)))?;
            if v.len() != 2 {
                return Err(NavError::Parse(format!("path line {}: expected 'x y'", n + 1)));
            }
            points.push(Point2::new(v[0], v[1]));
        }
        Self::new(points, corridor)
    }

    pub fn load(path: impl AsRef<Path>, corridor: f64) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, corridor)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.waypoints {
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
        out
    }

    pub fn waypoints(&self) -> &[Point2] {
        &self.waypoints
    }

    pub fn corridor(&self) -> f64 {
        self.corridor
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    /// Arc length at waypoint `i`.
    pub fn arc_length_at(&self, i: usize) -> f64 {
        self.cumulative[i]
    }

    /// Index of the segment holding arc length `s`.
    pub fn segment_at(&self, s: f64) -> usize {
        let n = self.waypoints.len() - 1;
        self.cumulative[1..].partition_point(|&c| c < s).min(n - 1)
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let len = self.cumulative[i + 1] - self.cumulative[i];
        self.waypoints[i].lerp(self.waypoints[i + 1], (s - self.cumulative[i]) / len)
    }

    /// Closest point at or after arc length `min_s`: (arc length, distance).
    pub fn project(&self, p: Point2, min_s: f64) -> (f64, f64) {
        let mut best = (min_s.clamp(0.0, self.length()), f64::INFINITY);
        best.1 = p.distance(self.point_at(best.0));
        for (i, w) in self.waypoints.windows(2).enumerate() {
            if self.cumulative[i + 1] < min_s {
                continue;
            }
            let len = self.cumulative[i + 1] - self.cumulative[i];
            let t = project_on_segment(p, w[0], w[1]);
            let s = (self.cumulative[i] + t * len).max(min_s);
            let d = p.distance(self.point_at(s));
            if d < best.1 {
                best = (s, d);
            }
        }
        best
    }

    /// Index of the first waypoint strictly beyond arc length `s`.
    pub fn next_waypoint_after(&self, s: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= s + 1e-9)
    }
}

/// Detour from the rover to the rejoin point on the global path.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairedPath {
    pub waypoints: Vec<Point2>,
    /// First global waypoint to follow after the detour.
    pub rejoin_index: usize,
    /// Arc length of the rejoin point along the global path.
    pub rejoin_s: f64,
}

impl RepairedPath {
    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }

    /// The detour followed by the rest of the global path.
    pub fn then_global(&self, global: &GlobalPath) -> Vec<Point2> {
        let rest = &global.waypoints()[self.rejoin_index.min(global.waypoints().len())..];
        let mut out: Vec<Point2> = Vec::with_capacity(self.waypoints.len() + rest.len());
        for p in self.waypoints.iter().chain(rest) {
            if out.last().is_some_and(|q| q.distance(*p) < 1e-9) {
                continue;
            }
            out.push(*p);
        }
        out
    }
}

/// True when no cell the segment passes through is a hazard.
///
/// Cells are walked exactly (grid traversal), so any point on the segment, and any
/// part of it, is judged the same way as the whole.
pub fn segment_free(a: Point2, b: Point2, trav: &TraversabilityGrid) -> bool {
    let res = trav.resolution();
    let o = trav.origin();
    // Cell coordinates in which cell (r, c) spans [c, c + 1) × [r, r + 1).
    let (ua, va) = ((a.x - o.x) / res + 0.5, (a.y - o.y) / res + 0.5);
    let (ub, vb) = ((b.x - o.x) / res + 0.5, (b.y - o.y) / res + 0.5);
    let hazard = |i: i64, j: i64| {
        i >= 0
            && j >= 0
            && (j as usize) < trav.rows()
            && (i as usize) < trav.cols()
            && trav.get(j as usize, i as usize) != 0
    };
    let (mut i, mut j) = (ua.floor() as i64, va.floor() as i64);
    let (ie, je) = (ub.floor() as i64, vb.floor() as i64);
    let (du, dv) = (ub - ua, vb - va);
    let (si, sj) = (du.signum() as i64, dv.signum() as i64);
    let first_crossing = |x: f64, cell: i64, d: f64| {
        if d > 0.0 {
            (cell as f64 + 1.0 - x) / d
        } else if d < 0.0 {
            (x - cell as f64) / -d
        } else {
            f64::INFINITY
        }
    };
    let (mut ti, mut tj) = (first_crossing(ua, i, du), first_crossing(va, j, dv));
    let (di, dj) = (1.0 / du.abs(), 1.0 / dv.abs());
    let steps = (ie - i).abs() + (je - j).abs();
    for _ in 0..=steps {
        if hazard(i, j) {
            return false;
        }
        if (i, j) == (ie, je) || (ti > 1.0 && tj > 1.0) {
            break;
        }
        // Near-ties count as corners so that a segment and its pieces agree.
        if ti < tj - 1e-9 {
            i += si;
            ti += di;
        } else if tj < ti - 1e-9 {
            j += sj;
            tj += dj;
        } else {
            // Through a corner: both side cells are touched.
            if hazard(i + si, j) || hazard(i, j + sj) {
                return false;
            }
            i += si;
            j += sj;
            ti += di;
            tj += dj;
        }
    }
    !hazard(ie, je)
}

pub fn polyline_free(points: &[Point2], trav: &TraversabilityGrid) -> bool {
    match points {
        [] => true,
        [p] => !trav.is_hazard_at(*p),
        _ => points.windows(2).all(|w| segment_free(w[0], w[1], trav)),
    }
}

pub fn validate(path: &RepairedPath, trav: &TraversabilityGrid) -> bool {
    polyline_free(&path.waypoints, trav)
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source grid Dijkstra, 8-connected, diagonal cost √2 (in cells), no corner
/// cutting. Returns (cost in meters, predecessor) per cell.
pub fn grid_dijkstra(trav: &TraversabilityGrid, start: (usize, usize), max_cost: f64) -> (Vec<f64>, Vec<usize>) {
    let (rows, cols) = (trav.rows(), trav.cols());
    let res = trav.resolution();
    let mut dist = vec![f64::INFINITY; rows * cols];
    let mut prev = vec![usize::MAX; rows * cols];
    let mut heap = BinaryHeap::new();
    let s = start.0 * cols + start.1;
    dist[s] = 0.0;
    heap.push(Entry { cost: 0.0, index: s });
    let free = |r: isize, c: isize| {
        r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols && trav.get(r as usize, c as usize) == 0
    };
    while let Some(Entry { cost, index }) = heap.pop() {
        if cost > dist[index] {
            continue;
        }
        let (r, c) = ((index / cols) as isize, (index % cols) as isize);
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                if (dr == 0 && dc == 0) || !free(r + dr, c + dc) {
                    continue;
                }
                if dr != 0 && dc != 0 && !(free(r + dr, c) && free(r, c + dc)) {
                    continue;
                }
                let step = if dr != 0 && dc != 0 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                } * res;
                let next = cost + step;
                if next > max_cost {
                    continue;
                }
                let j = (r + dr) as usize * cols + (c + dc) as usize;
                if next < dist[j] {
                    dist[j] = next;
                    prev[j] = index;
                    heap.push(Entry { cost: next, index: j });
                }
            }
        }
    }
    (dist, prev)
}

/// Greedy line-of-sight shortcutting: from each kept point jump to the farthest
/// later point still visible over free cells.
pub fn smooth(points: &[Point2], trav: &TraversabilityGrid) -> Vec<Point2> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let j = (i + 2..points.len())
            .rev()
            .find(|&j| segment_free(points[i], points[j], trav))
            .unwrap_or(i + 1);
        out.push(points[j]);
        i = j;
    }
    out
}

/// Path samples considered as rejoin candidates: every half cell from the pose's
/// projection on, limited to points within `max_rejoin_dist` of the pose.
pub fn rejoin_samples(
    pose: Point2,
    global: &GlobalPath,
    s0: f64,
    step: f64,
    max_rejoin_dist: f64,
) -> Vec<(f64, Point2)> {
    let s_end = (s0 + 3.0 * max_rejoin_dist).min(global.length());
    let n = ((s_end - s0) / step).floor() as usize;
    let mut out: Vec<(f64, Point2)> = (0..=n)
        .map(|k| s0 + k as f64 * step)
        .chain((s_end > s0 + n as f64 * step).then_some(s_end))
        .map(|s| (s, global.point_at(s)))
        .filter(|(_, p)| p.distance(pose) <= max_rejoin_dist)
        .collect();
    out.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    out
}

pub fn repair(
    pose: Point2,
    global: &GlobalPath,
    trav: &TraversabilityGrid,
    max_rejoin_dist: f64,
) -> Result<RepairedPath> {
    repair_from(pose, global, trav, max_rejoin_dist, 0.0)
}

/// Repair considering only the part of the global path beyond arc length `min_s`.
pub fn repair_from(
    pose: Point2,
    global: &GlobalPath,
    trav: &TraversabilityGrid,
    max_rejoin_dist: f64,
    min_s: f64,
) -> Result<RepairedPath> {
    repair_with_clearance(pose, global, trav, max_rejoin_dist, min_s, 0.0)
}

fn global_clear(global: &GlobalPath, trav: &TraversabilityGrid, s: f64, clearance: f64) -> bool {
    let step = trav.resolution() / 2.0;
    let end = (s + clearance).min(global.length());
    let n = ((end - s) / step).ceil() as usize;
    (0..=n).all(|k| !trav.is_hazard_at(global.point_at((s + k as f64 * step).min(end))))
}

/// As [`repair_from`], but the global path must also stay free for `clearance`
/// meters after the rejoin point, so that obstacles a few meters apart are passed
/// in one detour.
pub fn repair_with_clearance(
    pose: Point2,
    global: &GlobalPath,
    trav: &TraversabilityGrid,
    max_rejoin_dist: f64,
    min_s: f64,
    clearance: f64,
) -> Result<RepairedPath> {
    if !(max_rejoin_dist > 0.0) {
        return Err(NavError::Config("max_rejoin_dist must be positive".into()));
    }
    let start = trav
        .cell_of(pose)
        .ok_or_else(|| NavError::Contract("rover outside the traversability grid".into()))?;
    if trav.get(start.0, start.1) != 0 {
        return Err(NavError::Contract("rover cell is marked as hazard".into()));
    }
    let (s0, _) = global.project(pose, min_s);
    let samples = rejoin_samples(pose, global, s0, trav.resolution() / 2.0, max_rejoin_dist);
    let blocked: Vec<bool> = samples.iter().map(|(_, p)| trav.is_hazard_at(*p)).collect();

    let first_blocked = blocked.iter().position(|b| *b);
    let target = global.point_at(s0);
    if first_blocked.is_none() && segment_free(pose, target, trav) {
        return Ok(RepairedPath {
            waypoints: vec![pose, target],
            rejoin_index: global.next_waypoint_after(s0),
            rejoin_s: s0,
        });
    }
    // With the path itself free but the way back to it blocked, any free sample will do.
    let run_end = first_blocked.map_or(0, |fb| fb + blocked[fb..].iter().take_while(|b| **b).count());

    let (dist, prev) = grid_dijkstra(trav, start, 3.0 * max_rejoin_dist);
    let cols = trav.cols();
    let chosen = samples[run_end..]
        .iter()
        .zip(&blocked[run_end..])
        .filter(|(_, b)| !**b)
        .map(|(s, _)| *s)
        .find(|(s, p)| {
            trav.cell_of(*p).is_some_and(|(r, c)| dist[r * cols + c].is_finite())
                && (clearance <= 0.0 || global_clear(global, trav, *s, clearance))
        });
    let Some((rejoin_s, rejoin_point)) = chosen else {
        return Err(NavError::PathBlocked(format!(
            "no reachable rejoin point within {max_rejoin_dist} m"
        )));
    };

    let (gr, gc) = trav.cell_of(rejoin_point).expect("checked above");
    let mut cells = vec![gr * cols + gc];
    while let Some(&last) = cells.last() {
        let p = prev[last];
        if p == usize::MAX {
            break;
        }
        cells.push(p);
    }
    cells.reverse();
    let mut raw = vec![pose];
    raw.extend(cells.iter().skip(1).map(|&i| trav.world_of(i / cols, i % cols)));
    if raw.len() > 1 {
        raw.pop();
    }
    raw.push(rejoin_point);

    Ok(RepairedPath {
        waypoints: smooth(&raw, trav),
        rejoin_index: global.next_waypoint_after(rejoin_s),
        rejoin_s,
    })
}
