use super::{HazardMask, PerspectiveTransform};
use crate::error::{NavError, Result};
use crate::geometry::Point2;
use crate::sim::RoverPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Rover,
    World,
}

/// Binary occupancy grid: 0 traversable, 1 hazard. Cell centers sit on integer
/// multiples of the resolution, so grids of equal resolution share one lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversabilityGrid {
    origin: Point2,
    resolution: f64,
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
    pub frame: Frame,
}

impl TraversabilityGrid {
    /// Empty grid whose lattice covers the box `[min, max]`.
    pub fn covering(min: Point2, max: Point2, resolution: f64, frame: Frame) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(NavError::Config(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if !(min.x <= max.x && min.y <= max.y) {
            return Err(NavError::Config("empty traversability extent".into()));
        }
        let c0 = (min.x / resolution).floor();
        let r0 = (min.y / resolution).floor();
        let cols = ((max.x / resolution).ceil() - c0) as usize + 1;
        let rows = ((max.y / resolution).ceil() - r0) as usize + 1;
        Ok(Self {
            origin: Point2::new(c0 * resolution, r0 * resolution),
            resolution,
            rows,
            cols,
            cells: vec![0; rows * cols],
            frame,
        })
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.cells[row * self.cols + col] = value.min(1);
    }

    pub fn world_of(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            self.origin.x + col as f64 * self.resolution,
            self.origin.y + row as f64 * self.resolution,
        )
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) / self.resolution).round();
        let r = ((p.y - self.origin.y) / self.resolution).round();
        (r >= 0.0 && c >= 0.0 && (r as usize) < self.rows && (c as usize) < self.cols)
            .then_some((r as usize, c as usize))
    }

    /// Hazard lookup; points outside the grid are unknown and reported traversable.
    pub fn is_hazard_at(&self, p: Point2) -> bool {
        self.cell_of(p).is_some_and(|(r, c)| self.get(r, c) == 1)
    }

    pub fn mark(&mut self, p: Point2) -> bool {
        match self.cell_of(p) {
            Some((r, c)) => {
                self.set(r, c, 1);
                true
            }
            None => false,
        }
    }

    pub fn hazard_count(&self) -> usize {
        self.cells.iter().filter(|v| **v == 1).count()
    }

    pub fn hazard_cells(&self) -> Vec<(usize, usize)> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| self.get(r, c) == 1)
            .collect()
    }

    /// Grow hazards by a Euclidean disc of `radius_cells` cells.
    pub fn dilate(&self, radius_cells: usize) -> Self {
        if radius_cells == 0 {
            return self.clone();
        }
        let k = radius_cells as isize;
        let offsets: Vec<(isize, isize)> = (-k..=k)
            .flat_map(|dr| (-k..=k).map(move |dc| (dr, dc)))
            .filter(|(dr, dc)| dr * dr + dc * dc <= k * k)
            .collect();
        let mut out = self.clone();
        for (r, c) in self.hazard_cells() {
            for (dr, dc) in &offsets {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr >= 0 && nc >= 0 && (nr as usize) < self.rows && (nc as usize) < self.cols {
                    out.cells[nr as usize * self.cols + nc as usize] = 1;
                }
            }
        }
        out
    }

    /// OR the hazards of `other` into this grid; cells outside this grid are dropped.
    /// Returns the number of cells that changed from free to hazard.
    pub fn merge(&mut self, other: &TraversabilityGrid) -> usize {
        let mut added = 0;
        for (r, c) in other.hazard_cells() {
            if let Some((sr, sc)) = self.cell_of(other.world_of(r, c)) {
                let i = sr * self.cols + sc;
                if self.cells[i] == 0 {
                    self.cells[i] = 1;
                    added += 1;
                }
            }
        }
        added
    }
}

/// Rover-frame ground points of the mask's hazard pixels.
pub fn hazard_points_rover(mask: &HazardMask, tf: &PerspectiveTransform) -> Vec<Point2> {
    mask.hazard_pixels()
        .into_iter()
        .filter_map(|(r, c)| tf.apply(Point2::new(c as f64, r as f64)))
        .collect()
}

fn to_world(p: Point2, pose: &RoverPose) -> Point2 {
    pose.position() + p.rotate(pose.heading)
}

/// Project hazard pixels onto the ground and rasterize them, dilated by the safety
/// margin. The grid covers the projected RoI plus the margin.
pub fn project_hazards(
    mask: &HazardMask,
    tf: &PerspectiveTransform,
    pose: &RoverPose,
    safety_margin: f64,
    resolution: f64,
) -> Result<TraversabilityGrid> {
    rasterize(mask, tf, Some(pose), safety_margin, resolution)
}

/// As [`project_hazards`], but kept in the rover frame.
pub fn project_hazards_rover(
    mask: &HazardMask,
    tf: &PerspectiveTransform,
    safety_margin: f64,
    resolution: f64,
) -> Result<TraversabilityGrid> {
    rasterize(mask, tf, None, safety_margin, resolution)
}

fn rasterize(
    mask: &HazardMask,
    tf: &PerspectiveTransform,
    pose: Option<&RoverPose>,
    safety_margin: f64,
    resolution: f64,
) -> Result<TraversabilityGrid> {
    if !(safety_margin >= 0.0) {
        return Err(NavError::Config("safety margin must be non-negative".into()));
    }
    let place = |p: Point2| pose.map_or(p, |pose| to_world(p, pose));
    let (lr, lc) = (mask.rows.saturating_sub(1) as f64, mask.cols.saturating_sub(1) as f64);
    let corners: Vec<Point2> = [(0.0, 0.0), (lc, 0.0), (lc, lr), (0.0, lr)]
        .iter()
        .filter_map(|&(x, y)| tf.apply(Point2::new(x, y)))
        .map(place)
        .collect();
    if corners.is_empty() {
        return Err(NavError::SingularGeometry(
            "RoI does not project onto the ground".into(),
        ));
    }
    let pad = safety_margin + resolution;
    let min = corners.iter().fold(Point2::new(f64::INFINITY, f64::INFINITY), |a, p| {
        Point2::new(a.x.min(p.x), a.y.min(p.y))
    });
    let max = corners
        .iter()
        .fold(Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
            Point2::new(a.x.max(p.x), a.y.max(p.y))
        });
    let frame = if pose.is_some() { Frame::World } else { Frame::Rover };
    let mut grid = TraversabilityGrid::covering(
        Point2::new(min.x - pad, min.y - pad),
        Point2::new(max.x + pad, max.y + pad),
        resolution,
        frame,
    )?;
    for p in hazard_points_rover(mask, tf) {
        grid.mark(place(p));
    }
    let radius = (safety_margin / resolution - 1e-9).ceil().max(0.0) as usize;
    Ok(grid.dilate(radius))
}
