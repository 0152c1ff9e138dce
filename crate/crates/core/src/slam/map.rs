use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{NavError, Result};
use crate::geometry::Point2;
use crate::terrain::{write_asc, ElevationGrid};

/// Rover-centered elevation map of fixed size with per-cell variance.
///
/// The anchor (world position of the center cell) only moves in whole cells, so
/// cell contents never get resampled; the sub-cell remainder is kept as `residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRollingMap {
    grid: ElevationGrid,
    variance: Vec<f64>,
    anchor: Point2,
    residual: Point2,
}

impl LocalRollingMap {
    pub fn new(center: Point2, rows: usize, cols: usize, resolution: f64) -> Result<Self> {
        let origin = Self::origin_for(center, rows, cols, resolution);
        let grid = ElevationGrid::unknown(origin, resolution, rows, cols)?;
        Ok(Self {
            grid,
            variance: vec![0.0; rows * cols],
            anchor: center,
            residual: Point2::default(),
        })
    }

    fn origin_for(center: Point2, rows: usize, cols: usize, resolution: f64) -> Point2 {
        Point2::new(
            center.x - (cols / 2) as f64 * resolution,
            center.y - (rows / 2) as f64 * resolution,
        )
    }

    pub fn grid(&self) -> &ElevationGrid {
        &self.grid
    }

    pub fn anchor(&self) -> Point2 {
        self.anchor
    }

    pub fn residual(&self) -> Point2 {
        self.residual
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution()
    }

    pub fn rows(&self) -> usize {
        self.grid.rows()
    }

    pub fn cols(&self) -> usize {
        self.grid.cols()
    }

    /// (height, variance) of a valid cell.
    pub fn cell(&self, row: usize, col: usize) -> Option<(f64, f64)> {
        self.grid
            .get(row, col)
            .map(|h| (h, self.variance[self.grid.index(row, col)]))
    }

    pub fn set_cell(&mut self, row: usize, col: usize, height: f64, variance: f64) {
        self.grid.set(row, col, height);
        let i = self.grid.index(row, col);
        self.variance[i] = variance;
    }

    /// Height of the cell containing `p`, if known.
    pub fn height_at(&self, p: Point2) -> Option<f64> {
        let (r, c) = self.grid.grid_of(p)?;
        self.grid.get(r, c)
    }

    pub fn valid_count(&self) -> usize {
        self.grid.valid_count()
    }

    /// Fuse a world-frame pointcloud. Points are binned per cell; each bin becomes one
    /// observation (mean z, variance σ_z²/count) fused by the scalar Kalman update.
    /// Points outside the map are dropped. Returns the number of cells touched.
    pub fn fuse_observation(&mut self, cloud: &[Vector3<f64>], sigma_z: f64) -> Result<usize> {
        if !(sigma_z > 0.0) {
            return Err(NavError::Config(format!("sigma_z must be positive, got {sigma_z}")));
        }
        let mut bins: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for p in cloud {
            if !p.z.is_finite() {
                continue;
            }
            if let Some((r, c)) = self.grid.grid_of(Point2::new(p.x, p.y)) {
                let e = bins.entry(self.grid.index(r, c)).or_insert((0.0, 0));
                e.0 += p.z;
                e.1 += 1;
            }
        }
        let var_point = sigma_z * sigma_z;
        for (&i, &(sum, n)) in &bins {
            let (r, c) = (i / self.cols(), i % self.cols());
            let obs = (sum / n as f64, var_point / n as f64);
            let fused = match self.cell(r, c) {
                Some(prior) => kalman_fuse(prior, obs),
                None => obs,
            };
            self.set_cell(r, c, fused.0, fused.1);
        }
        Ok(bins.len())
    }

    /// Move the map so its anchor follows `new_center` in whole cells.
    pub fn shift_map(&mut self, new_center: Point2) {
        let res = self.resolution();
        let d = new_center - self.anchor;
        let whole = |v: f64| {
            let q = v / res;
            if (q - q.round()).abs() < 1e-9 {
                q.round()
            } else {
                q.trunc()
            }
        };
        let (kx, ky) = (whole(d.x), whole(d.y));
        if kx != 0.0 || ky != 0.0 {
            self.translate_cells(ky as isize, kx as isize);
            self.anchor = self.anchor + Point2::new(kx * res, ky * res);
        }
        self.residual = new_center - self.anchor;
    }

    fn translate_cells(&mut self, dr: isize, dc: isize) {
        let (rows, cols) = (self.rows() as isize, self.cols() as isize);
        let origin = Self::origin_for(
            self.anchor + Point2::new(dc as f64 * self.resolution(), dr as f64 * self.resolution()),
            self.rows(),
            self.cols(),
            self.resolution(),
        );
        let mut grid = ElevationGrid::unknown(origin, self.resolution(), self.rows(), self.cols())
            .expect("same geometry as before");
        let mut variance = vec![0.0; self.variance.len()];
        for r in 0..rows {
            let sr = r + dr;
            if sr < 0 || sr >= rows {
                continue;
            }
            for c in 0..cols {
                let sc = c + dc;
                if sc < 0 || sc >= cols {
                    continue;
                }
                if let Some(h) = self.grid.get(sr as usize, sc as usize) {
                    grid.set(r as usize, c as usize, h);
                    variance[(r * cols + c) as usize] = self.variance[(sr * cols + sc) as usize];
                }
            }
        }
        self.grid = grid;
        self.variance = variance;
    }

    /// Re-georeference the map by `delta` without touching its contents, e.g. after
    /// an absolute correction of the pose it was built from.
    pub fn translate_frame(&mut self, delta: Point2) {
        self.grid = self.grid.translated(delta);
        self.anchor = self.anchor + delta;
    }

    /// Variance as a grid (invalid where the height is unknown).
    pub fn variance_grid(&self) -> ElevationGrid {
        let mut g = self.grid.clone();
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                if let Some((_, v)) = self.cell(r, c) {
                    g.set(r, c, v);
                }
            }
        }
        g
    }

    /// Write `<stem>.asc` (heights) and `<stem>_var.asc` (variances) into `dir`.
    pub fn write_snapshot(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        write_asc(&self.grid, dir.join(format!("{stem}.asc")))?;
        write_asc(&self.variance_grid(), dir.join(format!("{stem}_var.asc")))
    }
}

/// Scalar Kalman update of two Gaussian height estimates `(mean, variance)`.
pub fn kalman_fuse(prior: (f64, f64), obs: (f64, f64)) -> (f64, f64) {
    let (mu, var) = prior;
    let (mu_o, var_o) = obs;
    let sum = var + var_o;
    ((mu * var_o + mu_o * var) / sum, var * var_o / sum)
}
