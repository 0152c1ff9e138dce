use crate::error::{NavError, Result};
use crate::geometry::Point2;

/// Snapping tolerance (in cells) applied when a world coordinate lands on a cell center.
const SNAP_CELLS: f64 = 1e-9;

/// Regular 2.5D height grid.
///
/// Cell `(row, col)` has its center at `origin + (col * resolution, row * resolution)`:
/// columns run east (+x), rows run north (+y), storage is row-major. Cells may be
/// unknown; unknown cells carry a cleared validity flag and their stored height is
/// meaningless.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    origin: Point2,
    resolution: f64,
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
    valid: Vec<bool>,
}

/// Why a bilinear lookup failed. Kept allocation-free for the ray-marching hot loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SampleFail {
    OutOfExtent,
    Unknown(usize, usize),
}

impl ElevationGrid {
    fn check_geometry(origin: Point2, resolution: f64, rows: usize, cols: usize) -> Result<()> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(NavError::Config(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(NavError::Config(format!(
                "grid must have at least one cell, got {rows}x{cols}"
            )));
        }
        if !origin.x.is_finite() || !origin.y.is_finite() {
            return Err(NavError::Config("grid origin must be finite".into()));
        }
        Ok(())
    }

    /// A grid with every cell valid and set to `value`.
    pub fn filled(origin: Point2, resolution: f64, rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::check_geometry(origin, resolution, rows, cols)?;
        if !value.is_finite() {
            return Err(NavError::Config("fill height must be finite".into()));
        }
        Ok(Self {
            origin,
            resolution,
            rows,
            cols,
            heights: vec![value; rows * cols],
            valid: vec![true; rows * cols],
        })
    }

    /// A grid with every cell unknown.
    pub fn unknown(origin: Point2, resolution: f64, rows: usize, cols: usize) -> Result<Self> {
        Self::check_geometry(origin, resolution, rows, cols)?;
        Ok(Self {
            origin,
            resolution,
            rows,
            cols,
            heights: vec![0.0; rows * cols],
            valid: vec![false; rows * cols],
        })
    }

    /// Build from row-major heights; non-finite heights become unknown cells.
    pub fn from_heights(origin: Point2, resolution: f64, rows: usize, cols: usize, heights: Vec<f64>) -> Result<Self> {
        Self::check_geometry(origin, resolution, rows, cols)?;
        if heights.len() != rows * cols {
            return Err(NavError::Contract(format!(
                "expected {} heights, got {}",
                rows * cols,
                heights.len()
            )));
        }
        let valid: Vec<bool> = heights.iter().map(|h| h.is_finite()).collect();
        let heights = heights
            .into_iter()
            .map(|h| if h.is_finite() { h } else { 0.0 })
            .collect();
        Ok(Self {
            origin,
            resolution,
            rows,
            cols,
            heights,
            valid,
        })
    }

    /// Build from a closure evaluated at every cell center.
    pub fn from_fn(
        origin: Point2,
        resolution: f64,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(Point2) -> f64,
    ) -> Result<Self> {
        Self::check_geometry(origin, resolution, rows, cols)?;
        let mut heights = Vec::with_capacity(rows * cols);
        for row in 0..rows {
            for col in 0..cols {
                heights.push(f(Point2::new(
                    origin.x + col as f64 * resolution,
                    origin.y + row as f64 * resolution,
                )));
            }
        }
        Self::from_heights(origin, resolution, rows, cols, heights)
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

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[self.index(row, col)]
    }

    /// Height of a cell, `None` when unknown.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.index(row, col);
        self.valid[i].then(|| self.heights[i])
    }

    pub fn set(&mut self, row: usize, col: usize, height: f64) {
        debug_assert!(height.is_finite());
        let i = self.index(row, col);
        self.heights[i] = height;
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, row: usize, col: usize) {
        let i = self.index(row, col);
        self.valid[i] = false;
        self.heights[i] = 0.0;
    }

    /// World coordinates of a cell center.
    pub fn world_of(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            self.origin.x + col as f64 * self.resolution,
            self.origin.y + row as f64 * self.resolution,
        )
    }

    /// Cell whose center is nearest to `p`, if it lies on the grid.
    pub fn grid_of(&self, p: Point2) -> Option<(usize, usize)> {
        let col = ((p.x - self.origin.x) / self.resolution).round();
        let row = ((p.y - self.origin.y) / self.resolution).round();
        if row < 0.0 || col < 0.0 || row >= self.rows as f64 || col >= self.cols as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    /// Minimum corner of the interpolation extent (the center of cell (0, 0)).
    pub fn extent_min(&self) -> Point2 {
        self.origin
    }

    /// Maximum corner of the interpolation extent (the center of the last cell).
    pub fn extent_max(&self) -> Point2 {
        self.world_of(self.rows - 1, self.cols - 1)
    }

    /// Whether `p` lies inside the interpolation extent.
    pub fn contains(&self, p: Point2) -> bool {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        fx >= -SNAP_CELLS
            && fy >= -SNAP_CELLS
            && fx <= (self.cols - 1) as f64 + SNAP_CELLS
            && fy <= (self.rows - 1) as f64 + SNAP_CELLS
    }

    #[inline]
    pub(crate) fn bilinear(&self, x: f64, y: f64) -> std::result::Result<f64, SampleFail> {
        let (c0, c1, t) =
            Self::axis((x - self.origin.x) / self.resolution, self.cols).ok_or(SampleFail::OutOfExtent)?;
        let (r0, r1, u) =
            Self::axis((y - self.origin.y) / self.resolution, self.rows).ok_or(SampleFail::OutOfExtent)?;
        let fetch = |r: usize, c: usize| {
            let i = r * self.cols + c;
            if self.valid[i] {
                Ok(self.heights[i])
            } else {
                Err(SampleFail::Unknown(r, c))
            }
        };
        let h00 = fetch(r0, c0)?;
        let h01 = fetch(r0, c1)?;
        let h10 = fetch(r1, c0)?;
        let h11 = fetch(r1, c1)?;
        Ok((1.0 - u) * ((1.0 - t) * h00 + t * h01) + u * ((1.0 - t) * h10 + t * h11))
    }

    /// Lower cell, upper cell and fractional weight along one axis.
    #[inline]
    fn axis(f: f64, n: usize) -> Option<(usize, usize, f64)> {
        let max = (n - 1) as f64;
        if !(f >= -SNAP_CELLS && f <= max + SNAP_CELLS) {
            return None;
        }
        let mut f = f.clamp(0.0, max);
        let nearest = f.round();
        if (f - nearest).abs() < SNAP_CELLS {
            f = nearest;
        }
        if n == 1 {
            return Some((0, 0, 0.0));
        }
        let lo = (f.floor() as usize).min(n - 2);
        Some((lo, lo + 1, f - lo as f64))
    }

    /// Bilinear interpolation of the four cells around `p`.
    pub fn sample_height(&self, p: Point2) -> Result<f64> {
        self.bilinear(p.x, p.y).map_err(|e| match e {
            SampleFail::OutOfExtent => NavError::OutOfBounds(format!("({:.3}, {:.3}) outside grid extent", p.x, p.y)),
            SampleFail::Unknown(row, col) => NavError::UnknownCell { row, col },
        })
    }

    /// Terrain gradient `(dz/dx, dz/dy)` at `p` by central differences of the
    /// interpolated surface with a half-step of one cell (one-sided at the extent edge).
    pub fn gradient_at(&self, p: Point2) -> Result<(f64, f64)> {
        if !self.contains(p) {
            return Err(NavError::OutOfBounds(format!(
                "({:.3}, {:.3}) outside grid extent",
                p.x, p.y
            )));
        }
        let lo = self.extent_min();
        let hi = self.extent_max();
        let h = self.resolution;
        let diff = |a: Point2, b: Point2, span: f64| -> Result<f64> {
            if span <= 0.0 {
                return Ok(0.0);
            }
            Ok((self.sample_height(b)? - self.sample_height(a)?) / span)
        };
        let x0 = (p.x - h).max(lo.x);
        let x1 = (p.x + h).min(hi.x);
        let y0 = (p.y - h).max(lo.y);
        let y1 = (p.y + h).min(hi.y);
        let gx = diff(Point2::new(x0, p.y), Point2::new(x1, p.y), x1 - x0)?;
        let gy = diff(Point2::new(p.x, y0), Point2::new(p.x, y1), y1 - y0)?;
        Ok((gx, gy))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Iterator over the heights of valid cells.
    pub fn valid_heights(&self) -> impl Iterator<Item = f64> + '_ {
        self.heights
            .iter()
            .zip(&self.valid)
            .filter_map(|(h, v)| v.then_some(*h))
    }

    pub fn mean_height(&self) -> Option<f64> {
        let n = self.valid_count();
        (n > 0).then(|| self.valid_heights().sum::<f64>() / n as f64)
    }

    /// Population variance of the valid heights.
    pub fn height_variance(&self) -> Option<f64> {
        let mean = self.mean_height()?;
        let n = self.valid_count() as f64;
        Some(self.valid_heights().map(|h| (h - mean).powi(2)).sum::<f64>() / n)
    }

    pub fn max_height(&self) -> Option<f64> {
        self.valid_heights().reduce(f64::max)
    }

    pub fn min_height(&self) -> Option<f64> {
        self.valid_heights().reduce(f64::min)
    }

    /// Average `ratio`×`ratio` blocks into a coarser grid. A block is valid when at
    /// least `min_valid_fraction` of its cells (and at least one) are valid; its value is
    /// the mean over its valid cells. Trailing partial blocks are dropped.
    pub fn block_mean(&self, ratio: usize, min_valid_fraction: f64) -> Result<ElevationGrid> {
        if ratio == 0 {
            return Err(NavError::Config("block ratio must be at least 1".into()));
        }
        let rows = self.rows / ratio;
        let cols = self.cols / ratio;
        if rows == 0 || cols == 0 {
            return Err(NavError::Config(format!(
                "grid {}x{} smaller than one {ratio}x{ratio} block",
                self.rows, self.cols
            )));
        }
        let needed = ((min_valid_fraction * (ratio * ratio) as f64).ceil() as usize).max(1);
        let half = (ratio - 1) as f64 * self.resolution / 2.0;
        let mut out = ElevationGrid::unknown(
            Point2::new(self.origin.x + half, self.origin.y + half),
            self.resolution * ratio as f64,
            rows,
            cols,
        )?;
        for br in 0..rows {
            for bc in 0..cols {
                let mut sum = 0.0;
                let mut count = 0usize;
                for r in br * ratio..(br + 1) * ratio {
                    for c in bc * ratio..(bc + 1) * ratio {
                        if let Some(h) = self.get(r, c) {
                            sum += h;
                            count += 1;
                        }
                    }
                }
                if count >= needed {
                    out.set(br, bc, sum / count as f64);
                }
            }
        }
        Ok(out)
    }

    /// Copy a rectangular window of cells.
    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<ElevationGrid> {
        if rows == 0 || cols == 0 || row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(NavError::OutOfBounds(format!(
                "crop {rows}x{cols} at ({row0}, {col0}) exceeds {}x{} grid",
                self.rows, self.cols
            )));
        }
        let mut out = ElevationGrid::unknown(self.world_of(row0, col0), self.resolution, rows, cols)?;
        for r in 0..rows {
            for c in 0..cols {
                if let Some(h) = self.get(row0 + r, col0 + c) {
                    out.set(r, c, h);
                }
            }
        }
        Ok(out)
    }

    /// Smallest window containing every valid cell, or `None` when no cell is valid.
    pub fn valid_bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.is_valid(r, c) {
                    bounds = Some(match bounds {
                        None => (r, c, r, c),
                        Some((r0, c0, r1, c1)) => (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
                    });
                }
            }
        }
        bounds.map(|(r0, c0, r1, c1)| (r0, c0, r1 - r0 + 1, c1 - c0 + 1))
    }

    /// Same contents, georeferenced at a new origin.
    pub fn translated(&self, delta: Point2) -> ElevationGrid {
        let mut out = self.clone();
        out.origin = self.origin + delta;
        out
    }

    /// Same geometry, every height shifted by `offset`.
    pub fn offset_heights(&self, offset: f64) -> ElevationGrid {
        let mut out = self.clone();
        for (h, v) in out.heights.iter_mut().zip(&out.valid) {
            if *v {
                *h += offset;
            }
        }
        out
    }
}
