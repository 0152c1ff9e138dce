use std::fmt::Write as _;
use std::path::Path;

use crate::error::{NavError, Result};
use crate::geometry::Point2;
use crate::sim::{CameraModel, DepthFrame};

/// One pixel ↔ rover-frame ground point correspondence. Pixel coordinates are
/// `(x = column, y = row)` of the pixel center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerPair {
    pub pixel: Point2,
    pub rover: Point2,
}

/// Flat-ground reference distances and the derived per-pixel hazard thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    pub rows: usize,
    pub cols: usize,
    pub h_cam: f64,
    pub t_near: f64,
    pub t_far: f64,
    d_cal: Vec<f64>,
    d_min: Vec<f64>,
    d_max: Vec<f64>,
    pub corners: [CornerPair; 4],
}

/// Shortest tolerated distance: a ray that hits something `t_near` above the ground
/// plane is shortened by the factor `(h_cam - t_near) / h_cam` (similar triangles).
pub fn min_tolerated_distance(d_cal: f64, h_cam: f64, t_near: f64) -> f64 {
    d_cal * (h_cam - t_near) / h_cam
}

/// Longest tolerated distance, mirroring the same construction below the ground plane.
pub fn max_tolerated_distance(d_cal: f64, h_cam: f64, t_far: f64) -> f64 {
    d_cal * (h_cam + t_far) / h_cam
}

fn check_params(h_cam: f64, t_near: f64, t_far: f64) -> Result<()> {
    if !(h_cam > 0.0 && h_cam.is_finite()) {
        return Err(NavError::Config(format!("h_cam must be positive, got {h_cam}")));
    }
    if !(t_near >= 0.0) || t_near >= h_cam {
        return Err(NavError::Config(format!(
            "T_near must lie in [0, h_cam), got {t_near} with h_cam {h_cam}"
        )));
    }
    if !(t_far >= 0.0 && t_far.is_finite()) {
        return Err(NavError::Config(format!("T_far must be non-negative, got {t_far}")));
    }
    Ok(())
}

impl CalibrationTable {
    pub fn from_reference(
        rows: usize,
        cols: usize,
        d_cal: Vec<f64>,
        h_cam: f64,
        t_near: f64,
        t_far: f64,
        corners: [CornerPair; 4],
    ) -> Result<Self> {
        check_params(h_cam, t_near, t_far)?;
        if d_cal.len() != rows * cols {
            return Err(NavError::Calibration(format!(
                "expected {} reference distances, got {}",
                rows * cols,
                d_cal.len()
            )));
        }
        if let Some(bad) = d_cal.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(NavError::Calibration(format!(
                "reference pixel ({}, {}) has no valid distance",
                bad / cols,
                bad % cols
            )));
        }
        let d_min = d_cal
            .iter()
            .map(|d| min_tolerated_distance(*d, h_cam, t_near))
            .collect();
        let d_max = d_cal.iter().map(|d| max_tolerated_distance(*d, h_cam, t_far)).collect();
        Ok(Self {
            rows,
            cols,
            h_cam,
            t_near,
            t_far,
            d_cal,
            d_min,
            d_max,
            corners,
        })
    }

    pub fn d_cal(&self, row: usize, col: usize) -> f64 {
        self.d_cal[row * self.cols + col]
    }

    pub fn d_min(&self, row: usize, col: usize) -> f64 {
        self.d_min[row * self.cols + col]
    }

    pub fn d_max(&self, row: usize, col: usize) -> f64 {
        self.d_max[row * self.cols + col]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# rovernav hazard calibration\n");
        let _ = writeln!(out, "rows {}", self.rows);
        let _ = writeln!(out, "cols {}", self.cols);
        let _ = writeln!(out, "h_cam {}", self.h_cam);
        let _ = writeln!(out, "t_near {}", self.t_near);
        let _ = writeln!(out, "t_far {}", self.t_far);
        for c in &self.corners {
            let _ = writeln!(out, "corner {} {} {} {}", c.pixel.x, c.pixel.y, c.rover.x, c.rover.y);
        }
        out.push_str("d_cal\n");
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols).map(|c| format!("{}", self.d_cal(r, c))).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let perr = |m: String| NavError::Parse(m);
        let mut rows = None;
        let mut cols = None;
        let mut h_cam = None;
        let mut t_near = None;
        let mut t_far = None;
        let mut corners = Vec::new();
        let mut lines = text.lines();
        let num = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| perr("missing value".into()))?
                .parse::<f64>()
                .map_err(|e| perr(format!("bad number: {e}")))
        };
        for line in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "d_cal" {
                break;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            match key {
                "rows" => rows = Some(num(parts.next())? as usize),
                "cols" => cols = Some(num(parts.next())? as usize),
                "h_cam" => h_cam = Some(num(parts.next())?),
                "t_near" => t_near = Some(num(parts.next())?),
                "t_far" => t_far = Some(num(parts.next())?),
                "corner" => {
                    let v = [
                        num(parts.next())?,
                        num(parts.next())?,
                        num(parts.next())?,
                        num(parts.next())?,
                    ];
                    corners.push(CornerPair {
                        pixel: Point2::new(v[0], v[1]),
                        rover: Point2::new(v[2], v[3]),
                    });
                }
                other => return Err(perr(format!("unknown calibration key '{other}'"))),
            }
        }
        let missing = |k: &str| perr(format!("calibration file lacks '{k}'"));
        let rows = rows.ok_or_else(|| missing("rows"))?;
        let cols = cols.ok_or_else(|| missing("cols"))?;
        let corners: [CornerPair; 4] = corners
            .try_into()
            .map_err(|_| perr("calibration file needs exactly 4 corners".into()))?;
        let d_cal = lines
            .flat_map(str::split_whitespace)
            .map(|t| t.parse::<f64>().map_err(|e| perr(format!("bad distance: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        Self::from_reference(
            rows,
            cols,
            d_cal,
            h_cam.ok_or_else(|| missing("h_cam"))?,
            t_near.ok_or_else(|| missing("t_near"))?,
            t_far.ok_or_else(|| missing("t_far"))?,
            corners,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Build the calibration table from a frame recorded on flat ground.
pub fn calibrate(
    flat_frame: &DepthFrame,
    h_cam: f64,
    t_near: f64,
    t_far: f64,
    corners: [CornerPair; 4],
) -> Result<CalibrationTable> {
    check_params(h_cam, t_near, t_far)?;
    let mut d_cal = Vec::with_capacity(flat_frame.rows * flat_frame.cols);
    for r in 0..flat_frame.rows {
        for c in 0..flat_frame.cols {
            let d = flat_frame
                .get(r, c)
                .ok_or_else(|| NavError::Calibration(format!("flat frame pixel ({r}, {c}) is invalid")))?;
            d_cal.push(d);
        }
    }
    CalibrationTable::from_reference(flat_frame.rows, flat_frame.cols, d_cal, h_cam, t_near, t_far, corners)
}

/// Corner correspondences of the RoI on flat ground, as a surveyed calibration
/// target would provide them.
pub fn corner_pairs_from_camera(cam: &CameraModel) -> Result<[CornerPair; 4]> {
    let (last_r, last_c) = (cam.rows - 1, cam.cols - 1);
    let mut out = [CornerPair {
        pixel: Point2::default(),
        rover: Point2::default(),
    }; 4];
    for (slot, (r, c)) in out.iter_mut().zip([(0, 0), (0, last_c), (last_r, last_c), (last_r, 0)]) {
        let rover = cam
            .flat_ground_point(r, c)
            .ok_or_else(|| NavError::Calibration(format!("corner pixel ({r}, {c}) does not see the ground")))?;
        *slot = CornerPair {
            pixel: Point2::new(c as f64, r as f64),
            rover,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corners() -> [CornerPair; 4] {
        let p = |x: f64, y: f64| CornerPair {
            pixel: Point2::new(x, y),
            rover: Point2::new(x, y),
        };
        [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]
    }

    fn table(t_near: f64, t_far: f64) -> CalibrationTable {
        CalibrationTable::from_reference(1, 1, vec![2.0], 1.0, t_near, t_far, corners()).unwrap()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(table(0.0, 0.1).d_min(0, 0), 2.0);
        assert!((table(0.1, 0.1).d_min(0, 0) - 1.8).abs() < 1e-12);
        assert!((table(0.1, 0.1).d_max(0, 0) - 2.2).abs() < 1e-12);
    }

    #[test]
    fn bad_parameters() {
        let c = corners();
        assert!(matches!(
            CalibrationTable::from_reference(1, 1, vec![2.0], 1.0, 1.0, 0.1, c),
            Err(NavError::Config(_))
        ));
        let frame = DepthFrame::from_distances(1, 2, vec![1.0, f64::NAN]).unwrap();
        assert!(matches!(
            calibrate(&frame, 1.0, 0.1, 0.1, c),
            Err(NavError::Calibration(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        let t =
            CalibrationTable::from_reference(2, 2, vec![1.5, 1.6, 1.7, 1.0 / 3.0], 1.2, 0.1, 0.15, corners()).unwrap();
        assert_eq!(CalibrationTable::parse(&t.to_text()).unwrap(), t);
    }
}
