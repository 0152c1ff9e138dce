use super::CalibrationTable;
use crate::error::{NavError, Result};
use crate::sim::DepthFrame;

pub const DEFAULT_MIN_CLUSTER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelClass {
    Free,
    /// Something sticks up: the ray came back shorter than `d_min`.
    Positive,
    /// A pit or drop-off: the ray came back longer than `d_max`.
    Negative,
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardMask {
    pub rows: usize,
    pub cols: usize,
    classes: Vec<PixelClass>,
}

impl HazardMask {
    pub fn filled(rows: usize, cols: usize, class: PixelClass) -> Self {
        Self {
            rows,
            cols,
            classes: vec![class; rows * cols],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> PixelClass {
        self.classes[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class: PixelClass) {
        self.classes[row * self.cols + col] = class;
    }

    pub fn count(&self, class: PixelClass) -> usize {
        self.classes.iter().filter(|c| **c == class).count()
    }

    pub fn has_hazard(&self) -> bool {
        self.classes
            .iter()
            .any(|c| matches!(c, PixelClass::Positive | PixelClass::Negative))
    }

    /// `(row, col)` of every positive or negative pixel, row-major order.
    pub fn hazard_pixels(&self) -> Vec<(usize, usize)> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| matches!(self.get(r, c), PixelClass::Positive | PixelClass::Negative))
            .collect()
    }

    /// Clear 8-connected components of `class` smaller than `min_cluster` pixels.
    pub fn remove_small_clusters(&mut self, class: PixelClass, min_cluster: usize) {
        let mut seen = vec![false; self.classes.len()];
        let mut stack = Vec::new();
        let mut component = Vec::new();
        for start in 0..self.classes.len() {
            if seen[start] || self.classes[start] != class {
                continue;
            }
            component.clear();
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                component.push(i);
                let (r, c) = ((i / self.cols) as isize, (i % self.cols) as isize);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
                            continue;
                        }
                        let j = nr as usize * self.cols + nc as usize;
                        if !seen[j] && self.classes[j] == class {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            if component.len() < min_cluster {
                for &i in &component {
                    self.classes[i] = PixelClass::Free;
                }
            }
        }
    }
}

/// Classify every RoI pixel against the calibrated thresholds and drop small clusters.
pub fn detect(frame: &DepthFrame, table: &CalibrationTable, min_cluster: usize) -> Result<HazardMask> {
    if frame.rows != table.rows || frame.cols != table.cols {
        return Err(NavError::Contract(format!(
            "frame is {}x{} but calibration is {}x{}",
            frame.rows, frame.cols, table.rows, table.cols
        )));
    }
    let mut mask = HazardMask::filled(frame.rows, frame.cols, PixelClass::Free);
    for r in 0..frame.rows {
        for c in 0..frame.cols {
            let class = match frame.get(r, c) {
                None => PixelClass::Invalid,
                Some(d) if d < table.d_min(r, c) => PixelClass::Positive,
                Some(d) if d > table.d_max(r, c) => PixelClass::Negative,
                Some(_) => PixelClass::Free,
            };
            mask.set(r, c, class);
        }
    }
    mask.remove_small_clusters(PixelClass::Positive, min_cluster);
    mask.remove_small_clusters(PixelClass::Negative, min_cluster);
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::hazard::CornerPair;

    fn table(rows: usize, cols: usize) -> CalibrationTable {
        let p = |x: f64, y: f64| CornerPair {
            pixel: Point2::new(x, y),
            rover: Point2::new(x, y),
        };
        let corners = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        CalibrationTable::from_reference(rows, cols, vec![2.0; rows * cols], 1.0, 0.1, 0.1, corners).unwrap()
    }

    #[test]
    fn calibration_frame_is_all_free() {
        let frame = DepthFrame::from_distances(4, 5, vec![2.0; 20]).unwrap();
        let mask = detect(&frame, &table(4, 5), 4).unwrap();
        assert_eq!(mask.count(PixelClass::Free), 20);
    }

    #[test]
    fn isolated_pixel_is_rejected() {
        let mut d = vec![2.0; 20];
        d[7] = 1.0;
        let frame = DepthFrame::from_distances(4, 5, d).unwrap();
        let mask = detect(&frame, &table(4, 5), 4).unwrap();
        assert!(!mask.has_hazard());
        let kept = detect(&frame, &table(4, 5), 1).unwrap();
        assert_eq!(kept.get(1, 2), PixelClass::Positive);
    }

    #[test]
    fn diagonal_pixels_form_one_cluster() {
        let mut d = vec![2.0; 25];
        for i in 0..4 {
            d[i * 5 + i] = 2.5;
        }
        let frame = DepthFrame::from_distances(5, 5, d).unwrap();
        let mask = detect(&frame, &table(5, 5), 4).unwrap();
        assert_eq!(mask.count(PixelClass::Negative), 4);
    }

    #[test]
    fn shape_mismatch() {
        let frame = DepthFrame::from_distances(2, 2, vec![2.0; 4]).unwrap();
        assert!(matches!(detect(&frame, &table(4, 5), 4), Err(NavError::Contract(_))));
    }
}
