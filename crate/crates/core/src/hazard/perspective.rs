use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::CornerPair;
use crate::error::{NavError, Result};
use crate::geometry::Point2;

/// Homography from pixel coordinates `(col, row, 1)` to the rover-frame ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerspectiveTransform {
    pub matrix: Matrix3<f64>,
}

impl PerspectiveTransform {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix3::identity(),
        }
    }

    /// Map one point; `None` when it lands on the line at infinity.
    pub fn apply(&self, p: Point2) -> Option<Point2> {
        let v = self.matrix * Vector3::new(p.x, p.y, 1.0);
        (v.z.abs() > 1e-12).then(|| Point2::new(v.x / v.z, v.y / v.z))
    }

    pub fn inverse(&self) -> Result<Self> {
        self.matrix
            .try_inverse()
            .map(|matrix| Self { matrix })
            .ok_or_else(|| NavError::SingularGeometry("homography is not invertible".into()))
    }
}

fn twice_area(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn any_three_collinear(points: [Point2; 4]) -> bool {
    let scale = points
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0f64, f64::max);
    let tol = 1e-12 * scale * scale;
    [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
        .iter()
        .any(|&(i, j, k)| twice_area(points[i], points[j], points[k]).abs() <= tol)
}

/// Exact homography through four correspondences (the lower-right entry is fixed to 1).
pub fn fit_perspective(pairs: &[CornerPair; 4]) -> Result<PerspectiveTransform> {
    let pixels = pairs.map(|p| p.pixel);
    let targets = pairs.map(|p| p.rover);
    if any_three_collinear(pixels) || any_three_collinear(targets) {
        return Err(NavError::SingularGeometry(
            "three calibration corners are collinear".into(),
        ));
    }
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for (k, pair) in pairs.iter().enumerate() {
        let (x, y) = (pair.pixel.x, pair.pixel.y);
        let (u, v) = (pair.rover.x, pair.rover.y);
        let r = 2 * k;
        a.row_mut(r)
            .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
        b[r] = u;
        b[r + 1] = v;
    }
    let h = a
        .lu()
        .solve(&b)
        .ok_or_else(|| NavError::SingularGeometry("corner system is singular".into()))?;
    let matrix = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    if matrix.determinant().abs() < 1e-15 {
        return Err(NavError::SingularGeometry("homography is not invertible".into()));
    }
    Ok(PerspectiveTransform { matrix })
}
