//! Four-point homography via the normalized direct linear transform.

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use super::VisionError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Twice the signed area of triangle `abc`; positive when `abc` turns
/// clockwise in image coordinates (y down).
pub(crate) fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Projective map `x' ~ H x`, scaled so that `H[2][2] = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { h: Matrix3::identity() }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            h: Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0),
        }
    }

    /// Normalizes `m` so its last element is 1. Fails when that element is
    /// zero or the matrix is singular.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, VisionError> {
        let scale = m[(2, 2)];
        if !scale.is_finite() || scale.abs() < 1e-12 * m.abs().max() {
            return Err(VisionError::DegenerateConfiguration);
        }
        let h = m / scale;
        if h.iter().any(|v| !v.is_finite()) || h.determinant().abs() < 1e-14 {
            return Err(VisionError::DegenerateConfiguration);
        }
        Ok(Self { h })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let h = &self.h;
        [
            [h[(0, 0)], h[(0, 1)], h[(0, 2)]],
            [h[(1, 0)], h[(1, 1)], h[(1, 2)]],
            [h[(2, 0)], h[(2, 1)], h[(2, 2)]],
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.h.determinant()
    }

    /// `None` for points mapped to (or beyond) the line at infinity.
    pub fn apply(&self, p: Point) -> Option<Point> {
        let v = self.h * Vector3::new(p.x, p.y, 1.0);
        if v.z.abs() < 1e-12 {
            return None;
        }
        Some(Point::new(v.x / v.z, v.y / v.z))
    }

    pub fn inverse(&self) -> Option<Homography> {
        self.h.try_inverse().and_then(|m| Homography::from_matrix(m).ok())
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Homography, VisionError> {
        Homography::from_matrix(self.h * first.h)
    }
}

fn has_collinear_triple(pts: &[Point; 4]) -> bool {
    let scale = pts
        .iter()
        .flat_map(|a| pts.iter().map(move |b| a.dist(*b)))
        .fold(0.0f64, f64::max);
    if !scale.is_finite() || scale == 0.0 {
        return true;
    }
    let tol = 1e-9 * scale * scale;
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES
        .iter()
        .any(|&[i, j, k]| cross(pts[i], pts[j], pts[k]).abs() <= tol)
}

/// Similarity that moves the centroid to the origin with mean distance √2.
fn normalizer(pts: &[Point; 4]) -> Matrix3<f64> {
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / 4.0;
    let s = std::f64::consts::SQRT_2 / mean;
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: Point) -> Point {
    let v = t * Vector3::new(p.x, p.y, 1.0);
    Point::new(v.x / v.z, v.y / v.z)
}

/// Solves for the homography taking each `src[i]` to `dst[i]`.
///
/// Fails with [`VisionError::DegenerateConfiguration`] when three points of
/// either set are collinear.
pub fn estimate_homography(src: &[Point; 4], dst: &[Point; 4]) -> Result<Homography, VisionError> {
    if has_collinear_triple(src) || has_collinear_triple(dst) {
        return Err(VisionError::DegenerateConfiguration);
    }
    let ts = normalizer(src);
    let td = normalizer(dst);

    // 8 constraint rows padded with a zero row; the null vector is the
    // right singular vector of the smallest singular value.
    let mut a = SMatrix::<f64, 9, 9>::zeros();
    for i in 0..4 {
        let s = transform(&ts, src[i]);
        let d = transform(&td, dst[i]);
        let (r0, r1) = (2 * i, 2 * i + 1);
        a[(r0, 0)] = -s.x;
        a[(r0, 1)] = -s.y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = d.x * s.x;
        a[(r0, 7)] = d.x * s.y;
        a[(r0, 8)] = d.x;
        a[(r1, 3)] = -s.x;
        a[(r1, 4)] = -s.y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = d.y * s.x;
        a[(r1, 7)] = d.y * s.y;
        a[(r1, 8)] = d.y;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(VisionError::DegenerateConfiguration)?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let row = v_t.row(min_idx);
    let hn = Matrix3::new(row[0], row[1], row[2], row[3], row[4], row[5], row[6], row[7], row[8]);

    let td_inv = td.try_inverse().ok_or(VisionError::DegenerateConfiguration)?;
    let h = Homography::from_matrix(td_inv * hn * ts)?;

    let scale = dst.iter().map(|p| p.x.abs().max(p.y.abs())).fold(1.0f64, f64::max);
    for (s, d) in src.iter().zip(dst) {
        match h.apply(*s) {
            Some(p) if p.dist(*d) <= 1e-6 * scale => {}
            _ => return Err(VisionError::DegenerateConfiguration),
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> [Point; 4] {
        [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    fn assert_matrix_close(h: &Homography, expected: [[f64; 3]; 3]) {
        let rows = h.to_rows();
        for r in 0..3 {
            for c in 0..3 {
                assert!(
                    (rows[r][c] - expected[r][c]).abs() < 1e-10,
                    "{rows:?} != {expected:?}"
                );
            }
        }
    }

    #[test]
    fn unit_square_to_itself_is_identity() {
        let h = estimate_homography(&unit_square(), &unit_square()).unwrap();
        assert_matrix_close(&h, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn shifted_square_is_pure_translation() {
        let dst = unit_square().map(|p| Point::new(p.x + 5.0, p.y + 7.0));
        let h = estimate_homography(&unit_square(), &dst).unwrap();
        assert_matrix_close(&h, [[1.0, 0.0, 5.0], [0.0, 1.0, 7.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn perspective_quad_round_trips() {
        let dst = [
            Point::new(102.3, 40.0),
            Point::new(380.5, 61.2),
            Point::new(350.0, 300.7),
            Point::new(90.1, 250.0),
        ];
        let h = estimate_homography(&unit_square(), &dst).unwrap();
        assert!((h.matrix()[(2, 2)] - 1.0).abs() < 1e-15);
        for (s, d) in unit_square().iter().zip(&dst) {
            assert!(h.apply(*s).unwrap().dist(*d) < 1e-9);
        }
        let inv = h.inverse().unwrap();
        for (s, d) in unit_square().iter().zip(&dst) {
            assert!(inv.apply(*d).unwrap().dist(*s) < 1e-9);
        }
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let line = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 1.0),
        ];
        assert!(matches!(
            estimate_homography(&line, &unit_square()),
            Err(VisionError::DegenerateConfiguration)
        ));
        assert!(matches!(
            estimate_homography(&unit_square(), &line),
            Err(VisionError::DegenerateConfiguration)
        ));
    }
}
