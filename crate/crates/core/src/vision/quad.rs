//! Candidate marker outlines from a binary image.

use serde::{Deserialize, Serialize};

use super::homography::{cross, Point};
use super::GrayImage;

/// Default polygon simplification tolerance as a fraction of the contour
/// perimeter.
pub const DEFAULT_SIMPLIFY_FRACTION: f64 = 0.03;

/// A convex quadrilateral, corners clockwise (image y points down) starting
/// at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub corners: [Point; 4],
}

impl Quad {
    /// Orders four corners of a convex polygon clockwise from top-left.
    pub fn canonical(mut corners: [Point; 4]) -> Self {
        let cx = corners.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = corners.iter().map(|p| p.y).sum::<f64>() / 4.0;
        // atan2 with y down increases clockwise on screen.
        corners.sort_by(|a, b| {
            let ta = (a.y - cy).atan2(a.x - cx);
            let tb = (b.y - cy).atan2(b.x - cx);
            ta.total_cmp(&tb)
        });
        let start = (0..4)
            .min_by(|&i, &j| {
                let (a, b) = (corners[i], corners[j]);
                (a.x + a.y).total_cmp(&(b.x + b.y)).then(a.y.total_cmp(&b.y))
            })
            .unwrap_or(0);
        corners.rotate_left(start);
        Self { corners }
    }

    /// Shoelace area, positive for clockwise (screen) order.
    pub fn signed_area(&self) -> f64 {
        let c = &self.corners;
        (0..4)
            .map(|i| {
                let (a, b) = (c[i], c[(i + 1) % 4]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn is_convex(&self) -> bool {
        let c = &self.corners;
        let signs: Vec<f64> = (0..4).map(|i| cross(c[i], c[(i + 1) % 4], c[(i + 2) % 4])).collect();
        signs.iter().all(|&s| s > 0.0) || signs.iter().all(|&s| s < 0.0)
    }

    pub fn centroid(&self) -> Point {
        let c = &self.corners;
        Point::new(
            c.iter().map(|p| p.x).sum::<f64>() / 4.0,
            c.iter().map(|p| p.y).sum::<f64>() / 4.0,
        )
    }

    /// Point-in-polygon for a convex quad.
    pub fn contains(&self, p: Point) -> bool {
        let c = &self.corners;
        let signs: Vec<f64> = (0..4).map(|i| cross(c[i], c[(i + 1) % 4], p)).collect();
        signs.iter().all(|&s| s >= 0.0) || signs.iter().all(|&s| s <= 0.0)
    }

    /// Largest corner-to-corner distance against another quad in the same
    /// corner order.
    pub fn max_corner_distance(&self, other: &Quad) -> f64 {
        self.corners
            .iter()
            .zip(&other.corners)
            .map(|(a, b)| a.dist(*b))
            .fold(0.0, f64::max)
    }
}

/// Neighbor offsets, clockwise on screen starting east.
const DIRS: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn dir_index(dx: isize, dy: isize) -> usize {
    DIRS.iter().position(|&d| d == (dx, dy)).expect("offset is a unit neighbor")
}

struct Component {
    start: (usize, usize),
    min: (usize, usize),
    max: (usize, usize),
}

/// 8-connected labeling of dark pixels. Labels start at 1.
fn label_components(binary: &GrayImage) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = (binary.width(), binary.height());
    let px = binary.pixels();
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if px[start] != 0 || labels[start] != 0 {
            continue;
        }
        let label = comps.len() as u32 + 1;
        let (sx, sy) = (start % w, start / w);
        let mut comp = Component {
            start: (sx, sy),
            min: (sx, sy),
            max: (sx, sy),
        };
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            comp.min = (comp.min.0.min(x), comp.min.1.min(y));
            comp.max = (comp.max.0.max(x), comp.max.1.max(y));
            for (dx, dy) in DIRS {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if px[j] == 0 && labels[j] == 0 {
                    labels[j] = label;
                    stack.push(j);
                }
            }
        }
        comps.push(comp);
    }
    (labels, comps)
}

/// Moore-neighbor trace of a component's outer boundary, starting from its
/// first pixel in raster order.
fn trace_boundary(labels: &[u32], w: usize, h: usize, label: u32, start: (usize, usize)) -> Vec<Point> {
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && x < w as isize && y < h as isize && labels[y as usize * w + x as usize] == label
    };
    let mut contour = vec![Point::new(start.0 as f64, start.1 as f64)];
    let (mut px, mut py) = (start.0 as isize, start.1 as isize);
    // The west neighbor of the raster-first pixel is background.
    let mut back = 4usize;
    let mut first_move: Option<usize> = None;
    let limit = 4 * w * h + 8;
    for _ in 0..limit {
        let mut found = None;
        for step in 1..=8 {
            let k = (back + step) % 8;
            let (dx, dy) = DIRS[k];
            if inside(px + dx, py + dy) {
                found = Some(k);
                break;
            }
        }
        let Some(k) = found else {
            return contour; // isolated pixel
        };
        if (px, py) == (start.0 as isize, start.1 as isize) {
            match first_move {
                None => first_move = Some(k),
                Some(k0) if k0 == k => break,
                Some(_) => {}
            }
        }
        let (dx, dy) = DIRS[k];
        // The last background cell checked becomes the new backtrack.
        let (bx, by) = DIRS[(k + 7) % 8];
        let (nx, ny) = (px + dx, py + dy);
        back = dir_index(px + bx - nx, py + by - ny);
        px = nx;
        py = ny;
        contour.push(Point::new(px as f64, py as f64));
    }
    // The walk ends back at the start pixel, which is already first.
    if contour.len() > 1 && contour.last() == contour.first() {
        contour.pop();
    }
    contour
}

fn perimeter(contour: &[Point]) -> f64 {
    let n = contour.len();
    (0..n).map(|i| contour[i].dist(contour[(i + 1) % n])).sum()
}

fn point_line_distance(p: Point, a: Point, b: Point) -> f64 {
    let len = a.dist(b);
    if len == 0.0 {
        p.dist(a)
    } else {
        cross(a, b, p).abs() / len
    }
}

/// Douglas–Peucker on the open chain `pts[lo..=hi]` (indices modulo `n`),
/// pushing the interior vertices it keeps.
fn simplify_chain(pts: &[Point], lo: usize, hi: usize, eps: f64, out: &mut Vec<usize>) {
    let n = pts.len();
    let span = (hi + n - lo) % n;
    if span < 2 {
        return;
    }
    let (a, b) = (pts[lo], pts[hi % n]);
    let mut best = (0.0, lo);
    for step in 1..span {
        let i = (lo + step) % n;
        let d = point_line_distance(pts[i], a, b);
        if d > best.0 {
            best = (d, i);
        }
    }
    if best.0 > eps {
        simplify_chain(pts, lo, best.1, eps, out);
        out.push(best.1);
        simplify_chain(pts, best.1, hi, eps, out);
    }
}

/// Vertex indices of the simplified closed contour, in contour order.
fn simplify_closed(contour: &[Point], eps: f64) -> Vec<usize> {
    let n = contour.len();
    let cx = contour.iter().map(|p| p.x).sum::<f64>() / n as f64;
    let cy = contour.iter().map(|p| p.y).sum::<f64>() / n as f64;
    let c = Point::new(cx, cy);
    let far = |from: Point| {
        (0..n)
            .max_by(|&i, &j| contour[i].dist(from).total_cmp(&contour[j].dist(from)).then(j.cmp(&i)))
            .unwrap_or(0)
    };
    let i0 = far(c);
    let i1 = far(contour[i0]);
    let mut out = vec![i0];
    simplify_chain(contour, i0, i1, eps, &mut out);
    out.push(i1);
    simplify_chain(contour, i1, i0, eps, &mut out);
    out
}

/// Total-least-squares line through `pts`, as (point, unit direction).
fn fit_line(pts: impl Iterator<Item = Point> + Clone) -> Option<(Point, Point)> {
    let n = pts.clone().count();
    if n < 2 {
        return None;
    }
    let mx = pts.clone().map(|p| p.x).sum::<f64>() / n as f64;
    let my = pts.clone().map(|p| p.y).sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some((Point::new(mx, my), Point::new(theta.cos(), theta.sin())))
}

fn intersect(l1: (Point, Point), l2: (Point, Point)) -> Option<Point> {
    let ((p, d), (q, e)) = (l1, l2);
    let denom = d.x * e.y - d.y * e.x;
    if denom.abs() < 1e-9 {
        return None;
    }
    let t = ((q.x - p.x) * e.y - (q.y - p.y) * e.x) / denom;
    Some(Point::new(p.x + t * d.x, p.y + t * d.y))
}

/// Fits a line to each side's contour points, away from the corners, and
/// moves it half a pixel outward so it sits on the region's edge rather than
/// on the boundary pixel centers.
fn refine_corners(contour: &[Point], vertices: &[usize; 4], coarse: &[Point; 4]) -> Option<[Point; 4]> {
    let n = contour.len();
    let centroid = Point::new(
        coarse.iter().map(|p| p.x).sum::<f64>() / 4.0,
        coarse.iter().map(|p| p.y).sum::<f64>() / 4.0,
    );
    let mut lines = Vec::with_capacity(4);
    for s in 0..4 {
        let (a, b) = (vertices[s], vertices[(s + 1) % 4]);
        let span = (b + n - a) % n;
        let trim = span / 8 + 1;
        if span <= 2 * trim + 1 {
            return None;
        }
        let chain = (trim..=span - trim).map(|k| contour[(a + k) % n]);
        let (p, d) = fit_line(chain)?;
        let mut normal = Point::new(-d.y, d.x);
        if (p.x - centroid.x) * normal.x + (p.y - centroid.y) * normal.y < 0.0 {
            normal = Point::new(-normal.x, -normal.y);
        }
        lines.push((Point::new(p.x + 0.5 * normal.x, p.y + 0.5 * normal.y), d));
    }
    let mut refined = [Point::default(); 4];
    for i in 0..4 {
        // corner i sits between side i-1 and side i
        let c = intersect(lines[(i + 3) % 4], lines[i])?;
        if c.dist(coarse[i]) > 3.0 + 0.05 * coarse[i].dist(coarse[(i + 1) % 4]) {
            return None;
        }
        refined[i] = c;
    }
    Some(refined)
}

/// Convex quadrilaterals traced from dark (0) regions of `binary`.
pub fn find_quads(binary: &GrayImage, min_area: f64) -> Vec<Quad> {
    find_quads_with(binary, min_area, DEFAULT_SIMPLIFY_FRACTION)
}

pub fn find_quads_with(binary: &GrayImage, min_area: f64, simplify_fraction: f64) -> Vec<Quad> {
    let (w, h) = (binary.width(), binary.height());
    let (labels, comps) = label_components(binary);
    let mut quads = Vec::new();
    for (i, comp) in comps.iter().enumerate() {
        let bw = (comp.max.0 - comp.min.0 + 1) as f64;
        let bh = (comp.max.1 - comp.min.1 + 1) as f64;
        if bw < 4.0 || bh < 4.0 || bw * bh < min_area {
            continue;
        }
        let contour = trace_boundary(&labels, w, h, i as u32 + 1, comp.start);
        if contour.len() < 8 {
            continue;
        }
        let eps = simplify_fraction * perimeter(&contour);
        let mut vertices = simplify_closed(&contour, eps);
        if vertices.len() != 4 {
            continue;
        }
        // contour order, starting from the smallest index
        let rot = (0..4).min_by_key(|&k| vertices[k]).unwrap_or(0);
        vertices.rotate_left(rot);
        let idx = [vertices[0], vertices[1], vertices[2], vertices[3]];
        let coarse = idx.map(|k| contour[k]);
        let corners = refine_corners(&contour, &idx, &coarse).unwrap_or(coarse);
        let quad = Quad::canonical(corners);
        if quad.is_convex() && quad.area() >= min_area {
            quads.push(quad);
        }
    }
    quads
}
