//! Card rendering and synthetic camera frames with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dictionary::{MarkerSpec, GRID_MODULES};
use super::homography::{estimate_homography, Homography, Point};
use super::quad::Quad;
use super::{GrayImage, VisionError};
use crate::emotion::CardId;

/// Black-and-white card: quiet zone, black border ring and the card's 4×4
/// payload, `module_size_px` pixels per module.
pub fn render_marker(spec: &MarkerSpec, card: CardId) -> GrayImage {
    let m = spec.module_size_px;
    let q = spec.quiet_zone;
    let side = spec.rendered_side_px();
    let word = spec.codeword(card);
    GrayImage::from_fn(side, side, |x, y| {
        let (gc, gr) = (x / m, y / m);
        if gc < q || gr < q || gc >= q + GRID_MODULES || gr >= q + GRID_MODULES {
            return 255;
        }
        let (r, c) = (gr - q, gc - q);
        let border = r == 0 || c == 0 || r == GRID_MODULES - 1 || c == GRID_MODULES - 1;
        if border || word.bit(r - 1, c - 1) {
            0
        } else {
            255
        }
    })
}

/// Corners of the black marker square in rendered-card pixel coordinates,
/// clockwise from the card's own top-left.
pub fn marker_square_corners(spec: &MarkerSpec) -> [Point; 4] {
    let lo = (spec.quiet_zone * spec.module_size_px) as f64 - 0.5;
    let hi = ((spec.quiet_zone + GRID_MODULES) * spec.module_size_px) as f64 - 0.5;
    [Point::new(lo, lo), Point::new(hi, lo), Point::new(hi, hi), Point::new(lo, hi)]
}

/// Homography taking a rendered card's pixels so that its black square lands
/// on `frame_corners` (card top-left first, clockwise).
pub fn card_to_frame(spec: &MarkerSpec, frame_corners: &[Point; 4]) -> Result<Homography, VisionError> {
    estimate_homography(&marker_square_corners(spec), frame_corners)
}

#[derive(Debug, Clone)]
pub struct SyntheticFrame {
    pub frame: GrayImage,
    /// Ground-truth black-square outline, canonical order.
    pub quad: Quad,
    /// The same corners in the card's own order (card top-left first).
    pub card_corners: [Point; 4],
}

/// Warps the rendered card into `background` through `h` (card pixels →
/// frame pixels) with bilinear resampling, then adds seeded Gaussian noise.
///
/// The black marker square must land inside the frame; the white quiet zone
/// may be clipped by the frame edge.
pub fn render_synthetic_frame(
    spec: &MarkerSpec,
    card: CardId,
    h: &Homography,
    noise_sigma: f64,
    background: &GrayImage,
    seed: u64,
) -> Result<SyntheticFrame, VisionError> {
    let card_img = render_marker(spec, card);
    let side = card_img.width() as f64;
    let (w, hgt) = (background.width(), background.height());

    let mut card_corners = [Point::default(); 4];
    for (dst, src) in card_corners.iter_mut().zip(marker_square_corners(spec)) {
        let p = h.apply(src).ok_or(VisionError::OutOfFrame)?;
        if !background.contains(p.x, p.y) {
            return Err(VisionError::OutOfFrame);
        }
        *dst = p;
    }
    let outline = [
        Point::new(-0.5, -0.5),
        Point::new(side - 0.5, -0.5),
        Point::new(side - 0.5, side - 0.5),
        Point::new(-0.5, side - 0.5),
    ];
    let mut projected = Vec::with_capacity(4);
    for p in outline {
        projected.push(h.apply(p).ok_or(VisionError::OutOfFrame)?);
    }
    // Every card corner must stay in front of the camera: the homogeneous
    // scale keeps one sign across the card.
    let m = h.matrix();
    let w_sign = |p: Point| m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
    if outline.iter().any(|&p| w_sign(p) <= 0.0) {
        return Err(VisionError::OutOfFrame);
    }
    let inv = h.inverse().ok_or(VisionError::DegenerateConfiguration)?;

    let clamp = |v: f64, hi: usize| v.floor().max(0.0).min((hi - 1) as f64) as usize;
    let x0 = clamp(projected.iter().map(|p| p.x).fold(f64::INFINITY, f64::min), w);
    let x1 = clamp(projected.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + 1.0, w);
    let y0 = clamp(projected.iter().map(|p| p.y).fold(f64::INFINITY, f64::min), hgt);
    let y1 = clamp(projected.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + 1.0, hgt);

    let mut frame = background.clone();
    let max_c = side - 1.0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let Some(src) = inv.apply(Point::new(x as f64, y as f64)) else {
                continue;
            };
            if src.x < -0.5 || src.y < -0.5 || src.x > side - 0.5 || src.y > side - 0.5 {
                continue;
            }
            let v = card_img
                .bilinear(src.x.clamp(0.0, max_c), src.y.clamp(0.0, max_c))
                .unwrap_or(255.0);
            frame.set(x, y, v.round() as u8);
        }
    }

    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).map_err(|_| VisionError::InvalidParams("noise sigma".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noisy = frame.clone();
        for y in 0..hgt {
            for x in 0..w {
                let v = frame.get(x, y) as f64 + normal.sample(&mut rng);
                noisy.set(x, y, v.round().clamp(0.0, 255.0) as u8);
            }
        }
        frame = noisy;
    }

    Ok(SyntheticFrame {
        frame,
        quad: Quad::canonical(card_corners),
        card_corners,
    })
}

/// Camera pose of a card relative to a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    /// Out-of-plane tilt, degrees.
    pub tilt_deg: f64,
    /// Direction (within the card plane) of the tilt axis, degrees.
    pub tilt_axis_deg: f64,
    /// In-plane rotation, degrees clockwise.
    pub roll_deg: f64,
    /// Larger side of the marker square's bounding box as a fraction of the
    /// frame's shorter side.
    pub extent: f64,
    /// Bounding-box center in frame pixels.
    pub center: Point,
}

/// Camera distance in units of the card side; sets perspective strength.
const CAMERA_DISTANCE: f64 = 3.0;

/// Frame corners of the black square (card top-left first) for a pinhole
/// view of the card.
pub fn placement_corners(placement: &Placement, frame_w: usize, frame_h: usize) -> [Point; 4] {
    let (roll, axis, tilt) = (
        placement.roll_deg.to_radians(),
        placement.tilt_axis_deg.to_radians(),
        placement.tilt_deg.to_radians(),
    );
    let base = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
    let projected = base.map(|(x, y)| {
        let (xr, yr) = (x * roll.cos() - y * roll.sin(), x * roll.sin() + y * roll.cos());
        // Rodrigues rotation about the in-plane unit axis (cos a, sin a, 0).
        let (ax, ay) = (axis.cos(), axis.sin());
        let dot = ax * xr + ay * yr;
        let (c, s) = (tilt.cos(), tilt.sin());
        let px = xr * c + ax * dot * (1.0 - c);
        let py = yr * c + ay * dot * (1.0 - c);
        let pz = s * (ax * yr - ay * xr);
        let z = CAMERA_DISTANCE + pz;
        (px / z, py / z)
    });
    let (min_x, max_x) = projected.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (min_y, max_y) = projected.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let span = (max_x - min_x).max(max_y - min_y);
    let scale = placement.extent * frame_w.min(frame_h) as f64 / span;
    let (mx, my) = (0.5 * (min_x + max_x), 0.5 * (min_y + max_y));
    projected.map(|(x, y)| Point::new(placement.center.x + (x - mx) * scale, placement.center.y + (y - my) * scale))
}

/// Ranges a random placement is drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementRange {
    pub max_tilt_deg: f64,
    pub min_extent: f64,
    pub max_extent: f64,
    /// Pixels kept clear between the marker square and the frame edge.
    pub margin_px: f64,
}

impl Default for PlacementRange {
    fn default() -> Self {
        Self {
            max_tilt_deg: 45.0,
            min_extent: 0.2,
            max_extent: 0.8,
            margin_px: 2.0,
        }
    }
}

/// Uniform tilt, tilt axis, roll and extent; the center is uniform over the
/// positions that keep the marker square inside the frame.
pub fn random_placement(rng: &mut impl Rng, range: &PlacementRange, frame_w: usize, frame_h: usize) -> Placement {
    let mut placement = Placement {
        tilt_deg: rng.random_range(0.0..=range.max_tilt_deg),
        tilt_axis_deg: rng.random_range(0.0..180.0),
        roll_deg: rng.random_range(0.0..360.0),
        extent: rng.random_range(range.min_extent..=range.max_extent),
        center: Point::new(frame_w as f64 / 2.0, frame_h as f64 / 2.0),
    };
    let corners = placement_corners(&placement, frame_w, frame_h);
    let half_w = corners.iter().map(|p| (p.x - placement.center.x).abs()).fold(0.0, f64::max);
    let half_h = corners.iter().map(|p| (p.y - placement.center.y).abs()).fold(0.0, f64::max);
    let slack_x = (frame_w as f64 / 2.0 - half_w - range.margin_px - 1.0).max(0.0);
    let slack_y = (frame_h as f64 / 2.0 - half_h - range.margin_px - 1.0).max(0.0);
    placement.center.x += rng.random_range(-slack_x..=slack_x);
    placement.center.y += rng.random_range(-slack_y..=slack_y);
    placement
}

/// A linear luminance ramp between two random levels in `[lo, hi]` along a
/// random direction, standing in for uneven classroom lighting.
pub fn gradient_background(rng: &mut impl Rng, width: usize, height: usize, lo: u8, hi: u8) -> GrayImage {
    let a = rng.random_range(lo..=hi) as f64;
    let b = rng.random_range(lo..=hi) as f64;
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let reach = (cx * dx.abs() + cy * dy.abs()).max(1.0);
    GrayImage::from_fn(width, height, |x, y| {
        let t = (((x as f64 - cx) * dx + (y as f64 - cy) * dy) / reach + 1.0) / 2.0;
        (a + (b - a) * t).round().clamp(0.0, 255.0) as u8
    })
}

/// A frame with `card` at a random placement over a random lighting ramp,
/// with noise sigma drawn from `[0, max_sigma]`.
pub fn random_synthetic_frame(
    rng: &mut impl Rng,
    spec: &MarkerSpec,
    card: CardId,
    range: &PlacementRange,
    width: usize,
    height: usize,
    max_sigma: f64,
) -> Result<SyntheticFrame, VisionError> {
    let placement = random_placement(rng, range, width, height);
    let h = card_to_frame(spec, &placement_corners(&placement, width, height))?;
    let background = gradient_background(rng, width, height, 110, 240);
    let sigma = rng.random_range(0.0..=max_sigma);
    render_synthetic_frame(spec, card, &h, sigma, &background, rng.random())
}
