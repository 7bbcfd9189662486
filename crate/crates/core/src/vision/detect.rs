use serde::{Deserialize, Serialize};

use super::dictionary::{decode_payload_within, MarkerSpec, GRID_MODULES, MAX_RADIUS};
use super::homography::{estimate_homography, Homography, Point};
use super::quad::{find_quads_with, Quad};
use super::sample::sample_grid;
use super::threshold::{box_blur, threshold_adaptive};
use super::{GrayImage, VisionError};
use crate::emotion::CardId;

/// Detector tuning, readable from a JSON document where every field is
/// optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    /// Adaptive threshold window, odd pixels.
    pub threshold_window: usize,
    pub threshold_offset: i32,
    /// Minimum quad area, px².
    pub min_area: f64,
    pub hamming_radius: u32,
    /// Box blur radius applied before thresholding and sampling.
    pub blur_radius: usize,
    /// Douglas–Peucker tolerance as a fraction of contour perimeter.
    pub simplify_fraction: f64,
    /// Border modules allowed to read light.
    pub max_border_errors: u8,
    /// Minimum light/dark separation of the module samples.
    pub min_contrast: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            threshold_window: 31,
            threshold_offset: 7,
            min_area: 400.0,
            hamming_radius: 2,
            blur_radius: 1,
            simplify_fraction: 0.03,
            max_border_errors: 2,
            min_contrast: 30.0,
        }
    }
}

impl DetectionParams {
    pub fn from_json(doc: &str) -> Result<Self, VisionError> {
        let params: Self = serde_json::from_str(doc).map_err(|e| VisionError::InvalidParams(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), VisionError> {
        if self.threshold_window < 3 || self.threshold_window.is_multiple_of(2) {
            return Err(VisionError::InvalidParams(format!(
                "threshold_window must be odd and at least 3, got {}",
                self.threshold_window
            )));
        }
        if self.hamming_radius > MAX_RADIUS {
            return Err(VisionError::InvalidParams(format!(
                "hamming_radius {} exceeds the unambiguous limit {MAX_RADIUS}",
                self.hamming_radius
            )));
        }
        if !(self.simplify_fraction > 0.0 && self.simplify_fraction < 0.5) {
            return Err(VisionError::InvalidParams("simplify_fraction must be in (0, 0.5)".into()));
        }
        if self.min_area.is_nan() || self.min_area < 0.0 || self.max_border_errors > 20 {
            return Err(VisionError::InvalidParams("min_area or max_border_errors out of range".into()));
        }
        Ok(())
    }
}

/// One identified flashcard in a frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub card: CardId,
    pub quad: Quad,
    /// Quarter turns clockwise of the card in the frame.
    pub rotation: u8,
    pub confidence: f64,
    /// Payload bits that disagreed with the codeword.
    pub hamming_distance: u32,
    /// Canonical marker square `[0, 6]²` → image.
    #[serde(serialize_with = "serialize_homography")]
    pub homography: Homography,
}

fn serialize_homography<S: serde::Serializer>(h: &Homography, s: S) -> Result<S::Ok, S::Error> {
    h.to_rows().serialize(s)
}

/// Corners of the canonical marker square in module units.
pub fn canonical_corners() -> [Point; 4] {
    let s = GRID_MODULES as f64;
    [Point::new(0.0, 0.0), Point::new(s, 0.0), Point::new(s, s), Point::new(0.0, s)]
}

fn confidence(distance: u32, border_dark: u8) -> f64 {
    let payload = 1.0 - distance as f64 / 3.0;
    (payload * border_dark as f64 / 20.0).clamp(0.0, 1.0)
}

fn overlaps(a: &Quad, b: &Quad) -> bool {
    a.contains(b.centroid()) || b.contains(a.centroid())
}

/// Threshold, extract quads, unwarp, sample and decode. Overlapping
/// detections of the same card collapse to the most confident one. Output is
/// sorted by descending confidence.
pub fn detect(frame: &GrayImage, spec: &MarkerSpec, params: &DetectionParams) -> Vec<Detection> {
    let max_window = {
        let m = frame.width().min(frame.height());
        if m.is_multiple_of(2) {
            m - 1
        } else {
            m
        }
    };
    let window = params.threshold_window.min(max_window);
    if window < 3 {
        return Vec::new();
    }
    let smooth = box_blur(frame, params.blur_radius);
    let Ok(binary) = threshold_adaptive(&smooth, window, params.threshold_offset) else {
        return Vec::new();
    };
    let radius = params.hamming_radius.min(MAX_RADIUS);
    let min_border = 20u8.saturating_sub(params.max_border_errors);

    let mut found = Vec::new();
    for quad in find_quads_with(&binary, params.min_area, params.simplify_fraction) {
        let Ok(h) = estimate_homography(&canonical_corners(), &quad.corners) else {
            continue;
        };
        let Ok(grid) = sample_grid(&smooth, &h) else {
            continue;
        };
        if grid.contrast < params.min_contrast || grid.border_dark < min_border {
            continue;
        }
        let Some(m) = decode_payload_within(grid.payload, spec, radius) else {
            continue;
        };
        found.push(Detection {
            card: m.card,
            quad,
            rotation: m.rotation,
            confidence: confidence(m.distance, grid.border_dark),
            hamming_distance: m.distance,
            homography: h,
        });
    }

    found.sort_by(|a, b| {
        let (ca, cb) = (a.quad.centroid(), b.quad.centroid());
        b.confidence
            .total_cmp(&a.confidence)
            .then(ca.y.total_cmp(&cb.y))
            .then(ca.x.total_cmp(&cb.x))
    });
    let mut kept: Vec<Detection> = Vec::with_capacity(found.len());
    for d in found {
        if !kept.iter().any(|k| k.card == d.card && overlaps(&k.quad, &d.quad)) {
            kept.push(d);
        }
    }
    kept
}
