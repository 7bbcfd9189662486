use serde::Serialize;

use super::dictionary::{PayloadBits, GRID_MODULES};
use super::homography::{Homography, Point};
use super::{GrayImage, VisionError};

/// Readout of the 6×6 module grid of one candidate marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSample {
    pub payload: PayloadBits,
    /// All 20 border modules read dark.
    pub border_ok: bool,
    pub border_dark: u8,
    /// Difference between the mean light and mean dark sample.
    pub contrast: f64,
}

/// Threshold maximizing between-class variance; a sample is dark iff it is
/// strictly below the returned value.
pub fn otsu_threshold(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = sorted.iter().sum();
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    let mut low_sum = 0.0;
    for k in 1..n {
        low_sum += sorted[k - 1];
        if sorted[k] == sorted[k - 1] {
            continue;
        }
        let (w0, w1) = (k as f64, (n - k) as f64);
        let m0 = low_sum / w0;
        let m1 = (total - low_sum) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, 0.5 * (sorted[k - 1] + sorted[k]));
        }
    }
    best.1
}

fn is_border(row: usize, col: usize) -> bool {
    row == 0 || col == 0 || row == GRID_MODULES - 1 || col == GRID_MODULES - 1
}

/// Samples each module center through `h`, which must map the canonical
/// marker square `[0, 6]²` (module units) onto the image.
pub fn sample_grid(img: &GrayImage, h: &Homography) -> Result<GridSample, VisionError> {
    let mut samples = [0.0f64; GRID_MODULES * GRID_MODULES];
    for row in 0..GRID_MODULES {
        for col in 0..GRID_MODULES {
            let center = Point::new(col as f64 + 0.5, row as f64 + 0.5);
            let p = h.apply(center).ok_or(VisionError::OutOfFrame)?;
            samples[row * GRID_MODULES + col] = img.bilinear(p.x, p.y).ok_or(VisionError::OutOfFrame)?;
        }
    }
    let threshold = otsu_threshold(&samples);
    let (mut dark_sum, mut dark_n, mut light_sum, mut light_n) = (0.0, 0usize, 0.0, 0usize);
    let mut payload = PayloadBits(0);
    let mut border_dark = 0u8;
    for row in 0..GRID_MODULES {
        for col in 0..GRID_MODULES {
            let v = samples[row * GRID_MODULES + col];
            let dark = v < threshold;
            if dark {
                dark_sum += v;
                dark_n += 1;
            } else {
                light_sum += v;
                light_n += 1;
            }
            if is_border(row, col) {
                border_dark += dark as u8;
            } else if dark {
                payload = payload.with_bit(row - 1, col - 1, true);
            }
        }
    }
    let contrast = if dark_n > 0 && light_n > 0 {
        light_sum / light_n as f64 - dark_sum / dark_n as f64
    } else {
        0.0
    };
    Ok(GridSample {
        payload,
        border_ok: border_dark == 20,
        border_dark,
        contrast,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn otsu_splits_two_clusters() {
        let t = otsu_threshold(&[10.0, 12.0, 11.0, 200.0, 210.0, 190.0]);
        assert!(t > 12.0 && t < 190.0);
        // constant input: nothing is strictly below
        let t = otsu_threshold(&[255.0; 36]);
        assert!([255.0f64; 36].iter().all(|&v| v >= t));
    }

    #[test]
    fn white_region_has_no_border() {
        let img = GrayImage::filled(100, 100, 255);
        let h = Homography::from_matrix(nalgebra::Matrix3::new(10.0, 0.0, 20.0, 0.0, 10.0, 20.0, 0.0, 0.0, 1.0))
            .unwrap();
        let s = sample_grid(&img, &h).unwrap();
        assert!(!s.border_ok);
        assert_eq!(s.border_dark, 0);
        assert_eq!(s.payload, PayloadBits(0));
    }

    #[test]
    fn out_of_frame_samples_error() {
        let img = GrayImage::filled(30, 30, 255);
        let h = Homography::from_matrix(nalgebra::Matrix3::new(10.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0, 1.0))
            .unwrap();
        assert!(matches!(sample_grid(&img, &h), Err(VisionError::OutOfFrame)));
    }
}
