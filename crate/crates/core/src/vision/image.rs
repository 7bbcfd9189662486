use std::io::Cursor;
use std::path::Path;

use super::VisionError;

/// 8-bit single-channel image, row-major.
///
/// Pixel `(x, y)` has its center at continuous coordinate `(x, y)`, so it
/// covers `[x - 0.5, x + 0.5] × [y - 0.5, y + 0.5]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, VisionError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(VisionError::InvalidImage {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(Self { width, height, pixels })
    }

    /// Panics on a zero dimension.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut img = Self::filled(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                img.pixels[y * width + x] = f(x, y);
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    /// Bilinear interpolation between pixel centers. `None` outside the
    /// convex hull of the pixel centers.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        if !x.is_finite() || !y.is_finite() || !self.contains(x, y) {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) as f64 * (1.0 - fx) + self.get(x1, y0) as f64 * fx;
        let bottom = self.get(x0, y1) as f64 * (1.0 - fx) + self.get(x1, y1) as f64 * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    /// Decodes a PNG (or any format the `image` crate was built with) and
    /// converts it to luminance.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, VisionError> {
        let decoded = image::load_from_memory(bytes).map_err(|e| VisionError::Decode(e.to_string()))?;
        Self::from_dynamic(decoded)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VisionError> {
        let bytes = std::fs::read(path.as_ref())?;
        Self::from_png_bytes(&bytes)
    }

    fn from_dynamic(decoded: image::DynamicImage) -> Result<Self, VisionError> {
        let luma = decoded.into_luma8();
        let (w, h) = luma.dimensions();
        Self::new(w as usize, h as usize, luma.into_raw())
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, VisionError> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length matches dimensions");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| VisionError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), VisionError> {
        std::fs::write(path.as_ref(), self.to_png_bytes()?)?;
        Ok(())
    }
}

/// Reads only the PNG header to get the frame size, so oversized uploads can
/// be refused before allocating the full decode.
pub fn png_dimensions(bytes: &[u8]) -> Result<(usize, usize), VisionError> {
    let reader = image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| VisionError::Decode(e.to_string()))?;
    let (w, h) = reader
        .into_dimensions()
        .map_err(|e| VisionError::Decode(e.to_string()))?;
    Ok((w as usize, h as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_buffers() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage::new(2, 2, vec![0; 4]).is_ok());
    }

    #[test]
    fn bilinear_interpolates_between_centers() {
        let img = GrayImage::new(2, 1, vec![0, 200]).unwrap();
        assert_eq!(img.bilinear(0.0, 0.0), Some(0.0));
        assert_eq!(img.bilinear(0.25, 0.0), Some(50.0));
        assert_eq!(img.bilinear(1.0, 0.0), Some(200.0));
        assert_eq!(img.bilinear(1.01, 0.0), None);
        assert_eq!(img.bilinear(-0.01, 0.0), None);
    }

    #[test]
    fn png_round_trip_and_header_probe() {
        let img = GrayImage::from_fn(7, 5, |x, y| (x * 30 + y) as u8);
        let bytes = img.to_png_bytes().unwrap();
        assert_eq!(png_dimensions(&bytes).unwrap(), (7, 5));
        assert_eq!(GrayImage::from_png_bytes(&bytes).unwrap(), img);
        assert!(GrayImage::from_png_bytes(b"not a png").is_err());
    }
}
