use super::{GrayImage, VisionError};

/// Summed-area table with a zero row and column in front.
struct Integral {
    stride: usize,
    sums: Vec<u64>,
}

impl Integral {
    fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            let src = &img.pixels()[y * w..(y + 1) * w];
            for x in 0..w {
                row += src[x] as u64;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    /// Sum over `[x0, x1) × [y0, y1)`.
    #[inline]
    fn rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u64 {
        let s = self.stride;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }
}

/// Calls `f(x, y, sum, count)` for each pixel with the window of the given
/// radius clamped to the image.
fn for_each_window(img: &GrayImage, radius: usize, mut f: impl FnMut(usize, usize, u64, u64)) {
    let (w, h) = (img.width(), img.height());
    let integral = Integral::new(img);
    for y in 0..h {
        let y0 = y.saturating_sub(radius);
        let y1 = (y + radius + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(radius);
            let x1 = (x + radius + 1).min(w);
            let count = ((x1 - x0) * (y1 - y0)) as u64;
            f(x, y, integral.rect(x0, y0, x1, y1), count);
        }
    }
}

/// Local-mean binarization: a pixel becomes 0 iff it is darker than the mean
/// of its `window × window` neighborhood minus `offset`, else 255. Windows
/// are clamped at the image border.
pub fn threshold_adaptive(img: &GrayImage, window: usize, offset: i32) -> Result<GrayImage, VisionError> {
    if window < 3 || window.is_multiple_of(2) || window > img.width().min(img.height()) {
        return Err(VisionError::BadWindow {
            window,
            width: img.width(),
            height: img.height(),
        });
    }
    let mut out = GrayImage::filled(img.width(), img.height(), 255);
    let offset = offset as i64;
    for_each_window(img, window / 2, |x, y, sum, count| {
        let v = img.get(x, y) as i64;
        let (sum, count) = (sum as i64, count as i64);
        // v < sum / count - offset, without the division
        if v * count < sum - offset * count {
            out.set(x, y, 0);
        }
    });
    Ok(out)
}

/// Mean filter over a `(2r+1)²` clamped window, rounded to nearest.
pub fn box_blur(img: &GrayImage, radius: usize) -> GrayImage {
    if radius == 0 {
        return img.clone();
    }
    let mut out = GrayImage::filled(img.width(), img.height(), 0);
    for_each_window(img, radius, |x, y, sum, count| {
        out.set(x, y, ((sum + count / 2) / count) as u8);
    });
    out
}
