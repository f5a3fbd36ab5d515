use super::RasterImage;
use crate::error::{Error, Result};

/// Largest 3x3 Sobel magnitude attainable on `[0, 1]` input: gx = 4, gy = 2.
const SOBEL_MAX: f32 = 4.472_136; // sqrt(20)

/// Sobel gradient magnitude, scaled so the largest attainable response is 1.
/// The one-pixel border is zero.
pub fn sobel_magnitude(img: &RasterImage) -> Result<RasterImage> {
    if img.channels() != 1 {
        return Err(Error::invalid("sobel_magnitude needs a gray image"));
    }
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::invalid(format!("image {w}x{h} is smaller than 3x3")));
    }
    let src = img.data();
    let mut out = vec![0.0f32; w * h];
    for y in 1..h - 1 {
        let up = &src[(y - 1) * w..y * w];
        let mid = &src[y * w..(y + 1) * w];
        let down = &src[(y + 1) * w..(y + 2) * w];
        let row = &mut out[y * w..(y + 1) * w];
        for x in 1..w - 1 {
            let gx = (up[x + 1] + 2.0 * mid[x + 1] + down[x + 1]) - (up[x - 1] + 2.0 * mid[x - 1] + down[x - 1]);
            let gy = (down[x - 1] + 2.0 * down[x] + down[x + 1]) - (up[x - 1] + 2.0 * up[x] + up[x + 1]);
            row[x] = ((gx * gx + gy * gy).sqrt() / SOBEL_MAX).min(1.0);
        }
    }
    Ok(RasterImage::from_raw(w, h, 1, out))
}
