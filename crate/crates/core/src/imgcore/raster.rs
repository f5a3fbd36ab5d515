use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major image with 1 (gray) or 3 (RGB) channels, samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

/// Out-of-range policy for sub-pixel sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Border {
    Clamp,
    /// Columns wrap modulo width, rows clamp. Used for equirectangular images.
    WrapX,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    R,
    G,
    B,
    #[default]
    Luminance,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "sample count {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::invalid(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Gray image from a per-pixel function. Values are clamped into `[0, 1]`.
    pub fn from_fn_gray(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, 1, data)
    }

    /// Builds an image without validation; callers guarantee the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self { width, height, channels, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sets a sample, clamping the value into `[0, 1]`.
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        let idx = (y * self.width + x) * self.channels + c;
        self.data[idx] = value.clamp(0.0, 1.0);
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn extract_channel(&self, selector: Channel) -> Result<RasterImage> {
        if self.channels != 3 {
            return Err(Error::invalid("channel extraction needs a color image"));
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| match selector {
                Channel::R => p[0],
                Channel::G => p[1],
                Channel::B => p[2],
                Channel::Luminance => (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0),
            })
            .collect();
        Ok(Self::from_raw(self.width, self.height, 1, data))
    }

    /// Gray passes through; color is reduced with `selector`.
    pub fn to_gray(&self, selector: Channel) -> Result<RasterImage> {
        if self.channels == 1 {
            Ok(self.clone())
        } else {
            self.extract_channel(selector)
        }
    }

    /// Bilinear sample of every channel at sub-pixel `(x, y)`; integer
    /// coordinates are pixel centers. Writes `channels()` values to `out`.
    pub fn sample_bilinear_into(&self, x: f64, y: f64, border: Border, out: &mut [f32]) {
        let w = self.width as f64;
        let max_y = (self.height - 1) as f64;
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, max_y) };
        let (x0, x1, fx) = match border {
            Border::Clamp => {
                let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, w - 1.0) };
                let x0 = x.floor();
                let x0i = x0 as usize;
                (x0i, (x0i + 1).min(self.width - 1), x - x0)
            }
            Border::WrapX => {
                let mut x = if x.is_finite() { x.rem_euclid(w) } else { 0.0 };
                if x >= w {
                    x = 0.0;
                }
                let x0 = x.floor();
                let x0i = (x0 as usize).min(self.width - 1);
                (x0i, (x0i + 1) % self.width, x - x0)
            }
        };
        let y0f = y.floor();
        let y0 = y0f as usize;
        let y1 = (y0 + 1).min(self.height - 1);
        let fy = y - y0f;
        let (fx, fy) = (fx as f32, fy as f32);
        let ch = self.channels;
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        for (c, o) in out.iter_mut().enumerate().take(ch) {
            let p00 = self.data[(row0 + x0) * ch + c];
            let p01 = self.data[(row0 + x1) * ch + c];
            let p10 = self.data[(row1 + x0) * ch + c];
            let p11 = self.data[(row1 + x1) * ch + c];
            let top = p00 + (p01 - p00) * fx;
            let bottom = p10 + (p11 - p10) * fx;
            *o = top + (bottom - top) * fy;
        }
    }

    /// Single-channel convenience wrapper around [`Self::sample_bilinear_into`].
    pub fn sample_bilinear(&self, x: f64, y: f64, border: Border) -> Vec<f32> {
        let mut out = vec![0.0; self.channels];
        self.sample_bilinear_into(x, y, border, &mut out);
        out
    }

    /// Gray sample, no allocation. Panics on color images in debug builds.
    #[inline]
    pub fn sample_gray(&self, x: f64, y: f64, border: Border) -> f32 {
        debug_assert_eq!(self.channels, 1);
        let mut out = [0.0f32];
        self.sample_bilinear_into(x, y, border, &mut out);
        out[0]
    }

    /// Horizontal mirror (column `x` becomes `width - 1 - x`).
    pub fn mirrored(&self) -> RasterImage {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                data.extend_from_slice(self.pixel(x, y));
            }
        }
        Self::from_raw(self.width, self.height, self.channels, data)
    }

    /// Gray to 3-channel by replication; color passes through.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self::from_raw(self.width, self.height, 3, data)
    }

    /// Mean over the rectangle `[x0, x1) x [y0, y1)`, first channel.
    pub fn region_mean(&self, x0: usize, x1: usize, y0: usize, y1: usize) -> Option<f64> {
        let (x1, y1) = (x1.min(self.width), y1.min(self.height));
        if x0 >= x1 || y0 >= y1 {
            return None;
        }
        let mut sum = 0.0;
        for y in y0..y1 {
            for x in x0..x1 {
                sum += self.get(x, y, 0) as f64;
            }
        }
        Some(sum / ((x1 - x0) * (y1 - y0)) as f64)
    }
}
