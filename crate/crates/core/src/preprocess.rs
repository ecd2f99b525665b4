//! Image decoding, grayscale conversion, cropping, resizing and the median
//! high-pass residual.
//!
//! Pixels live in `[0, 1]` as `f64`. An 8-bit value `v` decodes to `v / 255`.

use std::path::Path;

use image::ImageFormat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-channel image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite pixel at index {i}")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Elementwise map; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.pixels.iter().map(|&v| f(v)).collect())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Quantize to 8 bits (`round(255 v)`, clamped).
    pub fn to_luma8(&self) -> image::GrayImage {
        let bytes = self
            .pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    pub fn from_luma8(img: &image::GrayImage) -> Self {
        let pixels = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            pixels,
        }
    }

    /// Write as an 8-bit grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_luma8()
            .save_with_format(path, ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Codec(other.to_string()),
            })
    }
}

/// Three-channel image with interleaved RGB values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != 3 * width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} RGB image",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite RGB value".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Decode a PNG or baseline JPEG file into RGB.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Decode PNG or JPEG bytes into RGB.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    let format = image::guess_format(bytes).map_err(|e| Error::Format(e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(Error::Format(format!("{format:?} is not PNG or JPEG")));
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::Format(e.to_string()))?
        .to_rgb8();
    let (w, h) = decoded.dimensions();
    let values = decoded
        .as_raw()
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    RgbImage::new(w as usize, h as usize, values)
}

/// Luma weights for RGB to gray conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayWeights {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl GrayWeights {
    /// ITU-R BT.601 luma.
    pub const BT601: GrayWeights = GrayWeights {
        r: 0.299,
        g: 0.587,
        b: 0.114,
    };
}

impl Default for GrayWeights {
    fn default() -> Self {
        Self::BT601
    }
}

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    to_grayscale_with(img, GrayWeights::BT601)
}

pub fn to_grayscale_with(img: &RgbImage, weights: GrayWeights) -> GrayImage {
    let unit_sum = (weights.r + weights.g + weights.b - 1.0).abs() < 1e-12;
    let pixels = img
        .values
        .chunks_exact(3)
        .map(|px| {
            // Achromatic pixels keep their exact value when the weights sum to one.
            if unit_sum && px[0] == px[1] && px[1] == px[2] {
                px[0]
            } else {
                weights.r * px[0] + weights.g * px[1] + weights.b * px[2]
            }
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Load a file and convert it to grayscale in one step.
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    Ok(to_grayscale(&load_image(path)?))
}

/// Square crop of side `size` at offset `floor((dim - size) / 2)` per axis.
pub fn center_crop(img: &GrayImage, size: usize) -> Result<GrayImage> {
    if size == 0 || size > img.width.min(img.height) {
        return Err(Error::Dimension(format!(
            "crop size {size} does not fit a {}x{} image",
            img.width, img.height
        )));
    }
    crop(img, (img.width - size) / 2, (img.height - size) / 2, size, size)
}

/// Rectangular window with top-left corner `(x0, y0)`.
pub fn crop(img: &GrayImage, x0: usize, y0: usize, w: usize, h: usize) -> Result<GrayImage> {
    if w == 0 || h == 0 || x0 + w > img.width || y0 + h > img.height {
        return Err(Error::Dimension(format!(
            "window {w}x{h} at ({x0},{y0}) exceeds {}x{}",
            img.width, img.height
        )));
    }
    let mut pixels = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        pixels.extend_from_slice(&img.row(y)[x0..x0 + w]);
    }
    Ok(GrayImage {
        width: w,
        height: h,
        pixels,
    })
}

/// Bilinear resize with half-pixel-centered sampling. Output is clamped to
/// the input's value range.
pub fn resize_bilinear(img: &GrayImage, new_w: usize, new_h: usize) -> Result<GrayImage> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::Dimension("target size must be at least 1x1".into()));
    }
    if new_w == img.width && new_h == img.height {
        return Ok(img.clone());
    }
    let (lo, hi) = img.min_max();
    let xs = sample_positions(img.width, new_w);
    let ys = sample_positions(img.height, new_h);
    let mut pixels = Vec::with_capacity(new_w * new_h);
    for &(y0, y1, fy) in &ys {
        let (r0, r1) = (img.row(y0), img.row(y1));
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            pixels.push((top + (bottom - top) * fy).clamp(lo, hi));
        }
    }
    GrayImage::new(new_w, new_h, pixels)
}

fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Median filter with an odd square window and edge replication.
pub fn median_filter(img: &GrayImage, kernel: usize) -> Result<GrayImage> {
    if kernel < 3 || kernel.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "median kernel must be odd and at least 3, got {kernel}"
        )));
    }
    let r = (kernel / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);
    let mut window = Vec::with_capacity(kernel * kernel);
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for y in 0..h {
        for x in 0..w {
            window.clear();
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, h - 1) as usize;
                let row = img.row(yy);
                for dx in -r..=r {
                    window.push(row[(x + dx).clamp(0, w - 1) as usize]);
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
            pixels.push(*m);
        }
    }
    GrayImage::new(img.width, img.height, pixels)
}

/// Residual `img - median_filter(img, kernel)`; values may be negative.
pub fn median_highpass(img: &GrayImage, kernel: usize) -> Result<GrayImage> {
    let med = median_filter(img, kernel)?;
    let pixels = img
        .pixels
        .iter()
        .zip(&med.pixels)
        .map(|(a, b)| a - b)
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}
