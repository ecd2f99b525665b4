//! Robustness perturbations: Gaussian blur, crop with upsampling, JPEG
//! re-encoding and additive Gaussian noise.
//!
//! Noise variance is expressed on the 0-255 pixel scale and converted to
//! the internal `[0, 1]` domain as `sigma = sqrt(variance) / 255`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{crop, resize_bilinear, GrayImage};
use crate::rng::{self, StreamRng};

/// Kernel-size to sigma convention `0.3 ((k - 1) / 2 - 1) + 0.8`.
pub fn blur_sigma(kernel: usize) -> f64 {
    0.3 * ((kernel as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

fn gaussian_weights(kernel: usize, sigma: f64) -> Vec<f64> {
    let r = (kernel / 2) as isize;
    let w: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

pub fn gaussian_blur(img: &GrayImage, kernel: usize) -> Result<GrayImage> {
    gaussian_blur_with_sigma(img, kernel, blur_sigma(kernel))
}

/// Separable Gaussian convolution with edge-replicated borders and
/// normalized weights.
pub fn gaussian_blur_with_sigma(img: &GrayImage, kernel: usize, sigma: f64) -> Result<GrayImage> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::Parameter(format!("blur kernel must be odd, got {kernel}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("blur sigma must be positive, got {sigma}")));
    }
    let weights = gaussian_weights(kernel, sigma);
    let r = (kernel / 2) as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let src = img.pixels();
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, wt) in weights.iter().enumerate() {
                let xx = (x + i as isize - r).clamp(0, w - 1);
                acc += wt * src[(y * w + xx) as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, wt) in weights.iter().enumerate() {
                let yy = (y + i as isize - r).clamp(0, h - 1);
                acc += wt * tmp[(yy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    GrayImage::new(img.width(), img.height(), out)
}

/// Geometry of a crop-and-upsample step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropWindow {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// Window side `floor(dim * (100 - factor) / 100)`.
pub fn crop_window_size(width: usize, height: usize, factor_percent: f64) -> Result<(usize, usize)> {
    if !(0.0..100.0).contains(&factor_percent) {
        return Err(Error::Parameter(format!(
            "crop factor must be in [0, 100), got {factor_percent}"
        )));
    }
    let keep = (100.0 - factor_percent) / 100.0;
    let cw = (width as f64 * keep).floor() as usize;
    let ch = (height as f64 * keep).floor() as usize;
    if cw == 0 || ch == 0 {
        return Err(Error::Parameter(format!(
            "crop factor {factor_percent} leaves no pixels of a {width}x{height} image"
        )));
    }
    Ok((cw, ch))
}

/// Remove `factor_percent` % of each dimension at a uniform random offset,
/// then resize back to the original size.
pub fn crop_upsample<R: Rng + ?Sized>(
    img: &GrayImage,
    factor_percent: f64,
    rng: &mut R,
) -> Result<(GrayImage, CropWindow)> {
    let (cw, ch) = crop_window_size(img.width(), img.height(), factor_percent)?;
    let x = rng::uniform_index(rng, (img.width() - cw) as u64) as usize;
    let y = rng::uniform_index(rng, (img.height() - ch) as u64) as usize;
    let window = CropWindow {
        x,
        y,
        width: cw,
        height: ch,
    };
    let cropped = crop(img, x, y, cw, ch)?;
    Ok((resize_bilinear(&cropped, img.width(), img.height())?, window))
}

/// Encode as baseline JPEG (IJG quality scale) and decode back.
pub fn jpeg_cycle(img: &GrayImage, quality: u8) -> Result<GrayImage> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Parameter(format!("JPEG quality must be in 1..=100, got {quality}")));
    }
    let luma = img.to_luma8();
    let mut encoded = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut encoded, quality)
        .encode_image(&luma)
        .map_err(|e| Error::Codec(e.to_string()))?;
    let decoded = image::load_from_memory_with_format(&encoded, image::ImageFormat::Jpeg)
        .map_err(|e| Error::Codec(e.to_string()))?
        .to_luma8();
    if decoded.dimensions() != luma.dimensions() {
        return Err(Error::Codec("decoded JPEG changed dimensions".into()));
    }
    Ok(GrayImage::from_luma8(&decoded))
}

/// Add `N(0, variance_255) / 255` per pixel and clamp to `[0, 1]`.
pub fn add_gaussian_noise<R: Rng + ?Sized>(
    img: &GrayImage,
    variance_255: f64,
    rng: &mut R,
) -> Result<GrayImage> {
    if !(variance_255 >= 0.0) || !variance_255.is_finite() {
        return Err(Error::Parameter(format!(
            "noise variance must be finite and >= 0, got {variance_255}"
        )));
    }
    if variance_255 == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, variance_255.sqrt() / 255.0).expect("positive sigma");
    let pixels = img
        .pixels()
        .iter()
        .map(|&v| (v + normal.sample(rng)).clamp(0.0, 1.0))
        .collect();
    GrayImage::new(img.width(), img.height(), pixels)
}

/// Per-perturbation application probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplyProbabilities {
    pub blur: f64,
    pub crop: f64,
    pub jpeg: f64,
    pub noise: f64,
}

impl ApplyProbabilities {
    pub fn uniform(p: f64) -> Self {
        Self {
            blur: p,
            crop: p,
            jpeg: p,
            noise: p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub blur_kernels: Vec<usize>,
    /// Inclusive bounds of the uniform crop-factor draw, in percent.
    pub crop_factor_range: (f64, f64),
    /// Inclusive integer bounds of the JPEG quality draw.
    pub jpeg_quality_range: (u8, u8),
    /// Inclusive bounds of the noise-variance draw, 0-255 scale.
    pub noise_variance_range: (f64, f64),
    pub apply_probability: ApplyProbabilities,
    pub seed: u64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            blur_kernels: vec![3, 5, 7, 9],
            crop_factor_range: (5.0, 20.0),
            jpeg_quality_range: (10, 75),
            noise_variance_range: (5.0, 20.0),
            apply_probability: ApplyProbabilities::uniform(1.0),
            seed: 0,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blur_kernels.is_empty() || self.blur_kernels.iter().any(|k| k % 2 == 0) {
            return Err(Error::Parameter(format!(
                "blur kernels must be a nonempty set of odd sizes, got {:?}",
                self.blur_kernels
            )));
        }
        let (c0, c1) = self.crop_factor_range;
        if !(c0 >= 0.0 && c0 <= c1 && c1 < 100.0) {
            return Err(Error::Parameter(format!("invalid crop factor range {c0}..{c1}")));
        }
        let (q0, q1) = self.jpeg_quality_range;
        if !(q0 >= 1 && q0 <= q1 && q1 <= 100) {
            return Err(Error::Parameter(format!("invalid JPEG quality range {q0}..{q1}")));
        }
        let (v0, v1) = self.noise_variance_range;
        if !(v0 >= 0.0 && v0 <= v1 && v1.is_finite()) {
            return Err(Error::Parameter(format!("invalid noise variance range {v0}..{v1}")));
        }
        let p = self.apply_probability;
        for (name, v) in [("blur", p.blur), ("crop", p.crop), ("jpeg", p.jpeg), ("noise", p.noise)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} probability {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// One applied perturbation and the parameters drawn for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "perturbation", rename_all = "snake_case")]
pub enum AppliedPerturbation {
    Blur { kernel: usize, sigma: f64 },
    Crop { factor_percent: f64, window: CropWindow },
    Jpeg { quality: u8 },
    Noise { variance_255: f64 },
}

/// JSON-lines record: `{"image_id": ..., "perturbation": ..., params...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbRecord {
    pub image_id: String,
    #[serde(flatten)]
    pub applied: AppliedPerturbation,
}

fn uniform_f64(rng: &mut StreamRng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Apply the battery in the fixed order blur, crop, jpeg, noise. Each step
/// flips its own coin; parameters are drawn only for applied steps.
pub fn apply_pipeline(
    img: &GrayImage,
    cfg: &PerturbConfig,
    rng: &mut StreamRng,
) -> Result<(GrayImage, Vec<AppliedPerturbation>)> {
    cfg.validate()?;
    let p = cfg.apply_probability;
    let mut out = img.clone();
    let mut applied = Vec::new();
    let coin = |rng: &mut StreamRng, prob: f64| prob > 0.0 && rng.random::<f64>() < prob;

    if coin(rng, p.blur) {
        let idx = rng::uniform_index(rng, (cfg.blur_kernels.len() - 1) as u64) as usize;
        let kernel = cfg.blur_kernels[idx];
        out = gaussian_blur(&out, kernel)?;
        applied.push(AppliedPerturbation::Blur {
            kernel,
            sigma: blur_sigma(kernel),
        });
    }
    if coin(rng, p.crop) {
        let factor = uniform_f64(rng, cfg.crop_factor_range);
        let (next, window) = crop_upsample(&out, factor, rng)?;
        out = next;
        applied.push(AppliedPerturbation::Crop {
            factor_percent: factor,
            window,
        });
    }
    if coin(rng, p.jpeg) {
        let (q0, q1) = cfg.jpeg_quality_range;
        let quality = q0 + rng::uniform_index(rng, u64::from(q1 - q0)) as u8;
        out = jpeg_cycle(&out, quality)?;
        applied.push(AppliedPerturbation::Jpeg { quality });
    }
    if coin(rng, p.noise) {
        let variance = uniform_f64(rng, cfg.noise_variance_range);
        out = add_gaussian_noise(&out, variance, rng)?;
        applied.push(AppliedPerturbation::Noise {
            variance_255: variance,
        });
    }
    Ok((out, applied))
}

/// [`apply_pipeline`] on the substream for corpus item `index`.
pub fn apply_pipeline_indexed(
    img: &GrayImage,
    cfg: &PerturbConfig,
    index: u64,
) -> Result<(GrayImage, Vec<AppliedPerturbation>)> {
    apply_pipeline(img, cfg, &mut rng::substream(cfg.seed, index))
}
