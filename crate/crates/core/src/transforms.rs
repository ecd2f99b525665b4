//! Frequency transforms and spectrum statistics.
//!
//! Both transforms are unnormalized. The DFT is
//! `X[k,l] = sum_x sum_y I[x,y] exp(-2 pi i x k / H) exp(-2 pi i y l / W)`
//! with `x` the row index, and its output is shifted so that the zero
//! frequency sits at `(floor(H/2), floor(W/2))`. The DCT is the type-II
//! transform with low frequencies in the upper-left corner.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::GrayImage;

/// Default offset inside `ln(x + eps)`.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    DftMagnitude,
    DftPower,
    DctAbs,
    LogScaled,
}

impl SpectrumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumKind::DftMagnitude => "dft_magnitude",
            SpectrumKind::DftPower => "dft_power",
            SpectrumKind::DctAbs => "dct_abs",
            SpectrumKind::LogScaled => "log_scaled",
        }
    }

    pub fn is_nonnegative(self) -> bool {
        !matches!(self, SpectrumKind::LogScaled)
    }
}

impl fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dft_magnitude" | "magnitude" => Ok(SpectrumKind::DftMagnitude),
            "dft_power" | "power" => Ok(SpectrumKind::DftPower),
            "dct_abs" | "dct" => Ok(SpectrumKind::DctAbs),
            "log_scaled" => Ok(SpectrumKind::LogScaled),
            _ => Err(Error::Parameter(format!("unknown spectrum kind {s:?}"))),
        }
    }
}

/// A 2D real spectral grid, row-major (`height` rows of `width` values).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    width: usize,
    height: usize,
    values: Vec<f64>,
    kind: SpectrumKind,
}

impl Spectrum2D {
    pub fn new(width: usize, height: usize, values: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} spectrum",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite spectrum value".into()));
        }
        if kind.is_nonnegative() && values.iter().any(|&v| v < 0.0) {
            return Err(Error::Parameter(format!("{kind} spectrum has negative values")));
        }
        Ok(Self {
            width,
            height,
            values,
            kind,
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

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Multiply every value by `c`; used for the `1/(HW)` display normalization.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.values.iter().map(|v| v * c).collect(),
            self.kind,
        )
    }
}

/// Unshifted complex DFT, row-major, `H x W`.
pub fn dft2_complex(img: &GrayImage) -> Vec<Complex64> {
    let (w, h) = (img.width(), img.height());
    let mut data: Vec<Complex64> = img.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut data, w, h, false);
    data
}

/// In-place 2D FFT of a row-major `h x w` grid. `inverse` applies the
/// unnormalized inverse transform.
pub fn fft2_in_place(data: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    assert_eq!(data.len(), w * h);
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row_fft.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = data[r * w + c];
        }
        col_fft.process(&mut column);
        for r in 0..h {
            data[r * w + c] = column[r];
        }
    }
}

/// Move the zero frequency from `(0, 0)` to `(floor(H/2), floor(W/2))`.
pub fn fftshift<T: Copy>(data: &[T], w: usize, h: usize) -> Vec<T> {
    let mut out = data.to_vec();
    for r in 0..h {
        let rr = (r + h / 2) % h;
        for c in 0..w {
            out[rr * w + (c + w / 2) % w] = data[r * w + c];
        }
    }
    out
}

/// Shifted DFT magnitude or power spectrum.
pub fn dft2(img: &GrayImage, kind: SpectrumKind) -> Result<Spectrum2D> {
    let map: fn(&Complex64) -> f64 = match kind {
        SpectrumKind::DftMagnitude => |c| c.norm(),
        SpectrumKind::DftPower => |c| c.norm_sqr(),
        other => {
            return Err(Error::Kind {
                expected: "dft_magnitude or dft_power".into(),
                actual: other.to_string(),
            })
        }
    };
    let (w, h) = (img.width(), img.height());
    let coefs = dft2_complex(img);
    let values: Vec<f64> = fftshift(&coefs, w, h).iter().map(map).collect();
    Spectrum2D::new(w, h, values, kind)
}

fn cosine_table(n: usize) -> Vec<f64> {
    // table[k * n + x] = cos(pi / n * (x + 1/2) * k)
    let mut t = Vec::with_capacity(n * n);
    for k in 0..n {
        for x in 0..n {
            t.push((PI / n as f64 * (x as f64 + 0.5) * k as f64).cos());
        }
    }
    t
}

/// Signed unnormalized type-II DCT coefficients, row-major `H x W`.
pub fn dct2_coefficients(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let cw = cosine_table(w);
    let ch = if h == w { cw.clone() } else { cosine_table(h) };
    // Transform along rows (y -> l).
    let mut rows = vec![0.0; w * h];
    for x in 0..h {
        let src = img.row(x);
        let dst = &mut rows[x * w..(x + 1) * w];
        for (l, d) in dst.iter_mut().enumerate() {
            let basis = &cw[l * w..(l + 1) * w];
            *d = src.iter().zip(basis).map(|(a, b)| a * b).sum();
        }
    }
    // Then along columns (x -> k).
    let mut out = vec![0.0; w * h];
    for k in 0..h {
        let basis = &ch[k * h..(k + 1) * h];
        let dst = &mut out[k * w..(k + 1) * w];
        for (x, &b) in basis.iter().enumerate() {
            let src = &rows[x * w..(x + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += b * s;
            }
        }
    }
    out
}

/// Absolute type-II DCT coefficients (`dct_abs`).
pub fn dct2(img: &GrayImage) -> Spectrum2D {
    let values = dct2_coefficients(img).into_iter().map(f64::abs).collect();
    Spectrum2D::new(img.width(), img.height(), values, SpectrumKind::DctAbs)
        .expect("finite input gives finite coefficients")
}

/// `ln(value + eps)` elementwise.
pub fn log_scale(spec: &Spectrum2D, eps: f64) -> Result<Spectrum2D> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("log eps must be positive, got {eps}")));
    }
    if spec.kind == SpectrumKind::LogScaled {
        return Err(Error::Kind {
            expected: "a linear spectrum".into(),
            actual: spec.kind.to_string(),
        });
    }
    Spectrum2D::new(
        spec.width,
        spec.height,
        spec.values.iter().map(|v| (v + eps).ln()).collect(),
        SpectrumKind::LogScaled,
    )
}

/// Radius mapping of a reduced spectrum: the source grid dimensions fix the
/// normalization `r = sqrt((k^2 + l^2) / (H^2 + W^2) * 4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiusMapping {
    pub height: usize,
    pub width: usize,
}

impl RadiusMapping {
    /// `floor(sqrt((H/2)^2 + (W/2)^2)) + 1`
    pub fn bin_count(&self) -> usize {
        let (h, w) = (self.height as f64, self.width as f64);
        ((h / 2.0).powi(2) + (w / 2.0).powi(2)).sqrt().floor() as usize + 1
    }

    /// Normalized radius of the centered offset `(k, l)`.
    pub fn radius(&self, k: isize, l: isize) -> f64 {
        let (h, w) = (self.height as f64, self.width as f64);
        (((k * k + l * l) as f64) / (0.25 * (h * h + w * w))).sqrt()
    }

    pub fn bin_of(&self, k: isize, l: isize) -> usize {
        (self.radius(k, l) * (self.bin_count() - 1) as f64).round() as usize
    }

    /// Normalized radius at the center of bin `i`.
    pub fn bin_radius(&self, i: usize) -> f64 {
        let n = self.bin_count();
        if n <= 1 {
            0.0
        } else {
            i as f64 / (n - 1) as f64
        }
    }
}

/// Azimuthal average of a shifted power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSpectrum {
    bins: Vec<f64>,
    counts: Vec<usize>,
    mapping: RadiusMapping,
}

impl ReducedSpectrum {
    pub fn new(bins: Vec<f64>, counts: Vec<usize>, mapping: RadiusMapping) -> Result<Self> {
        if bins.len() != mapping.bin_count() || counts.len() != bins.len() {
            return Err(Error::Dimension(format!(
                "{} bins / {} counts for a mapping with {} bins",
                bins.len(),
                counts.len(),
                mapping.bin_count()
            )));
        }
        if bins.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite reduced-spectrum bin".into()));
        }
        Ok(Self {
            bins,
            counts,
            mapping,
        })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    /// Number of coefficients averaged in each bin.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn mapping(&self) -> RadiusMapping {
        self.mapping
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn empty_bins(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&i| self.counts[i] == 0).collect()
    }

    /// Same mapping and counts, different bin values.
    pub fn with_bins(&self, bins: Vec<f64>) -> Result<Self> {
        Self::new(bins, self.counts.clone(), self.mapping)
    }
}

/// Reduce a shifted `dft_power` spectrum to its azimuthal bin means.
/// Empty bins hold zero and are logged.
pub fn reduce_spectrum(spec: &Spectrum2D) -> Result<ReducedSpectrum> {
    if spec.kind != SpectrumKind::DftPower {
        return Err(Error::Kind {
            expected: SpectrumKind::DftPower.to_string(),
            actual: spec.kind.to_string(),
        });
    }
    let mapping = RadiusMapping {
        height: spec.height,
        width: spec.width,
    };
    let n = mapping.bin_count();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let (ch, cw) = ((spec.height / 2) as isize, (spec.width / 2) as isize);
    for row in 0..spec.height {
        let k = row as isize - ch;
        for col in 0..spec.width {
            let l = col as isize - cw;
            let b = mapping.bin_of(k, l);
            sums[b] += spec.get(row, col);
            counts[b] += 1;
        }
    }
    let bins = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    let reduced = ReducedSpectrum::new(bins, counts, mapping)?;
    let empty = reduced.empty_bins();
    if !empty.is_empty() {
        warn!("reduced spectrum has empty bins {empty:?}; recorded as zero");
    }
    Ok(reduced)
}

/// Running sum and sum of squares of equally sized spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumAccumulator {
    count: u64,
    width: usize,
    height: usize,
    kind: Option<SpectrumKind>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Default for SpectrumAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl SpectrumAccumulator {
    /// Empty accumulator; dimensions are fixed by the first spectrum.
    pub fn new() -> Self {
        Self {
            count: 0,
            width: 0,
            height: 0,
            kind: None,
            sum: Vec::new(),
            sum_sq: Vec::new(),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn check_shape(&self, width: usize, height: usize, kind: Option<SpectrumKind>) -> Result<()> {
        if self.count > 0 && (self.width != width || self.height != height) {
            return Err(Error::Dimension(format!(
                "accumulator is {}x{}, got {width}x{height}",
                self.width, self.height
            )));
        }
        if let (Some(a), Some(b)) = (self.kind, kind) {
            if self.count > 0 && a != b {
                return Err(Error::Kind {
                    expected: a.to_string(),
                    actual: b.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn accumulate(&mut self, spec: &Spectrum2D) -> Result<()> {
        self.check_shape(spec.width, spec.height, Some(spec.kind))?;
        if self.count == 0 {
            self.width = spec.width;
            self.height = spec.height;
            self.kind = Some(spec.kind);
            self.sum = vec![0.0; spec.values.len()];
            self.sum_sq = vec![0.0; spec.values.len()];
        }
        for ((s, q), &v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(&spec.values) {
            *s += v;
            *q += v * v;
        }
        self.count += 1;
        Ok(())
    }

    /// Combine two accumulators over disjoint inputs.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.count == 0 {
            return Ok(other.clone());
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        self.check_shape(other.width, other.height, other.kind)?;
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        Ok(Self {
            count: self.count + other.count,
            width: self.width,
            height: self.height,
            kind: self.kind,
            sum: add(&self.sum, &other.sum),
            sum_sq: add(&self.sum_sq, &other.sum_sq),
        })
    }

    /// Mean grid, tagged with the kind of the accumulated spectra.
    pub fn finalize_mean(&self) -> Result<Spectrum2D> {
        if self.count == 0 {
            return Err(Error::State("cannot finalize an empty accumulator".into()));
        }
        let n = self.count as f64;
        let kind = self.kind.expect("kind is set once count > 0");
        Spectrum2D::new(
            self.width,
            self.height,
            self.sum.iter().map(|s| s / n).collect(),
            kind,
        )
    }

    /// Per-coefficient population variance.
    pub fn finalize_variance(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::State("cannot finalize an empty accumulator".into()));
        }
        let n = self.count as f64;
        Ok(self
            .sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| (q / n - (s / n).powi(2)).max(0.0))
            .collect())
    }
}

/// Relative spectral density error `fake / real - 1` per bin.
pub fn spectral_error(fake: &ReducedSpectrum, real: &ReducedSpectrum) -> Result<Vec<f64>> {
    if fake.len() != real.len() {
        return Err(Error::Dimension(format!(
            "{} fake bins vs {} real bins",
            fake.len(),
            real.len()
        )));
    }
    let zero: Vec<usize> = (0..real.len()).filter(|&i| real.bins[i] <= 0.0).collect();
    if !zero.is_empty() {
        return Err(Error::ZeroReference { bins: zero });
    }
    Ok(fake
        .bins
        .iter()
        .zip(&real.bins)
        .map(|(f, r)| f / r - 1.0)
        .collect())
}

/// Display copy of an error curve clamped to `[-1, 1]`.
pub fn clip_for_display(err: &[f64]) -> Vec<f64> {
    err.iter().map(|e| e.clamp(-1.0, 1.0)).collect()
}
