//! Diffusion-process analytics.
//!
//! Timesteps are 1-based: `t = 1..=T`. Internally arrays are stored at
//! index `t - 1`, and `alpha_bar(0) = 1` by convention.
//!
//! Images enter the diffusion domain through [`to_diffusion_domain`]
//! (`x -> 2x - 1`); every spectrum in this module is computed there.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Artifact};
use crate::preprocess::GrayImage;
use crate::transforms::ReducedSpectrum;

pub const DEFAULT_T: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;
pub const DEFAULT_HYBRID_LAMBDA: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    beta_tildes: Vec<f64>,
}

impl NoiseSchedule {
    /// Derive all tables from `beta_1..beta_T`.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Parameter("schedule needs at least one step".into()));
        }
        if let Some((i, b)) = betas.iter().enumerate().find(|(_, &b)| !(b > 0.0 && b < 1.0)) {
            return Err(Error::Parameter(format!("beta_{} = {b} is outside (0, 1)", i + 1)));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        let beta_tildes = (0..betas.len())
            .map(|i| {
                let prev = if i == 0 { 1.0 } else { alpha_bars[i - 1] };
                (1.0 - prev) / (1.0 - alpha_bars[i]) * betas[i]
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
            beta_tildes,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn idx(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            return Err(Error::Parameter(format!(
                "timestep {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(t - 1)
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        Ok(self.betas[self.idx(t)?])
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        Ok(self.alphas[self.idx(t)?])
    }

    /// `alpha_bar(0) = 1`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Ok(1.0);
        }
        Ok(self.alpha_bars[self.idx(t)?])
    }

    pub fn beta_tilde(&self, t: usize) -> Result<f64> {
        Ok(self.beta_tildes[self.idx(t)?])
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn beta_tildes(&self) -> &[f64] {
        &self.beta_tildes
    }

    /// Timestep whose `alpha_bar` is closest to `target`.
    pub fn step_nearest_alpha_bar(&self, target: f64) -> usize {
        let mut best = (1, f64::INFINITY);
        for (i, &ab) in self.alpha_bars.iter().enumerate() {
            let d = (ab - target).abs();
            if d < best.1 {
                best = (i + 1, d);
            }
        }
        best.0
    }
}

/// Linearly spaced betas from `beta_start` to `beta_end` inclusive.
pub fn linear_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::Parameter("T must be at least 1".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Parameter(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let betas = if steps == 1 {
        vec![beta_start]
    } else {
        let step = (beta_end - beta_start) / (steps - 1) as f64;
        (0..steps)
            .map(|i| if i == steps - 1 { beta_end } else { beta_start + step * i as f64 })
            .collect()
    };
    NoiseSchedule::from_betas(betas)
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        linear_schedule(DEFAULT_T, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }
}

/// `x -> 2x - 1`, mapping `[0, 1]` pixels to `[-1, 1]`.
pub fn to_diffusion_domain(img: &GrayImage) -> GrayImage {
    img.map(|v| 2.0 * v - 1.0).expect("affine map of finite values is finite")
}

/// `x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps`, no clamping.
/// `x0` is taken as given (already in the diffusion domain).
pub fn forward_sample(
    x0: &GrayImage,
    t: usize,
    eps: &GrayImage,
    sched: &NoiseSchedule,
) -> Result<GrayImage> {
    let ab = sched.alpha_bar(t)?;
    forward_sample_at(x0, ab, eps)
}

/// Forward sample at an explicit `alpha_bar`.
pub fn forward_sample_at(x0: &GrayImage, alpha_bar: f64, eps: &GrayImage) -> Result<GrayImage> {
    if (x0.width(), x0.height()) != (eps.width(), eps.height()) {
        return Err(Error::Dimension(format!(
            "x0 is {}x{}, eps is {}x{}",
            x0.width(),
            x0.height(),
            eps.width(),
            eps.height()
        )));
    }
    let (s, n) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    let pixels = x0
        .pixels()
        .iter()
        .zip(eps.pixels())
        .map(|(x, e)| s * x + n * e)
        .collect();
    GrayImage::new(x0.width(), x0.height(), pixels)
}

/// Standard normal grid drawn from `rng`.
pub fn standard_normal_image<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> GrayImage {
    let pixels = (0..width * height).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    GrayImage::new(width, height, pixels).expect("normal draws are finite")
}

/// Which denoising variance enters the VLB weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceBound {
    /// `sigma_t^2 = beta_tilde_t`
    Lower,
    /// `sigma_t^2 = beta_t`
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Simple,
    Vlb(VarianceBound),
    Hybrid(VarianceBound),
}

impl WeightKind {
    pub const ALL: [WeightKind; 5] = [
        WeightKind::Simple,
        WeightKind::Vlb(VarianceBound::Lower),
        WeightKind::Vlb(VarianceBound::Upper),
        WeightKind::Hybrid(VarianceBound::Lower),
        WeightKind::Hybrid(VarianceBound::Upper),
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightKind::Simple => "simple",
            WeightKind::Vlb(VarianceBound::Lower) => "vlb_lower",
            WeightKind::Vlb(VarianceBound::Upper) => "vlb_upper",
            WeightKind::Hybrid(VarianceBound::Lower) => "hybrid_lower",
            WeightKind::Hybrid(VarianceBound::Upper) => "hybrid_upper",
        }
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown weight scheme {s:?}")))
    }
}

/// Per-timestep loss weights `w(t)`, `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    pub kind: WeightKind,
    pub lambda: f64,
    pub weights: Vec<f64>,
    /// Timesteps whose VLB term is undefined and was left out (stored as 0
    /// contribution from the VLB part).
    pub excluded: Vec<usize>,
}

/// `w(t) = beta_t^2 / (2 sigma_t^2 alpha_t (1 - alpha_bar_t))`, or `None`
/// where `sigma_t^2 = 0`.
pub fn vlb_weight(sched: &NoiseSchedule, t: usize, bound: VarianceBound) -> Result<Option<f64>> {
    let beta = sched.beta(t)?;
    let var = match bound {
        VarianceBound::Lower => sched.beta_tilde(t)?,
        VarianceBound::Upper => beta,
    };
    if var <= 0.0 {
        return Ok(None);
    }
    Ok(Some(
        beta * beta / (2.0 * var * sched.alpha(t)? * (1.0 - sched.alpha_bar(t)?)),
    ))
}

pub fn loss_weights(sched: &NoiseSchedule, kind: WeightKind, lambda: f64) -> Result<WeightScheme> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut excluded = Vec::new();
    let mut weights = Vec::with_capacity(sched.steps());
    for t in 1..=sched.steps() {
        let w = match kind {
            WeightKind::Simple => 1.0,
            WeightKind::Vlb(bound) | WeightKind::Hybrid(bound) => {
                let vlb = match vlb_weight(sched, t, bound)? {
                    Some(w) => w,
                    None => {
                        excluded.push(t);
                        0.0
                    }
                };
                if matches!(kind, WeightKind::Hybrid(_)) {
                    1.0 + lambda * vlb
                } else {
                    vlb
                }
            }
        };
        weights.push(w);
    }
    Ok(WeightScheme {
        kind,
        lambda,
        weights,
        excluded,
    })
}

/// `w(t) / sum_s w(s)` over `t = 1..=T`.
pub fn relative_importance(ws: &WeightScheme) -> Result<Vec<f64>> {
    let total: f64 = ws.weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate(format!(
            "{} weights sum to {total}",
            ws.kind
        )));
    }
    Ok(ws.weights.iter().map(|w| w / total).collect())
}

/// Expected reduced power spectrum of `x_t` given the clean spectrum `s0`:
/// `alpha_bar_t S0(r) + (1 - alpha_bar_t) H W` in every non-empty bin.
pub fn expected_noised_power_spectrum(
    s0: &ReducedSpectrum,
    t: usize,
    sched: &NoiseSchedule,
    height: usize,
    width: usize,
) -> Result<ReducedSpectrum> {
    expected_noised_power_spectrum_at(s0, sched.alpha_bar(t)?, height, width)
}

pub fn expected_noised_power_spectrum_at(
    s0: &ReducedSpectrum,
    alpha_bar: f64,
    height: usize,
    width: usize,
) -> Result<ReducedSpectrum> {
    let m = s0.mapping();
    if (m.height, m.width) != (height, width) {
        return Err(Error::Dimension(format!(
            "clean spectrum was reduced from {}x{} images, expected {height}x{width}",
            m.height, m.width
        )));
    }
    if !(0.0..=1.0).contains(&alpha_bar) {
        return Err(Error::Parameter(format!("alpha_bar {alpha_bar} outside [0, 1]")));
    }
    let floor = (1.0 - alpha_bar) * (height * width) as f64;
    let bins = s0
        .bins()
        .iter()
        .zip(s0.counts())
        .map(|(&s, &c)| if c == 0 { 0.0 } else { alpha_bar * s + floor })
        .collect();
    s0.with_bins(bins)
}

/// Mean and sample standard deviation of `|eps - eps_hat|^2` at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseStat {
    pub t: usize,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// Only one pair was available, so `std` is reported as 0.
    pub single_sample: bool,
}

/// Statistics over `(true, predicted)` grid pairs.
pub fn mse_stats(t: usize, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<MseStat> {
    if pairs.is_empty() {
        return Err(Error::Data(format!("no pairs for timestep {t}")));
    }
    let errs = pairs
        .iter()
        .enumerate()
        .map(|(i, (e, p))| {
            if e.len() != p.len() {
                return Err(Error::Dimension(format!(
                    "t={t} pair {i}: true grid has {} values, prediction has {}",
                    e.len(),
                    p.len()
                )));
            }
            Ok(e.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let std = if errs.len() < 2 {
        0.0
    } else {
        (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(MseStat {
        t,
        count: errs.len(),
        mean,
        std,
        single_sample: errs.len() < 2,
    })
}

fn parse_timestep(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("t=")?;
    let digits = rest.split('.').next()?;
    digits.parse().ok()
}

/// Pairs from one file: a concatenation of binary matrix artifacts
/// alternating true noise and prediction.
pub fn read_pairs_file(path: &Path) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let records = io::decode_all(&bytes)?;
    if records.len() % 2 != 0 {
        return Err(Error::Data(format!(
            "{}: odd number of records ({})",
            path.display(),
            records.len()
        )));
    }
    let grid = |a: Artifact| match a {
        Artifact::Matrix(m) => Ok(m.values),
        Artifact::Spectrum(_) | Artifact::Reduced(_) => Err(Error::Format(format!(
            "{}: pairs files hold matrix records only",
            path.display()
        ))),
    };
    let mut it = records.into_iter();
    let mut pairs = Vec::new();
    while let (Some(e), Some(p)) = (it.next(), it.next()) {
        pairs.push((grid(e)?, grid(p)?));
    }
    Ok(pairs)
}

/// Per-timestep statistics for every `t=<int>.bin` file in `dir`,
/// ordered by `t`.
pub fn mse_by_timestep(dir: &Path) -> Result<Vec<MseStat>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(t) = parse_timestep(&name) {
            if entry.path().is_file() {
                files.insert(t, entry.path());
            }
        }
    }
    files
        .into_iter()
        .map(|(t, path)| mse_stats(t, &read_pairs_file(&path)?))
        .collect()
}

/// `t=<int>` subdirectories of `dir`, ordered by `t`.
pub fn timestep_dirs(dir: &Path) -> Result<Vec<(usize, std::path::PathBuf)>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(t) = parse_timestep(&name) {
            if entry.path().is_dir() {
                out.insert(t, entry.path());
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Rows of the schedule/weight export.
pub fn schedule_csv(sched: &NoiseSchedule, lambda: f64) -> Result<String> {
    let schemes = WeightKind::ALL
        .iter()
        .map(|&k| loss_weights(sched, k, lambda))
        .collect::<Result<Vec<_>>>()?;
    let relative = schemes
        .iter()
        .map(relative_importance)
        .collect::<Result<Vec<_>>>()?;
    let mut s = String::from("t,beta,alpha_bar,beta_tilde");
    for k in WeightKind::ALL {
        s.push_str(&format!(",w_{k}"));
    }
    for k in WeightKind::ALL {
        s.push_str(&format!(",w_tilde_{k}"));
    }
    s.push('\n');
    for t in 1..=sched.steps() {
        let i = t - 1;
        s.push_str(&format!(
            "{t},{:e},{:e},{:e}",
            sched.betas[i], sched.alpha_bars[i], sched.beta_tildes[i]
        ));
        for ws in &schemes {
            s.push_str(&format!(",{:e}", ws.weights[i]));
        }
        for r in &relative {
            s.push_str(&format!(",{:e}", r[i]));
        }
        s.push('\n');
    }
    Ok(s)
}
