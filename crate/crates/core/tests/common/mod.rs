#![allow(dead_code)]

use std::path::Path;

use freqscope::rng::StreamRng;
use freqscope::transforms::{fft2_in_place, RadiusMapping};
use freqscope::GrayImage;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

pub const SIDE: usize = 64;

/// Centered frequency offset of unshifted index `i` on an axis of length `n`.
fn offset(i: usize, n: usize) -> isize {
    if i < n.div_ceil(2) {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// Amplitude filter `1/f` (zero at DC), optionally scaled by `high_gain`
/// where the normalized radius is at least `cutoff`.
pub fn pink_filter(n: usize, high_gain: f64, cutoff: f64) -> Vec<f64> {
    let m = RadiusMapping { height: n, width: n };
    let mut h = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let (k, l) = (offset(r, n), offset(c, n));
            if k == 0 && l == 0 {
                continue;
            }
            let f = ((k * k + l * l) as f64).sqrt();
            let gain = if m.radius(k, l) >= cutoff { high_gain } else { 1.0 };
            h[r * n + c] = gain / f;
        }
    }
    h
}

/// Pixel scale that gives the unattenuated filter a standard deviation of 0.1.
pub fn pink_scale(n: usize) -> f64 {
    let h = pink_filter(n, 1.0, 2.0);
    let power: f64 = h.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64;
    0.1 / power.sqrt()
}

/// White Gaussian noise shaped by `filter`, mapped to `0.5 + scale * x`.
pub fn filtered_noise(n: usize, filter: &[f64], scale: f64, rng: &mut StreamRng) -> GrayImage {
    filtered_noise_around(n, filter, scale, 0.5, rng)
}

/// Like [`filtered_noise`] with mean brightness `mean`.
pub fn filtered_noise_around(n: usize, filter: &[f64], scale: f64, mean: f64, rng: &mut StreamRng) -> GrayImage {
    let mut data: Vec<Complex64> = (0..n * n)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    fft2_in_place(&mut data, n, n, false);
    for (d, h) in data.iter_mut().zip(filter) {
        *d *= *h;
    }
    fft2_in_place(&mut data, n, n, true);
    let norm = (n * n) as f64;
    GrayImage::new(n, n, data.iter().map(|c| mean + scale * c.re / norm).collect()).unwrap()
}

pub fn uniform_noise(w: usize, h: usize, rng: &mut StreamRng) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// PNG corpus: `n` random 8-bit images per label under `root/<label>/`,
/// plus `root/manifest.json` listing the labels in order.
pub fn write_png_corpus(root: &Path, labels: &[&str], n: usize, side: usize, seed: u64) {
    let mut classes = Vec::new();
    for (ci, label) in labels.iter().enumerate() {
        let dir = root.join(label);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..n {
            let mut rng = freqscope::rng::substream(seed, (ci * 100_000 + i) as u64);
            let img = uniform_noise(side, side, &mut rng);
            img.save_png(&dir.join(format!("{i:04}.png"))).unwrap();
        }
        classes.push(serde_json::json!({"label": label, "root": label, "glob": "*.png"}));
    }
    let manifest = serde_json::json!({"name": "synthetic", "seed": seed, "classes": classes});
    std::fs::write(root.join("manifest.json"), manifest.to_string()).unwrap();
}

/// Every file under `dir`, relative path -> bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
