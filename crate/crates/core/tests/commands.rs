mod common;

use std::path::{Path, PathBuf};

use freqscope::classifier::TransformTag;
use freqscope::commands::{
    cmd_cache, cmd_eval_scores, cmd_logreg, cmd_mmd, cmd_mse, cmd_perturb, cmd_reduced, cmd_schedule, cmd_spectrum,
    CacheAction, ReducedOptions, ScheduleOptions, SpectrumOptions,
};
use freqscope::io::{encode, read_artifact, write_artifact, Artifact, Matrix};
use freqscope::manifest::{load_manifest, ArtifactCache, DatasetManifest};
use freqscope::perturb::{ApplyProbabilities, PerturbConfig};
use freqscope::rng::substream;
use freqscope::GrayImage;
use rand::Rng;
use tempfile::TempDir;

/// Writes `root/<label>/NNNN.png` from `make(class, i)` plus a manifest.
fn corpus(root: &Path, labels: &[&str], n: usize, make: impl Fn(usize, usize) -> GrayImage) -> DatasetManifest {
    let mut classes = Vec::new();
    for (ci, label) in labels.iter().enumerate() {
        let dir = root.join(label);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..n {
            make(ci, i).save_png(&dir.join(format!("{i:04}.png"))).unwrap();
        }
        classes.push(serde_json::json!({"label": label, "root": label, "glob": "*.png"}));
    }
    let m = serde_json::json!({"name": "cmd", "seed": 7, "classes": classes});
    std::fs::write(root.join("manifest.json"), m.to_string()).unwrap();
    load_manifest(&root.join("manifest.json")).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(path: &Path, j: usize) -> Vec<f64> {
    rows(path).iter().map(|r| r[j].parse().unwrap()).collect()
}

/// 8-bit noise image with values in `lo..=hi`.
fn byte_noise(side: usize, lo: u8, hi: u8, seed: u64, i: usize) -> GrayImage {
    let mut rng = substream(seed, i as u64);
    GrayImage::new(side, side, (0..side * side).map(|_| f64::from(rng.random_range(lo..=hi)) / 255.0).collect()).unwrap()
}

#[test]
fn spectrum_of_constant_corpus_has_a_single_bright_pixel() {
    let dir = TempDir::new().unwrap();
    let m = corpus(dir.path(), &["real"], 4, |_, _| GrayImage::filled(16, 16, 0.5).unwrap());
    let out = TempDir::new().unwrap();
    let mut opts = SpectrumOptions::new("real");
    opts.highpass_kernel = None;
    let report = cmd_spectrum(&m, &opts, out.path(), None).unwrap();
    assert_eq!(report.outputs.len(), 3);
    let png = image::open(out.path().join("spectrum_real.png")).unwrap().to_luma8();
    let bright: Vec<_> = png.enumerate_pixels().filter(|(_, _, p)| p.0[0] > 0).map(|(x, y, _)| (x, y)).collect();
    assert_eq!(bright, [(8, 8)]);

    let first = std::fs::read(out.path().join("spectrum_real.bin")).unwrap();
    cmd_spectrum(&m, &opts, out.path(), None).unwrap();
    assert_eq!(first, std::fs::read(out.path().join("spectrum_real.bin")).unwrap());
}

#[test]
fn spectrum_with_cache_matches_without() {
    let dir = TempDir::new().unwrap();
    let m = corpus(dir.path(), &["real"], 20, |_, i| byte_noise(16, 0, 255, 1, i));
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cache = ArtifactCache::open(dir.path().join("cache")).unwrap();
    let opts = SpectrumOptions::new("real");
    cmd_spectrum(&m, &opts, a.path(), None).unwrap();
    cmd_spectrum(&m, &opts, b.path(), Some(&cache)).unwrap();
    cmd_spectrum(&m, &opts, b.path(), Some(&cache)).unwrap();
    let read = |d: &TempDir| std::fs::read(d.path().join("spectrum_real.bin")).unwrap();
    assert_eq!(read(&a), read(&b));
    let stats = cmd_cache(&cache, CacheAction::Stats).unwrap();
    assert_eq!(stats.config["result"]["entries"], 20);
    let verify = cmd_cache(&cache, CacheAction::Verify).unwrap();
    assert_eq!(verify.config["result"]["ok"], 20);
    cmd_cache(&cache, CacheAction::Clear).unwrap();
    assert_eq!(cache.stats().unwrap().entries, 0);
}

#[test]
fn reduced_error_of_identical_classes_is_zero() {
    let dir = TempDir::new().unwrap();
    let m = corpus(dir.path(), &["real", "copy"], 6, |_, i| byte_noise(16, 0, 255, 2, i));
    let out = TempDir::new().unwrap();
    let report = cmd_reduced(&m, &ReducedOptions::new("real", "copy"), out.path(), None).unwrap();
    assert!(report.warnings.is_empty());
    let err = column(&out.path().join("spectral_error.csv"), 2);
    assert_eq!(err.len(), 12);
    assert!(err.iter().all(|e| *e == 0.0));
    let r = read_artifact(&out.path().join("reduced_real.bin")).unwrap();
    assert!(matches!(r, Artifact::Reduced(_)));
}

#[test]
fn reduced_error_tracks_pixel_scaling() {
    // Doubling every pixel multiplies every power bin by four.
    let dir = TempDir::new().unwrap();
    let m = corpus(dir.path(), &["real", "bright"], 6, |c, i| {
        let base = byte_noise(16, 0, 127, 3, i);
        if c == 0 { base } else { base.map(|v| 2.0 * v).unwrap() }
    });
    let out = TempDir::new().unwrap();
    cmd_reduced(&m, &ReducedOptions::new("real", "bright"), out.path(), None).unwrap();
    let err = column(&out.path().join("spectral_error.csv"), 2);
    assert!(err.iter().all(|e| (e - 3.0).abs() < 1e-9), "{err:?}");
    let clipped = column(&out.path().join("spectral_error.csv"), 3);
    assert!(clipped.iter().all(|e| *e == 1.0));
}

#[test]
fn reduced_error_of_independent_white_noise_is_small() {
    let dir = TempDir::new().unwrap();
    let m = corpus(dir.path(), &["real", "other"], 512, |c, i| byte_noise(64, 0, 255, 4 + c as u64, i));
    let out = TempDir::new().unwrap();
    cmd_reduced(&m, &ReducedOptions::new("real", "other"), out.path(), None).unwrap();
    let err = column(&out.path().join("spectral_error.csv"), 2);
    let inner = &err[1..err.len() - 1];
    assert!(inner.iter().all(|e| e.abs() < 0.1), "{inner:?}");
}

#[test]
fn eval_scores_examples() {
    let dir = TempDir::new().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, format!("id,label,score\n{body}")).unwrap();
        p
    };
    let files = [
        write("perfect.csv", "a,real,0.1\nb,real,0.2\nc,fake,0.8\nd,fake,0.9\n"),
        write("constant.csv", "a,real,0.5\nb,real,0.5\nc,fake,0.5\nd,fake,0.5\n"),
        write("hand.csv", "a,real,0.1\nb,real,0.4\nc,fake,0.35\nd,fake,0.8\n"),
    ];
    let out = TempDir::new().unwrap();
    cmd_eval_scores(&files, out.path()).unwrap();
    let r = rows(&out.path().join("metrics.csv"));
    assert_eq!(r[0], ["perfect", "100.0", "100.0", "100.0"]);
    assert_eq!(r[1], ["constant", "50.0", "0.0", "0.0"]);
    assert_eq!(r[2][..2], ["hand", "75.0"]);

    let bad = write("bad.csv", "a,real,0.1\nb,maybe,0.2\n");
    let err = cmd_eval_scores(&[bad], out.path()).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn logreg_on_a_separable_corpus() {
    let dir = TempDir::new().unwrap();
    // Flat images: dark for real, bright for fake, brightness varying per image.
    let m = corpus(dir.path(), &["real", "gan"], 50, |c, i| {
        let level = [20.0, 170.0][c] + (i * 37 % 61) as f64;
        GrayImage::filled(64, 64, level / 255.0).unwrap()
    });
    let out = TempDir::new().unwrap();
    let report = cmd_logreg(&m, &TransformTag::ALL, &[1e-2, 1.0], out.path()).unwrap();
    let r = rows(&out.path().join("logreg.csv"));
    assert_eq!(r.len(), 5);
    for row in &r {
        assert_eq!(row[4], "100.0", "{row:?}");
        assert_eq!(row[5], "+0.0");
    }
    assert_eq!(report.outputs.len(), 11);
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("model_log_dft.json")).unwrap()).unwrap();
    assert_eq!(model["tag"], "log_dft");
    assert_eq!(model["weights"].as_array().unwrap().len(), 4096);
    assert_eq!(model["mean"].as_array().unwrap().len(), 4096);
}

#[test]
fn perturb_with_zero_probability_reencodes_inputs() {
    let dir = TempDir::new().unwrap();
    let m = corpus(dir.path(), &["real", "gan"], 3, |c, i| byte_noise(20, 0, 255, 7 + c as u64, i));
    let out = TempDir::new().unwrap();
    let cfg = PerturbConfig {
        apply_probability: ApplyProbabilities::uniform(0.0),
        ..PerturbConfig::default()
    };
    let report = cmd_perturb(&m, &cfg, out.path()).unwrap();
    assert!(report.warnings.is_empty());
    for label in ["real", "gan"] {
        for i in 0..3 {
            let name = format!("{label}/{i:04}.png");
            assert_eq!(std::fs::read(dir.path().join(&name)).unwrap(), std::fs::read(out.path().join(&name)).unwrap());
        }
    }
    assert_eq!(std::fs::read_to_string(out.path().join("records.jsonl")).unwrap(), "");
}

#[test]
fn perturb_records_and_determinism() {
    let dir = TempDir::new().unwrap();
    let m = corpus(dir.path(), &["real"], 5, |_, i| byte_noise(24, 0, 255, 9, i));
    let cfg = PerturbConfig {
        blur_kernels: vec![5],
        crop_factor_range: (10.0, 10.0),
        jpeg_quality_range: (50, 50),
        noise_variance_range: (10.0, 10.0),
        apply_probability: ApplyProbabilities { blur: 1.0, crop: 0.0, jpeg: 1.0, noise: 1.0 },
        seed: 3,
    };
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    cmd_perturb(&m, &cfg, a.path()).unwrap();
    cmd_perturb(&m, &cfg, b.path()).unwrap();
    assert_eq!(common::snapshot(a.path()), common::snapshot(b.path()));
    let records = std::fs::read_to_string(a.path().join("records.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = records.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5 * 3);
    assert_eq!(lines[0]["image_id"], "real/0000");
    assert_eq!(lines[0]["perturbation"], "blur");
    assert_eq!(lines[1]["quality"], 50);
}

#[test]
fn perturb_skips_unreadable_files() {
    let dir = TempDir::new().unwrap();
    let m = corpus(dir.path(), &["real"], 2, |_, i| byte_noise(8, 0, 255, 10, i));
    std::fs::write(dir.path().join("real/0001.png"), b"garbage").unwrap();
    let out = TempDir::new().unwrap();
    let report = cmd_perturb(&m, &PerturbConfig::default(), out.path()).unwrap();
    assert_eq!(report.warnings.len(), 2);
    assert!(out.path().join("real/0000.png").exists());
}

#[test]
fn schedule_exports() {
    let out = TempDir::new().unwrap();
    cmd_schedule(&ScheduleOptions::default(), out.path()).unwrap();
    let path = out.path().join("schedule.csv");
    let header = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    let cols: Vec<&str> = header.split(',').collect();
    assert_eq!(cols.len(), 14);
    let simple = cols.iter().position(|c| *c == "w_tilde_simple").unwrap();
    let w = column(&path, simple);
    assert_eq!(w.len(), 1000);
    assert!(w.iter().all(|v| (v - 0.001).abs() < 1e-15));
    for (j, name) in cols.iter().enumerate() {
        if name.starts_with("w_tilde_") {
            assert!((column(&path, j).iter().sum::<f64>() - 1.0).abs() < 1e-9, "{name}");
        }
    }

    let hand = ScheduleOptions { steps: 2, beta_start: 0.1, beta_end: 0.2, lambda: 0.001 };
    cmd_schedule(&hand, out.path()).unwrap();
    let ab = column(&path, 2);
    let bt = column(&path, 3);
    assert!((ab[0] - 0.9).abs() < 1e-12 && (ab[1] - 0.72).abs() < 1e-12);
    assert!(bt[0] == 0.0 && (bt[1] - 0.2 / 2.8).abs() < 1e-12);
}

fn write_cloud(dir: &Path, name: &str, n: usize, d: usize, mu: f64, seed: u64) -> PathBuf {
    let mut rng = substream(seed, 0);
    let values = (0..n * d).map(|_| mu + 0.1 * rng.random::<f64>()).collect();
    let p = dir.join(name);
    write_artifact(&p, &Artifact::Matrix(Matrix::new(n, d, values).unwrap())).unwrap();
    p
}

#[test]
fn mmd_rows() {
    let dir = TempDir::new().unwrap();
    // Unequal sizes put the median distance inside the clouds.
    let a = write_cloud(dir.path(), "a.bin", 60, 3, 0.0, 1);
    let b = write_cloud(dir.path(), "b.bin", 20, 3, 10.0, 2);
    let c = write_cloud(dir.path(), "c.bin", 60, 4, 0.0, 3);
    let out = TempDir::new().unwrap();
    let pairs = vec![(a.clone(), a.clone()), (a.clone(), b.clone()), (b, a.clone()), (a, c)];
    let report = cmd_mmd(&pairs, out.path()).unwrap();
    let r = rows(&out.path().join("mmd.csv"));
    assert_eq!(r[0][2], "0");
    let ab: f64 = r[1][2].parse().unwrap();
    assert!(ab > 0.9);
    assert_eq!(r[1][1..3], r[2][1..3]);
    assert!(r[3][1].is_empty() && !r[3][3].is_empty());
    assert_eq!(report.warnings.len(), 1);
}

#[test]
fn mse_table() {
    let dir = TempDir::new().unwrap();
    let pair = |e: Vec<f64>, p: Vec<f64>| {
        let mut bytes = encode(&Artifact::Matrix(Matrix::new(1, e.len(), e).unwrap())).unwrap();
        bytes.extend(encode(&Artifact::Matrix(Matrix::new(1, p.len(), p).unwrap())).unwrap());
        bytes
    };
    let mut two = pair(vec![1.0, 2.0], vec![1.0, 2.0]);
    two.extend(pair(vec![0.0, 0.0], vec![3.0, 4.0]));
    std::fs::write(dir.path().join("t=10.bin"), two).unwrap();
    std::fs::write(dir.path().join("t=2.bin"), pair(vec![1.0], vec![0.0])).unwrap();
    let out = TempDir::new().unwrap();
    let report = cmd_mse(dir.path(), out.path()).unwrap();
    let r = rows(&out.path().join("mse.csv"));
    assert_eq!(r[0][..3], ["2", "1", "1"]);
    assert_eq!(r[1][..3], ["10", "2", "12.5"]);
    assert_eq!(report.warnings.len(), 1);
}

#[test]
fn reports_serialize() {
    let out = TempDir::new().unwrap();
    let r = cmd_schedule(&ScheduleOptions::default(), out.path()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(v["command"], "schedule");
    assert_eq!(v["config"]["steps"], 1000);
    assert!(v["elapsed_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["outputs"].as_array().unwrap().len(), 1);
}
