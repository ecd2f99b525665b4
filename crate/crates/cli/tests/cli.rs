use std::path::Path;
use std::process::{Command, Output};

use freqscope::GrayImage;
use serde_json::Value;
use tempfile::TempDir;

fn freqscope(out: &Path, args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_freqscope"));
    cmd.args(args).arg("--out").arg(out);
    for var in ["FREQSCOPE_MANIFEST", "FREQSCOPE_SEED", "FREQSCOPE_JOBS", "FREQSCOPE_CACHE_DIR", "FREQSCOPE_OUT"] {
        cmd.env_remove(var);
    }
    cmd
}

fn run(mut cmd: impl std::borrow::BorrowMut<Command>) -> (Output, Value) {
    let out = cmd.borrow_mut().output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let report = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out, report)
}

fn corpus(root: &Path, labels: &[&str], n: usize) -> std::path::PathBuf {
    let mut classes = Vec::new();
    for (c, label) in labels.iter().enumerate() {
        let dir = root.join(label);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..n {
            let img = GrayImage::from_fn(16, 16, |x, y| ((x * 5 + y * 3 + i * 7 + c * 11) % 13) as f64 / 12.0).unwrap();
            img.save_png(&dir.join(format!("{i:03}.png"))).unwrap();
        }
        classes.push(serde_json::json!({"label": label, "root": label, "glob": "*.png"}));
    }
    let path = root.join("manifest.json");
    std::fs::write(&path, serde_json::json!({"name": "cli", "seed": 1, "classes": classes}).to_string()).unwrap();
    path
}

#[test]
fn schedule_writes_csv_and_report() {
    let out = TempDir::new().unwrap();
    let (o, report) = run(freqscope(out.path(), &["schedule", "--steps", "10"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report["command"], "schedule");
    assert_eq!(report["config"]["steps"], 10);
    let csv = std::fs::read_to_string(out.path().join("schedule.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("schedule_report.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn errors_exit_nonzero_with_a_report() {
    let out = TempDir::new().unwrap();
    let (o, _) = run(freqscope(out.path(), &["schedule", "--beta-start", "0.5", "--beta-end", "0.1"]));
    assert!(!o.status.success());
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("schedule_report.json")).unwrap()).unwrap();
    assert_eq!(saved["command"], "schedule");
    assert!(saved["error"].as_str().unwrap().contains("beta"));

    let (o, _) = run(freqscope(out.path(), &["spectrum", "--label", "real"]));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--manifest"));
}

#[test]
fn flag_beats_environment_beats_default() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(dir.path(), &["real"], 6);
    let out = TempDir::new().unwrap();

    let (o, report) = run(freqscope(out.path(), &["spectrum", "--label", "real"]).env("FREQSCOPE_MANIFEST", &manifest));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report["config"]["seed"], 1);

    let (_, report) = run(freqscope(out.path(), &["spectrum", "--label", "real"])
        .env("FREQSCOPE_MANIFEST", &manifest)
        .env("FREQSCOPE_SEED", "5"));
    assert_eq!(report["config"]["seed"], 5);

    let (_, report) = run(freqscope(out.path(), &["spectrum", "--label", "real", "--seed", "9"])
        .env("FREQSCOPE_MANIFEST", &manifest)
        .env("FREQSCOPE_SEED", "5"));
    assert_eq!(report["config"]["seed"], 9);

    let env_out = TempDir::new().unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_freqscope"));
    cmd.args(["schedule", "--steps", "3"]).env("FREQSCOPE_OUT", env_out.path());
    assert!(cmd.output().unwrap().status.success());
    assert!(env_out.path().join("schedule.csv").exists());
}

#[test]
fn outputs_do_not_depend_on_jobs() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(dir.path(), &["real", "gan"], 40);
    let m = manifest.to_str().unwrap();
    let mut bins = Vec::new();
    for jobs in ["1", "3"] {
        let out = TempDir::new().unwrap();
        let (o, _) = run(freqscope(out.path(), &["reduced", "--fake", "gan", "--manifest", m, "--jobs", jobs]));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        bins.push(std::fs::read(out.path().join("reduced_gan.bin")).unwrap());
    }
    assert_eq!(bins[0], bins[1]);
}

#[test]
fn cache_subcommands() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(dir.path(), &["real"], 4);
    let cache = dir.path().join("cache");
    let out = TempDir::new().unwrap();
    let base = ["--manifest", manifest.to_str().unwrap(), "--cache-dir", cache.to_str().unwrap()];
    let (o, _) = run(freqscope(out.path(), &[&["spectrum", "--label", "real"], &base[..]].concat()));
    assert!(o.status.success());
    let (_, stats) = run(freqscope(out.path(), &[&["cache", "stats"], &base[..]].concat()));
    assert_eq!(stats["config"]["result"]["entries"], 4);
    let (_, cleared) = run(freqscope(out.path(), &[&["cache", "clear"], &base[..]].concat()));
    assert_eq!(cleared["config"]["result"]["removed"], 4);
    let (o, _) = run(freqscope(out.path(), &["cache", "stats"]));
    assert!(!o.status.success());
}

#[test]
fn perturb_range_flags() {
    let dir = TempDir::new().unwrap();
    let manifest = corpus(dir.path(), &["real"], 3);
    let out = TempDir::new().unwrap();
    let args = [
        "perturb", "--manifest", manifest.to_str().unwrap(), "--probability", "1", "--blur-kernels", "3",
        "--crop-range", "10,10", "--jpeg-range", "40,40", "--noise-range", "5,5",
    ];
    let (o, report) = run(freqscope(out.path(), &args));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report["config"]["config"]["jpeg_quality_range"], serde_json::json!([40, 40]));
    let records = std::fs::read_to_string(out.path().join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 12);

    let (o, _) = run(freqscope(out.path(), &["perturb", "--manifest", manifest.to_str().unwrap(), "--jpeg-range", "40"]));
    assert!(!o.status.success());
}

#[test]
fn eval_scores_and_mmd_from_files() {
    let dir = TempDir::new().unwrap();
    let scores = dir.path().join("det.csv");
    std::fs::write(&scores, "id,label,score\na,real,0.1\nb,real,0.4\nc,fake,0.35\nd,fake,0.8\n").unwrap();
    let out = TempDir::new().unwrap();
    let (o, _) = run(freqscope(out.path(), &["eval-scores", scores.to_str().unwrap()]));
    assert!(o.status.success());
    let metrics = std::fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    assert!(metrics.lines().nth(1).unwrap().starts_with("det,75.0,"));

    let feats = dir.path().join("f.bin");
    let m = freqscope::io::Matrix::new(3, 2, vec![0.0, 1.0, 2.0, 0.5, 1.0, 3.0]).unwrap();
    freqscope::io::write_artifact(&feats, &freqscope::io::Artifact::Matrix(m)).unwrap();
    let f = feats.to_str().unwrap();
    let (o, _) = run(freqscope(out.path(), &["mmd", "--pair", f, f]));
    assert!(o.status.success());
    let mmd = std::fs::read_to_string(out.path().join("mmd.csv")).unwrap();
    assert_eq!(mmd.lines().nth(1).unwrap().split(',').nth(2), Some("0"));
}
