//! Corpus manifests, reproducible splits and the spectrum cache.
//!
//! A manifest is a JSON document:
//!
//! ```json
//! {
//!   "name": "lsun-bedroom",
//!   "seed": 7,
//!   "classes": [
//!     {"label": "real", "root": "real", "glob": "*.png"},
//!     {"label": "ddpm", "root": "fake/ddpm", "glob": "**/*.png"}
//!   ],
//!   "split": {"train": 0.78, "val": 0.02, "test": 0.2}
//! }
//! ```
//!
//! Relative roots resolve against the manifest's own directory. When every
//! split value is an integer the split is a per-class file count; otherwise
//! the values are ratios summing to 1.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{decode, encode, write_atomic, Artifact};
use crate::metrics::Label;
use crate::rng::{labeled_stream, shuffle};

pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.78, 0.02, 0.20);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitSpec {
    Counts { train: usize, val: usize, test: usize },
    Ratios { train: f64, val: f64, test: f64 },
}

impl Default for SplitSpec {
    fn default() -> Self {
        let (train, val, test) = DEFAULT_SPLIT;
        SplitSpec::Ratios { train, val, test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassEntry {
    pub label: String,
    pub root: PathBuf,
    pub glob: String,
    /// Matched files, sorted lexicographically.
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

impl ClassEntry {
    /// `real` is the real class; every other label names a generator.
    pub fn binary_label(&self) -> Label {
        if self.label == "real" {
            Label::Real
        } else {
            Label::Fake
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetManifest {
    pub name: String,
    pub seed: u64,
    pub classes: Vec<ClassEntry>,
    pub split: SplitSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    name: String,
    #[serde(default)]
    seed: u64,
    classes: Vec<RawClass>,
    #[serde(default)]
    split: Option<RawSplit>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    label: String,
    root: PathBuf,
    #[serde(default = "default_glob")]
    glob: String,
}

fn default_glob() -> String {
    "*".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    train: serde_json::Number,
    val: serde_json::Number,
    test: serde_json::Number,
}

fn parse_split(raw: &RawSplit) -> Result<SplitSpec> {
    let parts = [&raw.train, &raw.val, &raw.test];
    if parts.iter().all(|n| n.is_u64()) {
        let c: Vec<usize> = parts
            .iter()
            .map(|n| usize::try_from(n.as_u64().unwrap_or(0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Manifest("split count too large".into()))?;
        return Ok(SplitSpec::Counts {
            train: c[0],
            val: c[1],
            test: c[2],
        });
    }
    let r: Vec<f64> = parts.iter().map(|n| n.as_f64().unwrap_or(f64::NAN)).collect();
    if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Manifest(format!("split ratios must lie in [0, 1], got {r:?}")));
    }
    let sum: f64 = r.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Manifest(format!("split ratios sum to {sum}, expected 1")));
    }
    Ok(SplitSpec::Ratios {
        train: r[0],
        val: r[1],
        test: r[2],
    })
}

fn enumerate_files(root: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let full = format!(
        "{}/{}",
        glob::Pattern::escape(&root.to_string_lossy()),
        pattern
    );
    let paths = glob::glob(&full).map_err(|e| Error::Manifest(format!("bad glob {pattern:?}: {e}")))?;
    let mut files = Vec::new();
    for entry in paths {
        let p = entry.map_err(|e| {
            let path = e.path().to_path_buf();
            Error::io(path, e.into())
        })?;
        if p.is_file() {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&text, base)
}

/// Parse manifest JSON with relative roots resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let raw: RawManifest = serde_json::from_str(text)
        .map_err(|e| Error::Manifest(format!("line {} column {}: {e}", e.line(), e.column())))?;
    if raw.classes.is_empty() {
        return Err(Error::Manifest("manifest lists no classes".into()));
    }
    let mut seen = HashSet::new();
    for c in &raw.classes {
        if c.label.is_empty() {
            return Err(Error::Manifest("empty class label".into()));
        }
        if !seen.insert(c.label.as_str()) {
            return Err(Error::Manifest(format!("duplicate class label {:?}", c.label)));
        }
    }
    let split = raw.split.as_ref().map(parse_split).transpose()?.unwrap_or_default();

    let mut classes = Vec::with_capacity(raw.classes.len());
    for c in raw.classes {
        let root = if c.root.is_absolute() { c.root } else { base.join(c.root) };
        let meta = std::fs::metadata(&root).map_err(|e| Error::io(&root, e))?;
        if !meta.is_dir() {
            return Err(Error::io(
                &root,
                std::io::Error::new(std::io::ErrorKind::NotADirectory, "class root is not a directory"),
            ));
        }
        let files = enumerate_files(&root, &c.glob)?;
        if let SplitSpec::Counts { train, val, test } = split {
            let want = train + val + test;
            if want > files.len() {
                return Err(Error::Manifest(format!(
                    "class {:?}: split needs {want} files (train {train} + val {val} + test {test}) but only {} match",
                    c.label,
                    files.len()
                )));
            }
        }
        classes.push(ClassEntry {
            label: c.label,
            root,
            glob: c.glob,
            files,
        });
    }
    Ok(DatasetManifest {
        name: raw.name,
        seed: raw.seed,
        classes,
        split,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassSplit {
    pub label: String,
    pub train: Vec<PathBuf>,
    pub val: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
    /// Files left over by a count split that does not use every file.
    pub unused: Vec<PathBuf>,
}

fn partition_sizes(split: SplitSpec, n: usize) -> (usize, usize, usize) {
    match split {
        SplitSpec::Counts { train, val, test } => (train, val, test),
        SplitSpec::Ratios { train, val, .. } => {
            let tr = ((train * n as f64).round() as usize).min(n);
            let va = ((val * n as f64).round() as usize).min(n - tr);
            (tr, va, n - tr - va)
        }
    }
}

impl DatasetManifest {
    pub fn class(&self, label: &str) -> Result<&ClassEntry> {
        self.classes
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::Manifest(format!("no class labelled {label:?} in manifest {:?}", self.name)))
    }

    /// Shuffle each class with a stream keyed by `(seed, label)` and cut it
    /// into contiguous train/val/test runs.
    pub fn split(&self) -> Vec<ClassSplit> {
        self.classes
            .iter()
            .map(|c| {
                let mut files = c.files.clone();
                shuffle(&mut files, &mut labeled_stream(self.seed, &c.label));
                let (tr, va, te) = partition_sizes(self.split, files.len());
                let unused = files.split_off(tr + va + te);
                let test = files.split_off(tr + va);
                let val = files.split_off(tr);
                ClassSplit {
                    label: c.label.clone(),
                    train: files,
                    val,
                    test,
                    unused,
                }
            })
            .collect()
    }
}

pub fn split(manifest: &DatasetManifest) -> Vec<ClassSplit> {
    manifest.split()
}

/// Every parameter that influences a cached artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDescriptor {
    pub transform: String,
    pub crop: Option<usize>,
    pub highpass_kernel: Option<usize>,
    pub eps: f64,
    pub version: u32,
}

impl PipelineDescriptor {
    /// Fixed field order, no whitespace.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("descriptor serializes")
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn cache_key_for_content(content: &[u8], desc: &PipelineDescriptor) -> String {
    let mut h = Sha256::new();
    h.update(content_hash(content).as_bytes());
    h.update(b"\n");
    h.update(desc.canonical().as_bytes());
    hex::encode(h.finalize())
}

pub fn cache_key(image: &Path, desc: &PipelineDescriptor) -> Result<String> {
    let bytes = std::fs::read(image).map_err(|e| Error::io(image, e))?;
    Ok(cache_key_for_content(&bytes, desc))
}

/// Directory of `<key>.bin` artifacts, each with a `<key>.sha256` sidecar.
#[derive(Debug, Clone)]
pub struct ArtifactCache {
    dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct VerifyReport {
    pub ok: usize,
    pub evicted: usize,
}

fn is_key(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

impl ArtifactCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.bin")), self.dir.join(format!("{key}.sha256")))
    }

    fn evict(&self, key: &str, why: &str) {
        log::warn!("evicting corrupt cache entry {key}: {why}");
        let (bin, sum) = self.paths(key);
        let _ = std::fs::remove_file(bin);
        let _ = std::fs::remove_file(sum);
    }

    /// `None` on a miss or after evicting a corrupt entry.
    pub fn get(&self, key: &str) -> Option<Artifact> {
        let (bin, sum) = self.paths(key);
        let bytes = std::fs::read(&bin).ok()?;
        let Ok(expected) = std::fs::read_to_string(&sum) else {
            self.evict(key, "missing checksum");
            return None;
        };
        if expected.trim() != content_hash(&bytes) {
            self.evict(key, "checksum mismatch");
            return None;
        }
        match decode(&bytes) {
            Ok(a) => Some(a),
            Err(e) => {
                self.evict(key, &e.to_string());
                None
            }
        }
    }

    pub fn put(&self, key: &str, artifact: &Artifact) -> Result<()> {
        if !is_key(key) {
            return Err(Error::Parameter(format!("malformed cache key {key:?}")));
        }
        let bytes = encode(artifact)?;
        let (bin, sum) = self.paths(key);
        write_atomic(&bin, &bytes)?;
        write_atomic(&sum, content_hash(&bytes).as_bytes())
    }

    pub fn get_or_compute(&self, key: &str, compute: impl FnOnce() -> Result<Artifact>) -> Result<Artifact> {
        if let Some(a) = self.get(key) {
            return Ok(a);
        }
        let a = compute()?;
        self.put(key, &a)?;
        Ok(a)
    }

    fn keys(&self) -> Result<Vec<String>> {
        let rd = std::fs::read_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let mut keys = Vec::new();
        for entry in rd {
            let entry = entry.map_err(|e| Error::io(&self.dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".bin") {
                if is_key(stem) {
                    keys.push(stem.to_string());
                }
            }
        }
        keys.sort();
        Ok(keys)
    }

    pub fn stats(&self) -> Result<CacheStats> {
        let mut s = CacheStats::default();
        for key in self.keys()? {
            let (bin, _) = self.paths(&key);
            s.entries += 1;
            s.bytes += std::fs::metadata(&bin).map(|m| m.len()).unwrap_or(0);
        }
        Ok(s)
    }

    pub fn verify(&self) -> Result<VerifyReport> {
        let mut r = VerifyReport::default();
        for key in self.keys()? {
            if self.get(&key).is_some() {
                r.ok += 1;
            } else {
                r.evicted += 1;
            }
        }
        Ok(r)
    }

    /// Remove every entry; returns how many were removed.
    pub fn clear(&self) -> Result<usize> {
        let keys = self.keys()?;
        for key in &keys {
            let (bin, sum) = self.paths(key);
            std::fs::remove_file(&bin).map_err(|e| Error::io(&bin, e))?;
            let _ = std::fs::remove_file(sum);
        }
        Ok(keys.len())
    }
}
