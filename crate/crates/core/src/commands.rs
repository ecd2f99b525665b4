//! The experiment commands behind the `freqscope` binary.
//!
//! Each command writes its artifacts into an output directory and returns a
//! [`RunReport`]. Corpus work is split into fixed-size chunks in file order
//! and merged in that same order, so outputs do not depend on the thread
//! count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::classifier::{
    evaluate, extract_features, fit_pipeline, grid_report_csv, FeatureMatrix, GridEntry, LRModel, TransformTag,
};
use crate::diffusion::{linear_schedule, mse_by_timestep, schedule_csv};
use crate::error::{Error, Result};
use crate::featurespace::{mmd2_median, FeatureCloud};
use crate::io::{heatmap_png, read_matrix, reduced_csv, spectrum_csv, write_artifact, write_atomic, Artifact, HeatmapOptions};
use crate::manifest::{cache_key, ArtifactCache, DatasetManifest, PipelineDescriptor};
use crate::metrics::{summarize, Label, ScoreSet};
use crate::perturb::{apply_pipeline_indexed, PerturbConfig, PerturbRecord};
use crate::preprocess::{center_crop, load_gray, median_highpass, GrayImage};
use crate::transforms::{
    clip_for_display, dft2, reduce_spectrum, spectral_error, ReducedSpectrum, Spectrum2D, SpectrumAccumulator,
    SpectrumKind,
};

const CHUNK: usize = 16;
/// Bumped whenever cached per-image spectra would change.
pub const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    pub elapsed_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunReport {
    fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config,
            elapsed_seconds: 0.0,
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        self.outputs.push(path);
        Ok(())
    }

    fn write_artifact(&mut self, path: PathBuf, a: &Artifact) -> Result<()> {
        write_artifact(&path, a)?;
        self.outputs.push(path);
        Ok(())
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn finish(mut self, started: Instant) -> Self {
        self.elapsed_seconds = started.elapsed().as_secs_f64();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Which manifest files a corpus command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    #[default]
    All,
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Subset::All),
            "train" => Ok(Subset::Train),
            "val" => Ok(Subset::Val),
            "test" => Ok(Subset::Test),
            _ => Err(Error::Parameter(format!("unknown subset {s:?}"))),
        }
    }
}

pub fn class_files(m: &DatasetManifest, label: &str, subset: Subset) -> Result<Vec<PathBuf>> {
    let class = m.class(label)?;
    let files = match subset {
        Subset::All => class.files.clone(),
        _ => {
            let s = m
                .split()
                .into_iter()
                .find(|s| s.label == label)
                .expect("split covers every class");
            match subset {
                Subset::Train => s.train,
                Subset::Val => s.val,
                _ => s.test,
            }
        }
    };
    if files.is_empty() {
        return Err(Error::Data(format!("class {label:?} has no files in subset {subset:?}")));
    }
    Ok(files)
}

/// Per-image path from file to spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPipeline {
    pub crop: Option<usize>,
    pub highpass_kernel: Option<usize>,
    pub kind: SpectrumKind,
}

impl SpectrumPipeline {
    fn descriptor(&self) -> PipelineDescriptor {
        PipelineDescriptor {
            transform: self.kind.to_string(),
            crop: self.crop,
            highpass_kernel: self.highpass_kernel,
            eps: 0.0,
            version: PIPELINE_VERSION,
        }
    }

    pub fn prepare(&self, img: &GrayImage) -> Result<GrayImage> {
        let img = match self.crop {
            Some(c) => center_crop(img, c)?,
            None => img.clone(),
        };
        match self.highpass_kernel {
            Some(k) => median_highpass(&img, k),
            None => Ok(img),
        }
    }

    pub fn spectrum_of(&self, img: &GrayImage) -> Result<Spectrum2D> {
        dft2(&self.prepare(img)?, self.kind)
    }

    fn spectrum_of_file(&self, path: &Path, cache: Option<&ArtifactCache>) -> Result<Spectrum2D> {
        let compute = || Ok(Artifact::Spectrum(self.spectrum_of(&load_gray(path)?)?));
        let artifact = match cache {
            Some(c) => {
                let key = cache_key(path, &self.descriptor())?;
                c.get_or_compute(&key, compute)?
            }
            None => compute()?,
        };
        match artifact {
            Artifact::Spectrum(s) if s.kind() == self.kind => Ok(s),
            _ => Err(Error::State(format!("cache entry for {} has the wrong type", path.display()))),
        }
    }
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::Data(format!("{}: {other}", path.display())),
    })
}

/// Mean spectrum of a list of files.
pub fn mean_spectrum_of_files(
    files: &[PathBuf],
    pipeline: &SpectrumPipeline,
    cache: Option<&ArtifactCache>,
) -> Result<Spectrum2D> {
    if files.is_empty() {
        return Err(Error::Data("no images to average".into()));
    }
    let partials: Vec<SpectrumAccumulator> = files
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = SpectrumAccumulator::new();
            for f in chunk {
                let spec = with_path(f, pipeline.spectrum_of_file(f, cache))?;
                with_path(f, acc.accumulate(&spec))?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    merge_in_order(&partials)?.finalize_mean()
}

/// Mean spectrum of in-memory images, chunked like the file variant.
pub fn mean_spectrum(images: &[GrayImage], pipeline: &SpectrumPipeline) -> Result<Spectrum2D> {
    if images.is_empty() {
        return Err(Error::Data("no images to average".into()));
    }
    let partials: Vec<SpectrumAccumulator> = images
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = SpectrumAccumulator::new();
            for img in chunk {
                acc.accumulate(&pipeline.spectrum_of(img)?)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    merge_in_order(&partials)?.finalize_mean()
}

fn merge_in_order(partials: &[SpectrumAccumulator]) -> Result<SpectrumAccumulator> {
    let mut it = partials.iter();
    let mut total = it.next().cloned().unwrap_or_default();
    for p in it {
        total = total.merge(p)?;
    }
    Ok(total)
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumOptions {
    pub label: String,
    pub subset: Subset,
    pub crop: Option<usize>,
    pub highpass_kernel: Option<usize>,
    /// Average power instead of magnitude.
    pub power: bool,
    pub heatmap: HeatmapOptions,
}

impl SpectrumOptions {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            subset: Subset::All,
            crop: None,
            highpass_kernel: Some(3),
            power: false,
            heatmap: HeatmapOptions::default(),
        }
    }
}

/// Mean DFT spectrum of one class: `spectrum_<label>.{bin,csv,png}`.
pub fn cmd_spectrum(
    m: &DatasetManifest,
    opts: &SpectrumOptions,
    out: &Path,
    cache: Option<&ArtifactCache>,
) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new("spectrum", json!({ "manifest": m.name, "seed": m.seed, "options": opts }));
    let files = class_files(m, &opts.label, opts.subset)?;
    let pipeline = SpectrumPipeline {
        crop: opts.crop,
        highpass_kernel: opts.highpass_kernel,
        kind: if opts.power { SpectrumKind::DftPower } else { SpectrumKind::DftMagnitude },
    };
    let mean = mean_spectrum_of_files(&files, &pipeline, cache)?;
    let stem = format!("spectrum_{}", sanitize(&opts.label));
    report.write_artifact(out.join(format!("{stem}.bin")), &Artifact::Spectrum(mean.clone()))?;
    report.write(out.join(format!("{stem}.csv")), spectrum_csv(&mean).as_bytes())?;
    report.write(out.join(format!("{stem}.png")), &heatmap_png(&mean, &opts.heatmap)?)?;
    Ok(report.finish(started))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedOptions {
    pub real_label: String,
    pub fake_label: String,
    pub subset: Subset,
    pub crop: Option<usize>,
    pub highpass_kernel: Option<usize>,
}

impl ReducedOptions {
    pub fn new(real: impl Into<String>, fake: impl Into<String>) -> Self {
        Self {
            real_label: real.into(),
            fake_label: fake.into(),
            subset: Subset::All,
            crop: None,
            highpass_kernel: None,
        }
    }
}

/// `bin,radius,error,error_clipped`
pub fn spectral_error_csv(real: &ReducedSpectrum, err: &[f64]) -> String {
    let mapping = real.mapping();
    let mut s = String::from("bin,radius,error,error_clipped\n");
    for (i, (e, c)) in err.iter().zip(clip_for_display(err)).enumerate() {
        s.push_str(&format!("{i},{},{e},{c}\n", mapping.bin_radius(i)));
    }
    s
}

/// Reduced power spectra of two classes and their relative error.
pub fn cmd_reduced(
    m: &DatasetManifest,
    opts: &ReducedOptions,
    out: &Path,
    cache: Option<&ArtifactCache>,
) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new("reduced", json!({ "manifest": m.name, "seed": m.seed, "options": opts }));
    let pipeline = SpectrumPipeline {
        crop: opts.crop,
        highpass_kernel: opts.highpass_kernel,
        kind: SpectrumKind::DftPower,
    };
    let mut reduced = Vec::new();
    for label in [&opts.real_label, &opts.fake_label] {
        let files = class_files(m, label, opts.subset)?;
        let r = reduce_spectrum(&mean_spectrum_of_files(&files, &pipeline, cache)?)?;
        let empty = r.empty_bins();
        if !empty.is_empty() {
            report.warn(format!("class {label:?}: empty radial bins {empty:?}"));
        }
        let stem = format!("reduced_{}", sanitize(label));
        report.write_artifact(out.join(format!("{stem}.bin")), &Artifact::Reduced(r.clone()))?;
        report.write(out.join(format!("{stem}.csv")), reduced_csv(&r).as_bytes())?;
        reduced.push(r);
    }
    let err = spectral_error(&reduced[1], &reduced[0])?;
    report.write(out.join("spectral_error.csv"), spectral_error_csv(&reduced[0], &err).as_bytes())?;
    Ok(report.finish(started))
}

/// Percent with one decimal.
pub fn percent(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// `source,auroc,pd@5%,pd@1%`, one row per score file.
pub fn cmd_eval_scores(paths: &[PathBuf], out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new("eval-scores", json!({ "files": paths }));
    if paths.is_empty() {
        return Err(Error::Parameter("no score files given".into()));
    }
    let mut csv = String::from("source,auroc,pd@5%,pd@1%\n");
    for p in paths {
        let s = summarize(&ScoreSet::read_csv(p)?)?;
        let source = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
        csv.push_str(&format!(
            "{source},{},{},{}\n",
            percent(s.auroc),
            percent(s.pd_at_5),
            percent(s.pd_at_1)
        ));
    }
    report.write(out.join("metrics.csv"), csv.as_bytes())?;
    Ok(report.finish(started))
}

/// Images with labels and ids for one partition.
#[derive(Debug, Clone, Default)]
pub struct LabeledImages {
    pub images: Vec<GrayImage>,
    pub labels: Vec<Label>,
    pub ids: Vec<String>,
}

impl LabeledImages {
    pub fn push(&mut self, img: GrayImage, label: Label, id: String) {
        self.images.push(img);
        self.labels.push(label);
        self.ids.push(id);
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LogregRow {
    pub transform: TransformTag,
    pub lambda: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Test accuracy minus pixel test accuracy, when pixels were run.
    pub gain_vs_pixel: Option<f64>,
    pub grid: Vec<GridEntry>,
    #[serde(skip)]
    pub model: LRModel,
}

fn features(part: &LabeledImages, tag: TransformTag) -> Result<FeatureMatrix> {
    let mut f = extract_features(&part.images, &part.labels, tag)?;
    f.set_ids(part.ids.clone())?;
    Ok(f)
}

/// Extract, standardize, grid-search and test every transform.
pub fn logreg_study(
    train: &LabeledImages,
    val: &LabeledImages,
    test: &LabeledImages,
    tags: &[TransformTag],
    grid: &[f64],
) -> Result<Vec<LogregRow>> {
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::Data(format!(
            "logistic regression needs train, val and test images (got {}, {}, {})",
            train.len(),
            val.len(),
            test.len()
        )));
    }
    let mut rows = Vec::with_capacity(tags.len());
    for &tag in tags {
        let (tr, va, te) = (features(train, tag)?, features(val, tag)?, features(test, tag)?);
        let fit = fit_pipeline(&tr, &va, grid)?;
        let best = fit
            .report
            .iter()
            .find(|e| e.lambda == fit.best_lambda)
            .copied()
            .expect("best lambda is on the grid");
        let (test_acc, _) = evaluate(&fit.model, &te)?;
        rows.push(LogregRow {
            transform: tag,
            lambda: fit.best_lambda,
            train_acc: best.train_acc,
            val_acc: best.val_acc,
            test_acc,
            gain_vs_pixel: None,
            grid: fit.report,
            model: fit.model,
        });
    }
    if let Some(pixel) = rows.iter().find(|r| r.transform == TransformTag::Pixel).map(|r| r.test_acc) {
        for r in &mut rows {
            r.gain_vs_pixel = Some(r.test_acc - pixel);
        }
    }
    Ok(rows)
}

pub fn logreg_csv(rows: &[LogregRow]) -> String {
    let mut s = String::from("transform,lambda,train_acc,val_acc,test_acc,gain_vs_pixel\n");
    for r in rows {
        let gain = r.gain_vs_pixel.map(|g| format!("{:+.1}", 100.0 * g)).unwrap_or_default();
        s.push_str(&format!(
            "{},{:e},{},{},{},{gain}\n",
            r.transform,
            r.lambda,
            percent(r.train_acc),
            percent(r.val_acc),
            percent(r.test_acc)
        ));
    }
    s
}

fn load_partition(files: &[(PathBuf, Label, String)]) -> Result<LabeledImages> {
    let images: Vec<GrayImage> = files
        .par_iter()
        .map(|(p, _, _)| load_gray(p))
        .collect::<Result<_>>()?;
    let mut part = LabeledImages::default();
    for (img, (_, label, id)) in images.into_iter().zip(files) {
        part.push(img, *label, id.clone());
    }
    Ok(part)
}

fn file_id(label: &str, path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    format!("{label}/{stem}")
}

/// Logistic-regression table over the manifest split.
pub fn cmd_logreg(m: &DatasetManifest, tags: &[TransformTag], grid: &[f64], out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new(
        "logreg",
        json!({ "manifest": m.name, "seed": m.seed, "transforms": tags, "lambda_grid": grid }),
    );
    if tags.is_empty() {
        return Err(Error::Parameter("no transforms requested".into()));
    }
    let splits = m.split();
    let mut parts: [Vec<(PathBuf, Label, String)>; 3] = Default::default();
    for (s, c) in splits.iter().zip(&m.classes) {
        let label = c.binary_label();
        for (dst, files) in parts.iter_mut().zip([&s.train, &s.val, &s.test]) {
            dst.extend(files.iter().map(|p| (p.clone(), label, file_id(&c.label, p))));
        }
    }
    let [train, val, test] = &parts;
    let rows = logreg_study(&load_partition(train)?, &load_partition(val)?, &load_partition(test)?, tags, grid)?;
    report.write(out.join("logreg.csv"), logreg_csv(&rows).as_bytes())?;
    for r in &rows {
        report.write(
            out.join(format!("model_{}.json", r.transform)),
            serde_json::to_string_pretty(&r.model)?.as_bytes(),
        )?;
        report.write(out.join(format!("grid_{}.csv", r.transform)), grid_report_csv(&r.grid).as_bytes())?;
    }
    Ok(report.finish(started))
}

/// Perturbed PNGs under `out/<label>/` plus `records.jsonl`.
///
/// Items are indexed in manifest order (class, then sorted file), and item
/// `i` uses random substream `i`. Unreadable or unwritable files are
/// skipped with a warning.
pub fn cmd_perturb(m: &DatasetManifest, cfg: &PerturbConfig, out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;
    let mut report = RunReport::new("perturb", json!({ "manifest": m.name, "config": cfg }));
    let items: Vec<(String, PathBuf, String)> = m
        .classes
        .iter()
        .flat_map(|c| c.files.iter().map(move |p| (c.label.clone(), p.clone(), file_id(&c.label, p))))
        .collect();
    let results: Vec<Result<(PathBuf, Vec<PerturbRecord>)>> = items
        .par_iter()
        .enumerate()
        .map(|(i, (label, path, id))| {
            let img = load_gray(path)?;
            let (img, applied) = with_path(path, apply_pipeline_indexed(&img, cfg, i as u64))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let dst = out.join(sanitize(label)).join(format!("{stem}.png"));
            write_atomic(&dst, &png_bytes(&img)?)?;
            let records = applied
                .into_iter()
                .map(|applied| PerturbRecord {
                    image_id: id.clone(),
                    applied,
                })
                .collect();
            Ok((dst, records))
        })
        .collect();
    let mut jsonl = String::new();
    let mut failed = 0;
    for (r, (_, path, _)) in results.into_iter().zip(&items) {
        match r {
            Ok((dst, records)) => {
                report.outputs.push(dst);
                for rec in records {
                    jsonl.push_str(&serde_json::to_string(&rec)?);
                    jsonl.push('\n');
                }
            }
            Err(e) => {
                failed += 1;
                report.warn(format!("skipped {}: {e}", path.display()));
            }
        }
    }
    if failed > 0 {
        report.warn(format!("{failed} of {} images failed", items.len()));
    }
    report.write(out.join("records.jsonl"), jsonl.as_bytes())?;
    Ok(report.finish(started))
}

fn png_bytes(img: &GrayImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.to_luma8()
        .write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(buf.into_inner())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleOptions {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub lambda: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        use crate::diffusion::{DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_HYBRID_LAMBDA, DEFAULT_T};
        Self {
            steps: DEFAULT_T,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
            lambda: DEFAULT_HYBRID_LAMBDA,
        }
    }
}

pub fn cmd_schedule(opts: &ScheduleOptions, out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new("schedule", json!(opts));
    let sched = linear_schedule(opts.steps, opts.beta_start, opts.beta_end)?;
    report.write(out.join("schedule.csv"), schedule_csv(&sched, opts.lambda)?.as_bytes())?;
    Ok(report.finish(started))
}

/// `pair,sigma,mmd2,error`; a failing pair gets an error message instead
/// of values.
pub fn cmd_mmd(pairs: &[(PathBuf, PathBuf)], out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new("mmd", json!({ "pairs": pairs }));
    if pairs.is_empty() {
        return Err(Error::Parameter("no feature file pairs given".into()));
    }
    let load = |p: &Path| -> Result<FeatureCloud> {
        let tag = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        FeatureCloud::from_matrix(read_matrix(p)?, tag)
    };
    let mut csv = String::from("pair,sigma,mmd2,error\n");
    for (a, b) in pairs {
        let row = load(a).and_then(|ca| load(b).map(|cb| (ca, cb))).and_then(|(ca, cb)| {
            let r = mmd2_median(&ca, &cb)?;
            Ok((format!("{}:{}", ca.source_tag, cb.source_tag), r))
        });
        match row {
            Ok((name, r)) => {
                if r.degenerate {
                    report.warn(format!("{name}: all features coincide, indicator kernel used"));
                }
                csv.push_str(&format!("{name},{},{},\n", r.sigma, r.mmd2));
            }
            Err(e) => {
                let name = format!("{}:{}", a.display(), b.display());
                report.warn(format!("{name}: {e}"));
                csv.push_str(&format!("{name},,,\"{}\"\n", e.to_string().replace('"', "'")));
            }
        }
    }
    report.write(out.join("mmd.csv"), csv.as_bytes())?;
    Ok(report.finish(started))
}

/// `t,count,mean,std` from a directory of `t=<int>.bin` pair files.
pub fn cmd_mse(dir: &Path, out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new("mse", json!({ "dir": dir }));
    let stats = mse_by_timestep(dir)?;
    if stats.is_empty() {
        return Err(Error::Data(format!("no t=<int>.bin files in {}", dir.display())));
    }
    let mut csv = String::from("t,count,mean,std\n");
    for s in &stats {
        if s.single_sample {
            report.warn(format!("t={}: a single pair, std reported as 0", s.t));
        }
        csv.push_str(&format!("{},{},{},{}\n", s.t, s.count, s.mean, s.std));
    }
    report.write(out.join("mse.csv"), csv.as_bytes())?;
    Ok(report.finish(started))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheAction {
    Stats,
    Verify,
    Clear,
}

pub fn cmd_cache(cache: &ArtifactCache, action: CacheAction) -> Result<RunReport> {
    let started = Instant::now();
    let result = match action {
        CacheAction::Stats => json!(cache.stats()?),
        CacheAction::Verify => json!(cache.verify()?),
        CacheAction::Clear => json!({ "removed": cache.clear()? }),
    };
    let report = RunReport::new("cache", json!({ "dir": cache.dir(), "action": action, "result": result }));
    Ok(report.finish(started))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_formatting() {
        assert_eq!(percent(1.0), "100.0");
        assert_eq!(percent(0.75), "75.0");
        assert_eq!(percent(0.0), "0.0");
        assert_eq!(percent(0.12345), "12.3");
    }

    #[test]
    fn chunked_mean_matches_sequential() {
        let images: Vec<GrayImage> = (0..37)
            .map(|i| GrayImage::from_fn(8, 8, |x, y| ((x * 3 + y * 5 + i) % 11) as f64 / 11.0).unwrap())
            .collect();
        let p = SpectrumPipeline {
            crop: None,
            highpass_kernel: Some(3),
            kind: SpectrumKind::DftPower,
        };
        let mean = mean_spectrum(&images, &p).unwrap();
        let mut acc = SpectrumAccumulator::new();
        for img in &images {
            acc.accumulate(&p.spectrum_of(img).unwrap()).unwrap();
        }
        let seq = acc.finalize_mean().unwrap();
        for (a, b) in mean.values().iter().zip(seq.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn subset_parse() {
        assert_eq!("test".parse::<Subset>().unwrap(), Subset::Test);
        assert!("dev".parse::<Subset>().is_err());
    }
}
