//! Logistic regression on pixel and frequency features.
//!
//! Images are center-cropped to 64x64 grayscale, transformed, flattened,
//! standardized per feature on the training split, and fed to an
//! L2-regularized logistic regression
//!
//! ```text
//! J(w, b) = sum_i log(1 + exp(-y_i (w . x_i + b))) + lambda / 2 |w|^2,   y_i in {-1, +1}
//! ```
//!
//! with an unregularized bias. Training is deterministic: zero
//! initialization, full-batch L-BFGS with a backtracking line search that
//! only accepts strict decreases of `J`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Label, ScoreEntry, ScoreSet};
use crate::preprocess::{center_crop, GrayImage};
use crate::transforms::{dct2_coefficients, dft2, SpectrumKind, LOG_EPS};

pub const DEFAULT_CROP: usize = 64;
pub const STD_FLOOR: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 500;
pub const GRAD_TOLERANCE: f64 = 1e-6;

/// `{10^k : k = -4..=4}`
pub fn default_lambda_grid() -> Vec<f64> {
    (-4..=4).map(|k| 10f64.powi(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformTag {
    Pixel,
    Dft,
    LogDft,
    Dct,
    LogDct,
}

impl TransformTag {
    pub const ALL: [TransformTag; 5] = [
        TransformTag::Pixel,
        TransformTag::Dft,
        TransformTag::LogDft,
        TransformTag::Dct,
        TransformTag::LogDct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformTag::Pixel => "pixel",
            TransformTag::Dft => "dft",
            TransformTag::LogDft => "log_dft",
            TransformTag::Dct => "dct",
            TransformTag::LogDct => "log_dct",
        }
    }

    /// Flattened feature vector of an already-cropped image.
    pub fn features(self, img: &GrayImage) -> Vec<f64> {
        let log = |v: Vec<f64>| v.into_iter().map(|x| (x + LOG_EPS).ln()).collect();
        match self {
            TransformTag::Pixel => img.pixels().to_vec(),
            TransformTag::Dft => dft_magnitude(img),
            TransformTag::LogDft => log(dft_magnitude(img)),
            TransformTag::Dct => dct_abs(img),
            TransformTag::LogDct => log(dct_abs(img)),
        }
    }
}

fn dft_magnitude(img: &GrayImage) -> Vec<f64> {
    dft2(img, SpectrumKind::DftMagnitude)
        .expect("magnitude is a DFT kind")
        .values()
        .to_vec()
}

fn dct_abs(img: &GrayImage) -> Vec<f64> {
    dct2_coefficients(img).into_iter().map(f64::abs).collect()
}

impl fmt::Display for TransformTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown transform {s:?}")))
    }
}

/// Row-major `n x d` features with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    labels: Vec<Label>,
    ids: Vec<String>,
    pub tag: TransformTag,
}

impl FeatureMatrix {
    pub fn new(d: usize, rows: Vec<f64>, labels: Vec<Label>, tag: TransformTag) -> Result<Self> {
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        Self::with_ids(d, rows, labels, ids, tag)
    }

    pub fn with_ids(
        d: usize,
        rows: Vec<f64>,
        labels: Vec<Label>,
        ids: Vec<String>,
        tag: TransformTag,
    ) -> Result<Self> {
        let n = labels.len();
        if rows.len() != n * d || ids.len() != n {
            return Err(Error::Dimension(format!(
                "{} values / {} ids for {n} samples of dimension {d}",
                rows.len(),
                ids.len()
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature".into()));
        }
        Ok(Self {
            n,
            d,
            rows,
            labels,
            ids,
            tag,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn set_ids(&mut self, ids: Vec<String>) -> Result<()> {
        if ids.len() != self.n {
            return Err(Error::Dimension(format!("{} ids for {} samples", ids.len(), self.n)));
        }
        self.ids = ids;
        Ok(())
    }

    /// Same features, labels replaced.
    pub fn relabeled(&self, labels: Vec<Label>) -> Result<Self> {
        Self::with_ids(self.d, self.rows.clone(), labels, self.ids.clone(), self.tag)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut rows = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            rows.extend_from_slice(self.row(i));
        }
        Self {
            n: indices.len(),
            d: self.d,
            rows,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            tag: self.tag,
        }
    }

    /// Multiply feature column `j` by `c`.
    pub fn scale_column(&mut self, j: usize, c: f64) {
        for i in 0..self.n {
            self.rows[i * self.d + j] *= c;
        }
    }
}

/// Crop every image to 64x64 and compute `tag` features.
pub fn extract_features(
    images: &[GrayImage],
    labels: &[Label],
    tag: TransformTag,
) -> Result<FeatureMatrix> {
    extract_features_with(images, labels, tag, DEFAULT_CROP)
}

pub fn extract_features_with(
    images: &[GrayImage],
    labels: &[Label],
    tag: TransformTag,
    crop: usize,
) -> Result<FeatureMatrix> {
    if images.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} images vs {} labels",
            images.len(),
            labels.len()
        )));
    }
    let rows: Vec<Vec<f64>> = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let c = center_crop(img, crop).map_err(|_| {
                Error::Dimension(format!(
                    "image {i} is {}x{}, needs at least {crop}x{crop}",
                    img.width(),
                    img.height()
                ))
            })?;
            Ok(tag.features(&c))
        })
        .collect::<Result<_>>()?;
    FeatureMatrix::new(crop * crop, rows.concat(), labels.to_vec(), tag)
}

/// Per-feature mean and population standard deviation of the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_standardizer(train: &FeatureMatrix) -> Result<Standardizer> {
    if train.n < 2 {
        return Err(Error::Data(format!(
            "standardizer needs at least 2 rows, got {}",
            train.n
        )));
    }
    let (n, d) = (train.n, train.d);
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(train.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    // A constant column keeps its exact value as the mean so it maps to 0.
    let first = train.row(0);
    let mut constant = vec![true; d];
    for i in 1..n {
        for ((c, x), f) in constant.iter_mut().zip(train.row(i)).zip(first) {
            *c &= x == f;
        }
    }
    for j in 0..d {
        if constant[j] {
            mean[j] = first[j];
        }
    }
    let mut var = vec![0.0; d];
    for i in 0..n {
        for ((v, x), m) in var.iter_mut().zip(train.row(i)).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .into_iter()
        .map(|v| (v / n as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(Standardizer { mean, std })
}

impl Standardizer {
    pub fn apply_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.extend(row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s));
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.d != self.mean.len() {
            return Err(Error::Dimension(format!(
                "standardizer has {} features, matrix has {}",
                self.mean.len(),
                x.d
            )));
        }
        let mut rows = Vec::with_capacity(x.rows.len());
        for i in 0..x.n {
            self.apply_row(x.row(i), &mut rows);
        }
        FeatureMatrix::with_ids(x.d, rows, x.labels.clone(), x.ids.clone(), x.tag)
    }
}

pub fn apply_standardizer(s: &Standardizer, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    s.apply(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LRModel {
    pub tag: TransformTag,
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Applied to raw features before scoring; `None` means inputs are
    /// already standardized.
    #[serde(flatten)]
    pub standardizer: Option<Standardizer>,
}

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    IterationLimit,
    /// No strictly decreasing step exists at machine precision.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub grad_inf_norm: f64,
    /// Objective at the initial point and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Vectorizable dot product (fixed 8-lane accumulation order).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `log(1 + exp(-m))`, stable for either sign of `m`.
#[inline]
fn logistic_loss(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-z))`
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_training_data(x: &FeatureMatrix) -> Result<()> {
    if x.n < 2 {
        return Err(Error::Data(format!("need at least 2 samples, got {}", x.n)));
    }
    let fakes = x.labels.iter().filter(|l| l.is_fake()).count();
    if fakes == 0 || fakes == x.n {
        return Err(Error::Data("training data contains a single class".into()));
    }
    Ok(())
}

fn margins_loss(x: &FeatureMatrix, z: &[f64]) -> f64 {
    z.iter()
        .zip(&x.labels)
        .map(|(&zi, l)| logistic_loss(l.sign() * zi))
        .sum()
}

fn gradient_from_margins(x: &FeatureMatrix, z: &[f64], w: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let mut gw: Vec<f64> = w.iter().map(|wi| lambda * wi).collect();
    let mut gb = 0.0;
    for (i, (&zi, l)) in z.iter().zip(&x.labels).enumerate() {
        let y = l.sign();
        // d/dz log(1 + exp(-y z)) = -y sigmoid(-y z)
        let r = -y * sigmoid(-y * zi);
        gb += r;
        axpy(r, x.row(i), &mut gw);
    }
    (gw, gb)
}

fn margins(x: &FeatureMatrix, w: &[f64], b: f64) -> Vec<f64> {
    (0..x.n).map(|i| dot(x.row(i), w) + b).collect()
}

/// Objective value and gradient `(dJ/dw, dJ/db)` at `(w, b)`.
pub fn objective(x: &FeatureMatrix, w: &[f64], b: f64, lambda: f64) -> Result<(f64, Vec<f64>, f64)> {
    if w.len() != x.d {
        return Err(Error::Dimension(format!("{} weights for {} features", w.len(), x.d)));
    }
    let z = margins(x, w, b);
    let j = margins_loss(x, &z) + 0.5 * lambda * dot(w, w);
    let (gw, gb) = gradient_from_margins(x, &z, w, lambda);
    Ok((j, gw, gb))
}

/// Train on standardized features.
pub fn train_logreg(x: &FeatureMatrix, lambda: f64) -> Result<LRModel> {
    train_logreg_with_report(x, lambda).map(|(m, _)| m)
}

pub fn train_logreg_with_report(x: &FeatureMatrix, lambda: f64) -> Result<(LRModel, TrainReport)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    check_training_data(x)?;
    const MEMORY: usize = 10;
    const ARMIJO: f64 = 1e-4;
    const MAX_HALVINGS: usize = 60;

    let d = x.d;
    // Parameters are [w; b].
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut z = vec![0.0; x.n];
    let mut j = margins_loss(x, &z);
    let (gw, gb) = gradient_from_margins(x, &z, &w, lambda);
    let mut g: Vec<f64> = gw.into_iter().chain(std::iter::once(gb)).collect();
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trace = vec![j];
    let inf_norm = |g: &[f64]| g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let diverged = |what: &str, it: usize| {
        Error::Convergence(format!("{what} became non-finite at iteration {it} (lambda = {lambda})"))
    };

    let mut iterations = 0;
    let stop_reason = loop {
        if inf_norm(&g) < GRAD_TOLERANCE {
            break StopReason::GradientTolerance;
        }
        if iterations >= MAX_ITERATIONS {
            break StopReason::IterationLimit;
        }

        let mut dir = lbfgs_direction(&g, &history);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if history.is_empty() {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };

        // A trial step only changes the margins by step * (X d_w + d_b).
        let (dw, db) = dir.split_at(d);
        let db = db[0];
        let dz: Vec<f64> = (0..x.n).map(|i| dot(x.row(i), dw) + db).collect();
        let reg_ww = dot(&w, &w);
        let reg_wd = dot(&w, dw);
        let reg_dd = dot(dw, dw);

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let zt: Vec<f64> = z.iter().zip(&dz).map(|(a, c)| a + step * c).collect();
            let reg = reg_ww + 2.0 * step * reg_wd + step * step * reg_dd;
            let jt = margins_loss(x, &zt) + 0.5 * lambda * reg;
            if !jt.is_finite() {
                return Err(diverged("objective", iterations));
            }
            if jt < j && jt <= j + ARMIJO * step * slope {
                accepted = Some((zt, jt));
                break;
            }
            step *= 0.5;
        }
        let Some((zt, jt)) = accepted else {
            if history.is_empty() {
                break StopReason::LineSearchStalled;
            }
            history.clear();
            continue;
        };

        axpy(step, dw, &mut w);
        b += step * db;
        z = zt;
        j = jt;
        let (gw, gb) = gradient_from_margins(x, &z, &w, lambda);
        let g_new: Vec<f64> = gw.into_iter().chain(std::iter::once(gb)).collect();
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(diverged("gradient", iterations));
        }
        let s: Vec<f64> = dir.iter().map(|v| step * v).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, c)| a - c).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        g = g_new;
        trace.push(j);
        iterations += 1;
    };

    let report = TrainReport {
        iterations,
        stop_reason,
        grad_inf_norm: inf_norm(&g),
        objective_trace: trace,
    };
    let model = LRModel {
        tag: x.tag,
        lambda,
        weights: w,
        bias: b,
        standardizer: None,
    };
    Ok((model, report))
}

/// Two-loop recursion: `-H g` for the stored curvature pairs.
fn lbfgs_direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let beta = rho * dot(y, &q);
        axpy(a - beta, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

impl LRModel {
    /// Probability of "fake" for one raw row.
    fn score_row(&self, row: &[f64], buf: &mut Vec<f64>) -> f64 {
        let z = match &self.standardizer {
            Some(s) => {
                buf.clear();
                s.apply_row(row, buf);
                dot(buf, &self.weights)
            }
            None => dot(row, &self.weights),
        };
        sigmoid(z + self.bias)
    }

    pub fn scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.d != self.weights.len() {
            return Err(Error::Dimension(format!(
                "model has {} weights, matrix has {} features",
                self.weights.len(),
                x.d
            )));
        }
        if x.tag != self.tag {
            return Err(Error::Parameter(format!(
                "model was trained on {} features, got {}",
                self.tag, x.tag
            )));
        }
        let mut buf = Vec::with_capacity(x.d);
        Ok((0..x.n).map(|i| self.score_row(x.row(i), &mut buf)).collect())
    }
}

/// Accuracy (prediction = fake iff score >= 0.5) and the score set.
pub fn evaluate(model: &LRModel, x: &FeatureMatrix) -> Result<(f64, ScoreSet)> {
    let scores = model.scores(x)?;
    if x.n == 0 {
        return Err(Error::Data("cannot evaluate on an empty matrix".into()));
    }
    let correct = scores
        .iter()
        .zip(&x.labels)
        .filter(|(&s, l)| (s >= 0.5) == l.is_fake())
        .count();
    let entries = scores
        .iter()
        .zip(&x.labels)
        .zip(&x.ids)
        .map(|((&score, &label), id)| ScoreEntry {
            id: id.clone(),
            label,
            score,
        })
        .collect();
    Ok((correct as f64 / x.n as f64, ScoreSet::new(entries)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridEntry {
    pub lambda: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best_lambda: f64,
    pub model: LRModel,
    pub report: Vec<GridEntry>,
}

fn pick_best(report: &[GridEntry]) -> usize {
    let mut best = 0;
    for (i, e) in report.iter().enumerate().skip(1) {
        let b = &report[best];
        if e.val_acc > b.val_acc || (e.val_acc == b.val_acc && e.lambda < b.lambda) {
            best = i;
        }
    }
    best
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parameter("lambda grid is empty".into()));
    }
    Ok(())
}

/// One model per lambda; the best validation accuracy wins, ties go to the
/// smaller lambda.
pub fn grid_search(train: &FeatureMatrix, val: &FeatureMatrix, grid: &[f64]) -> Result<GridSearchResult> {
    check_grid(grid)?;
    let fits: Vec<(LRModel, GridEntry)> = grid
        .par_iter()
        .map(|&lambda| {
            let model = train_logreg(train, lambda)?;
            let (train_acc, _) = evaluate(&model, train)?;
            let (val_acc, _) = evaluate(&model, val)?;
            Ok((
                model,
                GridEntry {
                    lambda,
                    train_acc,
                    val_acc,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let report: Vec<GridEntry> = fits.iter().map(|(_, e)| *e).collect();
    let best = pick_best(&report);
    Ok(GridSearchResult {
        best_lambda: report[best].lambda,
        model: fits[best].0.clone(),
        report,
    })
}

/// k-fold selection (fold of row `i` is `i % k`); `val_acc` is the mean
/// held-out accuracy and the returned model is refit on all rows.
pub fn grid_search_kfold(data: &FeatureMatrix, grid: &[f64], k: usize) -> Result<GridSearchResult> {
    check_grid(grid)?;
    if k < 2 || k > data.n {
        return Err(Error::Parameter(format!("invalid fold count {k} for {} rows", data.n)));
    }
    let folds: Vec<(FeatureMatrix, FeatureMatrix)> = (0..k)
        .map(|f| {
            let (tr, va): (Vec<usize>, Vec<usize>) = (0..data.n).partition(|i| i % k != f);
            (data.select(&tr), data.select(&va))
        })
        .collect();
    let report: Vec<GridEntry> = grid
        .par_iter()
        .map(|&lambda| {
            let (mut tr_sum, mut va_sum) = (0.0, 0.0);
            for (tr, va) in &folds {
                let model = train_logreg(tr, lambda)?;
                tr_sum += evaluate(&model, tr)?.0;
                va_sum += evaluate(&model, va)?.0;
            }
            Ok(GridEntry {
                lambda,
                train_acc: tr_sum / k as f64,
                val_acc: va_sum / k as f64,
            })
        })
        .collect::<Result<_>>()?;
    let best = pick_best(&report);
    let lambda = report[best].lambda;
    Ok(GridSearchResult {
        best_lambda: lambda,
        model: train_logreg(data, lambda)?,
        report,
    })
}

/// Fit the standardizer on `train`, grid-search lambda on `val`, and return
/// a model that scores raw features.
pub fn fit_pipeline(train: &FeatureMatrix, val: &FeatureMatrix, grid: &[f64]) -> Result<GridSearchResult> {
    let s = fit_standardizer(train)?;
    let mut result = grid_search(&s.apply(train)?, &s.apply(val)?, grid)?;
    result.model.standardizer = Some(s);
    Ok(result)
}

pub fn grid_report_csv(report: &[GridEntry]) -> String {
    let mut s = String::from("lambda,train_acc,val_acc\n");
    for e in report {
        s.push_str(&format!("{:e},{},{}\n", e.lambda, e.train_acc, e.val_acc));
    }
    s
}
