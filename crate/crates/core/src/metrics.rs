//! Detector evaluation: ROC, AUROC, Pd@FAR and fakeness percentiles.
//!
//! Fake is the positive class everywhere and a higher score means "more
//! fake".

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header line written at the top of every metrics report.
pub const POSITIVE_CLASS_NOTE: &str = "# positive class: fake (higher score = more fake)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn is_fake(self) -> bool {
        self == Label::Fake
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Real => Label::Fake,
            Label::Fake => Label::Real,
        }
    }

    /// `-1` for real, `+1` for fake.
    pub fn sign(self) -> f64 {
        match self {
            Label::Real => -1.0,
            Label::Fake => 1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Real => "real",
            Label::Fake => "fake",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" | "0" => Ok(Label::Real),
            "fake" | "1" => Ok(Label::Fake),
            other => Err(Error::Parameter(format!("label must be real or fake, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub id: String,
    pub label: Label,
    pub score: f64,
}

/// Labeled detector outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| !e.score.is_finite()) {
            return Err(Error::Data(format!("non-finite score for {:?}", e.id)));
        }
        Ok(Self { entries })
    }

    /// Build from parallel label/score slices with ids `"0"`, `"1"`, ...
    pub fn from_labels(labels: &[Label], scores: &[f64]) -> Result<Self> {
        if labels.len() != scores.len() {
            return Err(Error::Dimension(format!(
                "{} labels vs {} scores",
                labels.len(),
                scores.len()
            )));
        }
        Self::new(
            labels
                .iter()
                .zip(scores)
                .enumerate()
                .map(|(i, (&label, &score))| ScoreEntry {
                    id: i.to_string(),
                    label,
                    score,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let fake = self.entries.iter().filter(|e| e.label.is_fake()).count();
        (self.entries.len() - fake, fake)
    }

    fn require_both_classes(&self) -> Result<(usize, usize)> {
        let (real, fake) = self.class_counts();
        if real == 0 || fake == 0 {
            return Err(Error::Data(format!(
                "ROC metrics need both classes, got {real} real and {fake} fake"
            )));
        }
        Ok((real, fake))
    }

    /// Read a `id,label,score` CSV.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&bytes, &path.display().to_string())
    }

    pub fn parse_csv(bytes: &[u8], source_name: &str) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(bytes);
        let headers = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
        };
        let (ci, cl, cs) = (col("id")?, col("label")?, col("score")?);
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                parse_err(e.position().map_or(0, |p| p.line()), e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| {
                record
                    .get(i)
                    .ok_or_else(|| parse_err(line, format!("missing field {i}")))
            };
            let label = field(cl)?
                .parse::<Label>()
                .map_err(|e| parse_err(line, e.to_string()))?;
            let score = field(cs)?
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("bad score: {e}")))?;
            if !score.is_finite() {
                return Err(parse_err(line, "non-finite score".into()));
            }
            entries.push(ScoreEntry {
                id: field(ci)?.to_string(),
                label,
                score,
            });
        }
        Self::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,label,score\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{}\n", e.id, e.label, e.score));
        }
        s
    }
}

/// ROC curve over all distinct thresholds, starting at `(0,0)` and ending at `(1,1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    /// `thresholds[i]` is the score cut for point `i` (predict fake if
    /// `score >= threshold`); the first point uses `+inf`.
    pub thresholds: Vec<f64>,
}

pub fn roc_curve(s: &ScoreSet) -> Result<RocCurve> {
    let (n_real, n_fake) = s.require_both_classes()?;
    let mut sorted: Vec<(f64, bool)> = s.entries.iter().map(|e| (e.score, e.label.is_fake())).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    let mut thresholds = vec![f64::INFINITY];
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        fpr.push(fp as f64 / n_real as f64);
        tpr.push(tp as f64 / n_fake as f64);
        thresholds.push(t);
    }
    Ok(RocCurve {
        fpr,
        tpr,
        thresholds,
    })
}

/// Mann-Whitney AUROC with half credit for ties.
pub fn auroc(s: &ScoreSet) -> Result<f64> {
    let (n_real, n_fake) = s.require_both_classes()?;
    let mut sorted: Vec<(f64, bool)> = s.entries.iter().map(|e| (e.score, e.label.is_fake())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the pair credit, kept integral so the result is an exact ratio.
    let mut credit2: u128 = 0;
    let mut reals_below: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        let (mut r, mut f) = (0u128, 0u128);
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                f += 1;
            } else {
                r += 1;
            }
            i += 1;
        }
        credit2 += f * (2 * reals_below + r);
        reals_below += r;
    }
    Ok(credit2 as f64 / (2.0 * n_real as f64 * n_fake as f64))
}

/// Detection rate at a false-alarm budget, conservative step rule: the
/// largest TPR among curve points with `fpr <= far`.
pub fn pd_at_far(roc: &RocCurve, far: f64) -> f64 {
    roc.fpr
        .iter()
        .zip(&roc.tpr)
        .filter(|(&f, _)| f <= far)
        .map(|(_, &t)| t)
        .fold(0.0, f64::max)
}

/// Linear interpolation of the ROC at `far`; kept for comparison with the
/// step rule.
pub fn pd_at_far_interpolated(roc: &RocCurve, far: f64) -> f64 {
    let far = far.clamp(0.0, 1.0);
    let mut best = 0.0_f64;
    for i in 0..roc.fpr.len() {
        if roc.fpr[i] <= far {
            best = best.max(roc.tpr[i]);
        }
        if i + 1 < roc.fpr.len() && roc.fpr[i] <= far && far < roc.fpr[i + 1] {
            let t = (far - roc.fpr[i]) / (roc.fpr[i + 1] - roc.fpr[i]);
            best = best.max(roc.tpr[i] + t * (roc.tpr[i + 1] - roc.tpr[i]));
        }
    }
    best
}

/// The three numbers of a detector table cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorSummary {
    pub auroc: f64,
    pub pd_at_5: f64,
    pub pd_at_1: f64,
}

pub fn summarize(s: &ScoreSet) -> Result<DetectorSummary> {
    let roc = roc_curve(s)?;
    Ok(DetectorSummary {
        auroc: auroc(s)?,
        pd_at_5: pd_at_far(&roc, 0.05),
        pd_at_1: pd_at_far(&roc, 0.01),
    })
}

/// Ids at requested score percentiles. Entries are sorted ascending by
/// score (ties by id); percentile `p` centers a bucket of `bucket` ids on
/// rank `floor(p / 100 * (n - 1))`, clamped to the valid range.
pub fn fakeness_percentiles(
    s: &ScoreSet,
    percentiles: &[f64],
    bucket: usize,
) -> Result<Vec<(f64, Vec<String>)>> {
    if s.is_empty() {
        return Err(Error::Data("percentile ranking needs at least one score".into()));
    }
    let mut order: Vec<&ScoreEntry> = s.entries.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.id.cmp(&b.id)));
    let n = order.len();
    let bucket = bucket.clamp(1, n);
    percentiles
        .iter()
        .map(|&p| {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::Parameter(format!("percentile {p} outside [0, 100]")));
            }
            let rank = (p / 100.0 * (n - 1) as f64).floor() as usize;
            let start = rank.saturating_sub(bucket / 2).min(n - bucket);
            let ids = order[start..start + bucket].iter().map(|e| e.id.clone()).collect();
            Ok((p, ids))
        })
        .collect()
}
