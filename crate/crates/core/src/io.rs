//! Artifact serialization.
//!
//! Binary layout (little-endian throughout):
//!
//! ```text
//! bytes 0..10   magic  b"FREQSCOPE\0"
//! bytes 10..12  u16    format version (1)
//! bytes 12..14  u16    payload kind (see `PayloadKind`)
//! bytes 14..16  u16    reserved, zero
//! u32 width, u32 height
//! width * height f64 values, row-major
//! ```
//!
//! Reduced spectra are stored as a `1 x N_r` grid followed by a trailer of
//! `u32 source_height, u32 source_width` and `N_r` u64 bin counts. Feature
//! matrices use `width = d`, `height = n`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::transforms::{RadiusMapping, ReducedSpectrum, Spectrum2D, SpectrumKind};

pub const MAGIC: &[u8; 10] = b"FREQSCOPE\0";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum PayloadKind {
    Matrix = 0,
    DftMagnitude = 1,
    DftPower = 2,
    DctAbs = 3,
    LogScaled = 4,
    Reduced = 5,
}

impl PayloadKind {
    fn from_u16(v: u16) -> Result<Self> {
        Ok(match v {
            0 => PayloadKind::Matrix,
            1 => PayloadKind::DftMagnitude,
            2 => PayloadKind::DftPower,
            3 => PayloadKind::DctAbs,
            4 => PayloadKind::LogScaled,
            5 => PayloadKind::Reduced,
            other => return Err(Error::Format(format!("unknown payload kind {other}"))),
        })
    }

    fn from_spectrum(kind: SpectrumKind) -> Self {
        match kind {
            SpectrumKind::DftMagnitude => PayloadKind::DftMagnitude,
            SpectrumKind::DftPower => PayloadKind::DftPower,
            SpectrumKind::DctAbs => PayloadKind::DctAbs,
            SpectrumKind::LogScaled => PayloadKind::LogScaled,
        }
    }

    fn to_spectrum(self) -> Option<SpectrumKind> {
        match self {
            PayloadKind::DftMagnitude => Some(SpectrumKind::DftMagnitude),
            PayloadKind::DftPower => Some(SpectrumKind::DftPower),
            PayloadKind::DctAbs => Some(SpectrumKind::DctAbs),
            PayloadKind::LogScaled => Some(SpectrumKind::LogScaled),
            _ => None,
        }
    }
}

/// A dense row-major real matrix (features, noise grids).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// Any artifact the binary format can carry.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Matrix(Matrix),
    Spectrum(Spectrum2D),
    Reduced(ReducedSpectrum),
}

fn write_header(out: &mut Vec<u8>, kind: PayloadKind, width: usize, height: usize) -> Result<()> {
    let w = u32::try_from(width).map_err(|_| Error::Dimension("width exceeds u32".into()))?;
    let h = u32::try_from(height).map_err(|_| Error::Dimension("height exceeds u32".into()))?;
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(kind as u16).to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    Ok(())
}

fn push_values(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(artifact: &Artifact) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match artifact {
        Artifact::Matrix(m) => {
            write_header(&mut out, PayloadKind::Matrix, m.cols, m.rows)?;
            push_values(&mut out, &m.values);
        }
        Artifact::Spectrum(s) => {
            write_header(&mut out, PayloadKind::from_spectrum(s.kind()), s.width(), s.height())?;
            push_values(&mut out, s.values());
        }
        Artifact::Reduced(r) => {
            write_header(&mut out, PayloadKind::Reduced, r.len(), 1)?;
            push_values(&mut out, r.bins());
            let m = r.mapping();
            out.extend_from_slice(&(m.height as u32).to_le_bytes());
            out.extend_from_slice(&(m.width as u32).to_le_bytes());
            for &c in r.counts() {
                out.extend_from_slice(&(c as u64).to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated binary artifact".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format("value count overflows".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Decode one artifact starting at the front of `bytes`; returns it with the
/// number of bytes consumed.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Artifact, usize)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(10)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = PayloadKind::from_u16(r.u16()?)?;
    r.u16()?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let values = r.f64s(count)?;
    let artifact = match kind {
        PayloadKind::Matrix => Artifact::Matrix(Matrix::new(height, width, values)?),
        PayloadKind::Reduced => {
            if height != 1 {
                return Err(Error::Format("reduced spectrum must have height 1".into()));
            }
            let mapping = RadiusMapping {
                height: r.u32()? as usize,
                width: r.u32()? as usize,
            };
            let counts = (0..width)
                .map(|_| r.u64().map(|c| c as usize))
                .collect::<Result<Vec<_>>>()?;
            Artifact::Reduced(ReducedSpectrum::new(values, counts, mapping)?)
        }
        spectral => Artifact::Spectrum(Spectrum2D::new(
            width,
            height,
            values,
            spectral.to_spectrum().expect("spectral payload"),
        )?),
    };
    Ok((artifact, r.pos))
}

/// Decode exactly one artifact; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<Artifact> {
    let (a, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after artifact",
            bytes.len() - used
        )));
    }
    Ok(a)
}

/// Decode a concatenation of artifacts.
pub fn decode_all(mut bytes: &[u8]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (a, used) = decode_prefix(bytes)?;
        out.push(a);
        bytes = &bytes[used..];
    }
    Ok(out)
}

/// Write through a sibling temp file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_artifact(path: &Path, artifact: &Artifact) -> Result<()> {
    write_atomic(path, &encode(artifact)?)
}

pub fn read_artifact(path: &Path) -> Result<Artifact> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Feature matrix from a binary matrix file or a headerless numeric CSV.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        return match decode(&bytes)? {
            Artifact::Matrix(m) => Ok(m),
            _ => Err(Error::Format(format!("{} is not a matrix artifact", path.display()))),
        };
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                source_name: path.display().to_string(),
                line,
                message: e.to_string(),
            })?;
        match cols {
            None => cols = Some(parsed.len()),
            Some(c) if c != parsed.len() => {
                return Err(Error::Parse {
                    source_name: path.display().to_string(),
                    line,
                    message: format!("expected {c} columns, found {}", parsed.len()),
                })
            }
            _ => {}
        }
        values.extend(parsed);
        rows += 1;
    }
    Matrix::new(rows, cols.unwrap_or(0), values)
}

pub(crate) fn csv_error(path: &Path, e: &csv::Error) -> Error {
    Error::Parse {
        source_name: path.display().to_string(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// `row,col,value` long-format CSV.
pub fn spectrum_csv(spec: &Spectrum2D) -> String {
    let mut s = String::from("row,col,value\n");
    for r in 0..spec.height() {
        for c in 0..spec.width() {
            s.push_str(&format!("{r},{c},{:e}\n", spec.get(r, c)));
        }
    }
    s
}

/// `bin,radius,value,count` CSV.
pub fn reduced_csv(r: &ReducedSpectrum) -> String {
    let mut s = String::from("bin,radius,value,count\n");
    let m = r.mapping();
    for (i, (v, c)) in r.bins().iter().zip(r.counts()).enumerate() {
        s.push_str(&format!("{i},{},{v:e},{c}\n", m.bin_radius(i)));
    }
    s
}

/// Value-to-intensity mapping for heatmaps.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HeatmapOptions {
    /// Map `log10(v)` instead of `v`.
    pub log: bool,
    /// Values at or below map to 0.
    pub vmin: f64,
    /// Values at or above map to 255.
    pub vmax: f64,
    /// Divide values by `H * W` first.
    pub normalize_by_size: bool,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            log: true,
            vmin: 1e-5,
            vmax: 1e-1,
            normalize_by_size: true,
        }
    }
}

/// Intensity of one value: linear in `v` (or `log10 v`) between the clip
/// limits, rounded to the nearest byte.
pub fn heatmap_intensity(v: f64, opts: &HeatmapOptions) -> u8 {
    let (lo, hi, x) = if opts.log {
        (opts.vmin.log10(), opts.vmax.log10(), if v > 0.0 { v.log10() } else { f64::NEG_INFINITY })
    } else {
        (opts.vmin, opts.vmax, v)
    };
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

pub fn render_heatmap(spec: &Spectrum2D, opts: &HeatmapOptions) -> Result<image::GrayImage> {
    if opts.log && !(opts.vmin > 0.0) {
        return Err(Error::Parameter("log heatmap needs vmin > 0".into()));
    }
    if !(opts.vmax > opts.vmin) {
        return Err(Error::Parameter("heatmap needs vmax > vmin".into()));
    }
    let scale = if opts.normalize_by_size {
        1.0 / (spec.width() * spec.height()) as f64
    } else {
        1.0
    };
    let bytes = spec
        .values()
        .iter()
        .map(|&v| heatmap_intensity(v * scale, opts))
        .collect();
    Ok(image::GrayImage::from_raw(spec.width() as u32, spec.height() as u32, bytes)
        .expect("buffer length matches dimensions"))
}

/// Encode a heatmap PNG into memory.
pub fn heatmap_png(spec: &Spectrum2D, opts: &HeatmapOptions) -> Result<Vec<u8>> {
    let img = render_heatmap(spec, opts)?;
    let mut out = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|e| Error::Codec(e.to_string()))?;
    Ok(out)
}
