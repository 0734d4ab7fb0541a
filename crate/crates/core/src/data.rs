//! Dataset ingestion, synthetic generators and the two pre-normalizers.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SparseExample;

/// Parses `label idx:val idx:val ...`. Text after `#` is ignored. Indices
/// are kept as written (no shift) and must be strictly increasing.
pub fn parse_svmlight_line(line: &str, line_no: usize) -> Result<SparseExample> {
    let err = |message: String| Error::Parse { line: line_no, message };
    let body = line.split('#').next().unwrap_or("");
    let mut tokens = body.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| err("empty line".into()))?;
    let label: f64 = label_tok.parse().map_err(|_| err(format!("bad label '{label_tok}'")))?;
    if !label.is_finite() {
        return Err(err(format!("non-finite label '{label_tok}'")));
    }
    let mut features = Vec::new();
    let mut prev: Option<usize> = None;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("malformed token '{tok}'")))?;
        let idx: usize = idx.parse().map_err(|_| err(format!("bad feature index in '{tok}'")))?;
        let val: f64 = val.parse().map_err(|_| err(format!("bad feature value in '{tok}'")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite value in '{tok}'")));
        }
        if prev.is_some_and(|p| idx <= p) {
            return Err(err(format!("duplicate or decreasing index {idx}")));
        }
        prev = Some(idx);
        features.push((idx, val));
    }
    SparseExample::new(features, label).map_err(|e| err(e.to_string()))
}

/// Inverse of [`parse_svmlight_line`]; values use the shortest exact decimal form.
pub fn to_svmlight_line(x: &SparseExample) -> String {
    let mut out = format!("{}", x.label());
    for &(i, v) in x.features() {
        out.push_str(&format!(" {i}:{v}"));
    }
    out
}

/// Streams examples from svmlight-formatted text, skipping blank and
/// comment-only lines.
pub struct SvmlightReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> SvmlightReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for SvmlightReader<R> {
    type Item = Result<SparseExample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(parse_svmlight_line(trimmed, self.line_no));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Svmlight,
    Csv,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svmlight" | "libsvm" => Ok(DataFormat::Svmlight),
            "csv" | "tsv" | "delimited" => Ok(DataFormat::Csv),
            other => Err(Error::InvalidConfig(format!("unknown data format '{other}'"))),
        }
    }
}

/// Maps the raw label field to a real label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelTransform {
    #[default]
    Identity,
    /// `0 -> -1`, `1 -> +1`
    ZeroOneToSigned,
    /// `+1` when the raw field equals the given value, `-1` otherwise.
    PositiveClass(String),
}

impl LabelTransform {
    pub fn apply(&self, raw: &str) -> std::result::Result<f64, String> {
        let raw = raw.trim();
        match self {
            LabelTransform::PositiveClass(c) => Ok(if raw == c { 1.0 } else { -1.0 }),
            _ => {
                let v: f64 = raw.parse().map_err(|_| format!("bad label '{raw}'"))?;
                if !v.is_finite() {
                    return Err(format!("non-finite label '{raw}'"));
                }
                match self {
                    LabelTransform::ZeroOneToSigned if v == 0.0 => Ok(-1.0),
                    LabelTransform::ZeroOneToSigned if v == 1.0 => Ok(1.0),
                    LabelTransform::ZeroOneToSigned => Err(format!("label '{raw}' is not 0 or 1")),
                    _ => Ok(v),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

/// Reads a delimited file with a header row. Numeric cells become features
/// indexed by column position; non-numeric cells are one-hot encoded as
/// `column=value` with indices assigned in first-seen order after the
/// positional block.
pub struct DelimitedReader<R: std::io::Read> {
    records: csv::StringRecordsIntoIter<R>,
    header: Vec<String>,
    label_col: usize,
    transform: LabelTransform,
    categories: HashMap<String, usize>,
    line_no: usize,
}

impl<R: std::io::Read> DelimitedReader<R> {
    pub fn new(reader: R, delimiter: u8, label: LabelColumn, transform: LabelTransform) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "empty header".into(),
            });
        }
        let label_col = match label {
            LabelColumn::Last => header.len() - 1,
            LabelColumn::Index(i) if i < header.len() => i,
            LabelColumn::Index(i) => {
                return Err(Error::InvalidConfig(format!(
                    "label column {i} out of range for {} columns",
                    header.len()
                )))
            }
            LabelColumn::Name(n) => header
                .iter()
                .position(|h| *h == n)
                .ok_or_else(|| Error::InvalidConfig(format!("no column named '{n}' in header")))?,
        };
        Ok(Self {
            records: rdr.into_records(),
            header,
            label_col,
            transform,
            categories: HashMap::new(),
            line_no: 1,
        })
    }

    /// Picks tab when the first line contains one, comma otherwise.
    pub fn sniff_delimiter(first_line: &str) -> u8 {
        if first_line.contains('\t') {
            b'\t'
        } else {
            b','
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    /// Feature index assigned to each one-hot `column=value` seen so far.
    pub fn categories(&self) -> &HashMap<String, usize> {
        &self.categories
    }

    fn convert(&mut self, rec: &csv::StringRecord) -> Result<SparseExample> {
        let line = self.line_no;
        let err = |message: String| Error::Parse { line, message };
        if rec.len() != self.header.len() {
            return Err(err(format!(
                "expected {} fields, found {}",
                self.header.len(),
                rec.len()
            )));
        }
        let label = self.transform.apply(&rec[self.label_col]).map_err(err)?;
        let n_numeric = self.header.len() - 1;
        let mut features = Vec::new();
        let mut pos = 0;
        for (col, cell) in rec.iter().enumerate() {
            if col == self.label_col {
                continue;
            }
            if cell.is_empty() {
                pos += 1;
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push((pos, v)),
                Ok(_) => return Err(err(format!("non-finite value in column '{}'", self.header[col]))),
                Err(_) => {
                    let key = format!("{}={}", self.header[col], cell);
                    let next = n_numeric + self.categories.len();
                    let idx = *self.categories.entry(key).or_insert(next);
                    features.push((idx, 1.0));
                }
            }
            pos += 1;
        }
        features.sort_by_key(|&(i, _)| i);
        SparseExample::new(features, label).map_err(|e| err(e.to_string()))
    }
}

impl<R: std::io::Read> Iterator for DelimitedReader<R> {
    type Item = Result<SparseExample>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.records.next()?;
        self.line_no += 1;
        Some(match rec {
            Ok(rec) => self.convert(&rec),
            Err(e) => Err(Error::Parse {
                line: self.line_no,
                message: e.to_string(),
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    /// Divide each feature by its max absolute value.
    Maxnorm,
    /// Divide each feature by its root second moment over all rows.
    Sqnorm,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::Maxnorm => "maxnorm",
            Normalization::Sqnorm => "sqnorm",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Normalization::None),
            "maxnorm" => Ok(Normalization::Maxnorm),
            "sqnorm" => Ok(Normalization::Sqnorm),
            other => Err(Error::InvalidConfig(format!("unknown normalization '{other}'"))),
        }
    }
}

/// Per-feature divisor computed in a dedicated first pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerStats {
    pub mode: Normalization,
    pub rows: usize,
    /// Divisor per feature; zero means "pass through".
    pub divisor: Vec<f64>,
}

impl NormalizerStats {
    pub fn fit<'a>(mode: Normalization, examples: impl IntoIterator<Item = &'a SparseExample>) -> Self {
        let mut acc: Vec<f64> = Vec::new();
        let mut rows = 0;
        for x in examples {
            rows += 1;
            if x.dim() > acc.len() {
                acc.resize(x.dim(), 0.0);
            }
            for &(i, v) in x.features() {
                match mode {
                    Normalization::Maxnorm => acc[i] = acc[i].max(v.abs()),
                    Normalization::Sqnorm => acc[i] += v * v,
                    Normalization::None => {}
                }
            }
        }
        let divisor = match mode {
            Normalization::None => Vec::new(),
            Normalization::Maxnorm => acc,
            Normalization::Sqnorm => acc.iter().map(|s| (s / rows.max(1) as f64).sqrt()).collect(),
        };
        Self { mode, rows, divisor }
    }

    pub fn apply(&self, x: &SparseExample) -> Result<SparseExample> {
        if self.mode == Normalization::None {
            return Ok(x.clone());
        }
        x.map_values(|i, v| match self.divisor.get(i) {
            Some(&d) if d > 0.0 => v / d,
            _ => v,
        })
    }
}

/// Fits the normalizer on `examples` and returns it with the normalized copy.
pub fn prenormalize(examples: &[SparseExample], mode: Normalization) -> Result<(NormalizerStats, Vec<SparseExample>)> {
    let stats = NormalizerStats::fit(mode, examples);
    let out = examples.iter().map(|x| stats.apply(x)).collect::<Result<_>>()?;
    Ok((stats, out))
}

/// `(max y - min y)^2`, the worst possible squared loss on these labels.
pub fn regression_loss_scale(labels: impl IntoIterator<Item = f64>) -> Result<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for y in labels {
        lo = lo.min(y);
        hi = hi.max(y);
    }
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidConfig(
            "regression loss scale needs at least two distinct labels".into(),
        ));
    }
    Ok((hi - lo) * (hi - lo))
}

/// Two-feature linearly separable stream with the first feature scaled by `s`.
///
/// Inputs are uniform on `[-1, 1]^2`, labels are `sign(x_0 + x_1)` (ties
/// go to +1), then `x_0` is multiplied by `s`. The same seed gives the same
/// base stream for every `s`.
pub fn synth_figure1(s: f64, len: usize, seed: u64) -> Result<Vec<SparseExample>> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {s}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let x0: f64 = rng.random_range(-1.0..=1.0);
            let x1: f64 = rng.random_range(-1.0..=1.0);
            let y = if x0 + x1 >= 0.0 { 1.0 } else { -1.0 };
            SparseExample::new(vec![(0, x0 * s), (1, x1)], y)
        })
        .collect()
}

/// Recipe for a synthetic linear dataset whose features live on very
/// different scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledSpec {
    pub dim: usize,
    pub len: usize,
    /// Feature scales are log-uniform in `[10^lo, 10^hi]`.
    pub log10_lo: f64,
    pub log10_hi: f64,
    /// Probability that a feature is present in an example.
    pub density: f64,
    /// Standard deviation of the label noise (regression) or label flip
    /// probability (classification).
    pub noise: f64,
    pub classification: bool,
}

impl Default for ScaledSpec {
    fn default() -> Self {
        Self {
            dim: 10,
            len: 1000,
            log10_lo: 0.0,
            log10_hi: 0.0,
            density: 1.0,
            noise: 0.1,
            classification: false,
        }
    }
}

/// Draws a dataset per `spec`: unit-scale inputs `z ~ U[-1,1]` on a random
/// support, labels from a hidden `w_true` applied to `z`, and observed
/// features `x_i = scale_i z_i`.
pub fn synth_scaled(spec: &ScaledSpec, seed: u64) -> Result<Vec<SparseExample>> {
    if spec.dim == 0 || !(0.0..=1.0).contains(&spec.density) || spec.log10_lo > spec.log10_hi {
        return Err(Error::InvalidConfig(format!("invalid synthetic spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..spec.dim)
        .map(|_| 10f64.powf(rng.random_range(spec.log10_lo..=spec.log10_hi)))
        .collect();
    let w_true: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..spec.len)
        .map(|_| {
            let mut score = 0.0;
            let mut features = Vec::new();
            for i in 0..spec.dim {
                if rng.random_bool(spec.density) {
                    let z: f64 = rng.random_range(-1.0..1.0);
                    score += w_true[i] * z;
                    features.push((i, scales[i] * z));
                }
            }
            let y = if spec.classification {
                let y = if score >= 0.0 { 1.0 } else { -1.0 };
                if rng.random_bool(spec.noise.clamp(0.0, 1.0)) {
                    -y
                } else {
                    y
                }
            } else {
                let n: f64 = rng.sample(StandardNormal);
                score + spec.noise * n
            };
            SparseExample::new(features, y)
        })
        .collect()
}
