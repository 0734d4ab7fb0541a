//! Progressive validation, learning-rate sweeps and significance testing.
//!
//! The reported metric of a run is the 0-1 loss for classification losses
//! and the squared loss divided by `(max y - min y)^2` for regression, so
//! per-example metrics lie in `[0, 1]` and feed [`significance`] directly.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{prenormalize, regression_loss_scale, Normalization};
use crate::error::{Error, Result};
use crate::learners::{run_stream, Learner, LearnerConfig, LearnerKind, StreamRun};
use crate::model::{Loss, SparseExample};

/// Environment variable capping the number of sweep / suite threads.
pub const THREADS_ENV: &str = "NOL_THREADS";

/// 0-1 loss of a real-valued prediction; `yhat = 0` counts as an error.
pub fn zero_one(yhat: f64, y: f64) -> f64 {
    if yhat * y > 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Progressive-validation summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progressive {
    /// Mean training loss.
    pub average_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_one: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_loss: Option<f64>,
    /// The reported metric: `zero_one` or `normalized_loss`.
    pub metric: f64,
    #[serde(skip)]
    pub per_example_metric: Vec<f64>,
}

/// Summarizes a finished run. For squared loss `loss_scale` defaults to the
/// label range of the run (1 when all labels coincide).
pub fn progressive_validation(run: &StreamRun, loss_scale: Option<f64>) -> Result<Progressive> {
    if run.losses.is_empty() {
        return Err(Error::InvalidConfig(
            "progressive validation needs at least one example".into(),
        ));
    }
    let n = run.losses.len() as f64;
    if run.loss.is_classification() {
        let per: Vec<f64> = run
            .predictions
            .iter()
            .zip(&run.labels)
            .map(|(&p, &y)| zero_one(p, y))
            .collect();
        let z = per.iter().sum::<f64>() / n;
        Ok(Progressive {
            average_loss: run.average_loss,
            zero_one: Some(z),
            normalized_loss: None,
            metric: z,
            per_example_metric: per,
        })
    } else {
        let scale = match loss_scale {
            Some(s) if s > 0.0 && s.is_finite() => s,
            Some(s) => return Err(Error::InvalidConfig(format!("loss scale must be positive, got {s}"))),
            None => regression_loss_scale(run.labels.iter().copied()).unwrap_or(1.0),
        };
        let per: Vec<f64> = run.losses.iter().map(|l| l / scale).collect();
        let m = per.iter().sum::<f64>() / n;
        Ok(Progressive {
            average_loss: run.average_loss,
            zero_one: None,
            normalized_loss: Some(m),
            metric: m,
            per_example_metric: per,
        })
    }
}

/// One-against-all reduction: one binary learner per class, all sharing a
/// configuration, predicting the argmax of their raw scores.
#[derive(Debug, Clone)]
pub struct OneAgainstAll {
    classes: Vec<f64>,
    learners: Vec<Learner>,
}

impl OneAgainstAll {
    pub fn new(config: LearnerConfig, loss: Loss, classes: Vec<f64>) -> Result<Self> {
        if !loss.is_classification() {
            return Err(Error::InvalidConfig(
                "one-against-all needs a classification loss".into(),
            ));
        }
        if classes.len() < 2 {
            return Err(Error::InvalidConfig(
                "one-against-all needs at least two classes".into(),
            ));
        }
        let learners = classes
            .iter()
            .map(|_| Learner::new(config, loss))
            .collect::<Result<_>>()?;
        Ok(Self { classes, learners })
    }

    /// Sorted distinct labels.
    pub fn classes_of(examples: &[SparseExample]) -> Vec<f64> {
        let mut c: Vec<f64> = examples.iter().map(SparseExample::label).collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }

    pub fn classes(&self) -> &[f64] {
        &self.classes
    }

    /// Predicts, then updates every binary learner. Returns the predicted
    /// class; ties go to the earliest class.
    pub fn observe(&mut self, x: &SparseExample) -> Result<f64> {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, l) in self.learners.iter().enumerate() {
            let score = l.predict(x)?.raw;
            if score > best.0 {
                best = (score, k);
            }
        }
        for (k, l) in self.learners.iter_mut().enumerate() {
            let y = if x.label() == self.classes[k] { 1.0 } else { -1.0 };
            l.observe(&x.with_label(y))?;
        }
        Ok(self.classes[best.1])
    }
}

/// Progressive multiclass 0-1 loss under one-against-all.
pub fn run_multiclass(config: LearnerConfig, loss: Loss, examples: &[SparseExample]) -> Result<Progressive> {
    if examples.is_empty() {
        return Err(Error::InvalidConfig("stream yielded no examples".into()));
    }
    let mut oaa = OneAgainstAll::new(config, loss, OneAgainstAll::classes_of(examples))?;
    let mut per = Vec::with_capacity(examples.len());
    for (index, x) in examples.iter().enumerate() {
        let pred = oaa.observe(x).map_err(|e| Error::AtExample {
            index,
            source: Box::new(e),
        })?;
        per.push(if pred == x.label() { 0.0 } else { 1.0 });
    }
    let z = per.iter().sum::<f64>() / per.len() as f64;
    Ok(Progressive {
        average_loss: z,
        zero_one: Some(z),
        normalized_loss: None,
        metric: z,
        per_example_metric: per,
    })
}

/// Strictly increasing grid of positive learning rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EtaGrid(Vec<f64>);

impl EtaGrid {
    pub fn new(etas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() {
            return Err(Error::InvalidConfig("learning-rate grid is empty".into()));
        }
        if etas.iter().any(|e| !(e.is_finite() && *e > 0.0)) || etas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "learning-rate grid must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self(etas))
    }

    /// `2^lo, 2^(lo+1), ..., 2^hi`.
    pub fn powers_of_two(lo: i32, hi: i32) -> Result<Self> {
        Self::new((lo..=hi).map(|k| 2f64.powi(k)).collect())
    }

    /// Every power of two in `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid learning-rate range {lo}..{hi}")));
        }
        let a = lo.log2().ceil() as i32;
        let b = hi.log2().floor() as i32;
        Self::powers_of_two(a, b)
    }

    pub fn etas(&self) -> &[f64] {
        &self.0
    }
}

impl Default for EtaGrid {
    fn default() -> Self {
        Self::powers_of_two(-20, 6).expect("static grid is valid")
    }
}

impl std::str::FromStr for EtaGrid {
    type Err = Error;

    /// `LO..HI` (powers of two inside the range) or a single value; values
    /// may be written `2^k`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| {
            let v = v.trim();
            let parsed = match v.strip_prefix("2^") {
                Some(k) => k.parse::<i32>().ok().map(|k| 2f64.powi(k)),
                None => v.parse::<f64>().ok(),
            };
            parsed.ok_or_else(|| Error::InvalidConfig(format!("invalid learning rate '{v}'")))
        };
        match s.split_once("..") {
            Some((lo, hi)) => Self::covering(num(lo)?, num(hi)?),
            None => Self::new(vec![num(s)?]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub grid: EtaGrid,
    pub learners: Vec<LearnerKind>,
    pub loss: Loss,
    pub normalizations: Vec<Normalization>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    /// Score with one-against-all multiclass 0-1 loss.
    #[serde(default)]
    pub multiclass: bool,
}

impl SweepSpec {
    pub fn new(learners: Vec<LearnerKind>, loss: Loss) -> Self {
        Self {
            grid: EtaGrid::default(),
            learners,
            loss,
            normalizations: vec![Normalization::None],
            clip: None,
            multiclass: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learners.is_empty() || self.normalizations.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one learner and normalization".into(),
            ));
        }
        EtaGrid::new(self.grid.0.clone())?;
        Ok(())
    }
}

/// One (learner, normalization, eta) run. Failed runs carry `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub learner: LearnerKind,
    pub normalization: Normalization,
    pub eta: f64,
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub learner: LearnerKind,
    pub normalization: Normalization,
    pub eta_star: Option<f64>,
    pub best_loss: Option<f64>,
    /// `(eta, loss)`; failed cells have `loss = None`.
    pub points: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub significant: bool,
    pub a: Interval,
    pub b: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub a: String,
    pub b: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub spec: SweepSpec,
    pub curves: Vec<Curve>,
    pub cells: Vec<SweepCell>,
    pub significance: Vec<PairVerdict>,
}

fn curve_label(learner: LearnerKind, norm: Normalization) -> String {
    match norm {
        Normalization::None => learner.name().to_string(),
        other => format!("{}+{}", learner.name(), other),
    }
}

/// Runs `f` over `items` in parallel (capped by `NOL_THREADS`), preserving order.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()) {
        Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        None => items.par_iter().map(&f).collect(),
    }
}

fn evaluate(
    spec: &SweepSpec,
    learner: LearnerKind,
    eta: f64,
    data: &[SparseExample],
    loss_scale: Option<f64>,
) -> Result<Progressive> {
    let mut config = LearnerConfig::new(learner, eta);
    config.clip = spec.clip;
    if spec.multiclass {
        return run_multiclass(config, spec.loss, data);
    }
    let run = run_stream(config, spec.loss, data.iter().cloned().map(Ok))?;
    let p = progressive_validation(&run, loss_scale)?;
    if p.metric.is_finite() {
        Ok(p)
    } else {
        Err(Error::numeric("non-finite progressive loss", None))
    }
}

/// Exhaustive sweep over `(learner, normalization, eta)`. Failed cells are
/// marked and excluded from `eta*`; ties pick the smallest eta.
pub fn sweep(spec: &SweepSpec, data: &[SparseExample]) -> Result<ComparisonReport> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("sweep dataset is empty".into()));
    }
    let loss_scale = if spec.loss == Loss::Squared && !spec.multiclass {
        Some(regression_loss_scale(data.iter().map(SparseExample::label)).unwrap_or(1.0))
    } else {
        None
    };
    let mut normalized = Vec::with_capacity(spec.normalizations.len());
    for &mode in &spec.normalizations {
        normalized.push((mode, prenormalize(data, mode)?.1));
    }
    let mut jobs = Vec::new();
    for (ni, _) in normalized.iter().enumerate() {
        for &learner in &spec.learners {
            for &eta in spec.grid.etas() {
                jobs.push((ni, learner, eta));
            }
        }
    }
    let outcomes = par_map(&jobs, |&(ni, learner, eta)| {
        evaluate(spec, learner, eta, &normalized[ni].1, loss_scale).map(|p| p.metric)
    });
    let cells: Vec<SweepCell> = jobs
        .iter()
        .zip(outcomes)
        .map(|(&(ni, learner, eta), out)| {
            let (loss, error) = match out {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepCell {
                learner,
                normalization: normalized[ni].0,
                eta,
                loss,
                error,
            }
        })
        .collect();

    let mut curves = Vec::new();
    let mut best_sequences = Vec::new();
    for (mode, rows) in &normalized {
        for &learner in &spec.learners {
            let points: Vec<(f64, Option<f64>)> = cells
                .iter()
                .filter(|c| c.learner == learner && c.normalization == *mode)
                .map(|c| (c.eta, c.loss))
                .collect();
            let best =
                points
                    .iter()
                    .filter_map(|&(e, l)| l.map(|l| (e, l)))
                    .fold(None, |acc: Option<(f64, f64)>, (e, l)| match acc {
                        Some((_, bl)) if bl <= l => acc,
                        _ => Some((e, l)),
                    });
            if let Some((eta, _)) = best {
                let p = evaluate(spec, learner, eta, rows, loss_scale)?;
                best_sequences.push((curve_label(learner, *mode), p.per_example_metric));
            }
            curves.push(Curve {
                learner,
                normalization: *mode,
                eta_star: best.map(|b| b.0),
                best_loss: best.map(|b| b.1),
                points,
            });
        }
    }

    let mut significance_rows = Vec::new();
    for i in 0..best_sequences.len() {
        for j in i + 1..best_sequences.len() {
            let clamp = |v: &[f64]| v.iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<_>>();
            let verdict = significance(&clamp(&best_sequences[i].1), &clamp(&best_sequences[j].1))?;
            significance_rows.push(PairVerdict {
                a: best_sequences[i].0.clone(),
                b: best_sequences[j].0.clone(),
                verdict,
            });
        }
    }
    Ok(ComparisonReport {
        spec: spec.clone(),
        curves,
        cells,
        significance: significance_rows,
    })
}

/// Bernoulli relative entropy `KL(p || q)` with `0 ln 0 = 0`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Two-sided KL Chernoff interval for the mean of `n` values in `[0, 1]`:
/// every `q` with `n KL(mean || q) <= ln(1 / delta_tail)` on each side.
pub fn kl_interval(mean: f64, n: usize, delta_tail: f64) -> Interval {
    let budget = (1.0 / delta_tail).ln() / n as f64;
    let invert = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if bernoulli_kl(mean, mid) <= budget {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lo = if bernoulli_kl(mean, 0.0) <= budget {
        0.0
    } else {
        invert(mean, 0.0)
    };
    let hi = if bernoulli_kl(mean, 1.0) <= budget {
        1.0
    } else {
        invert(mean, 1.0)
    };
    Interval { mean, lo, hi }
}

/// Per-tail failure probability of each interval (0.1 split four ways).
pub const SIGNIFICANCE_TAIL: f64 = 0.025;

/// Significant iff the two KL intervals are disjoint.
pub fn significance(a: &[f64], b: &[f64]) -> Result<Verdict> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidConfig("significance needs at least one loss".into()));
    }
    if let Some(v) = a.iter().chain(b).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidConfig(format!("losses must lie in [0, 1], got {v}")));
    }
    let n = a.len();
    let ia = kl_interval(a.iter().sum::<f64>() / n as f64, n, SIGNIFICANCE_TAIL);
    let ib = kl_interval(b.iter().sum::<f64>() / n as f64, n, SIGNIFICANCE_TAIL);
    Ok(Verdict {
        significant: ia.hi < ib.lo || ib.hi < ia.lo,
        a: ia,
        b: ib,
    })
}

/// Writes `learner,eta,loss` rows for every successful cell.
pub fn write_eta_curves<W: Write>(report: &ComparisonReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["learner", "eta", "loss"]).map_err(csv_err)?;
    for c in &report.curves {
        for &(eta, loss) in &c.points {
            if let Some(l) = loss {
                let label = curve_label(c.learner, c.normalization);
                w.write_record([label, eta.to_string(), l.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `learner,scale,loss` rows.
pub fn write_scale_curve<W: Write>(rows: &[(String, f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["learner", "scale", "loss"]).map_err(csv_err)?;
    for (learner, s, l) in rows {
        w.write_record([learner.clone(), s.to_string(), l.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_figure1;
    use proptest::prelude::*;

    fn ex(f: &[(usize, f64)], y: f64) -> SparseExample {
        SparseExample::new(f.to_vec(), y).unwrap()
    }

    #[test]
    fn zero_one_counts_ties_as_errors() {
        let preds = [-1.0, 2.0, 0.5, 0.0];
        let labels = [1.0, 1.0, 1.0, -1.0];
        let per: Vec<f64> = preds.iter().zip(&labels).map(|(p, y)| zero_one(*p, *y)).collect();
        assert_eq!(per, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(per.iter().sum::<f64>() / 4.0, 0.5);
    }

    #[test]
    fn zero_eta_regression_is_normalized() {
        let xs: Vec<_> = (0..5).map(|k| Ok(ex(&[(0, k as f64 + 1.0)], 1.0))).collect();
        let run = run_stream(LearnerConfig::new(LearnerKind::Sgd, 0.0), Loss::Squared, xs).unwrap();
        let p = progressive_validation(&run, Some(1.0)).unwrap();
        assert_eq!(p.metric, 1.0);
        assert_eq!(p.normalized_loss, Some(1.0));
        assert!(progressive_validation(&run, Some(0.0)).is_err());
    }

    #[test]
    fn classification_reports_both_losses() {
        let xs = synth_figure1(1.0, 200, 1).unwrap();
        let run = run_stream(
            LearnerConfig::new(LearnerKind::Nag, 0.5),
            Loss::Hinge,
            xs.into_iter().map(Ok),
        )
        .unwrap();
        let p = progressive_validation(&run, None).unwrap();
        assert_eq!(p.average_loss, run.average_loss);
        assert_eq!(Some(p.metric), p.zero_one);
        assert!(p.metric < 0.2);
    }

    #[test]
    fn eta_grid_rules() {
        assert_eq!(EtaGrid::default().etas().len(), 27);
        assert_eq!(EtaGrid::default().etas()[0], 2f64.powi(-20));
        assert!(EtaGrid::new(vec![]).is_err());
        assert!(EtaGrid::new(vec![1.0, 1.0]).is_err());
        assert!(EtaGrid::new(vec![-1.0]).is_err());
        let g: EtaGrid = "0.1..4".parse().unwrap();
        assert_eq!(g.etas(), &[0.125, 0.25, 0.5, 1.0, 2.0, 4.0]);
        let g: EtaGrid = "2^-20..2^6".parse().unwrap();
        assert_eq!(g, EtaGrid::default());
        let g: EtaGrid = "0.3".parse().unwrap();
        assert_eq!(g.etas(), &[0.3]);
        assert!("3..1".parse::<EtaGrid>().is_err());
    }

    #[test]
    fn single_eta_sweep_is_degenerate() {
        let xs = synth_figure1(1.0, 100, 2).unwrap();
        let mut spec = SweepSpec::new(vec![LearnerKind::Nag], Loss::Hinge);
        spec.grid = EtaGrid::new(vec![0.5]).unwrap();
        let r = sweep(&spec, &xs).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.curves[0].eta_star, Some(0.5));
        assert!(r.significance.is_empty());
    }

    #[test]
    fn sweep_marks_failed_cells_and_is_deterministic() {
        let xs: Vec<_> = (0..50).map(|k| ex(&[(0, 1e150 * (k % 3) as f64 + 1.0)], 1.0)).collect();
        let mut spec = SweepSpec::new(vec![LearnerKind::Sgd, LearnerKind::Nag], Loss::Squared);
        spec.grid = EtaGrid::powers_of_two(-2, 2).unwrap();
        let a = sweep(&spec, &xs).unwrap();
        let b = sweep(&spec, &xs).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.cells.iter().any(|c| c.error.is_some()));
        for c in &a.curves {
            if let Some(best) = c.best_loss {
                assert!(c.points.iter().all(|(_, l)| l.is_none_or(|l| best <= l)));
            }
        }
    }

    #[test]
    fn plot_csv_header() {
        let xs = synth_figure1(1.0, 50, 3).unwrap();
        let mut spec = SweepSpec::new(vec![LearnerKind::Nag, LearnerKind::AdaGrad], Loss::Hinge);
        spec.grid = EtaGrid::powers_of_two(-1, 1).unwrap();
        let r = sweep(&spec, &xs).unwrap();
        let mut buf = Vec::new();
        write_eta_curves(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("learner,eta,loss\n"));
        assert_eq!(text.lines().count(), 7);
        let mut buf = Vec::new();
        write_scale_curve(&[("nag".into(), 1000.0, 0.1)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "learner,scale,loss\nnag,1000,0.1\n");
    }

    #[test]
    fn significance_examples() {
        let a = vec![0.0; 1000];
        let b = vec![1.0; 1000];
        assert!(!significance(&a, &a).unwrap().significant);
        assert!(significance(&a, &b).unwrap().significant);
        assert!(significance(&a, &b[..10]).is_err());
        assert!(significance(&[2.0], &[0.0]).is_err());
    }

    #[test]
    fn significance_bank_row() {
        let n = 45212;
        let seq = |mean: f64| {
            let k = (mean * n as f64).round() as usize;
            (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect::<Vec<_>>()
        };
        let v = significance(&seq(0.098), &seq(0.109)).unwrap();
        assert!(v.significant, "{v:?}");
        assert!(v.a.hi < v.b.lo);
    }

    #[test]
    fn kl_interval_oracle() {
        // independent check: the endpoints satisfy the KL equation
        let i = kl_interval(0.3, 100, 0.025);
        let target = 40f64.ln() / 100.0;
        assert!((bernoulli_kl(0.3, i.lo) - target).abs() < 1e-9);
        assert!((bernoulli_kl(0.3, i.hi) - target).abs() < 1e-9);
        assert!(i.lo < 0.3 && 0.3 < i.hi);
        let z = kl_interval(0.0, 100, 0.025);
        assert_eq!(z.lo, 0.0);
        assert!((z.hi - (1.0 - (-target).exp())).abs() < 1e-9);
    }

    #[test]
    fn one_against_all_learns_three_classes() {
        let xs: Vec<_> = (0..600)
            .map(|k| {
                let c = (k % 3) as f64;
                ex(&[(0, 1.0), (1 + k % 3, 1.0)], c)
            })
            .collect();
        let p = run_multiclass(LearnerConfig::new(LearnerKind::Nag, 0.5), Loss::Hinge, &xs).unwrap();
        assert!(p.metric < 0.05, "{}", p.metric);
        assert!(run_multiclass(LearnerConfig::new(LearnerKind::Nag, 0.5), Loss::Squared, &xs).is_err());
    }

    proptest! {
        #[test]
        fn significance_symmetric_and_monotone(p in 0.0f64..0.5, gap in 0.0f64..0.5, extra in 0.0f64..0.2, n in 10usize..2000) {
            let seq = |m: f64| vec![m; n];
            let ab = significance(&seq(p), &seq(p + gap)).unwrap();
            let ba = significance(&seq(p + gap), &seq(p)).unwrap();
            prop_assert_eq!(ab.significant, ba.significant);
            let wider = significance(&seq(p), &seq((p + gap + extra).min(1.0))).unwrap();
            prop_assert!(!ab.significant || wider.significant);
        }
    }
}
