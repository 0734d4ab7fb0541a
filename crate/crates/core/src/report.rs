//! JSON report types. Every top-level report carries `schema_version` and a
//! `kind` tag; the matching JSON schemas live in `schemas/`.

use serde::{Deserialize, Serialize};

use crate::data::Normalization;
use crate::eval::{ComparisonReport, Progressive};
use crate::learners::{EtaDecay, LearnerKind, StateSnapshot, StateSummary, StreamRun};
use crate::model::Loss;
use crate::regret::{BoundReport, SuiteConfig, SuiteSummary};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the examples came from, with a content digest of their bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEcho {
    /// File path or synthetic spec string.
    pub source: String,
    pub format: String,
    /// Hex SHA-256 of the file bytes, or of the svmlight serialization of a
    /// synthetic stream.
    pub digest: String,
    pub examples: usize,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub learner: LearnerKind,
    pub loss: Loss,
    pub eta: f64,
    pub eta_decay: EtaDecay,
    pub clip: Option<f64>,
    pub normalization: Normalization,
    pub seed: u64,
    pub dataset: DatasetEcho,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warm_start: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based example index.
    pub t: usize,
    pub prediction: f64,
    pub label: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// Every `stride`-th example is kept, starting with the first.
    pub stride: usize,
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn from_run(run: &StreamRun, stride: usize) -> Self {
        let stride = stride.max(1);
        let entries = (0..run.losses.len())
            .step_by(stride)
            .map(|k| TraceEntry {
                t: k + 1,
                prediction: run.predictions[k],
                label: run.labels[k],
                loss: run.losses[k],
            })
            .collect();
        Self { stride, entries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub trace: Trace,
    pub average_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zero_one: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normalized_loss: Option<f64>,
    pub final_state: StateSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state: Option<StateSnapshot>,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(
        config: RunConfig,
        run: &StreamRun,
        progressive: &Progressive,
        stride: usize,
        emit_state: bool,
        elapsed_ms: f64,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: "run".into(),
            config,
            trace: Trace::from_run(run, stride),
            average_loss: run.average_loss,
            zero_one: progressive.zero_one,
            normalized_loss: progressive.normalized_loss,
            final_state: run.summary,
            state: emit_state.then(|| run.state.snapshot()),
            timing: Timing { elapsed_ms },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub kind: String,
    pub dataset: DatasetEcho,
    pub comparison: ComparisonReport,
    pub timing: Timing,
}

impl SweepReport {
    pub fn new(dataset: DatasetEcho, comparison: ComparisonReport, elapsed_ms: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: "sweep".into(),
            dataset,
            comparison,
            timing: Timing { elapsed_ms },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSuiteReport {
    pub schema_version: u32,
    pub kind: String,
    pub config: SuiteConfig,
    pub reports: Vec<BoundReport>,
    pub summary: SuiteSummary,
    pub timing: Timing,
}

impl RegretSuiteReport {
    pub fn new(config: SuiteConfig, reports: Vec<BoundReport>, summary: SuiteSummary, elapsed_ms: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: "regret".into(),
            config,
            reports,
            summary,
            timing: Timing { elapsed_ms },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::progressive_validation;
    use crate::learners::{run_stream, LearnerConfig};
    use crate::model::SparseExample;

    #[test]
    fn trace_stride_keeps_first_and_every_kth() {
        let xs: Vec<_> = (0..10)
            .map(|k| Ok(SparseExample::new(vec![(0, 1.0 + k as f64)], 1.0).unwrap()))
            .collect();
        let run = run_stream(LearnerConfig::new(LearnerKind::Nag, 0.5), Loss::Squared, xs).unwrap();
        let t = Trace::from_run(&run, 3);
        assert_eq!(t.entries.iter().map(|e| e.t).collect::<Vec<_>>(), vec![1, 4, 7, 10]);
        assert_eq!(Trace::from_run(&run, 0).entries.len(), 10);

        let p = progressive_validation(&run, None).unwrap();
        let cfg = RunConfig {
            learner: LearnerKind::Nag,
            loss: Loss::Squared,
            eta: 0.5,
            eta_decay: EtaDecay::None,
            clip: None,
            normalization: Normalization::None,
            seed: 0,
            dataset: DatasetEcho {
                source: "mem".into(),
                format: "svmlight".into(),
                digest: "00".into(),
                examples: 10,
            },
            warm_start: None,
        };
        let r = RunReport::new(cfg, &run, &p, 1, true, 0.0);
        let json = serde_json::to_string(&r).unwrap();
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.kind, "run");
    }
}
