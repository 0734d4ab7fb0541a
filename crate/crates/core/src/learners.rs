//! Online update rules behind a single observe/predict/update interface.
//!
//! The normalized learners keep a per-feature scale and rescale ("squash")
//! a weight whenever that scale grows, so that the prediction sequence does
//! not depend on the units each feature is expressed in:
//!
//! * **NG** tracks `s_i = max |x_i|`, squashes `w_i <- w_i s_i^2 / x_i^2` and
//!   updates `w_i <- w_i - eta_t (t/N) g_i / s_i^2`.
//! * **NAG** tracks the same `s_i`, squashes `w_i <- w_i s_i / |x_i|`, keeps
//!   `G_i = sum g_i^2` and updates `w_i <- w_i - eta sqrt(t/N) g_i / (s_i sqrt(G_i))`.
//! * **sNAG** replaces the max by the root second moment `sigma_i = sqrt(sum x_i^2 / t)`.
//!
//! `N` accumulates `sum_i x_i^2 / s_i^2` over all examples so `N/t` is the
//! average squared normalized example norm. Diagonal AdaGrad and plain SGD are
//! provided as non-invariant baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Loss, Prediction, SparseExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Ng,
    Nag,
    #[serde(rename = "snag")]
    SNag,
    #[serde(rename = "adagrad")]
    AdaGrad,
    Sgd,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::Ng,
        LearnerKind::Nag,
        LearnerKind::SNag,
        LearnerKind::AdaGrad,
        LearnerKind::Sgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Ng => "ng",
            LearnerKind::Nag => "nag",
            LearnerKind::SNag => "snag",
            LearnerKind::AdaGrad => "adagrad",
            LearnerKind::Sgd => "sgd",
        }
    }

    /// Whether the update is invariant to per-feature rescaling.
    pub fn is_scale_invariant(self) -> bool {
        matches!(self, LearnerKind::Ng | LearnerKind::Nag | LearnerKind::SNag)
    }

    fn uses_grad_sq(self) -> bool {
        matches!(self, LearnerKind::Nag | LearnerKind::SNag | LearnerKind::AdaGrad)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ng" => Ok(LearnerKind::Ng),
            "nag" => Ok(LearnerKind::Nag),
            "snag" => Ok(LearnerKind::SNag),
            "adagrad" | "ag" => Ok(LearnerKind::AdaGrad),
            "sgd" => Ok(LearnerKind::Sgd),
            other => Err(Error::InvalidConfig(format!("unknown learner '{other}'"))),
        }
    }
}

/// Learning-rate schedule for NG and SGD. The other learners decay through
/// their gradient accumulators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaDecay {
    #[default]
    None,
    /// `eta_t = eta / sqrt(t)`
    InverseSqrtT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub eta: f64,
    /// Truncate predictions to `[-C, C]`; the clipped value feeds the loss.
    pub clip: Option<f64>,
    pub eta_decay: EtaDecay,
}

impl LearnerConfig {
    pub fn new(kind: LearnerKind, eta: f64) -> Self {
        Self {
            kind,
            eta,
            clip: None,
            eta_decay: EtaDecay::None,
        }
    }

    pub fn with_clip(mut self, c: f64) -> Self {
        self.clip = Some(c);
        self
    }

    pub fn with_decay(mut self, decay: EtaDecay) -> Self {
        self.eta_decay = decay;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.eta
            )));
        }
        if let Some(c) = self.clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "clip bound must be strictly positive, got {c}"
                )));
            }
        }
        if self.eta_decay != EtaDecay::None && !matches!(self.kind, LearnerKind::Ng | LearnerKind::Sgd) {
            return Err(Error::InvalidConfig(format!(
                "eta decay only applies to ng and sgd, not {}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Per-coordinate learner state plus the global normalizer and counter.
///
/// `s` holds `max |x_i|` for NG/NAG and `sum x_i^2` for sNAG. `sigma` is the
/// sNAG scale used at the coordinate's last touch and stays zero otherwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnerState {
    w: Vec<f64>,
    s: Vec<f64>,
    g: Vec<f64>,
    sigma: Vec<f64>,
    n: f64,
    t: u64,
}

impl LearnerState {
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.w.get(i).copied().unwrap_or(0.0)
    }

    pub fn scales(&self) -> &[f64] {
        &self.s
    }

    pub fn scale(&self, i: usize) -> f64 {
        self.s.get(i).copied().unwrap_or(0.0)
    }

    pub fn grad_sq(&self) -> &[f64] {
        &self.g
    }

    pub fn snag_sigma(&self, i: usize) -> f64 {
        self.sigma.get(i).copied().unwrap_or(0.0)
    }

    /// Global normalizer `N`.
    pub fn normalizer(&self) -> f64 {
        self.n
    }

    /// Number of examples observed.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn nonzero_weights(&self) -> usize {
        self.w.iter().filter(|&&w| w != 0.0).count()
    }

    fn ensure_capacity(&mut self, dim: usize) {
        if dim > self.w.len() {
            let len = dim.max(2 * self.w.len());
            self.w.resize(len, 0.0);
            self.s.resize(len, 0.0);
            self.g.resize(len, 0.0);
            self.sigma.resize(len, 0.0);
        }
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let coords = (0..self.w.len())
            .filter(|&i| self.w[i] != 0.0 || self.s[i] != 0.0 || self.g[i] != 0.0)
            .map(|i| CoordState {
                index: i,
                w: self.w[i],
                s: self.s[i],
                g: self.g[i],
                sigma: self.sigma[i],
            })
            .collect();
        StateSnapshot {
            n: self.n,
            t: self.t,
            coords,
        }
    }

    pub fn from_snapshot(snap: &StateSnapshot) -> Result<Self> {
        let mut state = LearnerState {
            n: snap.n,
            t: snap.t,
            ..Default::default()
        };
        if !(snap.n.is_finite() && snap.n >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid normalizer {}", snap.n)));
        }
        for c in &snap.coords {
            if ![c.w, c.s, c.g, c.sigma].iter().all(|v| v.is_finite()) || c.s < 0.0 || c.g < 0.0 || c.sigma < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "invalid state for coordinate {}",
                    c.index
                )));
            }
            state.ensure_capacity(c.index + 1);
            state.w[c.index] = c.w;
            state.s[c.index] = c.s;
            state.g[c.index] = c.g;
            state.sigma[c.index] = c.sigma;
        }
        Ok(state)
    }
}

/// Flat warm-restart form of [`LearnerState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub n: f64,
    pub t: u64,
    pub coords: Vec<CoordState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordState {
    pub index: usize,
    pub w: f64,
    pub s: f64,
    pub g: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sigma: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// What one `observe` call reports back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub prediction: Prediction,
    /// Progressive loss `l(yhat, y)` on the (clipped) prediction.
    pub loss: f64,
    /// `d l / d yhat` at the (clipped) prediction.
    pub derivative: f64,
}

#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    loss: Loss,
    state: LearnerState,
}

impl Learner {
    pub fn new(config: LearnerConfig, loss: Loss) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            loss,
            state: LearnerState::default(),
        })
    }

    pub fn with_state(config: LearnerConfig, loss: Loss, state: LearnerState) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, loss, state })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn into_state(self) -> LearnerState {
        self.state
    }

    /// Prediction the learner would make on `x`, including the effect of any
    /// pending squash, without changing state.
    pub fn predict(&self, x: &SparseExample) -> Result<Prediction> {
        let st = &self.state;
        let t_next = (st.t + 1) as f64;
        let mut raw = 0.0;
        for &(i, v) in x.features() {
            let mut w = st.weight(i);
            let a = v.abs();
            match self.config.kind {
                LearnerKind::Ng if a > st.scale(i) => {
                    let r = st.scale(i) / a;
                    w *= r * r;
                }
                LearnerKind::Nag if a > st.scale(i) => w *= st.scale(i) / a,
                LearnerKind::SNag => {
                    let sigma = ((st.scale(i) + v * v) / t_next).sqrt();
                    let old = st.snag_sigma(i);
                    if sigma > old {
                        w *= old / sigma;
                    }
                }
                _ => {}
            }
            raw += w * v;
        }
        if !raw.is_finite() {
            return Err(Error::numeric("prediction overflowed", None));
        }
        Ok(Prediction::new(raw, self.config.clip))
    }

    /// Updates the per-feature scales for `x` at time `t` (already counting
    /// `x`) and rescales weights whose scale grew.
    fn squash(kind: LearnerKind, st: &mut LearnerState, x: &SparseExample, t: f64) {
        for &(i, v) in x.features() {
            let a = v.abs();
            match kind {
                LearnerKind::Ng => {
                    if a > st.s[i] {
                        let r = st.s[i] / a;
                        st.w[i] *= r * r;
                        st.s[i] = a;
                    }
                }
                LearnerKind::Nag => {
                    if a > st.s[i] {
                        st.w[i] *= st.s[i] / a;
                        st.s[i] = a;
                    }
                }
                LearnerKind::SNag => {
                    st.s[i] += v * v;
                    let sigma = (st.s[i] / t).sqrt();
                    if sigma > st.sigma[i] {
                        st.w[i] *= st.sigma[i] / sigma;
                    }
                    st.sigma[i] = sigma;
                }
                LearnerKind::AdaGrad | LearnerKind::Sgd => {}
            }
        }
    }

    /// Processes one example: scale/squash pass, prediction, normalizer
    /// accumulation, then the per-coordinate update.
    pub fn observe(&mut self, x: &SparseExample) -> Result<Observation> {
        let y = x.label();
        self.loss.check_label(y)?;
        let kind = self.config.kind;
        let st = &mut self.state;
        st.ensure_capacity(x.dim());
        st.t += 1;
        let t = st.t as f64;

        // (1) scale tracking and squash
        Self::squash(kind, st, x, t);

        // (2) prediction
        let mut raw = 0.0;
        for &(i, v) in x.features() {
            raw += st.w[i] * v;
        }
        if !raw.is_finite() {
            return Err(Error::numeric("prediction overflowed", None));
        }
        let prediction = Prediction::new(raw, self.config.clip);
        let (loss, derivative) = self.loss.value_and_derivative(prediction.clipped, y)?;

        // (3) normalizer
        if kind.is_scale_invariant() {
            let scale_of = |i: usize| match kind {
                LearnerKind::SNag => st.sigma[i],
                _ => st.s[i],
            };
            let inc: f64 = x
                .features()
                .iter()
                .map(|&(i, v)| {
                    let r = v / scale_of(i);
                    r * r
                })
                .sum();
            st.n += inc;
        }

        // (4) update
        let eta_t = match self.config.eta_decay {
            EtaDecay::None => self.config.eta,
            EtaDecay::InverseSqrtT => self.config.eta / t.sqrt(),
        };
        if x.is_empty() || (kind.is_scale_invariant() && st.n == 0.0) {
            return Ok(Observation {
                prediction,
                loss,
                derivative,
            });
        }
        let global = match kind {
            LearnerKind::Ng => eta_t * (t / st.n),
            LearnerKind::Nag | LearnerKind::SNag => eta_t * (t / st.n).sqrt(),
            LearnerKind::AdaGrad | LearnerKind::Sgd => eta_t,
        };
        for &(i, v) in x.features() {
            let g = derivative * v;
            if !g.is_finite() {
                return Err(Error::numeric("gradient overflowed", Some(i)));
            }
            if kind.uses_grad_sq() {
                st.g[i] += g * g;
            }
            let step = match kind {
                LearnerKind::Ng => global * g / (st.s[i] * st.s[i]),
                LearnerKind::Nag | LearnerKind::SNag => {
                    if st.g[i] == 0.0 {
                        continue;
                    }
                    let scale = if kind == LearnerKind::Nag { st.s[i] } else { st.sigma[i] };
                    global * g / (scale * st.g[i].sqrt())
                }
                LearnerKind::AdaGrad => {
                    if st.g[i] == 0.0 {
                        continue;
                    }
                    global * g / st.g[i].sqrt()
                }
                LearnerKind::Sgd => global * g,
            };
            st.w[i] -= step;
            if !st.w[i].is_finite() || !st.g[i].is_finite() {
                return Err(Error::numeric("weight update diverged", Some(i)));
            }
        }
        if !st.n.is_finite() {
            return Err(Error::numeric("normalizer overflowed", None));
        }
        Ok(Observation {
            prediction,
            loss,
            derivative,
        })
    }
}

/// Summary of the final learner state carried by run reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub nonzero_weights: usize,
    pub n: f64,
    pub t: u64,
}

impl From<&LearnerState> for StateSummary {
    fn from(st: &LearnerState) -> Self {
        Self {
            nonzero_weights: st.nonzero_weights(),
            n: st.normalizer(),
            t: st.t(),
        }
    }
}

/// Result of folding `observe` over a stream (progressive validation).
#[derive(Debug, Clone)]
pub struct StreamRun {
    pub config: LearnerConfig,
    pub loss: Loss,
    /// Clipped predictions, one per example.
    pub predictions: Vec<f64>,
    pub labels: Vec<f64>,
    /// Progressive losses, one per example.
    pub losses: Vec<f64>,
    pub average_loss: f64,
    pub summary: StateSummary,
    pub state: LearnerState,
}

/// Runs a fresh learner over `stream`, recording the progressive loss of
/// every example before it is used for the update.
pub fn run_stream<I>(config: LearnerConfig, loss: Loss, stream: I) -> Result<StreamRun>
where
    I: IntoIterator<Item = Result<SparseExample>>,
{
    let learner = Learner::new(config, loss)?;
    continue_stream(learner, stream)
}

/// Like [`run_stream`] but starting from an existing learner (warm restart).
pub fn continue_stream<I>(mut learner: Learner, stream: I) -> Result<StreamRun>
where
    I: IntoIterator<Item = Result<SparseExample>>,
{
    let mut predictions = Vec::new();
    let mut labels = Vec::new();
    let mut losses = Vec::new();
    for (index, ex) in stream.into_iter().enumerate() {
        let wrap = |e: Error| Error::AtExample {
            index,
            source: Box::new(e),
        };
        let ex = ex.map_err(wrap)?;
        let obs = learner.observe(&ex).map_err(wrap)?;
        predictions.push(obs.prediction.clipped);
        labels.push(ex.label());
        losses.push(obs.loss);
    }
    if losses.is_empty() {
        return Err(Error::InvalidConfig("stream yielded no examples".into()));
    }
    let average_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    let summary = StateSummary::from(learner.state());
    Ok(StreamRun {
        config: *learner.config(),
        loss: learner.loss(),
        predictions,
        labels,
        losses,
        average_loss,
        summary,
        state: learner.into_state(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ex(f: &[(usize, f64)], y: f64) -> SparseExample {
        SparseExample::new(f.to_vec(), y).unwrap()
    }

    fn learner(kind: LearnerKind, eta: f64) -> Learner {
        Learner::new(LearnerConfig::new(kind, eta), Loss::Squared).unwrap()
    }

    #[test]
    fn ng_single_step() {
        let mut l = learner(LearnerKind::Ng, 0.5);
        let obs = l.observe(&ex(&[(0, 2.0)], 1.0)).unwrap();
        assert_eq!(obs.prediction.raw, 0.0);
        assert_eq!(l.state().scale(0), 2.0);
        assert_eq!(l.state().normalizer(), 1.0);
        assert_eq!(l.state().weight(0), 0.5);
    }

    #[test]
    fn ng_two_steps_with_squash() {
        let mut l = learner(LearnerKind::Ng, 0.5);
        l.observe(&ex(&[(0, 1.0)], 1.0)).unwrap();
        assert_eq!(l.state().weight(0), 1.0);
        let obs = l.observe(&ex(&[(0, 2.0)], 1.0)).unwrap();
        assert_eq!(obs.prediction.raw, 0.5);
        assert_eq!(obs.derivative, -1.0);
        assert_eq!(l.state().scale(0), 2.0);
        assert_eq!(l.state().normalizer(), 2.0);
        assert_eq!(l.state().weight(0), 0.5);
    }

    #[test]
    fn nag_single_step() {
        let mut l = learner(LearnerKind::Nag, 1.0);
        let obs = l.observe(&ex(&[(0, 2.0)], 1.0)).unwrap();
        assert_eq!(obs.prediction.raw, 0.0);
        assert_eq!(l.state().scale(0), 2.0);
        assert_eq!(l.state().normalizer(), 1.0);
        assert_eq!(l.state().grad_sq()[0], 16.0);
        assert_eq!(l.state().weight(0), 0.5);
    }

    #[test]
    fn adagrad_single_step() {
        let mut l = learner(LearnerKind::AdaGrad, 1.0);
        l.observe(&ex(&[(0, 2.0)], 1.0)).unwrap();
        assert_eq!(l.state().grad_sq()[0], 16.0);
        assert_eq!(l.state().weight(0), 1.0);
    }

    #[test]
    fn snag_single_step_matches_nag_on_first_example() {
        // sigma = sqrt(4/1) = 2 = max|x| on the first example
        let mut l = learner(LearnerKind::SNag, 1.0);
        l.observe(&ex(&[(0, 2.0)], 1.0)).unwrap();
        assert_eq!(l.state().snag_sigma(0), 2.0);
        assert_eq!(l.state().weight(0), 0.5);
    }

    #[test]
    fn empty_example_only_advances_t() {
        for kind in LearnerKind::ALL {
            let mut l = learner(kind, 0.5);
            l.observe(&ex(&[(0, 1.5), (2, -1.0)], 1.0)).unwrap();
            let before = l.state().clone();
            let obs = l.observe(&ex(&[], 1.0)).unwrap();
            assert_eq!(obs.prediction.raw, 0.0);
            assert_eq!(l.state().t(), before.t() + 1);
            assert_eq!(l.state().weights(), before.weights());
            assert_eq!(l.state().normalizer(), before.normalizer());
        }
    }

    #[test]
    fn all_zero_first_example_counts_without_update() {
        let mut l = learner(LearnerKind::Ng, 1.0);
        l.observe(&ex(&[(3, 0.0)], 1.0)).unwrap();
        assert_eq!(l.state().t(), 1);
        assert_eq!(l.state().normalizer(), 0.0);
    }

    #[test]
    fn predict_matches_observe_prediction() {
        for kind in LearnerKind::ALL {
            let mut l = learner(kind, 0.3);
            let stream = [
                ex(&[(0, 1.0), (1, 2.0)], 1.0),
                ex(&[(0, 3.0), (1, 1.0)], -0.5),
                ex(&[(1, 5.0)], 2.0),
            ];
            for e in &stream {
                let p = l.predict(e).unwrap();
                let obs = l.observe(e).unwrap();
                assert!((p.raw - obs.prediction.raw).abs() <= 1e-12 * (1.0 + p.raw.abs()));
            }
        }
    }

    #[test]
    fn clipping_feeds_the_loss() {
        let cfg = LearnerConfig::new(LearnerKind::Sgd, 1.0).with_clip(0.5);
        let mut l = Learner::new(cfg, Loss::Squared).unwrap();
        l.observe(&ex(&[(0, 1.0)], 10.0)).unwrap(); // w0 = 20
        let obs = l.observe(&ex(&[(0, 1.0)], 10.0)).unwrap();
        assert_eq!(obs.prediction.raw, 20.0);
        assert_eq!(obs.prediction.clipped, 0.5);
        assert_eq!(obs.loss, 9.5 * 9.5);
    }

    #[test]
    fn config_validation() {
        assert!(Learner::new(LearnerConfig::new(LearnerKind::Ng, -1.0), Loss::Hinge).is_err());
        assert!(Learner::new(LearnerConfig::new(LearnerKind::Ng, f64::NAN), Loss::Hinge).is_err());
        let c = LearnerConfig::new(LearnerKind::Nag, 1.0).with_clip(0.0);
        assert!(Learner::new(c, Loss::Hinge).is_err());
        let c = LearnerConfig::new(LearnerKind::Nag, 1.0).with_decay(EtaDecay::InverseSqrtT);
        assert!(Learner::new(c, Loss::Hinge).is_err());
        let c = LearnerConfig::new(LearnerKind::Sgd, 1.0).with_decay(EtaDecay::InverseSqrtT);
        assert!(Learner::new(c, Loss::Hinge).is_ok());
    }

    #[test]
    fn invalid_label_is_rejected() {
        let mut l = Learner::new(LearnerConfig::new(LearnerKind::Nag, 1.0), Loss::Hinge).unwrap();
        assert!(matches!(
            l.observe(&ex(&[(0, 1.0)], 0.0)),
            Err(Error::InvalidLabel { .. })
        ));
    }

    #[test]
    fn divergence_is_a_numeric_fault() {
        let mut l = learner(LearnerKind::Sgd, 1e200);
        let e = ex(&[(0, 1e200)], 1.0);
        let err = (0..5).map(|_| l.observe(&e)).find_map(|r| r.err()).unwrap();
        assert!(err.is_numeric_fault());
    }

    #[test]
    fn run_stream_examples() {
        let stream = vec![ex(&[(0, 1.0)], 1.0), ex(&[(0, 2.0)], 1.0)];
        let run = run_stream(
            LearnerConfig::new(LearnerKind::Ng, 0.5),
            Loss::Squared,
            stream.into_iter().map(Ok),
        )
        .unwrap();
        assert_eq!(run.losses, vec![1.0, 0.25]);
        assert_eq!(run.average_loss, 0.625);

        let run = run_stream(
            LearnerConfig::new(LearnerKind::Nag, 1.0),
            Loss::Squared,
            [Ok(ex(&[(0, 2.0)], 1.0))],
        )
        .unwrap();
        assert_eq!(run.average_loss, 1.0);

        let ys = [0.5, -2.0, 3.0];
        let stream: Vec<_> = ys.iter().map(|&y| Ok(ex(&[(0, 1.0), (4, 2.0)], y))).collect();
        let run = run_stream(LearnerConfig::new(LearnerKind::Sgd, 0.0), Loss::Squared, stream).unwrap();
        assert!(run.predictions.iter().all(|&p| p == 0.0));
        let expect = ys.iter().map(|y| y * y).sum::<f64>() / 3.0;
        assert!((run.average_loss - expect).abs() < 1e-15);
    }

    #[test]
    fn run_stream_reports_failing_index() {
        let stream = vec![Ok(ex(&[(0, 1.0)], 1.0)), Ok(ex(&[(0, 1.0)], 0.3))];
        let err = run_stream(LearnerConfig::new(LearnerKind::Nag, 1.0), Loss::Hinge, stream).unwrap_err();
        assert!(matches!(err, Error::AtExample { index: 1, .. }));
        assert!(run_stream(
            LearnerConfig::new(LearnerKind::Nag, 1.0),
            Loss::Hinge,
            Vec::<Result<SparseExample>>::new()
        )
        .is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut l = learner(LearnerKind::SNag, 0.7);
        for k in 0..20 {
            let v = 1.0 + (k % 5) as f64;
            l.observe(&ex(&[(k % 3, v), (7, -v)], 0.1 * k as f64)).unwrap();
        }
        let snap = l.state().snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: StateSnapshot = serde_json::from_str(&json).unwrap();
        let restored = LearnerState::from_snapshot(&back).unwrap();
        let mut a = l.clone();
        let mut b = Learner::with_state(*l.config(), l.loss(), restored).unwrap();
        let e = ex(&[(0, 9.0), (7, 1.0)], 1.0);
        assert_eq!(a.observe(&e).unwrap(), b.observe(&e).unwrap());
    }

    fn random_stream(seed: u64, d: usize, len: usize) -> Vec<SparseExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        (0..len)
            .map(|_| {
                let f: Vec<(usize, f64)> = (0..d)
                    .filter_map(|i| {
                        if rng.random_bool(0.7) {
                            Some((i, scales[i] * rng.random_range(-1.0..1.0)))
                        } else {
                            None
                        }
                    })
                    .collect();
                let y = rng.random_range(-1.0..1.0);
                SparseExample::new(f, y).unwrap()
            })
            .collect()
    }

    #[test]
    fn squash_conserves_normalized_weight() {
        // w*s^2 (NG), w*s (NAG) and w*sigma (sNAG) are unchanged by the squash
        for kind in [LearnerKind::Ng, LearnerKind::Nag, LearnerKind::SNag] {
            let mut l = learner(kind, 0.2);
            let mut fired = 0;
            for e in random_stream(7, 4, 300) {
                let before = l.state().clone();
                let mut after = before.clone();
                after.ensure_capacity(e.dim());
                Learner::squash(kind, &mut after, &e, (before.t() + 1) as f64);
                for &(i, _) in e.features() {
                    let conserved = |st: &LearnerState| match kind {
                        LearnerKind::Ng => st.weight(i) * st.scale(i) * st.scale(i),
                        LearnerKind::Nag => st.weight(i) * st.scale(i),
                        _ => st.weight(i) * st.snag_sigma(i),
                    };
                    let grew = match kind {
                        LearnerKind::SNag => after.snag_sigma(i) > before.snag_sigma(i),
                        _ => after.scale(i) > before.scale(i),
                    };
                    if grew && before.weight(i) != 0.0 {
                        fired += 1;
                        let (b, a) = (conserved(&before), conserved(&after));
                        assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs(), "{kind}: {b} vs {a}");
                    }
                }
                l.observe(&e).unwrap();
            }
            assert!(fired > 10);
        }
    }

    #[test]
    fn normalizer_bookkeeping() {
        for kind in [LearnerKind::Ng, LearnerKind::Nag] {
            let d = 6;
            let mut l = learner(kind, 0.3);
            let mut prev_n = 0.0;
            for e in random_stream(11, d, 500) {
                let before = l.state().scales().to_vec();
                l.observe(&e).unwrap();
                let st = l.state();
                let inc = st.normalizer() - prev_n;
                assert!((0.0..=d as f64 + 1e-12).contains(&inc));
                for &(i, v) in e.features() {
                    let expect = before.get(i).copied().unwrap_or(0.0).max(v.abs());
                    assert_eq!(st.scale(i), expect);
                }
                prev_n = st.normalizer();
                let ratio = st.normalizer() / st.t() as f64;
                assert!((0.0..=d as f64).contains(&ratio));
            }
        }
    }

    #[test]
    fn unused_feature_keeps_zero_weight() {
        for kind in LearnerKind::ALL {
            let mut l = learner(kind, 0.1);
            for e in random_stream(3, 5, 200) {
                let e = SparseExample::new(
                    e.features().iter().filter(|&&(i, _)| i != 2).copied().collect(),
                    e.label(),
                )
                .unwrap();
                l.observe(&e).unwrap();
            }
            assert_eq!(l.state().weight(2), 0.0);
        }
    }

    #[test]
    fn order_preserving_relabel_is_exact_and_permutation_is_close() {
        let stream = random_stream(5, 5, 400);
        let perm = [3usize, 0, 4, 1, 2];
        for kind in LearnerKind::ALL {
            // plain SGD diverges at 0.1 on these scales
            let eta = if kind == LearnerKind::Sgd { 1e-5 } else { 0.1 };
            let base = run_stream(
                LearnerConfig::new(kind, eta),
                Loss::Squared,
                stream.iter().cloned().map(Ok),
            )
            .unwrap();
            let shifted = run_stream(
                LearnerConfig::new(kind, eta),
                Loss::Squared,
                stream.iter().map(|e| e.permuted(|i| 3 * i + 10)),
            )
            .unwrap();
            assert_eq!(base.predictions, shifted.predictions);
            for i in 0..5 {
                assert_eq!(base.state.weight(i), shifted.state.weight(3 * i + 10));
            }
            let permuted = run_stream(
                LearnerConfig::new(kind, eta),
                Loss::Squared,
                stream.iter().map(|e| e.permuted(|i| perm[i])),
            )
            .unwrap();
            for (a, b) in base.predictions.iter().zip(&permuted.predictions) {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-9));
            }
            for (i, &pi) in perm.iter().enumerate() {
                let (a, b) = (base.state.weight(i), permuted.state.weight(pi));
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-9));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn normalized_learners_are_scale_invariant(
            seed in 0u64..1000,
            exps in proptest::collection::vec(-12i32..12, 4),
        ) {
            let stream = random_stream(seed, 4, 200);
            let d: Vec<f64> = exps.iter().map(|&e| 2f64.powi(e)).collect();
            for kind in [LearnerKind::Ng, LearnerKind::Nag, LearnerKind::SNag] {
                let cfg = LearnerConfig::new(kind, 0.2);
                let a = run_stream(cfg, Loss::Squared, stream.iter().cloned().map(Ok)).unwrap();
                let b = run_stream(
                    cfg,
                    Loss::Squared,
                    stream.iter().map(|e| e.map_values(|i, v| v * d[i])),
                ).unwrap();
                for (p, q) in a.predictions.iter().zip(&b.predictions) {
                    prop_assert!((p - q).abs() <= 1e-9 * p.abs().max(q.abs()));
                }
                for (i, di) in d.iter().enumerate() {
                    let (w, ws) = (a.state.weight(i), b.state.weight(i));
                    prop_assert!((w / di - ws).abs() <= 1e-9 * ws.abs());
                }
            }
        }
    }
}
