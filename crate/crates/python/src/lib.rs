//! Python bindings for `nol-core`.
//!
//! Examples cross the boundary as `(features, label)` pairs where `features`
//! is a list of `(index, value)` tuples. Structured reports come back as JSON
//! strings with the same layout the CLI writes.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nol_core::conditioners::{self, ComparatorBall, EnclosingBox, NormIndex};
use nol_core::data::{self, Normalization};
use nol_core::eval::{self, EtaGrid, SweepSpec};
use nol_core::learners::{self, LearnerState, StateSnapshot};
use nol_core::regret::{self, CheckKind, SuiteConfig};
use nol_core::{EtaDecay, LearnerConfig, LearnerKind, Loss, SparseExample};

create_exception!(nol, NolError, PyValueError);
create_exception!(nol, NumericFault, NolError);

type Features = Vec<(usize, f64)>;
type PyExample = (Features, f64);

fn to_py(e: nol_core::Error) -> PyErr {
    if e.is_numeric_fault() {
        NumericFault::new_err(e.to_string())
    } else {
        NolError::new_err(e.to_string())
    }
}

fn parse<T: std::str::FromStr<Err = nol_core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn norm_index(q: &str) -> PyResult<NormIndex> {
    match q {
        "l1" => Ok(NormIndex::L1),
        "l2" => Ok(NormIndex::L2),
        other => Err(NolError::new_err(format!("unknown norm '{other}', expected l1 or l2"))),
    }
}

fn eta_decay(s: &str) -> PyResult<EtaDecay> {
    match s {
        "none" => Ok(EtaDecay::None),
        "inverse-sqrt-t" => Ok(EtaDecay::InverseSqrtT),
        other => Err(NolError::new_err(format!("unknown eta decay '{other}'"))),
    }
}

fn examples(xs: Vec<PyExample>) -> PyResult<Vec<SparseExample>> {
    xs.into_iter()
        .map(|(f, y)| SparseExample::new(f, y).map_err(to_py))
        .collect()
}

fn to_pairs(xs: &[SparseExample]) -> Vec<PyExample> {
    xs.iter().map(|x| (x.features().to_vec(), x.label())).collect()
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| NolError::new_err(e.to_string()))
}

/// One online learner: NG, NAG, sNAG, AdaGrad or SGD.
#[pyclass(name = "Learner", module = "nol")]
struct PyLearner {
    inner: nol_core::Learner,
}

#[pymethods]
impl PyLearner {
    #[new]
    #[pyo3(signature = (kind = "nag", eta = 1.0, loss = "squared", clip = None, eta_decay = "none"))]
    fn new(kind: &str, eta: f64, loss: &str, clip: Option<f64>, eta_decay: &str) -> PyResult<Self> {
        let mut config = LearnerConfig::new(parse(kind)?, eta).with_decay(self::eta_decay(eta_decay)?);
        config.clip = clip;
        let inner = nol_core::Learner::new(config, parse(loss)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Clipped prediction for `features` without touching the state.
    fn predict(&self, features: Features) -> PyResult<f64> {
        let x = SparseExample::new(features, 0.0).map_err(to_py)?;
        Ok(self.inner.predict(&x).map_err(to_py)?.clipped)
    }

    /// Predicts, scores and updates. Returns `(prediction, loss)`.
    fn observe(&mut self, features: Features, label: f64) -> PyResult<(f64, f64)> {
        let x = SparseExample::new(features, label).map_err(to_py)?;
        let obs = self.inner.observe(&x).map_err(to_py)?;
        Ok((obs.prediction.clipped, obs.loss))
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.state().weights().to_vec()
    }

    #[getter]
    fn scales(&self) -> Vec<f64> {
        self.inner.state().scales().to_vec()
    }

    #[getter]
    fn t(&self) -> u64 {
        self.inner.state().t()
    }

    #[getter]
    fn normalizer(&self) -> f64 {
        self.inner.state().normalizer()
    }

    /// Full per-coordinate state as JSON, loadable with `load_state`.
    fn state_json(&self) -> PyResult<String> {
        json(&self.inner.state().snapshot())
    }

    fn load_state(&mut self, state: &str) -> PyResult<()> {
        let snap: StateSnapshot = serde_json::from_str(state).map_err(|e| NolError::new_err(e.to_string()))?;
        let st = LearnerState::from_snapshot(&snap).map_err(to_py)?;
        self.inner = nol_core::Learner::with_state(*self.inner.config(), self.inner.loss(), st).map_err(to_py)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        let c = self.inner.config();
        format!(
            "Learner(kind={:?}, eta={}, loss={:?}, t={})",
            c.kind.name(),
            c.eta,
            self.inner.loss().name(),
            self.inner.state().t()
        )
    }
}

/// Progressive validation of a fresh learner. Returns a dict with
/// `average_loss`, `losses`, `predictions` and `weights`.
#[pyfunction]
#[pyo3(signature = (examples, kind = "nag", eta = 1.0, loss = "squared", clip = None))]
fn run_stream<'py>(
    py: Python<'py>,
    examples: Vec<PyExample>,
    kind: &str,
    eta: f64,
    loss: &str,
    clip: Option<f64>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let xs = self::examples(examples)?;
    let mut config = LearnerConfig::new(parse(kind)?, eta);
    config.clip = clip;
    let run = learners::run_stream(config, parse(loss)?, xs.into_iter().map(Ok)).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("average_loss", run.average_loss)?;
    d.set_item("losses", run.losses)?;
    d.set_item("predictions", run.predictions)?;
    d.set_item("weights", run.state.weights().to_vec())?;
    Ok(d)
}

#[pyfunction]
fn loss_value(loss: &str, yhat: f64, y: f64) -> PyResult<f64> {
    Ok(parse::<Loss>(loss)?.value(yhat, y))
}

#[pyfunction]
fn loss_derivative(loss: &str, yhat: f64, y: f64) -> PyResult<f64> {
    Ok(parse::<Loss>(loss)?.derivative(yhat, y))
}

/// `A_ii = sqrt(G_i) m_i / C`, the best fixed diagonal conditioner in hindsight.
#[pyfunction]
fn hindsight_conditioner(grad_sq: Vec<f64>, ranges: Vec<f64>, c: f64) -> PyResult<Vec<f64>> {
    let bounds = EnclosingBox::from_ranges(ranges).map_err(to_py)?;
    Ok(conditioners::hindsight_conditioner(&grad_sq, &bounds, c))
}

/// A-norm projection of `w` onto `{ w : ||m w||_q <= C }`.
#[pyfunction]
#[pyo3(signature = (w, a, ranges, c, q = "l1"))]
fn project(w: Vec<f64>, a: Vec<f64>, ranges: Vec<f64>, c: f64, q: &str) -> PyResult<Vec<f64>> {
    let ball =
        ComparatorBall::new(EnclosingBox::from_ranges(ranges).map_err(to_py)?, c, norm_index(q)?).map_err(to_py)?;
    Ok(conditioners::project(&w, &a, &ball))
}

/// Best comparator in the ball and its cumulative loss.
#[pyfunction]
#[pyo3(signature = (examples, loss, c = 1.0, q = "l1", seed = 0))]
fn best_in_hindsight(examples: Vec<PyExample>, loss: &str, c: f64, q: &str, seed: u64) -> PyResult<(Vec<f64>, f64)> {
    let xs = self::examples(examples)?;
    let ball = ComparatorBall::new(EnclosingBox::from_examples(&xs), c, norm_index(q)?).map_err(to_py)?;
    let h = regret::best_in_hindsight(&xs, parse(loss)?, &ball, regret::HindsightOracle::subgradient(seed))
        .map_err(to_py)?;
    Ok((h.w, h.total_loss))
}

/// Seeded regret-bound suite; returns `(reports_json, summary_json)`.
#[pyfunction]
#[pyo3(signature = (check, instances = 20, seed = 0, c = 1.0, max_dim = 5, len = None, oracle_iterations = None))]
fn regret_suite(
    check: &str,
    instances: usize,
    seed: u64,
    c: f64,
    max_dim: usize,
    len: Option<usize>,
    oracle_iterations: Option<usize>,
) -> PyResult<(String, String)> {
    let mut cfg = SuiteConfig::new(parse::<CheckKind>(check)?, instances, seed);
    cfg.c = c;
    cfg.max_dim = max_dim;
    if let Some(len) = len {
        cfg.len = len;
    }
    if let Some(it) = oracle_iterations {
        cfg.oracle_iterations = it;
    }
    let (reports, summary) = regret::run_suite(&cfg).map_err(to_py)?;
    Ok((json(&reports)?, json(&summary)?))
}

/// Exhaustive learning-rate sweep; returns the comparison report as JSON.
#[pyfunction]
#[pyo3(signature = (examples, learners, loss = "squared", grid = "2^-20..2^6", normalization = "none"))]
fn sweep(
    examples: Vec<PyExample>,
    learners: Vec<String>,
    loss: &str,
    grid: &str,
    normalization: &str,
) -> PyResult<String> {
    let xs = self::examples(examples)?;
    let kinds = learners
        .iter()
        .map(|k| parse::<LearnerKind>(k))
        .collect::<PyResult<Vec<_>>>()?;
    let mut spec = SweepSpec::new(kinds, parse(loss)?);
    spec.grid = parse::<EtaGrid>(grid)?;
    spec.normalizations = vec![parse::<Normalization>(normalization)?];
    json(&eval::sweep(&spec, &xs).map_err(to_py)?)
}

/// KL-Chernoff comparison of two per-example 0-1 sequences. Returns
/// `(significant, (mean, lo, hi), (mean, lo, hi))`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn significance(a: Vec<f64>, b: Vec<f64>) -> PyResult<(bool, (f64, f64, f64), (f64, f64, f64))> {
    let v = eval::significance(&a, &b).map_err(to_py)?;
    Ok((v.significant, (v.a.mean, v.a.lo, v.a.hi), (v.b.mean, v.b.lo, v.b.hi)))
}

/// The two-feature stream whose second feature is scaled by `s`.
#[pyfunction]
#[pyo3(signature = (s = 1.0, len = 1000, seed = 0))]
fn synth_figure1(s: f64, len: usize, seed: u64) -> PyResult<Vec<PyExample>> {
    Ok(to_pairs(&data::synth_figure1(s, len, seed).map_err(to_py)?))
}

#[pyfunction]
fn read_svmlight(path: std::path::PathBuf) -> PyResult<Vec<PyExample>> {
    let f = std::fs::File::open(&path).map_err(|e| to_py(e.into()))?;
    let xs = data::SvmlightReader::new(std::io::BufReader::new(f))
        .collect::<nol_core::Result<Vec<_>>>()
        .map_err(to_py)?;
    Ok(to_pairs(&xs))
}

#[pymodule]
fn nol(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLearner>()?;
    m.add_function(wrap_pyfunction!(run_stream, m)?)?;
    m.add_function(wrap_pyfunction!(loss_value, m)?)?;
    m.add_function(wrap_pyfunction!(loss_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(hindsight_conditioner, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(best_in_hindsight, m)?)?;
    m.add_function(wrap_pyfunction!(regret_suite, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(significance, m)?)?;
    m.add_function(wrap_pyfunction!(synth_figure1, m)?)?;
    m.add_function(wrap_pyfunction!(read_svmlight, m)?)?;
    m.add("NolError", m.py().get_type::<NolError>())?;
    m.add("NumericFault", m.py().get_type::<NumericFault>())?;
    Ok(())
}
