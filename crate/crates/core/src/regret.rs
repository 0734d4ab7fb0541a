//! Regret lab: the scaling adversary, best-in-hindsight oracles over the
//! bounded-output comparator ball, and numeric evaluators for the regret
//! bounds of the conditioned update `w <- Proj(w - A_t^-1 g_t)`.
//!
//! Every evaluator returns a [`BoundReport`] with `slack = bound - regret`;
//! a negative slack beyond [`BOUND_TOLERANCE`] flags an implementation bug.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditioners::{
    hindsight_bound, inverse_step, project, ComparatorBall, DiagonalConditioner, EnclosingBox, NormIndex,
};
use crate::error::{Error, Result};
use crate::model::{per_coordinate_gradient, predict, Loss, Prediction, SparseExample};

/// Absolute slack tolerance for every bound check.
pub const BOUND_TOLERANCE: f64 = 1e-6;
/// Relative tolerance of the best-in-hindsight oracles; empirical regret is
/// widened by this fraction of the comparator loss before bound checks.
pub const ORACLE_TOLERANCE: f64 = 1e-3;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Multiplies `x_i` by `d_i` for every example; coordinates past `d.len()`
/// are left as is. Labels are unchanged.
pub fn apply_scaling(examples: &[SparseExample], d: &[f64]) -> Result<Vec<SparseExample>> {
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "scaling entries must be positive, got {bad}"
        )));
    }
    examples
        .iter()
        .map(|x| x.map_values(|i, v| v * d.get(i).copied().unwrap_or(1.0)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamOrder {
    AsIs,
    /// Smallest infinity-norm examples first.
    WorstFirst,
    /// Uniformly random permutation (exchangeable sequence).
    Random,
}

/// The scaling adversary: a hidden positive diagonal applied to a base
/// stream, followed by an ordering choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub hidden_scale: Vec<f64>,
    pub order: StreamOrder,
    pub seed: u64,
}

impl AdversaryConfig {
    pub fn arrange(&self, base: &[SparseExample]) -> Result<Vec<SparseExample>> {
        let mut out = apply_scaling(base, &self.hidden_scale)?;
        match self.order {
            StreamOrder::AsIs => {}
            StreamOrder::WorstFirst => {
                let key = |x: &SparseExample| x.features().iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
                out.sort_by(|a, b| key(a).total_cmp(&key(b)));
            }
            StreamOrder::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                out.shuffle(&mut rng);
            }
        }
        Ok(out)
    }
}

/// Shape of a random regret-lab instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub max_dim: usize,
    pub len: usize,
    pub loss: Loss,
    pub density: f64,
    /// Hidden per-feature scales are `10^U[-decades, decades]`.
    pub scale_decades: f64,
}

impl InstanceSpec {
    pub fn new(max_dim: usize, len: usize, loss: Loss) -> Self {
        Self {
            max_dim,
            len,
            loss,
            density: 0.8,
            scale_decades: 3.0,
        }
    }
}

/// Draws a base stream in the unit box, labels from a hidden linear model,
/// then lets the adversary rescale features.
pub fn random_instance(spec: &InstanceSpec, seed: u64) -> Result<Vec<SparseExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=spec.max_dim.max(1));
    let w_true: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut base = Vec::with_capacity(spec.len);
    for _ in 0..spec.len {
        let mut f = Vec::new();
        let mut score = 0.0;
        for (i, w) in w_true.iter().enumerate() {
            if rng.random_bool(spec.density) {
                let z: f64 = rng.random_range(-1.0..1.0);
                score += w * z;
                f.push((i, z));
            }
        }
        let noise: f64 = rng.random_range(-0.3..0.3);
        let y = if spec.loss.is_classification() {
            if score + noise >= 0.0 {
                1.0
            } else {
                -1.0
            }
        } else {
            score + noise
        };
        base.push(SparseExample::new(f, y)?);
    }
    let hidden_scale = (0..d)
        .map(|_| 10f64.powf(rng.random_range(-spec.scale_decades..=spec.scale_decades)))
        .collect();
    AdversaryConfig {
        hidden_scale,
        order: StreamOrder::AsIs,
        seed,
    }
    .arrange(&base)
}

/// Everything one round of a conditioned run leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub x: SparseExample,
    pub yhat: f64,
    pub loss: f64,
    /// `d l / d yhat` at `yhat`.
    pub gprime: f64,
    /// Nonzero diagonal entries of `A_t`.
    pub a: Option<Vec<(usize, f64)>>,
    /// `w_t`, the iterate used to predict this round.
    pub w: Vec<f64>,
}

impl RoundRecord {
    pub fn y(&self) -> f64 {
        self.x.label()
    }

    /// `g_t = g'_t x_t` on the support of `x_t`.
    pub fn gradient(&self) -> Vec<(usize, f64)> {
        self.x.features().iter().map(|&(i, v)| (i, self.gprime * v)).collect()
    }

    fn a_dense(&self, dim: usize) -> Option<Vec<f64>> {
        let a = self.a.as_ref()?;
        let mut out = vec![0.0; dim];
        for &(i, v) in a {
            out[i] = v;
        }
        Some(out)
    }
}

/// Per-round log of a conditioned run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub dim: usize,
    pub loss: Loss,
    pub rounds: Vec<RoundRecord>,
    /// `w_{T+1}`.
    pub final_w: Vec<f64>,
    pub projected: bool,
    pub clipped: bool,
}

impl RegretLedger {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn examples(&self) -> Vec<SparseExample> {
        self.rounds.iter().map(|r| r.x.clone()).collect()
    }

    pub fn total_loss(&self) -> f64 {
        self.rounds.iter().map(|r| r.loss).sum()
    }

    /// `sum_t g_ti^2` per coordinate.
    pub fn grad_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for r in &self.rounds {
            for (i, g) in r.gradient() {
                out[i] += g * g;
            }
        }
        out
    }

    pub fn bounds(&self) -> EnclosingBox {
        let mut b = EnclosingBox::from_ranges(vec![0.0; self.dim]).expect("zero ranges are valid");
        for r in &self.rounds {
            b.observe(&r.x);
        }
        b
    }

    /// `max_t |x_ti| / |x_{t0,i}|` with `t0` the first round feature `i` is
    /// nonzero; 1 for features that never appear.
    pub fn first_to_max_ratio(&self) -> Vec<f64> {
        let mut first = vec![0.0; self.dim];
        let mut max = vec![0.0f64; self.dim];
        for r in &self.rounds {
            for &(i, v) in r.x.features() {
                if first[i] == 0.0 {
                    first[i] = v.abs();
                }
                max[i] = max[i].max(v.abs());
            }
        }
        first
            .iter()
            .zip(&max)
            .map(|(&f, &m)| if f == 0.0 { 1.0 } else { m / f })
            .collect()
    }
}

/// How the comparator ball for the projection step is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    None,
    /// Fixed ball (transductive: `S` from a first pass).
    Fixed(ComparatorBall),
    /// Ball over the box seen so far, `S^(t)`, including the current input.
    Running {
        c: f64,
        q: NormIndex,
    },
}

/// Runs `w_{t+1} = Proj_{A_t}(w_t - A_t^-1 g_t)` from `w_1 = 0` and logs
/// every round.
pub fn run_conditioned(
    examples: &[SparseExample],
    loss: Loss,
    mut conditioner: DiagonalConditioner,
    projection: &Projection,
    clip: Option<f64>,
) -> Result<RegretLedger> {
    let dim = examples.iter().map(SparseExample::dim).max().unwrap_or(0);
    let mut w = vec![0.0; dim];
    let mut running = EnclosingBox::from_ranges(vec![0.0; dim])?;
    let mut rounds = Vec::with_capacity(examples.len());
    for (index, x) in examples.iter().enumerate() {
        let wrap = |e: Error| Error::AtExample {
            index,
            source: Box::new(e),
        };
        let pred = Prediction::new(predict(&w, x).map_err(wrap)?, clip);
        let (l, gprime) = loss.value_and_derivative(pred.clipped, x.label()).map_err(wrap)?;
        let g = per_coordinate_gradient(gprime, x).map_err(wrap)?;
        let a = conditioner.step(&g, x).to_vec();
        running.observe(x);
        let w_t = w.clone();
        for (i, step) in inverse_step(&a, &g) {
            w[i] -= step;
        }
        match projection {
            Projection::None => {}
            Projection::Fixed(ball) => w = project(&w, &a, ball),
            Projection::Running { c, q } => {
                let ball = ComparatorBall::new(running.clone(), *c, *q)?;
                w = project(&w, &a, &ball);
            }
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(wrap(Error::numeric("conditioned update diverged", Some(i))));
        }
        rounds.push(RoundRecord {
            x: x.clone(),
            yhat: pred.clipped,
            loss: l,
            gprime,
            a: Some(
                a.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v))
                    .collect(),
            ),
            w: w_t,
        });
    }
    Ok(RegretLedger {
        dim,
        loss,
        rounds,
        final_w: w,
        projected: !matches!(projection, Projection::None),
        clipped: clip.is_some(),
    })
}

/// Loss surface over the normalized coordinates `u_i = m_i w_i`, where
/// predictions are `sum_i u_i z_i` with `z_i = x_i / m_i`. Working in these
/// units makes the oracles exactly equivariant to feature rescaling.
struct Surface {
    loss: Loss,
    dim: usize,
    z: Vec<Vec<(usize, f64)>>,
    y: Vec<f64>,
    /// `(Z^T Z, Z^T y, y^T y)` for the squared loss.
    gram: Option<(Vec<f64>, Vec<f64>, f64)>,
}

impl Surface {
    fn new(examples: &[SparseExample], loss: Loss, bounds: &EnclosingBox) -> Self {
        let dim = bounds.dim();
        let z: Vec<Vec<(usize, f64)>> = examples
            .iter()
            .map(|x| {
                x.features()
                    .iter()
                    .filter(|&&(i, _)| bounds.in_support(i))
                    .map(|&(i, v)| (i, v / bounds.range(i)))
                    .collect()
            })
            .collect();
        let y: Vec<f64> = examples.iter().map(SparseExample::label).collect();
        let gram = (loss == Loss::Squared).then(|| {
            let mut g = vec![0.0; dim * dim];
            let mut b = vec![0.0; dim];
            for (zt, yt) in z.iter().zip(&y) {
                for &(i, vi) in zt {
                    b[i] += vi * yt;
                    for &(j, vj) in zt {
                        g[i * dim + j] += vi * vj;
                    }
                }
            }
            (g, b, y.iter().map(|v| v * v).sum())
        });
        Self { loss, dim, z, y, gram }
    }

    fn exact_value(&self, u: &[f64]) -> f64 {
        self.z
            .iter()
            .zip(&self.y)
            .map(|(zt, &yt)| {
                let p: f64 = zt.iter().map(|&(i, v)| u[i] * v).sum();
                self.loss.value(p, yt)
            })
            .sum()
    }

    fn value(&self, u: &[f64]) -> f64 {
        match &self.gram {
            Some((g, b, yy)) => {
                let d = self.dim;
                let mut quad = 0.0;
                for i in 0..d {
                    let row: f64 = (0..d).map(|j| g[i * d + j] * u[j]).sum();
                    quad += u[i] * row;
                }
                let lin: f64 = (0..d).map(|i| b[i] * u[i]).sum();
                (quad - 2.0 * lin + yy).max(0.0)
            }
            None => self.exact_value(u),
        }
    }

    fn subgradient(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.gram {
            Some((g, b, _)) => {
                let d = self.dim;
                for i in 0..d {
                    let row: f64 = (0..d).map(|j| g[i * d + j] * u[j]).sum();
                    out[i] = 2.0 * (row - b[i]);
                }
            }
            None => {
                for (zt, &yt) in self.z.iter().zip(&self.y) {
                    let p: f64 = zt.iter().map(|&(i, v)| u[i] * v).sum();
                    let gp = self.loss.derivative(p, yt);
                    if gp != 0.0 {
                        for &(i, v) in zt {
                            out[i] += gp * v;
                        }
                    }
                }
            }
        }
    }
}

/// How [`best_in_hindsight`] searches the comparator ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HindsightOracle {
    /// Exhaustive grid with `2 * half_steps + 1` points per axis of the
    /// normalized cube `[-C, C]^d` (step `C / half_steps`); `d <= 3`.
    Grid { half_steps: usize },
    /// Projected normalized subgradient descent with step `C / sqrt(k)`,
    /// keeping the best iterate over `restarts` starts (the first at 0).
    Subgradient {
        iterations: usize,
        restarts: usize,
        seed: u64,
    },
}

impl HindsightOracle {
    pub fn grid() -> Self {
        HindsightOracle::Grid { half_steps: 1000 }
    }

    pub fn subgradient(seed: u64) -> Self {
        HindsightOracle::Subgradient {
            iterations: 100_000,
            restarts: 5,
            seed,
        }
    }
}

/// Comparator found by an oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hindsight {
    pub w: Vec<f64>,
    pub total_loss: f64,
}

/// Minimizes `sum_t l(w^T x_t, y_t)` over the comparator ball.
pub fn best_in_hindsight(
    examples: &[SparseExample],
    loss: Loss,
    ball: &ComparatorBall,
    oracle: HindsightOracle,
) -> Result<Hindsight> {
    if !(ball.c.is_finite() && ball.c > 0.0) {
        return Err(Error::InvalidConfig(format!("empty comparator ball (C = {})", ball.c)));
    }
    if !(0..ball.bounds.dim()).any(|i| ball.bounds.in_support(i)) {
        return Err(Error::InvalidConfig("comparator ball has empty support".into()));
    }
    for x in examples {
        loss.check_label(x.label())?;
    }
    let surface = Surface::new(examples, loss, &ball.bounds);
    let d = surface.dim;
    let unit = ComparatorBall::new(EnclosingBox::from_ranges(vec![1.0; d])?, ball.c, ball.q)?;
    let u = match oracle {
        HindsightOracle::Grid { half_steps } => grid_search(&surface, &unit, half_steps)?,
        HindsightOracle::Subgradient {
            iterations,
            restarts,
            seed,
        } => subgradient_search(&surface, &unit, iterations, restarts, seed),
    };
    let w: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| {
            if ball.bounds.in_support(i) {
                ui / ball.bounds.range(i)
            } else {
                0.0
            }
        })
        .collect();
    Ok(Hindsight {
        total_loss: surface.exact_value(&u),
        w,
    })
}

fn grid_search(surface: &Surface, unit: &ComparatorBall, half_steps: usize) -> Result<Vec<f64>> {
    let d = surface.dim;
    if d > 3 || half_steps == 0 {
        return Err(Error::InvalidConfig(format!(
            "grid oracle needs 1 <= d <= 3 and a positive step count (d = {d})"
        )));
    }
    let c = unit.c;
    let h = c / half_steps as f64;
    let n = 2 * half_steps + 1;
    let mut idx = vec![0usize; d];
    let mut u = vec![0.0; d];
    let mut best = (f64::INFINITY, vec![0.0; d]);
    loop {
        for k in 0..d {
            u[k] = -c + h * idx[k] as f64;
        }
        if unit.contains(&u, 1e-12 * c) {
            let v = surface.value(&u);
            if v < best.0 {
                best = (v, u.clone());
            }
        }
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    Ok(best.1)
}

fn subgradient_search(
    surface: &Surface,
    unit: &ComparatorBall,
    iterations: usize,
    restarts: usize,
    seed: u64,
) -> Vec<f64> {
    let d = surface.dim;
    let ident = vec![1.0; d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (surface.value(&vec![0.0; d]), vec![0.0; d]);
    let mut grad = vec![0.0; d];
    for r in 0..restarts.max(1) {
        let mut u = if r == 0 {
            vec![0.0; d]
        } else {
            let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-unit.c..unit.c)).collect();
            project(&raw, &ident, unit)
        };
        for k in 1..=iterations {
            surface.subgradient(&u, &mut grad);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let step = unit.c / (k as f64).sqrt() / norm;
            for (ui, gi) in u.iter_mut().zip(&grad) {
                *ui -= step * gi;
            }
            u = project(&u, &ident, unit);
            let v = surface.value(&u);
            if v < best.0 {
                best = (v, u.clone());
            }
        }
    }
    best.1
}

/// `sum_t l_t - sum_t l(w^T x_t, y_t)`.
pub fn empirical_regret(ledger: &RegretLedger, w: &[f64]) -> Result<f64> {
    regret_of_losses(
        ledger.rounds.iter().map(|r| r.loss),
        ledger.rounds.iter().map(|r| &r.x),
        ledger.loss,
        w,
    )
}

/// Regret of an arbitrary progressive loss sequence against comparator `w`.
pub fn regret_of_losses<'a>(
    losses: impl IntoIterator<Item = f64>,
    examples: impl IntoIterator<Item = &'a SparseExample>,
    loss: Loss,
    w: &[f64],
) -> Result<f64> {
    let mut learner = 0.0;
    for l in losses {
        learner += l;
    }
    let mut comparator = 0.0;
    for x in examples {
        comparator += loss.value(predict(w, x)?, x.label());
    }
    Ok(learner - comparator)
}

/// Outcome of one bound evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub check: String,
    pub instance: usize,
    pub dim: usize,
    pub rounds: usize,
    pub empirical_regret: f64,
    pub bound_value: f64,
    pub slack: f64,
    pub passed: bool,
    /// Named additive terms of the bound.
    pub components: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl BoundReport {
    fn new(check: &str, ledger: &RegretLedger, regret: f64, bound: f64) -> Self {
        let slack = bound - regret;
        Self {
            check: check.to_string(),
            instance: 0,
            dim: ledger.dim,
            rounds: ledger.len(),
            empirical_regret: regret,
            bound_value: bound,
            slack,
            passed: slack >= -BOUND_TOLERANCE,
            components: Vec::new(),
            delta: None,
            tau: None,
            r_max: None,
            warnings: Vec::new(),
        }
    }
}

/// Checks the conditioned-update regret inequality against comparator `w`:
/// `2 R_T <= (w_1-w)^T A_1 (w_1-w) + sum_t (w_{t+1}-w)^T (A_{t+1}-A_t) (w_{t+1}-w)
///  + sum_t g_t^T A_t^-1 g_t`.
pub fn lemma1_check(ledger: &RegretLedger, w: &[f64]) -> Result<BoundReport> {
    if ledger.projected || ledger.clipped {
        return Err(Error::InvalidConfig(
            "the unprojected inequality needs a ledger without projection or clipping".into(),
        ));
    }
    let dim = ledger.dim;
    let mut comp = vec![0.0; dim];
    comp[..w.len().min(dim)].copy_from_slice(&w[..w.len().min(dim)]);
    let quad = |a: &[f64], v: &[f64]| -> f64 {
        a.iter()
            .zip(v)
            .zip(&comp)
            .map(|((ai, vi), ci)| ai * (vi - ci) * (vi - ci))
            .sum()
    };
    let mut a_all = Vec::with_capacity(ledger.len());
    for (t, r) in ledger.rounds.iter().enumerate() {
        a_all.push(
            r.a_dense(dim)
                .ok_or_else(|| Error::InvalidConfig(format!("ledger round {t} has no conditioner snapshot")))?,
        );
    }
    let Some(first_a) = a_all.first() else {
        return Ok(BoundReport::new("lemma1", ledger, 0.0, 0.0));
    };
    let initial = quad(first_a, &ledger.rounds[0].w);
    let mut middle = 0.0;
    for t in 0..ledger.len().saturating_sub(1) {
        let delta: Vec<f64> = a_all[t + 1].iter().zip(&a_all[t]).map(|(n, o)| n - o).collect();
        middle += quad(&delta, &ledger.rounds[t + 1].w);
    }
    let mut grad_term = 0.0;
    for (r, a) in ledger.rounds.iter().zip(&a_all) {
        for (i, g) in r.gradient() {
            if a[i] > 0.0 {
                grad_term += g * g / a[i];
            }
        }
    }
    let regret = empirical_regret(ledger, &comp)?;
    let bound = 0.5 * (initial + middle + grad_term);
    let mut report = BoundReport::new("lemma1", ledger, regret, bound);
    report.components = vec![
        ("initial".into(), 0.5 * initial),
        ("middle".into(), 0.5 * middle),
        ("gradient".into(), 0.5 * grad_term),
    ];
    Ok(report)
}

/// `2 sqrt(2) C sum_i sqrt(S_ii sum_t g_ti^2)`.
pub fn theorem1_bound(grad_sq: &[f64], bounds: &EnclosingBox, c: f64) -> f64 {
    2.0 * SQRT2 * hindsight_bound(grad_sq, bounds, c)
}

/// Per-coordinate factor `(1 + 6 delta + delta^2) / (2 sqrt 2)`.
pub fn streaming_factor(delta: f64) -> f64 {
    (1.0 + 6.0 * delta + delta * delta) / (2.0 * SQRT2)
}

/// `C sum_i sqrt(sum_t g_ti^2) / max|x_i| * streaming_factor(delta_i)`,
/// returned with its per-coordinate terms.
pub fn theorem2_bound(grad_sq: &[f64], bounds: &EnclosingBox, delta: &[f64], c: f64) -> (f64, Vec<f64>) {
    let terms: Vec<f64> = grad_sq
        .iter()
        .enumerate()
        .map(|(i, &g2)| {
            if g2 > 0.0 && bounds.in_support(i) {
                c * g2.sqrt() / bounds.range(i) * streaming_factor(delta[i])
            } else {
                0.0
            }
        })
        .collect();
    (terms.iter().sum(), terms)
}

fn widened_regret(learner_total: f64, comparator: &Hindsight) -> f64 {
    learner_total - comparator.total_loss + ORACLE_TOLERANCE * comparator.total_loss.abs()
}

/// Two-pass run: box from a first pass, transductive conditioner with
/// `eta = sqrt 2`, projection onto the fixed ball every step.
pub fn theorem1_check(examples: &[SparseExample], loss: Loss, c: f64, oracle: HindsightOracle) -> Result<BoundReport> {
    let bounds = EnclosingBox::from_examples(examples);
    let ball = ComparatorBall::new(bounds.clone(), c, NormIndex::L1)?;
    let cond = DiagonalConditioner::transductive(c, SQRT2, bounds.clone())?;
    let ledger = run_conditioned(examples, loss, cond, &Projection::Fixed(ball.clone()), None)?;
    let bound = theorem1_bound(&ledger.grad_sq(), &bounds, c);
    let best = comparator_for(examples, loss, &ball, oracle)?;
    let regret = widened_regret(ledger.total_loss(), &best);
    let mut report = BoundReport::new("thm1", &ledger, regret, bound);
    report.components = per_coordinate("coord", &ledger.grad_sq(), |i, g2| {
        if g2 > 0.0 && bounds.in_support(i) {
            2.0 * SQRT2 * c * g2.sqrt() / bounds.range(i)
        } else {
            0.0
        }
    });
    Ok(report)
}

/// Single-pass run: streaming conditioner with `eta = sqrt 2`, projection
/// onto the ball of the box seen so far.
pub fn theorem2_check(examples: &[SparseExample], loss: Loss, c: f64, oracle: HindsightOracle) -> Result<BoundReport> {
    let ledger = streaming_ledger(examples, loss, c, None)?;
    let bounds = ledger.bounds();
    let delta = ledger.first_to_max_ratio();
    let (bound, terms) = theorem2_bound(&ledger.grad_sq(), &bounds, &delta, c);
    let ball = ComparatorBall::new(bounds, c, NormIndex::L1)?;
    let best = comparator_for(examples, loss, &ball, oracle)?;
    let regret = widened_regret(ledger.total_loss(), &best);
    let mut report = BoundReport::new("thm2", &ledger, regret, bound);
    report.components = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("coord{i}"), *t))
        .collect();
    report.delta = Some(delta);
    Ok(report)
}

fn streaming_ledger(examples: &[SparseExample], loss: Loss, c: f64, clip: Option<f64>) -> Result<RegretLedger> {
    let cond = DiagonalConditioner::streaming(c, SQRT2)?;
    run_conditioned(examples, loss, cond, &Projection::Running { c, q: NormIndex::L1 }, clip)
}

fn comparator_for(
    examples: &[SparseExample],
    loss: Loss,
    ball: &ComparatorBall,
    oracle: HindsightOracle,
) -> Result<Hindsight> {
    if (0..ball.bounds.dim()).any(|i| ball.bounds.in_support(i)) {
        best_in_hindsight(examples, loss, ball, oracle)
    } else {
        let total = examples.iter().map(|x| loss.value(0.0, x.label())).sum();
        Ok(Hindsight {
            w: Vec::new(),
            total_loss: total,
        })
    }
}

fn per_coordinate(prefix: &str, grad_sq: &[f64], f: impl Fn(usize, f64) -> f64) -> Vec<(String, f64)> {
    grad_sq
        .iter()
        .enumerate()
        .map(|(i, &g2)| (format!("{prefix}{i}"), f(i, g2)))
        .collect()
}

/// `ceil(ln(d / delta) / nu)`, at least 1.
pub fn corollary1_tau(d: usize, delta: f64, nu: f64) -> Result<u64> {
    if !(delta > 0.0 && nu > 0.0 && nu < 1.0) || d == 0 {
        return Err(Error::InvalidConfig(format!(
            "need d >= 1, delta > 0 and nu in (0, 1) (got d={d}, delta={delta}, nu={nu})"
        )));
    }
    let tau = ((d as f64 / delta).ln() / nu).ceil();
    Ok(tau.max(1.0) as u64)
}

/// Nearest-rank quantile: the smallest value with at least `ceil(p n)`
/// observations at or below it.
pub fn nearest_rank_quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// `tau`, the observed `delta_i` with the early window `1..tau`, and the
/// high-probability cap `max_t |x_ti| / Quantile(|x_i|, 1 - nu)` per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary1Quantities {
    pub tau: u64,
    pub delta: Vec<f64>,
    pub quantile_cap: Vec<f64>,
    /// `tau >= T`: the window covers the whole stream and the bound is vacuous.
    pub vacuous: bool,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        1.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn corollary1_quantities(
    dim: usize,
    delta: f64,
    nu: f64,
    examples: &[SparseExample],
) -> Result<Corollary1Quantities> {
    let tau = corollary1_tau(dim, delta, nu)?;
    let d = examples.iter().map(SparseExample::dim).max().unwrap_or(0).max(dim);
    let mut columns = vec![vec![0.0; examples.len()]; d];
    for (t, x) in examples.iter().enumerate() {
        for &(i, v) in x.features() {
            columns[i][t] = v.abs();
        }
    }
    let window = (tau as usize).min(examples.len());
    let mut deltas = Vec::with_capacity(d);
    let mut caps = Vec::with_capacity(d);
    for col in &columns {
        let max = col.iter().fold(0.0f64, |m, &v| m.max(v));
        let early = col[..window].iter().fold(0.0f64, |m, &v| m.max(v));
        let q = nearest_rank_quantile(col, 1.0 - nu).unwrap_or(0.0);
        deltas.push(ratio(max, early));
        caps.push(ratio(max, q));
    }
    Ok(Corollary1Quantities {
        tau,
        delta: deltas,
        quantile_cap: caps,
        vacuous: tau as usize >= examples.len(),
    })
}

/// Largest single-round regret with predictions truncated to `[-C, C]`.
pub fn r_max(loss: Loss, c: f64, max_abs_label: f64) -> f64 {
    match loss {
        Loss::Hinge | Loss::Logistic => c + 1.0,
        Loss::Squared => 4.0 * c * c.max(max_abs_label),
    }
}

/// Streaming run with clipped predictions; the bound is
/// `tau R_max + C sum_i sqrt(sum g_i^2) / max|x_i| * factor(delta_i)` with
/// `delta_i` measured over the early window. `dim` enters `tau`.
pub fn corollary1_check(
    examples: &[SparseExample],
    loss: Loss,
    c: f64,
    dim: usize,
    delta: f64,
    nu: f64,
    oracle: HindsightOracle,
) -> Result<BoundReport> {
    let q = corollary1_quantities(dim, delta, nu, examples)?;
    let dim = examples.iter().map(SparseExample::dim).max().unwrap_or(0);
    let ledger = streaming_ledger(examples, loss, c, Some(c))?;
    let bounds = ledger.bounds();
    let max_y = examples.iter().fold(0.0f64, |m, x| m.max(x.label().abs()));
    let rmax = r_max(loss, c, max_y);
    let window: Vec<f64> = q.delta.iter().take(dim).copied().collect();
    let (stream_term, _) = theorem2_bound(&ledger.grad_sq(), &bounds, &window, c);
    let bound = q.tau as f64 * rmax + stream_term;
    let ball = ComparatorBall::new(bounds, c, NormIndex::L1)?;
    let best = comparator_for(examples, loss, &ball, oracle)?;
    let regret = widened_regret(ledger.total_loss(), &best);
    let mut report = BoundReport::new("cor1", &ledger, regret, bound);
    report.components = vec![
        ("burn_in".into(), q.tau as f64 * rmax),
        ("streaming".into(), stream_term),
    ];
    report.delta = Some(q.delta.clone());
    report.tau = Some(q.tau);
    report.r_max = Some(rmax);
    if q.vacuous {
        report.warnings.push(format!(
            "tau = {} >= T = {}: bound is vacuous at this scale",
            q.tau,
            examples.len()
        ));
    }
    Ok(report)
}

/// Per-round regret terms `l(yhat_t, y_t) - l(w^T x_t, y_t)`.
pub fn per_round_regret(ledger: &RegretLedger, w: &[f64]) -> Result<Vec<f64>> {
    ledger
        .rounds
        .iter()
        .map(|r| Ok(r.loss - ledger.loss.value(predict(w, &r.x)?, r.y())))
        .collect()
}

/// Monte-Carlo check of the exchangeable-order claim: over random
/// permutations, how often does some `delta_i` exceed its quantile cap?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationTrial {
    pub tau: u64,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / trials)`.
    pub threshold: f64,
    pub passed: bool,
}

pub fn corollary1_monte_carlo(
    examples: &[SparseExample],
    delta: f64,
    nu: f64,
    trials: usize,
    seed: u64,
) -> Result<PermutationTrial> {
    let dim = examples.iter().map(SparseExample::dim).max().unwrap_or(0).max(1);
    let caps = corollary1_quantities(dim, delta, nu, examples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut failures = 0;
    for _ in 0..trials {
        order.shuffle(&mut rng);
        let permuted: Vec<SparseExample> = order.iter().map(|&k| examples[k].clone()).collect();
        let q = corollary1_quantities(dim, delta, nu, &permuted)?;
        if q.delta.iter().zip(&caps.quantile_cap).any(|(d, cap)| d > cap) {
            failures += 1;
        }
    }
    let rate = failures as f64 / trials.max(1) as f64;
    let threshold = delta + 3.0 * (delta * (1.0 - delta) / trials.max(1) as f64).sqrt();
    Ok(PermutationTrial {
        tau: caps.tau,
        trials,
        failures,
        failure_rate: rate,
        threshold,
        passed: rate <= threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Lemma1,
    Thm1,
    Thm2,
    Cor1,
}

impl std::str::FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lemma1" => Ok(CheckKind::Lemma1),
            "thm1" => Ok(CheckKind::Thm1),
            "thm2" => Ok(CheckKind::Thm2),
            "cor1" => Ok(CheckKind::Cor1),
            other => Err(Error::InvalidConfig(format!("unknown check '{other}'"))),
        }
    }
}

/// Parameters of a seeded suite of bound checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub check: CheckKind,
    pub instances: usize,
    pub seed: u64,
    pub c: f64,
    pub max_dim: usize,
    pub len: usize,
    /// Losses cycled over instances.
    pub losses: Vec<Loss>,
    pub oracle_iterations: usize,
    pub oracle_restarts: usize,
    /// Use a constant conditioner in lemma1 runs (the middle term vanishes).
    pub constant_conditioner: bool,
    pub delta: f64,
    pub nu: f64,
}

impl SuiteConfig {
    pub fn new(check: CheckKind, instances: usize, seed: u64) -> Self {
        let (len, losses) = match check {
            CheckKind::Lemma1 => (500, vec![Loss::Squared]),
            _ => (300, vec![Loss::Squared, Loss::Hinge]),
        };
        Self {
            check,
            instances,
            seed,
            c: 1.0,
            max_dim: 5,
            len,
            losses,
            oracle_iterations: 20_000,
            oracle_restarts: 5,
            constant_conditioner: false,
            delta: 0.1,
            nu: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub check: CheckKind,
    pub instances: usize,
    pub failures: usize,
    pub min_slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<u64>,
}

/// Runs one check per seeded instance (in parallel) and summarizes.
pub fn run_suite(cfg: &SuiteConfig) -> Result<(Vec<BoundReport>, SuiteSummary)> {
    if cfg.losses.is_empty() {
        return Err(Error::InvalidConfig("suite needs at least one loss".into()));
    }
    let ks: Vec<usize> = (0..cfg.instances).collect();
    let reports: Vec<BoundReport> = crate::eval::par_map(&ks, |&k| {
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let loss = cfg.losses[k % cfg.losses.len()];
        let mut spec = InstanceSpec::new(cfg.max_dim, cfg.len, loss);
        if cfg.check == CheckKind::Cor1 {
            spec.scale_decades = 2.0;
        }
        let mut examples = random_instance(&spec, seed)?;
        let oracle = HindsightOracle::Subgradient {
            iterations: cfg.oracle_iterations,
            restarts: cfg.oracle_restarts,
            seed,
        };
        let mut report = match cfg.check {
            CheckKind::Lemma1 => lemma1_instance(&examples, loss, cfg, seed)?,
            CheckKind::Thm1 => theorem1_check(&examples, loss, cfg.c, oracle)?,
            CheckKind::Thm2 => theorem2_check(&examples, loss, cfg.c, oracle)?,
            CheckKind::Cor1 => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                examples.shuffle(&mut rng);
                corollary1_check(&examples, loss, cfg.c, cfg.max_dim, cfg.delta, cfg.nu, oracle)?
            }
        };
        report.instance = k;
        Ok(report)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let summary = SuiteSummary {
        check: cfg.check,
        instances: reports.len(),
        failures: reports.iter().filter(|r| !r.passed).count(),
        min_slack: reports.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
        tau: reports.iter().find_map(|r| r.tau),
    };
    Ok((reports, summary))
}

fn lemma1_instance(examples: &[SparseExample], loss: Loss, cfg: &SuiteConfig, seed: u64) -> Result<BoundReport> {
    let ledger = if cfg.constant_conditioner {
        constant_conditioner_ledger(examples, loss, cfg.c)?
    } else {
        let cond = DiagonalConditioner::streaming(cfg.c, SQRT2)?;
        run_conditioned(examples, loss, cond, &Projection::None, None)?
    };
    // a random comparator inside the ball of the data
    let bounds = ledger.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
    let w: Vec<f64> = (0..ledger.dim)
        .map(|i| {
            if bounds.in_support(i) {
                rng.random_range(-1.0..1.0) * cfg.c / (ledger.dim as f64 * bounds.range(i))
            } else {
                0.0
            }
        })
        .collect();
    lemma1_check(&ledger, &w)
}

/// Unprojected run with the hindsight conditioner held fixed for every round.
pub fn constant_conditioner_ledger(examples: &[SparseExample], loss: Loss, c: f64) -> Result<RegretLedger> {
    // gradients depend on the iterates, so fix A from a zero-weight pass
    let bounds = EnclosingBox::from_examples(examples);
    let mut g2 = vec![0.0; bounds.dim()];
    for x in examples {
        let gp = loss.derivative(0.0, x.label());
        for &(i, v) in x.features() {
            g2[i] += (gp * v) * (gp * v);
        }
    }
    let a: Vec<f64> = crate::conditioners::hindsight_conditioner(&g2, &bounds, c)
        .into_iter()
        .zip(bounds.ranges())
        .map(|(a, m)| {
            if a > 0.0 {
                a
            } else if *m > 0.0 {
                1.0 / c * m
            } else {
                0.0
            }
        })
        .collect();
    let dim = bounds.dim();
    let mut w = vec![0.0; dim];
    let mut rounds = Vec::with_capacity(examples.len());
    for x in examples {
        let yhat = predict(&w, x)?;
        let (l, gp) = loss.value_and_derivative(yhat, x.label())?;
        let g = per_coordinate_gradient(gp, x)?;
        let w_t = w.clone();
        for (i, s) in inverse_step(&a, &g) {
            w[i] -= s;
        }
        rounds.push(RoundRecord {
            x: x.clone(),
            yhat,
            loss: l,
            gprime: gp,
            a: Some(
                a.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v))
                    .collect(),
            ),
            w: w_t,
        });
    }
    Ok(RegretLedger {
        dim,
        loss,
        rounds,
        final_w: w,
        projected: false,
        clipped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(f: &[(usize, f64)], y: f64) -> SparseExample {
        SparseExample::new(f.to_vec(), y).unwrap()
    }

    #[test]
    fn apply_scaling_examples() {
        let xs = vec![ex(&[(0, 3.0)], 1.0)];
        assert_eq!(apply_scaling(&xs, &[1.0]).unwrap(), xs);
        assert_eq!(apply_scaling(&xs, &[2.0]).unwrap()[0].value(0), 6.0);
        assert!(apply_scaling(&xs, &[0.0]).is_err());
    }

    #[test]
    fn worst_first_orders_by_magnitude() {
        let xs = vec![ex(&[(0, 3.0)], 1.0), ex(&[(0, 1.0)], 1.0), ex(&[(0, -2.0)], 1.0)];
        let cfg = AdversaryConfig {
            hidden_scale: vec![1.0],
            order: StreamOrder::WorstFirst,
            seed: 0,
        };
        let out: Vec<f64> = cfg.arrange(&xs).unwrap().iter().map(|x| x.value(0)).collect();
        assert_eq!(out, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn hindsight_trivial_cases() {
        let xs: Vec<_> = (0..5).map(|k| ex(&[(0, 1.0 + k as f64), (1, -2.0)], 0.0)).collect();
        let ball = ComparatorBall::new(EnclosingBox::from_examples(&xs), 1.0, NormIndex::L1).unwrap();
        for oracle in [
            HindsightOracle::Grid { half_steps: 200 },
            HindsightOracle::subgradient(1),
        ] {
            let h = best_in_hindsight(&xs, Loss::Squared, &ball, oracle).unwrap();
            assert!(h.w.iter().all(|&w| w.abs() < 1e-12));
            assert_eq!(h.total_loss, 0.0);
        }

        let xs: Vec<_> = (0..4).map(|_| ex(&[(0, 1.0)], 1.0)).collect();
        let ball = ComparatorBall::new(EnclosingBox::from_examples(&xs), 1.0, NormIndex::L1).unwrap();
        let h = best_in_hindsight(&xs, Loss::Squared, &ball, HindsightOracle::grid()).unwrap();
        assert!((h.w[0] - 1.0).abs() < 1e-12);
        assert!(h.total_loss < 1e-20);
    }

    #[test]
    fn hindsight_rejects_empty_ball() {
        let xs = vec![ex(&[(0, 1.0)], 1.0)];
        let ball = ComparatorBall {
            bounds: EnclosingBox::new(),
            c: 1.0,
            q: NormIndex::L1,
        };
        assert!(best_in_hindsight(&xs, Loss::Squared, &ball, HindsightOracle::grid()).is_err());
        let ball = ComparatorBall {
            bounds: EnclosingBox::from_examples(&xs),
            c: 0.0,
            q: NormIndex::L1,
        };
        assert!(best_in_hindsight(&xs, Loss::Squared, &ball, HindsightOracle::grid()).is_err());
    }

    #[test]
    fn zero_learning_rate_regret_on_unit_instance() {
        let xs: Vec<_> = (0..10).map(|_| ex(&[(0, 1.0)], 1.0)).collect();
        let ball = ComparatorBall::new(EnclosingBox::from_examples(&xs), 1.0, NormIndex::L1).unwrap();
        let best = best_in_hindsight(&xs, Loss::Squared, &ball, HindsightOracle::grid()).unwrap();
        let losses = xs.iter().map(|x| Loss::Squared.value(0.0, x.label()));
        let r = regret_of_losses(losses, &xs, Loss::Squared, &best.w).unwrap();
        assert!((r - 10.0).abs() < 1e-12);
    }

    #[test]
    fn theorem_bound_formulas() {
        let b = EnclosingBox::from_ranges(vec![2.0]).unwrap();
        assert!((theorem1_bound(&[25.0], &b, 1.0) - 2.0 * SQRT2 * 2.5).abs() < 1e-12);
        assert!((theorem1_bound(&[25.0], &b, 1.0) - 7.0711).abs() < 1e-4);
        assert!((streaming_factor(1.0) - 2.0 * SQRT2).abs() < 1e-15);
        assert!((streaming_factor(2.0) - 6.0104).abs() < 1e-4);
        let (v, _) = theorem2_bound(&[25.0], &b, &[2.0], 1.0);
        assert!((v - 2.5 * 17.0 / (2.0 * SQRT2)).abs() < 1e-12);
        assert!((v - 15.026).abs() < 1e-3);
        let (v, _) = theorem2_bound(&[25.0], &b, &[1.0], 1.0);
        assert!((v - theorem1_bound(&[25.0], &b, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn theorem1_bound_uses_ledger_gradients() {
        let xs = vec![ex(&[(0, 2.0)], 1.0), ex(&[(0, 1.0)], -1.0)];
        let r = theorem1_check(&xs, Loss::Squared, 1.0, HindsightOracle::grid()).unwrap();
        let bounds = EnclosingBox::from_examples(&xs);
        let cond = DiagonalConditioner::transductive(1.0, SQRT2, bounds.clone()).unwrap();
        let ball = ComparatorBall::new(bounds.clone(), 1.0, NormIndex::L1).unwrap();
        let ledger = run_conditioned(&xs, Loss::Squared, cond, &Projection::Fixed(ball), None).unwrap();
        assert_eq!(ledger.rounds[0].gprime, -2.0);
        assert_eq!(r.bound_value, theorem1_bound(&ledger.grad_sq(), &bounds, 1.0));
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn zero_gradient_run_has_zero_bound() {
        let xs: Vec<_> = (0..6).map(|k| ex(&[(0, 1.0 + k as f64)], 0.0)).collect();
        for check in [theorem1_check, theorem2_check] {
            let r = check(&xs, Loss::Squared, 1.0, HindsightOracle::grid()).unwrap();
            assert_eq!(r.bound_value, 0.0);
            assert!(r.empirical_regret <= 0.0);
            assert!(r.passed);
        }
    }

    #[test]
    fn lemma1_single_round_by_hand() {
        let xs = vec![ex(&[(0, 2.0)], 1.0)];
        let cond = DiagonalConditioner::streaming(1.0, SQRT2).unwrap();
        let ledger = run_conditioned(&xs, Loss::Squared, cond, &Projection::None, None).unwrap();
        // w = w_1 = 0: first term 0, bound = g^T A^-1 g / 2 = 16 / (8/sqrt2) / 2
        let r = lemma1_check(&ledger, &[0.0]).unwrap();
        assert_eq!(r.components[0].1, 0.0);
        assert!((r.bound_value - 16.0 / (8.0 / SQRT2) / 2.0).abs() < 1e-12);
        assert_eq!(r.empirical_regret, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn lemma1_rejects_projected_or_incomplete_ledgers() {
        let xs = vec![ex(&[(0, 2.0)], 1.0)];
        let cond = DiagonalConditioner::streaming(1.0, SQRT2).unwrap();
        let proj = Projection::Running {
            c: 1.0,
            q: NormIndex::L1,
        };
        let ledger = run_conditioned(&xs, Loss::Squared, cond, &proj, None).unwrap();
        assert!(lemma1_check(&ledger, &[0.0]).is_err());

        let cond = DiagonalConditioner::streaming(1.0, SQRT2).unwrap();
        let mut ledger = run_conditioned(&xs, Loss::Squared, cond, &Projection::None, None).unwrap();
        ledger.rounds[0].a = None;
        assert!(lemma1_check(&ledger, &[0.0]).is_err());
    }

    #[test]
    fn lemma1_constant_conditioner_middle_vanishes() {
        let xs = random_instance(&InstanceSpec::new(4, 200, Loss::Squared), 3).unwrap();
        let ledger = constant_conditioner_ledger(&xs, Loss::Squared, 1.0).unwrap();
        let r = lemma1_check(&ledger, &vec![0.0; ledger.dim]).unwrap();
        assert_eq!(r.components[1].1, 0.0);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn corollary1_tau_and_window() {
        assert_eq!(corollary1_tau(10, 0.1, 0.5).unwrap(), 10);
        assert!(corollary1_tau(10, 0.0, 0.5).is_err());
        assert!(corollary1_tau(10, 0.1, 1.0).is_err());
        // coordinate 0 attains its max inside the window, coordinate 1 much later
        let mut xs = vec![ex(&[(0, 5.0), (1, 1.0)], 1.0)];
        xs.extend((0..30).map(|_| ex(&[(0, 1.0), (1, 1.0)], 1.0)));
        xs.push(ex(&[(0, 1.0), (1, 4.0)], 1.0));
        let q = corollary1_quantities(2, 0.2, 0.5, &xs).unwrap();
        assert_eq!(q.tau, 5);
        assert_eq!(q.delta, vec![1.0, 4.0]);
        assert_eq!(q.quantile_cap, vec![5.0, 4.0]);
        assert!(!q.vacuous);
        assert!(corollary1_quantities(2, 0.2, 0.5, &xs[..3]).unwrap().vacuous);
    }

    #[test]
    fn nearest_rank_quantile_examples() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(nearest_rank_quantile(&v, 0.5), Some(3.0));
        assert_eq!(nearest_rank_quantile(&v, 0.2), Some(1.0));
        assert_eq!(nearest_rank_quantile(&v, 1.0), Some(5.0));
        assert_eq!(nearest_rank_quantile(&v, 0.0), Some(1.0));
        assert_eq!(nearest_rank_quantile(&[], 0.5), None);
    }

    #[test]
    fn r_max_values() {
        assert_eq!(r_max(Loss::Hinge, 2.0, 10.0), 3.0);
        assert_eq!(r_max(Loss::Logistic, 0.5, 0.0), 1.5);
        assert_eq!(r_max(Loss::Squared, 1.0, 3.0), 12.0);
        assert_eq!(r_max(Loss::Squared, 2.0, 1.0), 16.0);
    }
}
