//! Diagonal conditioners for the update `w <- w - A^-1 g` and the projection
//! onto the bounded-output comparator ball.
//!
//! All three recipes share the form `A_ii = k * sqrt(sum g_i^2) * m_i` where
//! `m_i` is a per-feature range (so `S_ii = 1 / m_i^2`):
//!
//! | recipe       | `k`          | `m_i`                                |
//! |--------------|--------------|--------------------------------------|
//! | hindsight    | `1/C`        | `max_t |x_ti|` over the whole run    |
//! | transductive | `1/(C eta)`  | `max_t |x_ti|` from a first pass     |
//! | streaming    | `1/(C eta)`  | `max_{j<=t} |x_ji|` seen so far      |
//!
//! Coordinates with no gradient mass have `A_ii = 0` and are skipped by the
//! update rather than regularized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SparseExample;

/// Axis-aligned box `|x_i| <= m_i` enclosing the observed inputs, i.e. the
/// minimum-volume diagonal `S` with `||S^{1/2} x||_inf <= 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnclosingBox {
    max_abs: Vec<f64>,
}

impl EnclosingBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ranges(max_abs: Vec<f64>) -> Result<Self> {
        if max_abs.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidConfig("box ranges must be finite and nonnegative".into()));
        }
        Ok(Self { max_abs })
    }

    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a SparseExample>) -> Self {
        let mut b = Self::new();
        for x in examples {
            b.observe(x);
        }
        b
    }

    pub fn observe(&mut self, x: &SparseExample) {
        if x.dim() > self.max_abs.len() {
            self.max_abs.resize(x.dim(), 0.0);
        }
        for &(i, v) in x.features() {
            self.max_abs[i] = self.max_abs[i].max(v.abs());
        }
    }

    /// `m_i`, zero for coordinates never seen nonzero.
    pub fn range(&self, i: usize) -> f64 {
        self.max_abs.get(i).copied().unwrap_or(0.0)
    }

    pub fn ranges(&self) -> &[f64] {
        &self.max_abs
    }

    /// `S_ii = 1/m_i^2`, undefined off the support.
    pub fn s_ii(&self, i: usize) -> Option<f64> {
        let m = self.range(i);
        (m > 0.0).then(|| 1.0 / (m * m))
    }

    pub fn in_support(&self, i: usize) -> bool {
        self.range(i) > 0.0
    }

    pub fn dim(&self) -> usize {
        self.max_abs.len()
    }
}

/// Dual norm index of the comparator ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormIndex {
    L1,
    L2,
}

/// `{ w : ||S^{-1/2} w||_q <= C }` with `w_i = 0` required off the support of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorBall {
    pub bounds: EnclosingBox,
    pub c: f64,
    pub q: NormIndex,
}

impl ComparatorBall {
    pub fn new(bounds: EnclosingBox, c: f64, q: NormIndex) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidConfig(format!("ball radius must be positive, got {c}")));
        }
        Ok(Self { bounds, c, q })
    }

    /// `||S^{-1/2} w||_q` over the support; `None` when `w` is nonzero off it.
    pub fn norm(&self, w: &[f64]) -> Option<f64> {
        let mut acc = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            let m = self.bounds.range(i);
            if m == 0.0 {
                if wi != 0.0 {
                    return None;
                }
                continue;
            }
            let u = m * wi;
            acc += match self.q {
                NormIndex::L1 => u.abs(),
                NormIndex::L2 => u * u,
            };
        }
        Some(match self.q {
            NormIndex::L1 => acc,
            NormIndex::L2 => acc.sqrt(),
        })
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        self.norm(w).is_some_and(|n| n <= self.c + tol)
    }
}

/// Which data statistic a [`DiagonalConditioner`] divides by.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionerRecipe {
    /// Running max of `|x_i|` including the current example.
    Streaming,
    /// Fixed box from a completed first pass.
    Transductive(EnclosingBox),
}

/// Adaptive diagonal conditioner `A_t` built from the gradients seen so far.
#[derive(Debug, Clone)]
pub struct DiagonalConditioner {
    recipe: ConditionerRecipe,
    c: f64,
    eta: f64,
    grad_sq: Vec<f64>,
    running: EnclosingBox,
    diag: Vec<f64>,
}

impl DiagonalConditioner {
    pub fn streaming(c: f64, eta: f64) -> Result<Self> {
        Self::new(ConditionerRecipe::Streaming, c, eta)
    }

    pub fn transductive(c: f64, eta: f64, bounds: EnclosingBox) -> Result<Self> {
        Self::new(ConditionerRecipe::Transductive(bounds), c, eta)
    }

    pub fn new(recipe: ConditionerRecipe, c: f64, eta: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0 && eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "conditioner needs C > 0 and eta > 0 (got C={c}, eta={eta})"
            )));
        }
        Ok(Self {
            recipe,
            c,
            eta,
            grad_sq: Vec::new(),
            running: EnclosingBox::new(),
            diag: Vec::new(),
        })
    }

    pub fn recipe(&self) -> &ConditionerRecipe {
        &self.recipe
    }

    /// Box seen so far (streaming) or the fixed first-pass box.
    pub fn bounds(&self) -> &EnclosingBox {
        match &self.recipe {
            ConditionerRecipe::Streaming => &self.running,
            ConditionerRecipe::Transductive(b) => b,
        }
    }

    pub fn grad_sq(&self) -> &[f64] {
        &self.grad_sq
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Folds in `x_t` and `g_t` and returns the current `A_t`.
    pub fn step(&mut self, g: &[(usize, f64)], x: &SparseExample) -> &[f64] {
        self.running.observe(x);
        let dim = g.last().map_or(0, |&(i, _)| i + 1).max(x.dim()).max(self.diag.len());
        self.grad_sq.resize(dim, 0.0);
        self.diag.resize(dim, 0.0);
        for &(i, gi) in g {
            self.grad_sq[i] += gi * gi;
        }
        let k = 1.0 / (self.c * self.eta);
        // the running max can move on coordinates whose gradient is zero this round
        let touched = g.iter().map(|&(i, _)| i).chain(x.features().iter().map(|&(i, _)| i));
        let bounds = match &self.recipe {
            ConditionerRecipe::Streaming => &self.running,
            ConditionerRecipe::Transductive(b) => b,
        };
        for i in touched {
            self.diag[i] = k * self.grad_sq[i].sqrt() * bounds.range(i);
        }
        &self.diag
    }
}

/// `A^-1 g` over the support of `g`, skipping coordinates with `A_ii = 0`.
pub fn inverse_step(a: &[f64], g: &[(usize, f64)]) -> Vec<(usize, f64)> {
    g.iter()
        .filter_map(|&(i, gi)| {
            let aii = a.get(i).copied().unwrap_or(0.0);
            (aii > 0.0).then(|| (i, gi / aii))
        })
        .collect()
}

/// Best fixed diagonal conditioner in hindsight against the worst comparator
/// in the ball: `A*_ii = (1/C) sqrt(sum_t g_ti^2 / S_ii)`.
pub fn hindsight_conditioner(grad_sq: &[f64], bounds: &EnclosingBox, c: f64) -> Vec<f64> {
    grad_sq
        .iter()
        .enumerate()
        .map(|(i, &g2)| {
            let m = bounds.range(i);
            if g2 > 0.0 && m > 0.0 {
                g2.sqrt() * m / c
            } else {
                0.0
            }
        })
        .collect()
}

/// Regret bound of the hindsight conditioner, `C sum_i sqrt(S_ii sum_t g_ti^2)`.
pub fn hindsight_bound(grad_sq: &[f64], bounds: &EnclosingBox, c: f64) -> f64 {
    c * grad_sq
        .iter()
        .enumerate()
        .filter(|&(i, &g2)| g2 > 0.0 && bounds.in_support(i))
        .map(|(i, &g2)| g2.sqrt() / bounds.range(i))
        .sum::<f64>()
}

/// Worst-case fixed-conditioner objective
/// `1/2 sum_i (A_ii C^2 S_ii + sum_t g_ti^2 / A_ii)`, minimized by
/// [`hindsight_conditioner`]. Infinite when a coordinate with gradient mass
/// has `A_ii = 0`.
pub fn hindsight_objective(a: &[f64], grad_sq: &[f64], bounds: &EnclosingBox, c: f64) -> f64 {
    let mut total = 0.0;
    for (i, &g2) in grad_sq.iter().enumerate() {
        let Some(s) = bounds.s_ii(i) else { continue };
        if g2 == 0.0 {
            continue;
        }
        let aii = a.get(i).copied().unwrap_or(0.0);
        if aii <= 0.0 {
            return f64::INFINITY;
        }
        total += aii * c * c * s + g2 / aii;
    }
    0.5 * total
}

/// Both sides of the `p = 2` bound chain
/// `sum_i sqrt(S_ii sum_t g_ti^2) <= sqrt(d) sqrt(sum_t g'_t^2)` for inputs
/// satisfying `||S^{1/2} x_t||_2 <= 1`.
pub fn p2_bound_sides(gprime: &[f64], xs: &[SparseExample], s_diag: &[f64]) -> Result<(f64, f64)> {
    if gprime.len() != xs.len() {
        return Err(Error::LengthMismatch {
            left: gprime.len(),
            right: xs.len(),
        });
    }
    let d = s_diag.len();
    let mut col = vec![0.0; d];
    for (gp, x) in gprime.iter().zip(xs) {
        let mut norm2 = 0.0;
        for &(i, v) in x.features() {
            let s = *s_diag
                .get(i)
                .ok_or_else(|| Error::InvalidExample(format!("feature {i} outside the {d}-dimensional box")))?;
            norm2 += s * v * v;
            col[i] += (gp * v) * (gp * v);
        }
        if norm2 > 1.0 + 1e-12 {
            return Err(Error::InvalidExample(format!(
                "input violates ||S^1/2 x||_2 <= 1 (squared norm {norm2})"
            )));
        }
    }
    let lhs = col.iter().zip(s_diag).map(|(g2, s)| (s * g2).sqrt()).sum();
    let rhs = (d as f64).sqrt() * gprime.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok((lhs, rhs))
}

/// `argmin_{w in ball} (w - w')^T A (w - w')` for diagonal `A`.
///
/// Feasible inputs are returned unchanged. Otherwise coordinates off the
/// ball's support are zeroed (the ball forces them to 0), coordinates with
/// `A_ii = 0` are zeroed (moving them is free), and the rest is solved in
/// `u = S^{-1/2} w` with metric `A S`: exact sort-and-threshold for `q = 1`,
/// a monotone root-find on the multiplier for `q = 2`.
pub fn project(w: &[f64], a: &[f64], ball: &ComparatorBall) -> Vec<f64> {
    if ball.contains(w, 0.0) {
        return w.to_vec();
    }
    let mut out = w.to_vec();
    // (index, u', metric weight) for the coordinates that carry cost
    let mut active: Vec<(usize, f64, f64)> = Vec::new();
    for (i, wi) in out.iter_mut().enumerate() {
        let m = ball.bounds.range(i);
        let aii = a.get(i).copied().unwrap_or(0.0);
        if m == 0.0 || aii <= 0.0 {
            *wi = 0.0;
        } else if *wi != 0.0 {
            active.push((i, m * *wi, aii / (m * m)));
        }
    }
    if ball.contains(&out, 0.0) {
        return out;
    }
    match ball.q {
        NormIndex::L1 => project_l1(&mut out, &active, ball),
        NormIndex::L2 => project_l2(&mut out, &active, ball),
    }
    out
}

fn project_l1(out: &mut [f64], active: &[(usize, f64, f64)], ball: &ComparatorBall) {
    // KKT: u_i = sign(u'_i) max(0, |u'_i| - theta / alpha_i); find theta with sum |u_i| = C
    let mut order: Vec<&(usize, f64, f64)> = active.iter().collect();
    order.sort_by(|p, q| (q.2 * q.1.abs()).total_cmp(&(p.2 * p.1.abs())));
    let mut sum_u = 0.0;
    let mut sum_inv = 0.0;
    let mut theta = 0.0;
    for (k, &&(_, u, alpha)) in order.iter().enumerate() {
        sum_u += u.abs();
        sum_inv += 1.0 / alpha;
        theta = (sum_u - ball.c) / sum_inv;
        let next = order.get(k + 1).map_or(0.0, |p| p.2 * p.1.abs());
        if theta >= next {
            break;
        }
    }
    for &(i, u, alpha) in active {
        let shrunk = (u.abs() - theta / alpha).max(0.0);
        out[i] = u.signum() * shrunk / ball.bounds.range(i);
    }
    let norm = ball.norm(out).unwrap_or(0.0);
    if norm > ball.c {
        let r = ball.c / norm;
        out.iter_mut().for_each(|w| *w *= r);
    }
}

fn project_l2(out: &mut [f64], active: &[(usize, f64, f64)], ball: &ComparatorBall) {
    // KKT: u_i = alpha_i u'_i / (alpha_i + mu); sum u_i^2 is decreasing in mu
    let radius2 = |mu: f64| -> f64 {
        active
            .iter()
            .map(|&(_, u, alpha)| {
                let v = alpha * u / (alpha + mu);
                v * v
            })
            .sum()
    };
    let c2 = ball.c * ball.c;
    let mut lo = 0.0;
    let mut hi = active
        .iter()
        .map(|&(_, u, alpha)| (alpha * u) * (alpha * u))
        .sum::<f64>()
        .sqrt()
        / ball.c;
    while radius2(hi) > c2 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if radius2(mid) > c2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for &(i, u, alpha) in active {
        out[i] = alpha * u / (alpha + hi) / ball.bounds.range(i);
    }
}
