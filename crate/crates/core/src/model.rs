//! Sparse examples, convex losses and the linear prediction primitives shared
//! by every learner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled observation with sparse features.
///
/// Indices are strictly increasing and every stored value is finite and
/// nonzero; zero entries are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    features: Vec<(usize, f64)>,
    label: f64,
}

impl SparseExample {
    pub fn new(features: Vec<(usize, f64)>, label: f64) -> Result<Self> {
        if !label.is_finite() {
            return Err(Error::InvalidExample(format!("non-finite label {label}")));
        }
        let mut prev: Option<usize> = None;
        for &(index, value) in &features {
            if let Some(p) = prev {
                if index <= p {
                    return Err(Error::InvalidExample(format!(
                        "feature indices must be strictly increasing ({p} then {index})"
                    )));
                }
            }
            if !value.is_finite() {
                return Err(Error::InvalidExample(format!(
                    "non-finite value {value} at index {index}"
                )));
            }
            prev = Some(index);
        }
        let features = features.into_iter().filter(|&(_, v)| v != 0.0).collect();
        Ok(Self { features, label })
    }

    /// Builds an example from a dense row; zeros are dropped.
    pub fn from_dense(values: &[f64], label: f64) -> Result<Self> {
        Self::new(values.iter().copied().enumerate().collect(), label)
    }

    pub fn features(&self) -> &[(usize, f64)] {
        &self.features
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.features.len()
    }

    /// One past the largest index in the support (0 for an empty example).
    pub fn dim(&self) -> usize {
        self.features.last().map_or(0, |&(i, _)| i + 1)
    }

    pub fn value(&self, index: usize) -> f64 {
        self.features
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |pos| self.features[pos].1)
    }

    pub fn with_label(&self, label: f64) -> Self {
        Self {
            features: self.features.clone(),
            label,
        }
    }

    /// Multiplies every value by `alpha` (labels unchanged).
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        self.map_values(|_, v| v * alpha)
    }

    /// Applies `f(index, value)` to every stored value, re-validating the
    /// result (zeros produced by `f` are dropped).
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let features = self.features.iter().map(|&(i, v)| (i, f(i, v))).collect();
        Self::new(features, self.label)
    }

    /// Renames feature indices; `perm` must be injective on the support.
    pub fn permuted(&self, perm: impl Fn(usize) -> usize) -> Result<Self> {
        let mut features: Vec<(usize, f64)> = self.features.iter().map(|&(i, v)| (perm(i), v)).collect();
        features.sort_by_key(|&(i, _)| i);
        Self::new(features, self.label)
    }
}

/// Convex loss of a real prediction against a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// `(yhat - y)^2`
    Squared,
    /// `max(0, 1 - y*yhat)`, labels in {-1, +1}
    Hinge,
    /// `ln(1 + exp(-y*yhat))`, labels in {-1, +1}
    Logistic,
}

impl Loss {
    pub const ALL: [Loss; 3] = [Loss::Squared, Loss::Hinge, Loss::Logistic];

    pub fn name(self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Hinge => "hinge",
            Loss::Logistic => "logistic",
        }
    }

    pub fn is_classification(self) -> bool {
        !matches!(self, Loss::Squared)
    }

    pub fn check_label(self, label: f64) -> Result<()> {
        if self.is_classification() && label != 1.0 && label != -1.0 {
            return Err(Error::InvalidLabel {
                label,
                loss: self.name(),
            });
        }
        Ok(())
    }

    /// Loss value without label validation.
    pub fn value(self, yhat: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => (yhat - y) * (yhat - y),
            Loss::Hinge => (1.0 - y * yhat).max(0.0),
            Loss::Logistic => {
                let m = y * yhat;
                (-m).max(0.0) + (-m.abs()).exp().ln_1p()
            }
        }
    }

    /// `d loss / d yhat` without label validation. The hinge subgradient at
    /// the kink `y*yhat == 1` is 0.
    pub fn derivative(self, yhat: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => 2.0 * (yhat - y),
            Loss::Hinge => {
                if y * yhat < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            Loss::Logistic => {
                let m = y * yhat;
                // -y * sigmoid(-m), evaluated without overflow
                if m >= 0.0 {
                    let e = (-m).exp();
                    -y * e / (1.0 + e)
                } else {
                    -y / (1.0 + m.exp())
                }
            }
        }
    }

    pub fn value_and_derivative(self, yhat: f64, y: f64) -> Result<(f64, f64)> {
        self.check_label(y)?;
        if !yhat.is_finite() {
            return Err(Error::numeric(format!("non-finite prediction {yhat}"), None));
        }
        Ok((self.value(yhat, y), self.derivative(yhat, y)))
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squared" => Ok(Loss::Squared),
            "hinge" => Ok(Loss::Hinge),
            "logistic" => Ok(Loss::Logistic),
            other => Err(Error::InvalidConfig(format!("unknown loss '{other}'"))),
        }
    }
}

/// A raw linear prediction and its optionally clipped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub raw: f64,
    pub clipped: f64,
}

impl Prediction {
    /// `clip` truncates to `[-C, C]` when present.
    pub fn new(raw: f64, clip: Option<f64>) -> Self {
        let clipped = match clip {
            Some(c) => raw.clamp(-c, c),
            None => raw,
        };
        Self { raw, clipped }
    }
}

/// `sum_i w_i x_i` over the support of `x`. Indices beyond `w` read as zero
/// weight.
pub fn predict(w: &[f64], x: &SparseExample) -> Result<f64> {
    let mut acc = 0.0;
    for &(i, v) in x.features() {
        let wi = w.get(i).copied().unwrap_or(0.0);
        if !wi.is_finite() {
            return Err(Error::numeric(format!("non-finite weight {wi}"), Some(i)));
        }
        acc += wi * v;
    }
    if !acc.is_finite() {
        return Err(Error::numeric("prediction overflowed", None));
    }
    Ok(acc)
}

/// `g_i = g' x_i` over the support of `x`.
pub fn per_coordinate_gradient(gprime: f64, x: &SparseExample) -> Result<Vec<(usize, f64)>> {
    if !gprime.is_finite() {
        return Err(Error::numeric(format!("non-finite loss derivative {gprime}"), None));
    }
    x.features()
        .iter()
        .map(|&(i, v)| {
            let g = gprime * v;
            if g.is_finite() {
                Ok((i, g))
            } else {
                Err(Error::numeric("gradient overflowed", Some(i)))
            }
        })
        .collect()
}
