//! Statistical primitives: cosine similarity, Pearson correlation, and
//! trapezoidal curve integration. All accumulation is double precision.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Embedding-similarity scores recorded across one masked-iteration run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    values: Vec<f64>,
}

impl ScoreSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("score series contains non-finite value {bad}")));
        }
        Ok(ScoreSeries { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Series with every score negated (sign-symmetry audits).
    pub fn negated(&self) -> ScoreSeries {
        ScoreSeries { values: self.values.iter().map(|v| -v).collect() }
    }
}

/// Cosine similarity of two equal-dimension vectors, in `[-1, 1]`.
///
/// A zero-norm argument is a degenerate input: there is no direction to
/// compare, and with a real backend it signals broken inference.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "cosine inputs have different dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Contract("cosine inputs are empty".into()));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("zero-norm vector in cosine similarity".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation coefficient of two equal-length series.
///
/// If either series has zero variance the coefficient is 0 by convention:
/// a quantity that never varied carries no evidence either way. Zero
/// variance is detected exactly (all elements bit-equal), so constant
/// series map to exact zeros rather than rounding noise.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "pearson inputs have different lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Contract(format!("pearson needs at least 2 samples, got {}", x.len())));
    }
    if is_constant(x) || is_constant(y) {
        return Ok(0.0);
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0f64;
    let mut var_x = 0.0f64;
    let mut var_y = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0))
}

pub(crate) fn is_constant(series: &[f64]) -> bool {
    series.windows(2).all(|w| w[0] == w[1])
}

/// Accuracy-versus-fraction curve with its area under curve in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    points: Vec<(f64, f64)>,
    auc_percent: f64,
}

impl EvalCurve {
    /// Build from `(fraction, accuracy)` points. Fractions must be strictly
    /// increasing from 0 to 1; accuracies must lie in `[0, 1]`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let auc_percent = auc_trapezoid(&points)?;
        Ok(EvalCurve { points, auc_percent })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn auc_percent(&self) -> f64 {
        self.auc_percent
    }

    /// Accuracy at the point closest to fraction `p` (points are exact step
    /// fractions, so this is a lookup, not an interpolation).
    pub fn accuracy_at(&self, p: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for &(frac, acc) in &self.points {
            let d = (frac - p).abs();
            if d < best.0 {
                best = (d, acc);
            }
        }
        best.1
    }
}

/// Trapezoidal area under an accuracy curve over `p` in `[0, 1]`, scaled to
/// `[0, 100]`.
pub fn auc_trapezoid(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Contract("curve needs at least 2 points".into()));
    }
    if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
        return Err(Error::Contract("curve fractions must span [0, 1]".into()));
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Contract(format!(
                "curve fractions must be strictly increasing, got {} then {}",
                w[0].0, w[1].0
            )));
        }
    }
    if let Some(bad) = points.iter().find(|(p, a)| !p.is_finite() || !(0.0..=1.0).contains(a)) {
        return Err(Error::Contract(format!("curve point {bad:?} out of range")));
    }
    let mut area = 0.0f64;
    for w in points.windows(2) {
        area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5;
    }
    Ok(area * 100.0)
}
