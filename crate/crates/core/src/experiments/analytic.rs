//! Lowest-order logical error model P_L = A·p^((d+1)/2) + B·q^((h2+1)/2).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Multiplicities of the shortest spacelike (`a`) and timelike (`b`) strings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub a: f64,
    pub b: f64,
}

impl Default for AnalyticModel {
    fn default() -> AnalyticModel {
        AnalyticModel { a: 1.0, b: 1.0 }
    }
}

impl AnalyticModel {
    pub fn new(a: f64, b: f64) -> Result<AnalyticModel> {
        if !(a >= 1.0 && b >= 1.0) {
            return invalid(format!("multiplicities must be at least 1 (got A = {a}, B = {b})"));
        }
        Ok(AnalyticModel { a, b })
    }
}

/// Merged rounds at which both terms are equal, ignoring the ln(A/B) term.
pub fn estimate_optimal_h2(d: usize, p: f64, q: f64) -> Result<f64> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > 0.0 && v < 0.5) {
            return invalid(format!("{name} = {v} must lie in (0, 0.5)"));
        }
    }
    Ok((d + 1) as f64 * (p.ln() / q.ln()) - 1.0)
}

pub fn predict_logical_rate(model: &AnalyticModel, p: f64, q: f64, d: usize, h2: usize) -> f64 {
    model.a * p.powf((d + 1) as f64 / 2.0) + model.b * q.powf((h2 + 1) as f64 / 2.0)
}
