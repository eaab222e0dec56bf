//! Threshold estimate from crossings of logical-rate curves.

use serde::{Deserialize, Serialize};

use crate::checkgraph::compile;
use crate::error::{invalid, Result};
use crate::experiments::engine::{run_shots, RunOptions, StopRule};
use crate::experiments::stats::wilson95;
use crate::noise::{NoiseModel, NoiseParams};
use crate::protocol::{build_cnot, build_memory, ProtocolSpec, TimeBoundary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// d×d patch over d rounds.
    Memory,
    /// CNOT with h2 = d, h1 = h3 = 1, w = 1.
    Cnot,
}

impl Family {
    pub fn spec(self, d: usize) -> Result<ProtocolSpec> {
        match self {
            Family::Memory => build_memory(d, d, TimeBoundary::Perfect, TimeBoundary::Perfect),
            Family::Cnot => build_cnot(d, 1, 1, d, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub shots: u64,
    pub failures: u64,
    pub logical_rate: f64,
    pub rate_low: f64,
    pub rate_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub d_small: usize,
    pub d_large: usize,
    /// `None`: the curves do not cross inside the grid.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub points: Vec<CurvePoint>,
    pub crossings: Vec<Crossing>,
    /// Mean of the crossings found; `None` means no crossing at all.
    pub estimate: Option<f64>,
    /// max − min of the crossings found.
    pub spread: Option<f64>,
}

/// First p where ln P(small d) − ln P(large d) turns from positive to
/// negative, linearly interpolated. Points without failures are skipped.
pub fn crossing(ps: &[f64], small: &[f64], large: &[f64]) -> Option<f64> {
    let diff: Vec<(f64, f64)> = ps
        .iter()
        .zip(small.iter().zip(large))
        .filter(|(_, (a, b))| **a > 0.0 && **b > 0.0)
        .map(|(&p, (a, b))| (p, a.ln() - b.ln()))
        .collect();
    diff.windows(2).find_map(|w| {
        let ((p0, f0), (p1, f1)) = (w[0], w[1]);
        (f0 > 0.0 && f1 <= 0.0).then(|| p0 + f0 * (p1 - p0) / (f0 - f1))
    })
}

/// Summarizes curves given as `rates[i][j]` = P_L at distance `ds[i]`, `ps[j]`.
pub fn summarize(ds: &[usize], ps: &[f64], rates: &[Vec<f64>]) -> (Vec<Crossing>, Option<f64>, Option<f64>) {
    let crossings: Vec<Crossing> = ds
        .windows(2)
        .zip(rates.windows(2))
        .map(|(d, r)| Crossing { d_small: d[0], d_large: d[1], p: crossing(ps, &r[0], &r[1]) })
        .collect();
    let found: Vec<f64> = crossings.iter().filter_map(|c| c.p).collect();
    if found.is_empty() {
        return (crossings, None, None);
    }
    let mean = found.iter().sum::<f64>() / found.len() as f64;
    let spread =
        found.iter().copied().fold(f64::NEG_INFINITY, f64::max) - found.iter().copied().fold(f64::INFINITY, f64::min);
    (crossings, Some(mean), Some(spread))
}

#[allow(clippy::too_many_arguments)]
pub fn find_threshold(
    family: Family,
    ds: &[usize],
    model: NoiseModel,
    ps: &[f64],
    stop: StopRule,
    seed: u64,
    opts: &RunOptions,
) -> Result<ThresholdResult> {
    if ds.len() < 2 || ps.len() < 3 {
        return invalid("threshold needs at least 2 distances and 3 grid points");
    }
    if ds.windows(2).any(|w| w[0] >= w[1]) || ps.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("distances and p grid must be strictly increasing");
    }
    let mut points = Vec::new();
    let mut rates = Vec::new();
    for &d in ds {
        let spec = family.spec(d)?;
        let mut row = Vec::new();
        for &p in ps {
            let noise = NoiseParams::new(model, p, None)?;
            let pair = compile(&spec, &noise)?;
            let t = run_shots(&pair, &noise, stop, seed, opts)?;
            let (rate_low, rate_high) = wilson95(t.failures(), t.shots)?;
            row.push(t.logical_rate());
            points.push(CurvePoint {
                d,
                p,
                q: noise.q,
                shots: t.shots,
                failures: t.failures(),
                logical_rate: t.logical_rate(),
                rate_low,
                rate_high,
            });
        }
        rates.push(row);
    }
    let (crossings, estimate, spread) = summarize(ds, ps, &rates);
    Ok(ThresholdResult { points, crossings, estimate, spread })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_linear_crossing() {
        // ln a − ln b = ln 2 at 0.02 and −ln 2 at 0.04 → crossing at 0.03.
        let ps = [0.01, 0.02, 0.04];
        let small = [0.01, 0.02, 0.05];
        let large = [0.001, 0.01, 0.1];
        assert!((crossing(&ps, &small, &large).unwrap() - 0.03).abs() < 1e-12);
    }

    #[test]
    fn no_crossing_below_threshold() {
        let ps = [0.001, 0.002, 0.003];
        let rates = vec![vec![1e-3, 2e-3, 3e-3], vec![1e-4, 3e-4, 6e-4], vec![1e-5, 4e-5, 1e-4]];
        let (c, est, spread) = summarize(&[3, 5, 7], &ps, &rates);
        assert!(c.iter().all(|c| c.p.is_none()));
        assert_eq!((est, spread), (None, None));
    }

    #[test]
    fn mean_and_spread() {
        let ps = [0.01, 0.02, 0.04];
        let rates = vec![vec![0.01, 0.02, 0.05], vec![0.001, 0.01, 0.1], vec![1e-5, 1e-3, 0.2]];
        let (c, est, spread) = summarize(&[3, 5, 7], &ps, &rates);
        assert_eq!(c.len(), 2);
        let (a, b) = (c[0].p.unwrap(), c[1].p.unwrap());
        assert!((est.unwrap() - (a + b) / 2.0).abs() < 1e-15);
        assert!((spread.unwrap() - (a - b).abs()).abs() < 1e-15);
    }

    #[test]
    fn rejects_small_grids() {
        let o = RunOptions::default();
        let stop = StopRule::FixedShots { shots: 10 };
        assert!(
            find_threshold(Family::Memory, &[3], NoiseModel::Independent, &[0.01, 0.02, 0.03], stop, 0, &o).is_err()
        );
        assert!(find_threshold(Family::Memory, &[3, 5], NoiseModel::Independent, &[0.01, 0.02], stop, 0, &o).is_err());
    }
}
