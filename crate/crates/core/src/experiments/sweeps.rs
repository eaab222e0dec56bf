//! Z̄Z̄-measurement sweeps over merged rounds `h2` and bridge width `w`.

use serde::Serialize;

use crate::checkgraph::compile;
use crate::classify::LogicalClass;
use crate::error::Result;
use crate::experiments::engine::{run_shots, RunOptions, StopRule, Tally};
use crate::experiments::stats::wilson95;
use crate::noise::NoiseParams;
use crate::protocol::build_zz;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub d: usize,
    pub w: usize,
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
    pub shots: u64,
    pub failures: u64,
    pub logical_rate: f64,
    pub rate_low: f64,
    pub rate_high: f64,
    /// Failures with a wrong Z̄Z̄ outcome (joint failures included).
    pub timelike: u64,
    /// Failures with a logical X̄ on either patch (joint failures included).
    pub spacelike: u64,
    /// Failures that are both timelike and spacelike.
    pub joint: u64,
    /// timelike / failures; `None` without failures.
    pub timelike_fraction: Option<f64>,
    pub fraction_low: Option<f64>,
    pub fraction_high: Option<f64>,
    pub capped: bool,
}

impl SweepPoint {
    pub fn from_tally(t: &Tally) -> Result<SweepPoint> {
        let zz = |f: fn(&crate::classify::ZzClass) -> bool| t.count_where(|c| matches!(c, LogicalClass::Zz(z) if f(z)));
        let timelike = zz(|z| z.timelike);
        let spacelike = zz(|z| z.spacelike());
        let joint = zz(|z| z.timelike && z.spacelike());
        let failures = t.failures();
        let (rate_low, rate_high) = wilson95(failures, t.shots)?;
        let frac = if failures > 0 { Some(wilson95(timelike, failures)?) } else { None };
        let p = t.params;
        Ok(SweepPoint {
            d: p.d,
            w: p.w,
            h1: p.h1,
            h2: p.h2,
            h3: p.h3,
            shots: t.shots,
            failures,
            logical_rate: t.logical_rate(),
            rate_low,
            rate_high,
            timelike,
            spacelike,
            joint,
            timelike_fraction: (failures > 0).then(|| timelike as f64 / failures as f64),
            fraction_low: frac.map(|f| f.0),
            fraction_high: frac.map(|f| f.1),
            capped: t.capped,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn zz_point(
    d: usize,
    w: usize,
    h1: usize,
    h2: usize,
    h3: usize,
    noise: &NoiseParams,
    stop: StopRule,
    seed: u64,
    opts: &RunOptions,
) -> Result<SweepPoint> {
    let pair = compile(&build_zz(d, w, h1, h2, h3)?, noise)?;
    SweepPoint::from_tally(&run_shots(&pair, noise, stop, seed, opts)?)
}

/// One point per `h2`; every point uses the same master seed.
#[allow(clippy::too_many_arguments)]
pub fn sweep_h2(
    d: usize,
    w: usize,
    h1: usize,
    h3: usize,
    noise: &NoiseParams,
    h2s: &[usize],
    stop: StopRule,
    seed: u64,
    opts: &RunOptions,
) -> Result<Vec<SweepPoint>> {
    h2s.iter().map(|&h2| zz_point(d, w, h1, h2, h3, noise, stop, seed, opts)).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_w(
    d: usize,
    h1: usize,
    h2: usize,
    h3: usize,
    noise: &NoiseParams,
    ws: &[usize],
    stop: StopRule,
    seed: u64,
    opts: &RunOptions,
) -> Result<Vec<SweepPoint>> {
    ws.iter().map(|&w| zz_point(d, w, h1, h2, h3, noise, stop, seed, opts)).collect()
}

/// Smallest `h2` whose logical rate is within 1.1× of the sweep minimum.
pub fn saturation_h2(points: &[SweepPoint]) -> Option<usize> {
    let plateau = points.iter().filter(|p| p.failures > 0).map(|p| p.logical_rate).reduce(f64::min)?;
    points.iter().filter(|p| p.logical_rate <= 1.1 * plateau).map(|p| p.h2).min()
}

/// `h2` where the timelike fraction first falls below 0.5 (linear in h2).
pub fn timelike_crossing(points: &[SweepPoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter_map(|p| p.timelike_fraction.map(|f| (p.h2 as f64, f))).collect();
    pts.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        (y0 >= 0.5 && y1 < 0.5).then(|| x0 + (y0 - 0.5) * (x1 - x0) / (y0 - y1))
    })
}
