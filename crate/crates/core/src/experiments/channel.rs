//! CNOT channel estimation, the factorized connection model, partner
//! symmetry checks and the memory correlation measure.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use nalgebra::Matrix3;
use serde::Serialize;

use crate::classify::{CnotClass, LogicalClass, MemoryClass, XPart, ZPart};
use crate::error::{invalid, Error, Result};
use crate::experiments::engine::Tally;
use crate::experiments::stats::wilson95;
use crate::protocol::ProtocolKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassEstimate {
    pub class: CnotClass,
    pub count: u64,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelEstimate {
    pub shots: u64,
    /// All 16 classes in `CnotClass::index` order.
    pub classes: Vec<ClassEstimate>,
}

impl ChannelEstimate {
    pub fn from_counts(counts: &[u64; 16]) -> Result<ChannelEstimate> {
        let shots: u64 = counts.iter().sum();
        if shots == 0 {
            return invalid("channel estimate needs at least one shot");
        }
        let classes = CnotClass::all()
            .map(|class| {
                let count = counts[class.index()];
                let (low, high) = wilson95(count, shots)?;
                Ok(ClassEstimate { class, count, estimate: count as f64 / shots as f64, low, high })
            })
            .collect::<Result<_>>()?;
        Ok(ChannelEstimate { shots, classes })
    }

    pub fn prob(&self, c: CnotClass) -> f64 {
        self.classes[c.index()].estimate
    }
}

fn cnot_counts(tally: &Tally) -> Result<[u64; 16]> {
    if tally.kind != ProtocolKind::Cnot {
        return invalid(format!("expected a CNOT tally, got {:?}", tally.kind));
    }
    let mut counts = [0u64; 16];
    counts[CnotClass::IDENTITY.index()] = tally.identity();
    for (class, &n) in &tally.counts {
        match class {
            LogicalClass::Cnot(c) => counts[c.index()] += n,
            other => return invalid(format!("class {other} in a CNOT tally")),
        }
    }
    Ok(counts)
}

pub fn estimate_cnot_channel(tally: &Tally) -> Result<ChannelEstimate> {
    ChannelEstimate::from_counts(&cnot_counts(tally)?)
}

/// Index into (p0, p1, p2, p3) of each X part: I→p0, X1→p3, X2→p2, X1X2→p1.
const X_PARAM: [usize; 4] = [0, 3, 2, 1];
/// Z parts: I→p0, Z1→p2, Z2→p3, Z1Z2→p1.
const Z_PARAM: [usize; 4] = [0, 2, 3, 1];

fn full(p: &[f64]) -> [f64; 4] {
    [1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]]
}

/// Probability of `c` under the factorized model with (p1, p2, p3).
pub fn factorized_prob(p: [f64; 3], c: CnotClass) -> f64 {
    let f = full(&p);
    f[X_PARAM[c.x.bits() as usize]] * f[Z_PARAM[c.z.bits() as usize]]
}

/// d model / d (p1, p2, p3).
fn model_gradient(p: &[f64], c: CnotClass) -> [f64; 3] {
    let f = full(p);
    let (i, j) = (X_PARAM[c.x.bits() as usize], Z_PARAM[c.z.bits() as usize]);
    let d = |idx: usize, k: usize| -> f64 {
        if idx == 0 {
            -1.0
        } else if idx == k + 1 {
            1.0
        } else {
            0.0
        }
    };
    std::array::from_fn(|k| d(i, k) * f[j] + f[i] * d(j, k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionFit {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// Standard errors of (p1, p2, p3) from the linearized covariance.
    pub std_errors: [f64; 3],
    /// Weighted sum of squared residuals.
    pub objective: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
    pub converged: bool,
    pub iterations: u64,
}

#[derive(Clone, Copy)]
struct Chi2<'a> {
    obs: &'a [f64; 16],
    inv_var: &'a [f64; 16],
    shots: f64,
}

impl Chi2<'_> {
    fn raw(&self, p: &[f64]) -> f64 {
        CnotClass::all()
            .map(|c| {
                let r = self.obs[c.index()] - factorized_prob([p[0], p[1], p[2]], c);
                r * r * self.inv_var[c.index()]
            })
            .sum()
    }
}

impl CostFunction for Chi2<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    /// Points outside the simplex are projected onto it and penalized.
    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let mut q: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = q.iter().sum();
        if s > 1.0 {
            q.iter_mut().for_each(|v| *v /= s);
        }
        let violation: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        let base = self.raw(&q);
        Ok(base + violation * (1.0 + base) * 1e6 * self.shots)
    }
}

/// Weighted least-squares fit of the 16 class frequencies to the factorized
/// connection model.
pub fn fit_connection_params(est: &ChannelEstimate) -> Result<ConnectionFit> {
    if est.shots == 0 {
        return invalid("fit needs a non-empty estimate");
    }
    let n = est.shots as f64;
    let obs: [f64; 16] = std::array::from_fn(|i| est.classes[i].estimate);
    let inv_var: [f64; 16] = std::array::from_fn(|i| {
        let p = obs[i];
        let sigma = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
        1.0 / (sigma * sigma)
    });
    let chi2 = Chi2 { obs: &obs, inv_var: &inv_var, shots: n };

    // Start from the marginals: P(X1 ⊗ ·) = p3, P(· ⊗ Z1) = p2, etc.
    let xm = |x: XPart| -> f64 { CnotClass::all().filter(|c| c.x == x).map(|c| est.prob(c)).sum() };
    let zm = |z: ZPart| -> f64 { CnotClass::all().filter(|c| c.z == z).map(|c| est.prob(c)).sum() };
    let start = vec![
        (xm(XPart::X1X2) + zm(ZPart::Z1Z2)) / 2.0,
        (xm(XPart::X2) + zm(ZPart::Z1)) / 2.0,
        (xm(XPart::X1) + zm(ZPart::Z2)) / 2.0,
    ];
    let mut simplex = vec![start.clone()];
    for k in 0..3 {
        let mut v = start.clone();
        v[k] += (0.2 * start[k]).max(1e-4);
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| Error::Consistency(format!("optimizer setup failed: {e}")))?;
    let res = Executor::new(chi2, solver)
        .configure(|s| s.max_iters(20_000))
        .run()
        .map_err(|e| Error::Consistency(format!("optimizer failed: {e}")))?;
    let state = res.state();
    let best = state.get_best_param().cloned().unwrap_or(start);
    let converged =
        matches!(state.get_termination_status(), TerminationStatus::Terminated(TerminationReason::SolverConverged));
    let iterations = state.get_iter();
    let objective = chi2.raw(&best);

    let mut fisher = Matrix3::<f64>::zeros();
    for c in CnotClass::all() {
        let g = model_gradient(&best, c);
        for a in 0..3 {
            for b in 0..3 {
                fisher[(a, b)] += g[a] * g[b] * chi2.inv_var[c.index()];
            }
        }
    }
    let std_errors = match fisher.try_inverse() {
        Some(cov) => std::array::from_fn(|k| cov[(k, k)].max(0.0).sqrt()),
        None => [f64::INFINITY; 3],
    };
    let dof = 12;
    let p = full(&best);
    Ok(ConnectionFit {
        p0: p[0],
        p1: p[1],
        p2: p[2],
        p3: p[3],
        std_errors,
        objective,
        dof,
        chi2_per_dof: objective / dof as f64,
        converged,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartnerCheck {
    pub a: CnotClass,
    pub b: CnotClass,
    pub count_a: u64,
    pub count_b: u64,
    /// |k₁ − k₂| / √(k₁ + k₂); `None` when neither class occurred.
    pub z: Option<f64>,
}

/// Classes exchanged by time reversal + mirror (X1↔Z2, X2↔Z1, X1X2↔Z1Z2).
pub const PARTNER_PAIRS: [(CnotClass, CnotClass); 6] = {
    use XPart as X;
    use ZPart as Z;
    const fn c(x: XPart, z: ZPart) -> CnotClass {
        CnotClass { x, z }
    }
    [
        (c(X::X1, Z::I), c(X::I, Z::Z2)),
        (c(X::X2, Z::I), c(X::I, Z::Z1)),
        (c(X::X1X2, Z::I), c(X::I, Z::Z1Z2)),
        (c(X::X1, Z::Z1), c(X::X2, Z::Z2)),
        (c(X::X1X2, Z::Z2), c(X::X1, Z::Z1Z2)),
        (c(X::X1X2, Z::Z1), c(X::X2, Z::Z1Z2)),
    ]
};

/// The six partner pairs, then the four self-partnered classes (z = 0).
pub fn symmetry_partner_check(tally: &Tally) -> Result<Vec<PartnerCheck>> {
    let counts = cnot_counts(tally)?;
    let mut out: Vec<PartnerCheck> = PARTNER_PAIRS
        .iter()
        .map(|&(a, b)| {
            let (ka, kb) = (counts[a.index()], counts[b.index()]);
            let z = (ka + kb > 0).then(|| ka.abs_diff(kb) as f64 / ((ka + kb) as f64).sqrt());
            PartnerCheck { a, b, count_a: ka, count_b: kb, z }
        })
        .collect();
    for c in CnotClass::all() {
        if !PARTNER_PAIRS.iter().any(|&(a, b)| a == c || b == c) {
            let k = counts[c.index()];
            out.push(PartnerCheck { a: c, b: c, count_a: k, count_b: k, z: Some(0.0) });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryChannelEstimate {
    pub p_i: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    /// `None` when there were no failures.
    pub m: Option<f64>,
}

impl MemoryChannelEstimate {
    pub fn from_probs(p_i: f64, p_x: f64, p_y: f64, p_z: f64) -> MemoryChannelEstimate {
        let fail = p_x + p_y + p_z;
        let m = (fail > 0.0).then(|| (p_i * p_y - p_x * p_z).abs() / fail);
        MemoryChannelEstimate { p_i, p_x, p_y, p_z, m }
    }
}

pub fn correlation_measure(tally: &Tally) -> Result<MemoryChannelEstimate> {
    if tally.kind != ProtocolKind::Memory {
        return invalid(format!("expected a memory tally, got {:?}", tally.kind));
    }
    if tally.shots == 0 {
        return invalid("empty tally");
    }
    let n = tally.shots as f64;
    let f = |m: MemoryClass| tally.count(&LogicalClass::Memory(m)) as f64 / n;
    Ok(MemoryChannelEstimate::from_probs(f(MemoryClass::I), f(MemoryClass::X), f(MemoryClass::Y), f(MemoryClass::Z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{shot_rng, NoiseParams};
    use crate::protocol::Params;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn cnot_tally(counts: &[u64; 16]) -> Tally {
        let mut map = BTreeMap::new();
        for c in CnotClass::all().filter(|&c| c != CnotClass::IDENTITY) {
            if counts[c.index()] > 0 {
                map.insert(LogicalClass::Cnot(c), counts[c.index()]);
            }
        }
        Tally {
            kind: ProtocolKind::Cnot,
            params: Params { d: 3, w: 1, h1: 1, h2: 3, h3: 1 },
            noise: NoiseParams::independent(0.01),
            master_seed: 0,
            shots: counts.iter().sum(),
            counts: map,
            capped: false,
        }
    }

    fn model_counts(p: [f64; 3], shots: u64) -> [u64; 16] {
        let mut counts = [0u64; 16];
        for c in CnotClass::all().filter(|&c| c != CnotClass::IDENTITY) {
            counts[c.index()] = (factorized_prob(p, c) * shots as f64).round() as u64;
        }
        counts[0] = shots - counts.iter().sum::<u64>();
        counts
    }

    fn class(s: &str) -> CnotClass {
        s.parse().unwrap()
    }

    #[test]
    fn identity_tally() {
        let mut counts = [0u64; 16];
        counts[0] = 500;
        let est = estimate_cnot_channel(&cnot_tally(&counts)).unwrap();
        assert_eq!(est.prob(CnotClass::IDENTITY), 1.0);
        assert!(est.classes[1..].iter().all(|c| c.estimate == 0.0 && c.low == 0.0));
        let fit = fit_connection_params(&est).unwrap();
        assert_eq!((fit.p1, fit.p2, fit.p3), (0.0, 0.0, 0.0));
        assert_eq!(fit.p0, 1.0);
    }

    #[test]
    fn estimates_are_frequencies() {
        let counts: [u64; 16] = std::array::from_fn(|i| (i as u64 + 1) * 10);
        let est = estimate_cnot_channel(&cnot_tally(&counts)).unwrap();
        let shots: u64 = counts.iter().sum();
        assert_eq!(est.shots, shots);
        for c in CnotClass::all() {
            assert_eq!(est.prob(c), counts[c.index()] as f64 / shots as f64);
            let e = est.classes[c.index()];
            assert!(e.low <= e.estimate && e.estimate <= e.high);
        }
        assert!((est.classes.iter().map(|c| c.estimate).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_other_protocols() {
        let mut t = cnot_tally(&[1; 16]);
        t.kind = ProtocolKind::Zz;
        assert!(estimate_cnot_channel(&t).is_err());
        assert!(symmetry_partner_check(&t).is_err());
        assert!(correlation_measure(&t).is_err());
    }

    #[test]
    fn factorized_closure() {
        for p in [[0.01, 0.02, 0.03], [0.1, 0.2, 0.3], [0.0, 0.0, 0.0]] {
            let total: f64 = CnotClass::all().map(|c| factorized_prob(p, c)).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
        assert!((factorized_prob([0.01, 0.02, 0.03], class("X1⊗Z2")) - 9e-4).abs() < 1e-18);
    }

    #[test]
    fn exact_model_is_recovered() {
        let truth = [0.01, 0.02, 0.03];
        let est = ChannelEstimate::from_counts(&model_counts(truth, 1_000_000_000_000_000)).unwrap();
        let fit = fit_connection_params(&est).unwrap();
        for (got, want) in [fit.p1, fit.p2, fit.p3].iter().zip(truth) {
            assert!((got - want).abs() <= 1e-6, "{fit:?}");
        }
        assert!(fit.chi2_per_dof < 1e-3, "{fit:?}");
        assert!((fit.p0 - 0.94).abs() < 1e-5);
    }

    #[test]
    fn multinomial_round_trip_within_three_sigma() {
        let truth = [0.01, 0.02, 0.03];
        let cdf: Vec<f64> = CnotClass::all()
            .scan(0.0, |acc, c| {
                *acc += factorized_prob(truth, c);
                Some(*acc)
            })
            .collect();
        let mut rng = shot_rng(13, 0);
        let mut counts = [0u64; 16];
        for _ in 0..1_000_000 {
            let u: f64 = rng.gen();
            counts[cdf.iter().position(|&c| u < c).unwrap_or(15)] += 1;
        }
        let fit = fit_connection_params(&ChannelEstimate::from_counts(&counts).unwrap()).unwrap();
        for ((got, want), se) in [fit.p1, fit.p2, fit.p3].iter().zip(truth).zip(fit.std_errors) {
            assert!((got - want).abs() <= 3.0 * se, "{fit:?}");
        }
        assert!(fit.chi2_per_dof < 3.0);
    }

    #[test]
    fn partner_scores() {
        let mut counts = [0u64; 16];
        counts[class("X1⊗I").index()] = 100;
        counts[class("I⊗Z2").index()] = 100;
        counts[class("X2⊗I").index()] = 120;
        counts[class("I⊗Z1").index()] = 80;
        counts[0] = 10_000;
        let checks = symmetry_partner_check(&cnot_tally(&counts)).unwrap();
        assert_eq!(checks.len(), 10);
        assert_eq!(checks[0].z, Some(0.0));
        assert!((checks[1].z.unwrap() - 40.0 / 200f64.sqrt()).abs() < 1e-12);
        assert_eq!(checks[2].z, None);
        let fixed: Vec<CnotClass> = checks[6..].iter().map(|c| c.a).collect();
        assert_eq!(fixed, ["I⊗I", "X1⊗Z2", "X2⊗Z1", "X1X2⊗Z1Z2"].map(class));
    }

    #[test]
    fn factorized_channel_has_equal_partners() {
        let p = [0.013, 0.021, 0.034];
        for (a, b) in PARTNER_PAIRS {
            assert!((factorized_prob(p, a) - factorized_prob(p, b)).abs() < 1e-18);
        }
    }

    #[test]
    fn correlation_examples() {
        let (a, b) = (0.03, 0.07);
        let f = MemoryChannelEstimate::from_probs((1.0 - a) * (1.0 - b), a * (1.0 - b), a * b, (1.0 - a) * b);
        assert!(f.m.unwrap() < 1e-15);
        let m = MemoryChannelEstimate::from_probs(0.9, 0.04, 0.02, 0.04).m.unwrap();
        assert!((m - 0.164).abs() < 1e-12);
        assert_eq!(MemoryChannelEstimate::from_probs(1.0, 0.0, 0.0, 0.0).m, None);
    }
}
