//! Shot loop: sample, decode both graphs, classify the residual.
//!
//! Shot `i` always draws from stream `i` of the master seed, and batches are
//! fixed in advance, so a tally depends only on the seed and the stop rule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::checkgraph::CheckGraphPair;
use crate::classify::{classify, LogicalClass};
use crate::decoder::{extract_syndrome, Decoder};
use crate::error::{invalid, Result};
use crate::noise::{odd_ids, sample_faults, NoiseParams};
use crate::protocol::{Params, ProtocolKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "rule")]
pub enum StopRule {
    FixedShots {
        shots: u64,
    },
    /// Run until `failures` logical errors are seen or `cap` shots are spent.
    MinFailures {
        failures: u64,
        cap: u64,
    },
}

impl StopRule {
    pub const DEFAULT: StopRule = StopRule::MinFailures { failures: 10, cap: 10_000_000 };

    fn validate(&self) -> Result<()> {
        match *self {
            StopRule::FixedShots { shots: 0 } => invalid("fixedShots needs at least one shot"),
            StopRule::MinFailures { cap: 0, .. } => invalid("minFailures needs a positive cap"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` = available parallelism.
    pub workers: Option<usize>,
    /// Force the single-threaded loop even when built with `parallel`.
    pub sequential: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    pub kind: ProtocolKind,
    pub params: Params,
    pub noise: NoiseParams,
    pub master_seed: u64,
    pub shots: u64,
    /// Non-identity classes only.
    pub counts: BTreeMap<LogicalClass, u64>,
    /// The minFailures cap ran out first.
    pub capped: bool,
}

impl Tally {
    pub fn failures(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn identity(&self) -> u64 {
        self.shots - self.failures()
    }

    pub fn count(&self, class: &LogicalClass) -> u64 {
        if class.is_identity() {
            self.identity()
        } else {
            self.counts.get(class).copied().unwrap_or(0)
        }
    }

    /// Failures whose class satisfies `pred`.
    pub fn count_where(&self, pred: impl Fn(&LogicalClass) -> bool) -> u64 {
        self.counts.iter().filter(|(c, _)| pred(c)).map(|(_, n)| n).sum()
    }

    pub fn logical_rate(&self) -> f64 {
        self.failures() as f64 / self.shots as f64
    }

    pub fn to_json(&self) -> serde_json::Value {
        let counts: serde_json::Map<String, serde_json::Value> =
            self.counts.iter().map(|(c, n)| (c.to_string(), (*n).into())).collect();
        serde_json::json!({
            "protocol": self.kind,
            "params": self.params,
            "noise": self.noise,
            "masterSeed": self.master_seed,
            "shots": self.shots,
            "failures": self.failures(),
            "counts": counts,
            "capped": self.capped,
        })
    }
}

#[derive(Default)]
struct Partial {
    shots: u64,
    counts: BTreeMap<LogicalClass, u64>,
}

impl Partial {
    fn merge(mut self, o: Partial) -> Partial {
        self.shots += o.shots;
        for (c, n) in o.counts {
            *self.counts.entry(c).or_insert(0) += n;
        }
        self
    }

    fn failures(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// One shot: residual chains faults ⊕ correction, then their class.
pub fn run_one(
    pair: &CheckGraphPair,
    noise: &NoiseParams,
    seed: u64,
    shot: u64,
    dec: &mut Decoder,
) -> Result<LogicalClass> {
    let f = sample_faults(pair, noise, seed, shot);
    let residual = |g, flips: Vec<u32>, dec: &mut Decoder| -> Result<Vec<u32>> {
        if flips.is_empty() {
            return Ok(flips);
        }
        let c = dec.decode(g, &extract_syndrome(g, &flips))?;
        let mut all = flips;
        all.extend(c.edges);
        Ok(odd_ids(all))
    };
    let z = residual(&pair.z, f.z_flips, dec)?;
    let x = residual(&pair.x, f.x_flips, dec)?;
    classify(pair, &z, &x)
}

fn shot_into(
    pair: &CheckGraphPair,
    noise: &NoiseParams,
    seed: u64,
    shot: u64,
    dec: &mut Decoder,
    part: &mut Partial,
) -> Result<()> {
    let class = run_one(pair, noise, seed, shot, dec)?;
    part.shots += 1;
    if !class.is_identity() {
        *part.counts.entry(class).or_insert(0) += 1;
    }
    Ok(())
}

fn run_sequential(
    pair: &CheckGraphPair,
    noise: &NoiseParams,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Result<Partial> {
    let mut dec = Decoder::new();
    let mut part = Partial::default();
    for shot in range {
        shot_into(pair, noise, seed, shot, &mut dec, &mut part)?;
    }
    Ok(part)
}

#[cfg(feature = "parallel")]
fn run_parallel(pair: &CheckGraphPair, noise: &NoiseParams, seed: u64, range: std::ops::Range<u64>) -> Result<Partial> {
    use rayon::prelude::*;
    range
        .into_par_iter()
        .try_fold(
            || (Decoder::new(), Partial::default()),
            |(mut dec, mut part), shot| {
                shot_into(pair, noise, seed, shot, &mut dec, &mut part)?;
                Ok((dec, part))
            },
        )
        .map(|r: Result<(Decoder, Partial)>| r.map(|(_, p)| p))
        .try_reduce(Partial::default, |a, b| Ok(a.merge(b)))
}

fn run_range(
    pair: &CheckGraphPair,
    noise: &NoiseParams,
    seed: u64,
    range: std::ops::Range<u64>,
    opts: &RunOptions,
) -> Result<Partial> {
    #[cfg(feature = "parallel")]
    if !opts.sequential {
        return run_parallel(pair, noise, seed, range);
    }
    let _ = opts;
    run_sequential(pair, noise, seed, range)
}

const FIRST_BATCH: u64 = 1 << 10;
const MAX_BATCH: u64 = 1 << 18;

fn run_batches(
    pair: &CheckGraphPair,
    noise: &NoiseParams,
    stop: StopRule,
    seed: u64,
    opts: &RunOptions,
) -> Result<Tally> {
    stop.validate()?;
    let mut total = Partial::default();
    let (target, cap) = match stop {
        StopRule::FixedShots { shots } => (None, shots),
        StopRule::MinFailures { failures, cap } => (Some(failures), cap),
    };
    let mut batch = FIRST_BATCH;
    while total.shots < cap && target.is_none_or(|t| total.failures() < t) {
        let end = (total.shots + batch).min(cap);
        let part = run_range(pair, noise, seed, total.shots..end, opts)?;
        total = total.merge(part);
        batch = (batch * 2).min(MAX_BATCH);
    }
    let capped = target.is_some_and(|t| total.failures() < t);
    Ok(Tally {
        kind: pair.spec.kind,
        params: pair.spec.params,
        noise: *noise,
        master_seed: seed,
        shots: total.shots,
        counts: total.counts,
        capped,
    })
}

/// Runs shots on a compiled protocol until the stop rule is met.
pub fn run_shots(
    pair: &CheckGraphPair,
    noise: &NoiseParams,
    stop: StopRule,
    seed: u64,
    opts: &RunOptions,
) -> Result<Tally> {
    noise.validate_for_decoding()?;
    #[cfg(feature = "parallel")]
    if let (Some(n), false) = (opts.workers, opts.sequential) {
        if n == 0 {
            return invalid("workers must be positive");
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| crate::Error::Validation(format!("cannot start {n} workers: {e}")))?;
        return pool.install(|| run_batches(pair, noise, stop, seed, opts));
    }
    run_batches(pair, noise, stop, seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkgraph::compile;
    use crate::protocol::{build_cnot, build_memory, build_zz, TimeBoundary};

    #[test]
    fn zero_noise_is_identity() {
        let noise = NoiseParams::independent(0.0);
        let specs = [
            build_memory(3, 3, TimeBoundary::Perfect, TimeBoundary::Perfect).unwrap(),
            build_zz(3, 1, 1, 3, 1).unwrap(),
            build_cnot(3, 1, 1, 3, 1).unwrap(),
        ];
        for spec in &specs {
            let pair = compile(spec, &noise).unwrap();
            let t = run_shots(&pair, &noise, StopRule::FixedShots { shots: 100 }, 1, &RunOptions::default()).unwrap();
            assert_eq!((t.shots, t.failures()), (100, 0));
        }
    }

    #[test]
    fn tallies_do_not_depend_on_scheduling() {
        let noise = NoiseParams::independent(0.03);
        let pair = compile(&build_cnot(3, 1, 1, 3, 1).unwrap(), &noise).unwrap();
        let stop = StopRule::FixedShots { shots: 3000 };
        let seq = run_shots(&pair, &noise, stop, 5, &RunOptions { workers: None, sequential: true }).unwrap();
        for workers in [1, 2, 3] {
            let par =
                run_shots(&pair, &noise, stop, 5, &RunOptions { workers: Some(workers), sequential: false }).unwrap();
            assert_eq!(par, seq);
        }
        assert!(seq.failures() > 0);
        let other = run_shots(&pair, &noise, stop, 6, &RunOptions::default()).unwrap();
        assert_ne!(other.counts, seq.counts);
    }

    #[test]
    fn min_failures_stops_on_batch_boundary() {
        let noise = NoiseParams::independent(0.04);
        let pair = compile(&build_memory(3, 3, TimeBoundary::Perfect, TimeBoundary::Perfect).unwrap(), &noise).unwrap();
        let t =
            run_shots(&pair, &noise, StopRule::MinFailures { failures: 10, cap: 1_000_000 }, 2, &RunOptions::default())
                .unwrap();
        assert!(t.failures() >= 10 && !t.capped);
        assert_eq!(t.shots, FIRST_BATCH);
        let t = run_shots(
            &pair,
            &noise,
            StopRule::MinFailures { failures: 1_000_000, cap: 1500 },
            2,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(t.capped);
        assert_eq!(t.shots, 1500);
    }

    #[test]
    fn rejects_bad_inputs() {
        let noise = NoiseParams::independent(0.01);
        let pair = compile(&build_memory(3, 1, TimeBoundary::Perfect, TimeBoundary::Perfect).unwrap(), &noise).unwrap();
        let o = RunOptions::default();
        assert!(run_shots(&pair, &noise, StopRule::FixedShots { shots: 0 }, 0, &o).is_err());
        assert!(run_shots(&pair, &NoiseParams::independent(0.6), StopRule::FixedShots { shots: 1 }, 0, &o).is_err());
    }
}
