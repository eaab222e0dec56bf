//! Phenomenological noise models and per-shot fault sampling.
//!
//! Every data qubit suffers one Pauli draw per time layer and every stabilizer
//! outcome flips with probability `q`. Sampling works per physical location
//! (not per edge), so a Y error toggles the linked edges of both graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkgraph::CheckGraphPair;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NoiseModel {
    /// Only X errors: ρ ↦ (1−p)ρ + p·XρX.
    XBiased,
    /// X and Z flip independently, each with probability p.
    Independent,
    /// X, Y, Z each with probability p/3.
    Depolarizing,
}

impl std::str::FromStr for NoiseModel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<NoiseModel> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "xbiased" => Ok(NoiseModel::XBiased),
            "independent" => Ok(NoiseModel::Independent),
            "depolarizing" => Ok(NoiseModel::Depolarizing),
            _ => invalid(format!("unknown noise model '{s}'")),
        }
    }
}

impl std::fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseModel::XBiased => "xBiased",
            NoiseModel::Independent => "independent",
            NoiseModel::Depolarizing => "depolarizing",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub model: NoiseModel,
    pub p: f64,
    pub q: f64,
}

impl NoiseParams {
    /// `q = None` applies the model's rule: q = p, except depolarizing q = 2p/3.
    pub fn new(model: NoiseModel, p: f64, q: Option<f64>) -> Result<NoiseParams> {
        let q = q.unwrap_or(match model {
            NoiseModel::Depolarizing => 2.0 * p / 3.0,
            _ => p,
        });
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return invalid(format!("{name} = {v} is not a probability"));
            }
        }
        Ok(NoiseParams { model, p, q })
    }

    pub fn independent(p: f64) -> NoiseParams {
        NoiseParams { model: NoiseModel::Independent, p, q: p }
    }

    pub fn depolarizing(p: f64) -> NoiseParams {
        NoiseParams { model: NoiseModel::Depolarizing, p, q: 2.0 * p / 3.0 }
    }

    pub fn x_biased(p: f64, q: f64) -> NoiseParams {
        NoiseParams { model: NoiseModel::XBiased, p, q }
    }

    /// Marginal probability that a data-qubit draw has an X component.
    pub fn x_flip(&self) -> f64 {
        match self.model {
            NoiseModel::XBiased | NoiseModel::Independent => self.p,
            NoiseModel::Depolarizing => 2.0 * self.p / 3.0,
        }
    }

    /// Marginal probability that a data-qubit draw has a Z component.
    pub fn z_flip(&self) -> f64 {
        match self.model {
            NoiseModel::XBiased => 0.0,
            NoiseModel::Independent => self.p,
            NoiseModel::Depolarizing => 2.0 * self.p / 3.0,
        }
    }

    /// Probability of a non-identity draw.
    fn any_flip(&self) -> f64 {
        match self.model {
            NoiseModel::XBiased | NoiseModel::Depolarizing => self.p,
            NoiseModel::Independent => self.p * (2.0 - self.p),
        }
    }

    /// Given a non-identity draw, pick (has X, has Z).
    fn conditional_pauli(&self, rng: &mut ChaCha8Rng) -> (bool, bool) {
        match self.model {
            NoiseModel::XBiased => (true, false),
            NoiseModel::Depolarizing => match rng.gen_range(0..3) {
                0 => (true, false),
                1 => (true, true),
                _ => (false, true),
            },
            NoiseModel::Independent => {
                // P(Y | flip) = p / (2 − p); X-only and Z-only share the rest.
                let u: f64 = rng.gen();
                let py = self.p / (2.0 - self.p);
                if u < py {
                    (true, true)
                } else if u < py + (1.0 - py) / 2.0 {
                    (true, false)
                } else {
                    (false, true)
                }
            }
        }
    }

    /// Rejects rates that would give non-positive matching weights.
    pub fn validate_for_decoding(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..0.5).contains(&v) {
                return invalid(format!("{name} = {v} must lie in [0, 0.5) for decoding"));
            }
        }
        Ok(())
    }
}

/// Sampled faults of one shot, as sorted edge-id sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FaultConfig {
    pub z_flips: Vec<u32>,
    pub x_flips: Vec<u32>,
    pub master_seed: u64,
    pub shot_index: u64,
}

/// Generator for shot `shot_index`: one ChaCha stream per shot, so shots can
/// be evaluated in any order on any number of workers.
pub fn shot_rng(master_seed: u64, shot_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(shot_index);
    rng
}

/// Calls `hit(i)` for each index in `0..n` that fires with probability `p`,
/// jumping between hits with geometric gaps.
fn bernoulli_hits(rng: &mut ChaCha8Rng, n: usize, p: f64, mut hit: impl FnMut(usize, &mut ChaCha8Rng)) {
    if p <= 0.0 || n == 0 {
        return;
    }
    if p >= 1.0 {
        for i in 0..n {
            hit(i, rng);
        }
        return;
    }
    let log_q = (-p).ln_1p();
    let mut i = 0usize;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let gap = (u.ln() / log_q).floor();
        if gap >= (n - i) as f64 {
            return;
        }
        i += gap as usize;
        hit(i, rng);
        i += 1;
        if i >= n {
            return;
        }
    }
}

/// Reduces a toggle list to the set of ids toggled an odd number of times.
pub(crate) fn odd_ids(mut ids: Vec<u32>) -> Vec<u32> {
    ids.sort_unstable();
    let mut out = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        let mut j = i;
        while j < ids.len() && ids[j] == ids[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(ids[i]);
        }
        i = j;
    }
    out
}

pub fn sample_faults(pair: &CheckGraphPair, noise: &NoiseParams, master_seed: u64, shot_index: u64) -> FaultConfig {
    let mut rng = shot_rng(master_seed, shot_index);
    let mut z = Vec::new();
    let mut x = Vec::new();
    let space = &pair.spacelike;
    bernoulli_hits(&mut rng, space.len(), noise.any_flip(), |i, rng| {
        let (has_x, has_z) = noise.conditional_pauli(rng);
        let loc = &space[i];
        if has_x {
            if let Some(e) = loc.z_edge {
                z.push(e);
            }
        }
        if has_z {
            if let Some(e) = loc.x_edge {
                x.push(e);
            }
        }
    });
    bernoulli_hits(&mut rng, pair.z_timelike.len(), noise.q, |i, _| {
        if let Some(e) = pair.z_timelike[i] {
            z.push(e);
        }
    });
    bernoulli_hits(&mut rng, pair.x_timelike.len(), noise.q, |i, _| {
        if let Some(e) = pair.x_timelike[i] {
            x.push(e);
        }
    });
    FaultConfig { z_flips: odd_ids(z), x_flips: odd_ids(x), master_seed, shot_index }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_rules() {
        let n = NoiseParams::new(NoiseModel::Depolarizing, 0.03, None).unwrap();
        assert!((n.q - 0.02).abs() < 1e-15);
        let n = NoiseParams::new(NoiseModel::Independent, 0.03, None).unwrap();
        assert_eq!(n.q, 0.03);
        let n = NoiseParams::new(NoiseModel::XBiased, 0.03, Some(0.005)).unwrap();
        assert_eq!(n.q, 0.005);
        assert!(NoiseParams::new(NoiseModel::XBiased, 1.5, None).is_err());
        assert!(NoiseParams::independent(0.5).validate_for_decoding().is_err());
    }

    #[test]
    fn model_names_parse() {
        for m in [NoiseModel::XBiased, NoiseModel::Independent, NoiseModel::Depolarizing] {
            assert_eq!(m.to_string().parse::<NoiseModel>().unwrap(), m);
        }
        assert!("bitflip".parse::<NoiseModel>().is_err());
    }

    #[test]
    fn odd_ids_cancels_pairs() {
        assert_eq!(odd_ids(vec![3, 1, 3, 2, 3, 1]), vec![2, 3]);
        assert!(odd_ids(vec![]).is_empty());
    }

    #[test]
    fn geometric_skipping_rate() {
        // Oracle: binomial mean/variance of the number of hits.
        let n = 1_000_000;
        let p = 0.01;
        let mut rng = shot_rng(5, 0);
        let mut hits = 0usize;
        let mut last = None;
        bernoulli_hits(&mut rng, n, p, |i, _| {
            assert!(last.is_none_or(|l| i > l) && i < n);
            last = Some(i);
            hits += 1;
        });
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - n as f64 * p).abs() < 3.0 * sigma, "hits {hits}");
    }

    #[test]
    fn certain_and_impossible_events() {
        let mut rng = shot_rng(1, 1);
        let mut count = 0;
        bernoulli_hits(&mut rng, 17, 1.0, |_, _| count += 1);
        assert_eq!(count, 17);
        bernoulli_hits(&mut rng, 17, 0.0, |_, _| count += 1);
        assert_eq!(count, 17);
    }

    #[test]
    fn conditional_fractions() {
        // Depolarizing: each non-identity Pauli is equally likely; Y is 1/3.
        let noise = NoiseParams::depolarizing(0.3);
        let mut rng = shot_rng(9, 3);
        let n = 300_000;
        let y = (0..n).filter(|_| noise.conditional_pauli(&mut rng) == (true, true)).count();
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        assert!((y as f64 - n as f64 / 3.0).abs() < 3.0 * sigma);
    }
}
