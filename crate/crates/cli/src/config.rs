//! Run configuration: a flat JSON file overlaid by command-line flags.

use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Deserializer, Serialize};
use surgery_core::experiments::StopRule;
use surgery_core::noise::NoiseModel;

use crate::CliError;

/// A number list: `3`, `3,5,7`, `1..15` or `0.02..0.05:0.01` (ranges are
/// inclusive, step 1 by default).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List(pub Vec<f64>);

fn num(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

/// Strips the rounding noise that accumulates along a float range.
fn tidy(v: f64) -> f64 {
    format!("{v:.12e}").parse().unwrap_or(v)
}

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<List, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let Some((a, rest)) = part.split_once("..") else {
                out.push(num(part)?);
                continue;
            };
            let (b, step) = match rest.split_once(':') {
                Some((b, step)) => (b, num(step)?),
                None => (rest, 1.0),
            };
            let (a, b) = (num(a)?, num(b)?);
            if step.is_nan() || step <= 0.0 {
                return Err(format!("range step must be positive in '{part}'"));
            }
            if b < a {
                return Err(format!("empty range '{part}'"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            out.extend((0..=n).map(|i| tidy(a + i as f64 * step)));
        }
        if out.is_empty() {
            return Err(format!("empty list '{s}'"));
        }
        Ok(List(out))
    }
}

impl<'de> Deserialize<'de> for List {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<List, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(f64),
            Many(Vec<f64>),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::One(v) => Ok(List(vec![v])),
            Raw::Many(v) if !v.is_empty() => Ok(List(v)),
            Raw::Many(_) => Err(serde::de::Error::custom("empty list")),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl List {
    pub fn counts(&self, name: &str) -> Result<Vec<usize>, CliError> {
        self.0
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                    Ok(v as usize)
                } else {
                    Err(CliError::invalid(format!("--{name} expects non-negative integers, got {v}")))
                }
            })
            .collect()
    }
}

fn single<T: Copy>(name: &str, v: Vec<T>) -> Result<T, CliError> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(CliError::invalid(format!("--{name} takes a single value here, got {}", v.len()))),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Opts {
    /// JSON config file with the same (camelCase) keys; flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Subcommand the config file is meant for; checked when present.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Protocol: memory, zz or cnot.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Protocol spec JSON, used instead of --protocol and its sizes.
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    /// Code distance (list for threshold and memory-correlation).
    #[arg(long)]
    pub d: Option<List>,
    /// Bridge width (list for w-sweep).
    #[arg(long)]
    pub w: Option<List>,
    /// Rounds before the merge (default 1).
    #[arg(long)]
    pub h1: Option<usize>,
    /// Merged rounds (list for zz-sweep).
    #[arg(long)]
    pub h2: Option<List>,
    /// Rounds after the merge (default 1).
    #[arg(long)]
    pub h3: Option<usize>,
    /// Rounds of a memory experiment (default d).
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Noise model: xBiased, independent or depolarizing.
    #[arg(long)]
    pub model: Option<NoiseModel>,
    /// Data-qubit error rate (list for threshold).
    #[arg(long)]
    pub p: Option<List>,
    /// Readout error rate; default follows the model (p, or 2p/3 for depolarizing).
    #[arg(long)]
    pub q: Option<f64>,
    /// Run exactly this many shots per point.
    #[arg(long)]
    pub shots: Option<u64>,
    /// Run each point until this many logical failures...
    #[arg(long)]
    pub min_failures: Option<u64>,
    /// ...or this many shots, whichever comes first.
    #[arg(long)]
    pub cap: Option<u64>,
    /// Master seed (default 0).
    #[arg(long)]
    #[serde(alias = "masterSeed")]
    pub seed: Option<u64>,
    /// Output directory (default: ./results).
    #[arg(long, env = "SURGERY_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Opts {
    /// Reads `--config` (if any) and lays the flags over it.
    pub fn resolve(self, command: &str) -> Result<Opts, CliError> {
        let Some(path) = &self.config else { return Ok(self) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let file: Opts = serde_json::from_str(&text)
            .map_err(|e| CliError::invalid(format!("bad config {}: {e}", path.display())))?;
        if let Some(c) = &file.command {
            if c != command {
                return Err(CliError::invalid(format!("config is for '{c}', not '{command}'")));
            }
        }
        Ok(Opts {
            config: self.config,
            command: file.command,
            protocol: self.protocol.or(file.protocol),
            spec_file: self.spec_file.or(file.spec_file),
            d: self.d.or(file.d),
            w: self.w.or(file.w),
            h1: self.h1.or(file.h1),
            h2: self.h2.or(file.h2),
            h3: self.h3.or(file.h3),
            rounds: self.rounds.or(file.rounds),
            model: self.model.or(file.model),
            p: self.p.or(file.p),
            q: self.q.or(file.q),
            shots: self.shots.or(file.shots),
            min_failures: self.min_failures.or(file.min_failures),
            cap: self.cap.or(file.cap),
            seed: self.seed.or(file.seed),
            out_dir: self.out_dir.or(file.out_dir),
            workers: self.workers.or(file.workers),
        })
    }

    pub fn ds(&self) -> Result<Vec<usize>, CliError> {
        self.d.as_ref().ok_or_else(|| CliError::invalid("--d is required"))?.counts("d")
    }

    pub fn d_or(&self, default: &[usize]) -> Result<Vec<usize>, CliError> {
        self.d.as_ref().map_or(Ok(default.to_vec()), |l| l.counts("d"))
    }

    pub fn d_single(&self) -> Result<usize, CliError> {
        single("d", self.ds()?)
    }

    pub fn ws_or(&self, default: usize) -> Result<Vec<usize>, CliError> {
        self.w.as_ref().map_or(Ok(vec![default]), |l| l.counts("w"))
    }

    pub fn w_single(&self) -> Result<usize, CliError> {
        single("w", self.ws_or(1)?)
    }

    pub fn h2s_or(&self, default: Vec<usize>) -> Result<Vec<usize>, CliError> {
        self.h2.as_ref().map_or(Ok(default), |l| l.counts("h2"))
    }

    pub fn h2_single(&self, default: usize) -> Result<usize, CliError> {
        single("h2", self.h2s_or(vec![default])?)
    }

    pub fn ps(&self) -> Result<Vec<f64>, CliError> {
        Ok(self.p.as_ref().ok_or_else(|| CliError::invalid("--p is required"))?.0.clone())
    }

    pub fn p_single(&self) -> Result<f64, CliError> {
        single("p", self.ps()?)
    }

    pub fn stop(&self, default: StopRule) -> Result<StopRule, CliError> {
        match (self.shots, self.min_failures, self.cap) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                Err(CliError::invalid("--shots conflicts with --min-failures/--cap"))
            }
            (Some(shots), None, None) => Ok(StopRule::FixedShots { shots }),
            (None, None, None) => Ok(default),
            (None, f, c) => {
                let (df, dc) = match StopRule::DEFAULT {
                    StopRule::MinFailures { failures, cap } => (failures, cap),
                    StopRule::FixedShots { .. } => unreachable!(),
                };
                Ok(StopRule::MinFailures { failures: f.unwrap_or(df), cap: c.unwrap_or(dc) })
            }
        }
    }
}
