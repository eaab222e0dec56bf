//! One function per subcommand.

use std::path::PathBuf;

use serde_json::{json, Value};
use surgery_core::checkgraph::{compile, pair_fault_distance, CheckGraphPair, FaultDistance};
use surgery_core::classify::classify;
use surgery_core::decoder::{extract_syndrome, Decoder};
use surgery_core::experiments::{
    correlation_measure, estimate_cnot_channel, estimate_optimal_h2, find_threshold, fit_connection_params, run_shots,
    saturation_h2, sweep_h2, sweep_w, symmetry_partner_check, timelike_crossing, Family, RunOptions, StopRule,
    SweepPoint,
};
use surgery_core::noise::{sample_faults, NoiseModel, NoiseParams};
use surgery_core::protocol::{build_cnot, build_memory, build_zz, ProtocolSpec, TimeBoundary};

use crate::config::Opts;
use crate::output::{join, opt, sig, Writer};
use crate::CliError;

pub struct Outcome {
    /// Some minFailures run hit its shot cap first.
    pub partial: bool,
}

pub fn run(command: &str, opts: Opts) -> Result<Outcome, CliError> {
    let o = opts.resolve(command)?;
    match command {
        "zz-sweep" => zz_sweep(command, &o, false),
        "w-sweep" => zz_sweep(command, &o, true),
        "cnot-channel" => cnot_channel(command, &o),
        "threshold" => threshold(command, &o),
        "memory-correlation" => memory_correlation(command, &o),
        "fault-distance" => fault_distance(&o),
        "decode-check" => decode_check(command, &o),
        other => Err(CliError::invalid(format!("unknown command '{other}'"))),
    }
}

const CNOT_SHOTS: StopRule = StopRule::FixedShots { shots: 10_000 };
const MEMORY_SHOTS: StopRule = StopRule::FixedShots { shots: 100_000 };

fn run_options(o: &Opts) -> RunOptions {
    RunOptions { workers: o.workers, sequential: false }
}

fn out_dir(o: &Opts) -> PathBuf {
    o.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"))
}

fn seed(o: &Opts) -> u64 {
    o.seed.unwrap_or(0)
}

fn noise(o: &Opts, default: NoiseModel, p: f64) -> Result<NoiseParams, CliError> {
    Ok(NoiseParams::new(o.model.unwrap_or(default), p, o.q)?)
}

fn stem(command: &str, protocol: &str, d: &str, n: &NoiseParams) -> String {
    format!("{command}_{protocol}_d{d}_{}_p{}_q{}", n.model, sig(n.p), sig(n.q))
}

fn config_json(o: &Opts) -> Value {
    serde_json::to_value(o).expect("config serializes")
}

fn protocol_spec(o: &Opts) -> Result<ProtocolSpec, CliError> {
    if let Some(path) = &o.spec_file {
        if o.protocol.is_some() {
            return Err(CliError::invalid("--spec-file and --protocol are mutually exclusive"));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
        return Ok(ProtocolSpec::from_json(&text)?);
    }
    let protocol = o.protocol.as_deref().ok_or_else(|| CliError::invalid("--protocol or --spec-file is required"))?;
    let d = o.d_single()?;
    let (w, h1, h2, h3) = (o.w_single()?, o.h1.unwrap_or(1), o.h2_single(d)?, o.h3.unwrap_or(1));
    Ok(match protocol {
        "memory" => build_memory(d, o.rounds.unwrap_or(d), TimeBoundary::Perfect, TimeBoundary::Perfect)?,
        "zz" => build_zz(d, w, h1, h2, h3)?,
        "cnot" => build_cnot(d, w, h1, h2, h3)?,
        other => return Err(CliError::invalid(format!("unknown protocol '{other}' (memory, zz, cnot)"))),
    })
}

const SWEEP_HEADER: [&str; 22] = [
    "protocol",
    "d",
    "w",
    "h1",
    "h2",
    "h3",
    "model",
    "p",
    "q",
    "seed",
    "shots",
    "failures",
    "logical_rate",
    "rate_low",
    "rate_high",
    "timelike",
    "spacelike",
    "joint",
    "timelike_fraction",
    "fraction_low",
    "fraction_high",
    "capped",
];

fn sweep_row(pt: &SweepPoint, n: &NoiseParams, seed: u64) -> Vec<String> {
    vec![
        "zz".into(),
        pt.d.to_string(),
        pt.w.to_string(),
        pt.h1.to_string(),
        pt.h2.to_string(),
        pt.h3.to_string(),
        n.model.to_string(),
        sig(n.p),
        sig(n.q),
        seed.to_string(),
        pt.shots.to_string(),
        pt.failures.to_string(),
        sig(pt.logical_rate),
        sig(pt.rate_low),
        sig(pt.rate_high),
        pt.timelike.to_string(),
        pt.spacelike.to_string(),
        pt.joint.to_string(),
        opt(pt.timelike_fraction),
        opt(pt.fraction_low),
        opt(pt.fraction_high),
        pt.capped.to_string(),
    ]
}

fn zz_sweep(command: &str, o: &Opts, over_w: bool) -> Result<Outcome, CliError> {
    let d = o.d_single()?;
    let (h1, h3) = (o.h1.unwrap_or(1), o.h3.unwrap_or(1));
    let n = noise(o, NoiseModel::XBiased, o.p_single()?)?;
    let stop = o.stop(StopRule::DEFAULT)?;
    let seed = seed(o);
    let points = if over_w {
        let ws = o.w.as_ref().ok_or_else(|| CliError::invalid("--w is required"))?.counts("w")?;
        sweep_w(d, h1, o.h2_single(d)?, h3, &n, &ws, stop, seed, &run_options(o))?
    } else {
        let h2s = o.h2s_or((1..=2 * d + 1).collect())?;
        sweep_h2(d, o.w_single()?, h1, h3, &n, &h2s, stop, seed, &run_options(o))?
    };
    for pt in &points {
        println!(
            "d={} w={} h2={} shots={} failures={} P_L={} timelike_fraction={}",
            pt.d,
            pt.w,
            pt.h2,
            pt.shots,
            pt.failures,
            sig(pt.logical_rate),
            pt.timelike_fraction.map_or("-".into(), sig)
        );
    }
    let rows: Vec<Vec<String>> = points.iter().map(|pt| sweep_row(pt, &n, seed)).collect();
    let mut out = Writer::new(&out_dir(o), stem(command, "zz", &d.to_string(), &n))?;
    out.csv(&SWEEP_HEADER, &rows)?;
    let partial = points.iter().any(|p| p.capped);
    let mut summary = json!({
        "command": command,
        "config": config_json(o),
        "stopRule": stop,
        "points": points,
        "partial": partial,
    });
    if !over_w {
        summary["saturationH2"] = json!(saturation_h2(&points));
        summary["timelikeCrossingH2"] = json!(timelike_crossing(&points));
        summary["analyticOptimalH2"] = json!(estimate_optimal_h2(d, n.p, n.q).ok());
    }
    out.summary(summary)?;
    Ok(Outcome { partial })
}

fn cnot_channel(command: &str, o: &Opts) -> Result<Outcome, CliError> {
    let d = o.d_single()?;
    let (w, h1, h2, h3) = (o.w_single()?, o.h1.unwrap_or(1), o.h2_single(d)?, o.h3.unwrap_or(1));
    let n = noise(o, NoiseModel::Independent, o.p_single()?)?;
    let stop = o.stop(CNOT_SHOTS)?;
    let seed = seed(o);
    let pair = compile(&build_cnot(d, w, h1, h2, h3)?, &n)?;
    let tally = run_shots(&pair, &n, stop, seed, &run_options(o))?;
    let est = estimate_cnot_channel(&tally)?;
    let fit = fit_connection_params(&est)?;
    let partners = symmetry_partner_check(&tally)?;
    println!(
        "d={d} shots={} failures={} p1={} p2={} p3={} chi2/dof={}",
        tally.shots,
        tally.failures(),
        sig(fit.p1),
        sig(fit.p2),
        sig(fit.p3),
        sig(fit.chi2_per_dof)
    );
    let header = [
        "protocol", "d", "w", "h1", "h2", "h3", "model", "p", "q", "seed", "class", "count", "shots", "estimate",
        "ci_low", "ci_high",
    ];
    let rows: Vec<Vec<String>> = est
        .classes
        .iter()
        .map(|c| {
            vec![
                "cnot".into(),
                d.to_string(),
                w.to_string(),
                h1.to_string(),
                h2.to_string(),
                h3.to_string(),
                n.model.to_string(),
                sig(n.p),
                sig(n.q),
                seed.to_string(),
                c.class.to_string(),
                c.count.to_string(),
                est.shots.to_string(),
                sig(c.estimate),
                sig(c.low),
                sig(c.high),
            ]
        })
        .collect();
    let mut out = Writer::new(&out_dir(o), stem(command, "cnot", &d.to_string(), &n))?;
    out.csv(&header, &rows)?;
    let partners: Vec<Value> = partners
        .iter()
        .map(
            |c| json!({"a": c.a.to_string(), "b": c.b.to_string(), "countA": c.count_a, "countB": c.count_b, "z": c.z}),
        )
        .collect();
    out.summary(json!({
        "command": command,
        "config": config_json(o),
        "stopRule": stop,
        "tally": tally.to_json(),
        "fit": fit,
        "partners": partners,
        "partial": tally.capped,
    }))?;
    Ok(Outcome { partial: tally.capped })
}

fn threshold(command: &str, o: &Opts) -> Result<Outcome, CliError> {
    let (family, default_model) = match o.protocol.as_deref().unwrap_or("memory") {
        "memory" => (Family::Memory, NoiseModel::Independent),
        "cnot" => (Family::Cnot, NoiseModel::Depolarizing),
        other => return Err(CliError::invalid(format!("threshold supports memory or cnot, not '{other}'"))),
    };
    if o.q.is_some() {
        return Err(CliError::invalid("threshold grids use the model's q rule; drop --q"));
    }
    let ds = o.d_or(&[3, 5, 7])?;
    let ps = o.ps()?;
    let model = o.model.unwrap_or(default_model);
    let stop = o.stop(CNOT_SHOTS)?;
    let seed = seed(o);
    let res = find_threshold(family, &ds, model, &ps, stop, seed, &run_options(o))?;
    let target = match stop {
        StopRule::MinFailures { failures, .. } => failures,
        StopRule::FixedShots { .. } => 0,
    };
    let protocol = serde_json::to_value(family).expect("family serializes");
    let protocol = protocol.as_str().unwrap_or_default();
    for pt in &res.points {
        println!("d={} p={} shots={} failures={} P_L={}", pt.d, sig(pt.p), pt.shots, pt.failures, sig(pt.logical_rate));
    }
    match res.estimate {
        Some(e) => println!("threshold ≈ {} (spread {})", sig(e), opt(res.spread)),
        None => println!("no crossing in the grid"),
    }
    let header = [
        "protocol",
        "d",
        "model",
        "p",
        "q",
        "seed",
        "shots",
        "failures",
        "logical_rate",
        "rate_low",
        "rate_high",
        "capped",
    ];
    let rows: Vec<Vec<String>> = res
        .points
        .iter()
        .map(|pt| {
            vec![
                protocol.into(),
                pt.d.to_string(),
                model.to_string(),
                sig(pt.p),
                sig(pt.q),
                seed.to_string(),
                pt.shots.to_string(),
                pt.failures.to_string(),
                sig(pt.logical_rate),
                sig(pt.rate_low),
                sig(pt.rate_high),
                (pt.failures < target).to_string(),
            ]
        })
        .collect();
    let partial = res.points.iter().any(|pt| pt.failures < target);
    let name = format!(
        "{command}_{protocol}_d{}_{model}_p{}_qrule",
        join(&ds),
        join(&ps.iter().map(|&p| sig(p)).collect::<Vec<_>>())
    );
    let mut out = Writer::new(&out_dir(o), name)?;
    out.csv(&header, &rows)?;
    out.summary(json!({
        "command": command,
        "config": config_json(o),
        "stopRule": stop,
        "result": res,
        "noCrossing": res.estimate.is_none(),
        "partial": partial,
    }))?;
    Ok(Outcome { partial })
}

fn memory_correlation(command: &str, o: &Opts) -> Result<Outcome, CliError> {
    let ds = o.d_or(&[3, 5, 7])?;
    let n = noise(o, NoiseModel::Depolarizing, o.p_single()?)?;
    let stop = o.stop(MEMORY_SHOTS)?;
    let seed = seed(o);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut partial = false;
    for &d in &ds {
        let rounds = o.rounds.unwrap_or(d);
        let pair = compile(&build_memory(d, rounds, TimeBoundary::Perfect, TimeBoundary::Perfect)?, &n)?;
        let tally = run_shots(&pair, &n, stop, seed, &run_options(o))?;
        let m = correlation_measure(&tally)?;
        partial |= tally.capped;
        println!("d={d} rounds={rounds} shots={} failures={} M={}", tally.shots, tally.failures(), opt(m.m));
        rows.push(vec![
            "memory".into(),
            d.to_string(),
            rounds.to_string(),
            n.model.to_string(),
            sig(n.p),
            sig(n.q),
            seed.to_string(),
            tally.shots.to_string(),
            tally.failures().to_string(),
            sig(m.p_i),
            sig(m.p_x),
            sig(m.p_y),
            sig(m.p_z),
            opt(m.m),
        ]);
        results.push(json!({"d": d, "rounds": rounds, "tally": tally.to_json(), "estimate": m}));
    }
    let header =
        ["protocol", "d", "rounds", "model", "p", "q", "seed", "shots", "failures", "p_i", "p_x", "p_y", "p_z", "m"];
    let mut out = Writer::new(&out_dir(o), stem(command, "memory", &join(&ds), &n))?;
    out.csv(&header, &rows)?;
    out.summary(json!({
        "command": command,
        "config": config_json(o),
        "stopRule": stop,
        "results": results,
        "partial": partial,
    }))?;
    Ok(Outcome { partial })
}

fn fault_distance(o: &Opts) -> Result<Outcome, CliError> {
    let spec = protocol_spec(o)?;
    // Unit-free: the distance counts faults, so any valid rates do.
    let pair = compile(&spec, &NoiseParams::independent(0.01))?;
    match pair_fault_distance(&pair) {
        FaultDistance::Finite(k) => println!("{k}"),
        FaultDistance::NoLogicalClass => println!("none"),
    }
    Ok(Outcome { partial: false })
}

/// Faults ⊕ correction of every graph in one shot; returns (open, chains).
fn residuals(
    pair: &CheckGraphPair,
    n: &NoiseParams,
    seed: u64,
    shot: u64,
    dec: &mut Decoder,
) -> Result<(bool, [Vec<u32>; 2]), CliError> {
    let f = sample_faults(pair, n, seed, shot);
    let mut open = false;
    let mut out = [Vec::new(), Vec::new()];
    for (slot, (g, flips)) in out.iter_mut().zip([(&pair.z, f.z_flips), (&pair.x, f.x_flips)]) {
        let c = dec.decode(g, &extract_syndrome(g, &flips))?;
        let mut all = flips;
        all.extend(c.edges);
        all.sort_unstable();
        let mut chain: Vec<u32> = Vec::new();
        for e in all {
            if chain.last() == Some(&e) {
                chain.pop();
            } else {
                chain.push(e);
            }
        }
        open |= !extract_syndrome(g, &chain).defects.is_empty();
        *slot = chain;
    }
    Ok((open, out))
}

fn decode_check(command: &str, o: &Opts) -> Result<Outcome, CliError> {
    let spec = protocol_spec(o)?;
    let n = noise(o, NoiseModel::Independent, o.p_single()?)?;
    n.validate_for_decoding()?;
    if o.min_failures.is_some() || o.cap.is_some() {
        return Err(CliError::invalid("decode-check takes --shots only"));
    }
    let shots = o.shots.unwrap_or(1000);
    let seed = seed(o);
    let pair = compile(&spec, &n)?;
    let mut dec = Decoder::new();
    let (mut open, mut failures) = (0u64, 0u64);
    for shot in 0..shots {
        let (is_open, [z, x]) = residuals(&pair, &n, seed, shot, &mut dec)?;
        if is_open {
            open += 1;
        } else if !classify(&pair, &z, &x)?.is_identity() {
            failures += 1;
        }
    }
    println!("shots={shots} open_residuals={open} failures={failures}");
    let protocol = serde_json::to_value(spec.kind).expect("kind serializes");
    let mut out =
        Writer::new(&out_dir(o), stem(command, protocol.as_str().unwrap_or_default(), &spec.params.d.to_string(), &n))?;
    out.summary(json!({
        "command": command,
        "config": config_json(o),
        "protocol": spec.kind,
        "params": spec.params,
        "masterSeed": seed,
        "shots": shots,
        "openResiduals": open,
        "failures": failures,
        "partial": false,
    }))?;
    if open > 0 {
        return Err(CliError::runtime(format!("{open} of {shots} shots left an open residual chain")));
    }
    Ok(Outcome { partial: false })
}
