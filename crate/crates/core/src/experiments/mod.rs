//! Monte Carlo runs and the analyses built on them.

pub mod analytic;
pub mod channel;
pub mod engine;
pub mod stats;
pub mod sweeps;
pub mod threshold;

pub use analytic::{estimate_optimal_h2, predict_logical_rate, AnalyticModel};
pub use channel::{
    correlation_measure, estimate_cnot_channel, fit_connection_params, symmetry_partner_check, ChannelEstimate,
    ConnectionFit, MemoryChannelEstimate, PartnerCheck,
};
pub use engine::{run_shots, RunOptions, StopRule, Tally};
pub use stats::wilson_interval;
pub use sweeps::{saturation_h2, sweep_h2, sweep_w, timelike_crossing, SweepPoint};
pub use threshold::{find_threshold, Crossing, CurvePoint, Family, ThresholdResult};
