//! Monte Carlo harnesses. Each experiment runs an ensemble of independent
//! paths, reduces them to order-independent statistics and emits a report
//! whose gates record pass/fail outcomes with the measured values.

mod common;
mod exit;
mod phi1;
mod probe;
mod schauder;
mod selftest;
mod tail;
mod tracking;

pub use common::{
    auto_thresholds, exceedance_curve, fit_rate, record_steps, uniform_times, write_json, ExceedancePoint, FitStatus,
    Gate, RateFit, Summary,
};
pub use exit::{pitchfork_exit_experiment, ExitConfig, ExitReport, ExitSeries, SurvivalPoint, TubeConvention};
pub use phi1::{
    phi1_experiment, phi1_samples, phi1perp_experiment, DoublingRatio, Phi1Config, Phi1PerpConfig, Phi1PerpPoint,
    Phi1PerpReport, Phi1Point, Phi1Report, Phi1Sweep,
};
pub use probe::{pairing_probe, ProbeConfig, ProbeCurve, ProbeReport};
pub use schauder::{log_times, schauder_probe, SchauderConfig, SchauderReport};
pub use selftest::{run_selftest, SelftestReport};
pub use tail::{tail_experiment, tail_statistics, TailConfig, TailCurve, TailReport, TAIL_HEADER};
pub use tracking::{tracking_experiment, TrackingConfig, TrackingPoint, TrackingReport};
