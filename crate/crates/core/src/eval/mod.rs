//! Error metrics, identifiability gates and the Monte Carlo sweep engine.

mod gates;
mod metrics;
mod sweep;

pub use gates::{identifiability_check, is_allowed, Condition, Method};
pub use metrics::{nmse, rmse, to_db};
pub use sweep::{
    aggregate, bals_seed, derive_seed, evaluate_echo, noise_seed, run_sweep, trial_scene, trial_seed, AggregateRow,
    SweepConfig, SweepReport, SweepSettings, TrialRecord, TrialScene,
};
