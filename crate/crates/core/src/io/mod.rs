//! On-disk formats: the configuration file, the dataset container and the
//! result CSVs.

mod config;
mod dataset;
mod results;

pub use config::{config_to_string, load_config, parse_config};
pub use dataset::{Dataset, MAGIC, VERSION};
pub use results::{
    append_trials, read_aggregates, read_header, read_trials, write_aggregates, write_trials, AGGREGATE_COLUMNS,
    TRIAL_COLUMNS,
};
