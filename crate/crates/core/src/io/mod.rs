pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{load_config, parse_config, ConfigError, RunConfig};
pub use output::{
    parse_moments_csv, parse_trajectory_csv, write_moments, write_report, write_trajectory,
    VerificationReport,
};
