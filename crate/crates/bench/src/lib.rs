//! Desk-scale GET vs BURST page-load experiments: fixture pages, a loopback
//! server with a per-request delay, repeated cold-cache loads and CSV output.

mod experiment;
pub mod fixture;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use experiment::{measure_point, run_experiment, ExperimentConfig, PointSpec, DEFAULT_DELAY, DEFAULT_RUNS};
pub use fixture::{generate_experiment_fixture, generate_fixture, Fixture, FixtureConfig};
pub use stats::{improvement, mean_stddev, summarize, RunStats, CSV_HEADER};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment configuration: {0}")]
    Config(&'static str),
    #[error("cannot write fixture file {}", path.display())]
    Fixture {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Server(#[from] burst_server::ServerError),
    #[error(transparent)]
    Fetch(#[from] burst_client::FetchError),
    #[error("page load incomplete: {0}")]
    Incomplete(String),
    #[error("no statistics to summarize")]
    EmptyStats,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
