//! Page fetcher speaking plain GET or BURST to a `burst-server`.

mod cache;
mod connection;
mod fetch;
pub mod partition;

use std::net::SocketAddr;
use std::time::Duration;

use burst_core::WireError;
use thiserror::Error;

pub use cache::{file_name as cache_file_name, ObjectCache};
pub use connection::HttpConnection;
pub use fetch::{fetch_page, FetchPlan, FetchResult, Mode, ObjectOutcome, DEFAULT_CONNECTIONS, DEFAULT_TIMEOUT};
pub use partition::{diff_cache, partition_missing, MissingObject, PartitionError};

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("invalid fetch plan: {0}")]
    InvalidPlan(&'static str),
    #[error("cannot resolve {0}")]
    Resolve(String),
    #[error("cannot connect to {addr}")]
    Connect {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("page request failed with status {0}")]
    PageStatus(u16),
    #[error("protocol error: {0}")]
    Wire(#[from] WireError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("page load failed after {received} of {expected} objects")]
    Partial {
        received: usize,
        expected: usize,
        #[source]
        source: Box<FetchError>,
    },
    #[error("page load did not finish within {0:?}")]
    Timeout(Duration),
    #[error("connection worker failed: {0}")]
    Worker(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
