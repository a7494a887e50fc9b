use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::time::Duration;

use crate::ServerError;

pub const DEFAULT_MAX_BURST_PATHS: usize = 512;
pub const DEFAULT_MAX_CONNECTIONS: usize = 1024;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub docroot: PathBuf,
    pub addr: SocketAddr,
    /// Emulated server cost, paid once per parsed request.
    pub processing_delay: Duration,
    /// Pay `processing_delay` once per object inside a burst instead of once
    /// per BURST request.
    pub per_object_delay: bool,
    pub max_burst_paths: usize,
    pub max_connections: usize,
}

impl ServerConfig {
    /// Loopback on an OS-assigned port with no emulated delay.
    pub fn new(docroot: impl Into<PathBuf>) -> Self {
        Self {
            docroot: docroot.into(),
            addr: SocketAddr::from((Ipv4Addr::LOCALHOST, 0)),
            processing_delay: Duration::ZERO,
            per_object_delay: false,
            max_burst_paths: DEFAULT_MAX_BURST_PATHS,
            max_connections: DEFAULT_MAX_CONNECTIONS,
        }
    }

    pub fn with_port(mut self, port: u16) -> Self {
        self.addr.set_port(port);
        self
    }

    pub fn with_processing_delay(mut self, delay: Duration) -> Self {
        self.processing_delay = delay;
        self
    }

    pub fn with_per_object_delay(mut self, on: bool) -> Self {
        self.per_object_delay = on;
        self
    }

    pub fn with_max_burst_paths(mut self, max: usize) -> Self {
        self.max_burst_paths = max;
        self
    }

    pub fn with_max_connections(mut self, max: usize) -> Self {
        self.max_connections = max;
        self
    }

    /// Checks the invariants and canonicalises the document root.
    pub(crate) fn validated(mut self) -> Result<Self, ServerError> {
        let root = std::fs::canonicalize(&self.docroot).map_err(|e| ServerError::Docroot {
            path: self.docroot.clone(),
            reason: e.to_string(),
        })?;
        if !root.is_dir() {
            return Err(ServerError::Docroot {
                path: self.docroot,
                reason: "not a directory".into(),
            });
        }
        std::fs::read_dir(&root).map_err(|e| ServerError::Docroot {
            path: root.clone(),
            reason: e.to_string(),
        })?;
        if self.max_burst_paths == 0 {
            return Err(ServerError::Config("max_burst_paths must be at least 1"));
        }
        if self.max_connections == 0 {
            return Err(ServerError::Config("max_connections must be at least 1"));
        }
        self.docroot = root;
        Ok(self)
    }
}
