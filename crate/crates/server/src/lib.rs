//! Static-file HTTP/1.1 server that understands both GET and BURST.
//!
//! Every connection is served on its own task and handles keep-alive
//! requests sequentially. A configurable processing delay is paid once per
//! parsed request, which is how desk-scale benchmarks emulate per-request
//! server cost. Request counters are exposed at `GET /_stats`.

mod config;
mod connection;
pub mod files;
pub mod handler;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{oneshot, watch, Semaphore};
use tokio::task::JoinSet;

pub use config::{ServerConfig, DEFAULT_MAX_BURST_PATHS, DEFAULT_MAX_CONNECTIONS};
pub use connection::STATS_PATH;
pub use handler::{handle_burst, handle_burst_bytes, handle_get};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot use document root {path}: {reason}")]
    Docroot { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("cannot bind {addr}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Counters of parsed requests. `/_stats` itself is not counted.
#[derive(Debug, Default)]
pub struct Stats {
    requests_total: AtomicU64,
    burst_requests: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StatsSnapshot {
    pub requests_total: u64,
    pub burst_requests: u64,
}

impl StatsSnapshot {
    /// Parses the `/_stats` body.
    pub fn parse(text: &str) -> Option<Self> {
        let mut snap = StatsSnapshot::default();
        let mut seen = (false, false);
        for line in text.lines() {
            let (key, value) = line.split_once('=')?;
            let value: u64 = value.trim().parse().ok()?;
            match key.trim() {
                "requests_total" => (snap.requests_total, seen.0) = (value, true),
                "burst_requests" => (snap.burst_requests, seen.1) = (value, true),
                _ => {}
            }
        }
        (seen.0 && seen.1).then_some(snap)
    }

    /// Counts accumulated since `earlier`.
    pub fn since(&self, earlier: &StatsSnapshot) -> StatsSnapshot {
        StatsSnapshot {
            requests_total: self.requests_total - earlier.requests_total,
            burst_requests: self.burst_requests - earlier.burst_requests,
        }
    }
}

impl Stats {
    pub fn record_request(&self) {
        self.requests_total.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_burst(&self) {
        self.requests_total.fetch_add(1, Ordering::Relaxed);
        self.burst_requests.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            requests_total: self.requests_total.load(Ordering::Relaxed),
            burst_requests: self.burst_requests.load(Ordering::Relaxed),
        }
    }

    pub fn render(&self) -> String {
        let s = self.snapshot();
        format!(
            "requests_total={}\nburst_requests={}\n",
            s.requests_total, s.burst_requests
        )
    }
}

/// A bound listener, ready to serve.
pub struct Server {
    listener: TcpListener,
    config: Arc<ServerConfig>,
    stats: Arc<Stats>,
}

impl Server {
    pub async fn bind(config: ServerConfig) -> Result<Self, ServerError> {
        let config = config.validated()?;
        let listener = TcpListener::bind(config.addr)
            .await
            .map_err(|source| ServerError::Bind {
                addr: config.addr,
                source,
            })?;
        Ok(Self {
            listener,
            config: Arc::new(config),
            stats: Arc::new(Stats::default()),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn stats(&self) -> Arc<Stats> {
        Arc::clone(&self.stats)
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    /// Accepts connections until `shutdown` resolves, then stops accepting,
    /// lets every in-flight response finish and returns once all
    /// connections are closed.
    pub async fn run_until<F>(self, shutdown: F) -> Result<(), ServerError>
    where
        F: Future<Output = ()>,
    {
        let (stop_tx, stop_rx) = watch::channel(false);
        let permits = Arc::new(Semaphore::new(self.config.max_connections));
        let mut connections = JoinSet::new();
        tokio::pin!(shutdown);

        loop {
            let permit = tokio::select! {
                p = Arc::clone(&permits).acquire_owned() => p.expect("semaphore never closed"),
                _ = &mut shutdown => break,
            };
            let (stream, peer) = tokio::select! {
                accepted = self.listener.accept() => match accepted {
                    Ok(a) => a,
                    Err(e) => {
                        tracing::warn!(error = %e, "accept failed");
                        continue;
                    }
                },
                _ = &mut shutdown => break,
            };
            tracing::trace!(%peer, "accepted");
            let config = Arc::clone(&self.config);
            let stats = Arc::clone(&self.stats);
            let stop = stop_rx.clone();
            connections.spawn(async move {
                if let Err(e) = connection::serve_connection(stream, config, stats, stop).await {
                    tracing::debug!(%peer, error = %e, "connection ended with error");
                }
                drop(permit);
            });
            while connections.try_join_next().is_some() {}
        }

        drop(self.listener);
        let _ = stop_tx.send(true);
        while connections.join_next().await.is_some() {}
        Ok(())
    }
}

/// A server running on its own runtime thread, for tests and benchmarks
/// that must not share a scheduler with the client they measure.
pub struct BackgroundServer {
    addr: SocketAddr,
    stats: Arc<Stats>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Result<(), ServerError>>>,
}

impl BackgroundServer {
    /// Binds and starts serving on a dedicated thread. The runtime lives
    /// entirely on that thread, so this may be called from async code too.
    pub fn start(config: ServerConfig) -> Result<Self, ServerError> {
        let (ready_tx, ready_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let thread =
            std::thread::Builder::new()
                .name("burst-server".into())
                .spawn(move || -> Result<(), ServerError> {
                    let runtime = tokio::runtime::Builder::new_multi_thread()
                        .worker_threads(4)
                        .thread_name("burst-server-worker")
                        .enable_all()
                        .build()?;
                    let server = match runtime.block_on(Server::bind(config)) {
                        Ok(server) => server,
                        Err(e) => {
                            let _ = ready_tx.send(Err(e));
                            return Ok(());
                        }
                    };
                    let _ = ready_tx.send(Ok((server.local_addr(), server.stats())));
                    runtime.block_on(server.run_until(async {
                        let _ = stop_rx.await;
                    }))
                })?;
        match ready_rx.recv() {
            Ok(Ok((addr, stats))) => Ok(Self {
                addr,
                stats,
                stop: Some(stop_tx),
                thread: Some(thread),
            }),
            Ok(Err(e)) => {
                let _ = thread.join();
                Err(e)
            }
            Err(_) => match thread.join() {
                Ok(Err(e)) => Err(e),
                _ => Err(ServerError::Config("server thread exited during startup")),
            },
        }
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    pub fn shutdown(mut self) -> Result<(), ServerError> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> Result<(), ServerError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or(Ok(())),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
