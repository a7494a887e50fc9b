//! Repeated cold-cache page loads against a local server.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use burst_client::{fetch_page, FetchPlan, Mode, ObjectCache};
use burst_core::ObjectRef;
use burst_server::{BackgroundServer, ServerConfig};

use crate::fixture::{
    generate_experiment_fixture, FixtureConfig, CSS_SIZE, DEFAULT_IMAGE_SIZE, DEFAULT_SEED, FONT_SIZE, JS_SIZE,
};
use crate::{BenchError, RunStats};

pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_DELAY: Duration = Duration::from_millis(20);

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub image_counts: Vec<usize>,
    /// (mode, connection count) pairs.
    pub modes: Vec<(Mode, usize)>,
    pub runs_per_point: usize,
    pub image_size: u64,
    pub font_size: u64,
    pub css_size: u64,
    pub js_size: u64,
    /// Server-side delay per request.
    pub processing_delay: Duration,
    pub seed: u64,
    pub fetch_timeout: Duration,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            image_counts: vec![1, 10, 25, 50, 100, 150],
            modes: vec![(Mode::Get, 6), (Mode::Burst, 1), (Mode::Burst, 6)],
            runs_per_point: DEFAULT_RUNS,
            image_size: DEFAULT_IMAGE_SIZE,
            font_size: FONT_SIZE,
            css_size: CSS_SIZE,
            js_size: JS_SIZE,
            processing_delay: DEFAULT_DELAY,
            seed: DEFAULT_SEED,
            fetch_timeout: Duration::from_secs(120),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.runs_per_point < 2 {
            return Err(BenchError::Config("runs_per_point must be at least 2"));
        }
        if self.image_counts.is_empty() || self.modes.is_empty() {
            return Err(BenchError::Config("need at least one image count and one mode"));
        }
        if self.modes.iter().any(|&(_, c)| c == 0) {
            return Err(BenchError::Config("connection counts must be at least 1"));
        }
        self.fixture().validate()
    }

    fn fixture(&self) -> FixtureConfig {
        FixtureConfig {
            image_count: self.image_counts.iter().copied().max().unwrap_or(0),
            image_size: self.image_size,
            font_size: self.font_size,
            css_size: self.css_size,
            js_size: self.js_size,
            seed: self.seed,
        }
    }

    /// Every (N, mode, C) point in output order, duplicates removed.
    pub fn points(&self) -> Vec<(usize, Mode, usize)> {
        let mut points: Vec<_> = self
            .image_counts
            .iter()
            .flat_map(|&n| self.modes.iter().map(move |&(m, c)| (n, m, c)))
            .collect();
        points.sort();
        points.dedup();
        points
    }
}

/// Generates the fixture under `workdir`, serves it from a background
/// server and measures every point sequentially.
pub async fn run_experiment(config: &ExperimentConfig, workdir: &Path) -> Result<Vec<RunStats>, BenchError> {
    config.validate()?;
    let mut counts = config.image_counts.clone();
    counts.sort_unstable();
    counts.dedup();
    let fixture = generate_experiment_fixture(&config.fixture(), &counts, workdir)?;
    let server =
        BackgroundServer::start(ServerConfig::new(&fixture.root).with_processing_delay(config.processing_delay))?;

    let mut stats = Vec::new();
    for (n, mode, c) in config.points() {
        let page = fixture.page(n).expect("a page exists for every image count").clone();
        let point = PointSpec {
            addr: server.addr(),
            page,
            mode,
            connections: c,
            runs: config.runs_per_point,
            timeout: config.fetch_timeout,
            size_hints: fixture.size_hints(n),
        };
        let row = match measure_point(&point).await {
            Ok(samples) => RunStats::from_samples(n, mode, c, samples),
            Err(e) => {
                tracing::warn!(n, %mode, c, error = %e, "point failed");
                RunStats::failed(n, mode, c, e.to_string())
            }
        };
        tracing::info!(n, %mode, c, mean_ms = row.mean * 1000.0, "point done");
        stats.push(row);
    }
    server.shutdown()?;
    Ok(stats)
}

/// One measurement point against an already running server.
#[derive(Debug, Clone)]
pub struct PointSpec {
    pub addr: SocketAddr,
    pub page: ObjectRef,
    pub mode: Mode,
    pub connections: usize,
    pub runs: usize,
    pub timeout: Duration,
    pub size_hints: HashMap<ObjectRef, u64>,
}

/// One untimed warm-up load, then `runs` timed loads, each with an empty
/// cache. Returns durations in seconds.
pub async fn measure_point(point: &PointSpec) -> Result<Vec<f64>, BenchError> {
    let plan = FetchPlan::for_addr(point.mode, point.connections, point.page.clone(), point.addr)
        .with_timeout(point.timeout)
        .with_size_hints(point.size_hints.clone());
    fetch_page(&plan, &ObjectCache::new()).await?;
    let mut samples = Vec::with_capacity(point.runs);
    for _ in 0..point.runs {
        let result = fetch_page(&plan, &ObjectCache::new()).await?;
        if let Some((path, o)) = result.objects.iter().find(|(_, o)| o.bytes().is_none()) {
            return Err(BenchError::Incomplete(format!("{path} answered {}", o.label())));
        }
        samples.push(result.total_duration.as_secs_f64());
    }
    Ok(samples)
}
