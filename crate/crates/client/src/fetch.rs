//! Whole-page loads in GET mode and BURST mode.
//!
//! Both modes fetch the HTML with a GET first and only then look at the
//! inlined objects. In GET mode up to `C` connections pull objects from a
//! shared queue one GET at a time; in BURST mode the missing objects are
//! partitioned into at most `C` groups and each group is fetched with a
//! single BURST request on its own connection. The connection that carried
//! the HTML is reused as the first object connection in both modes.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use burst_core::wire::BurstRequest;
use burst_core::{extract_manifest_for_origin, ObjectRef, PageManifest};
use tokio::task::JoinSet;

use crate::partition::{diff_cache, partition_missing, MissingObject};
use crate::{FetchError, HttpConnection, ObjectCache};

/// Connection budget of common desktop browsers.
pub const DEFAULT_CONNECTIONS: usize = 6;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Get,
    Burst,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Get => "get",
            Mode::Burst => "burst",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "get" => Ok(Mode::Get),
            "burst" => Ok(Mode::Burst),
            other => Err(format!("unknown mode {other:?} (expected get or burst)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchPlan {
    pub mode: Mode,
    pub connections: usize,
    pub page: ObjectRef,
    pub host: String,
    pub port: u16,
    /// Deadline for the whole page load.
    pub timeout: Duration,
    /// Object sizes known in advance; when every missing object has one,
    /// BURST groups are balanced by bytes instead of dealt round-robin.
    pub size_hints: Option<HashMap<ObjectRef, u64>>,
}

impl FetchPlan {
    pub fn new(mode: Mode, connections: usize, page: ObjectRef, host: impl Into<String>, port: u16) -> Self {
        Self {
            mode,
            connections,
            page,
            host: host.into(),
            port,
            timeout: DEFAULT_TIMEOUT,
            size_hints: None,
        }
    }

    pub fn for_addr(mode: Mode, connections: usize, page: ObjectRef, addr: SocketAddr) -> Self {
        Self::new(mode, connections, page, addr.ip().to_string(), addr.port())
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_size_hints(mut self, hints: HashMap<ObjectRef, u64>) -> Self {
        self.size_hints = Some(hints);
        self
    }

    fn authority(&self) -> String {
        if self.host.contains(':') && !self.host.starts_with('[') {
            format!("[{}]:{}", self.host, self.port)
        } else {
            format!("{}:{}", self.host, self.port)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjectOutcome {
    Fetched(Vec<u8>),
    Cached(Arc<[u8]>),
    /// The server answered with a non-200 status.
    Missing(u16),
}

impl ObjectOutcome {
    pub fn bytes(&self) -> Option<&[u8]> {
        match self {
            ObjectOutcome::Fetched(b) => Some(b),
            ObjectOutcome::Cached(b) => Some(b),
            ObjectOutcome::Missing(_) => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ObjectOutcome::Fetched(_) => "200".into(),
            ObjectOutcome::Cached(_) => "cached".into(),
            ObjectOutcome::Missing(s) => s.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchResult {
    pub manifest: PageManifest,
    pub html: Vec<u8>,
    /// One entry per manifest object.
    pub objects: BTreeMap<ObjectRef, ObjectOutcome>,
    /// From the HTML request write to the last object byte read.
    pub total_duration: Duration,
    pub request_count: usize,
    pub bytes_on_wire: u64,
}

impl FetchResult {
    /// Bytes of every object that is available, fetched or cached.
    pub fn bodies(&self) -> BTreeMap<&ObjectRef, &[u8]> {
        self.objects
            .iter()
            .filter_map(|(k, v)| v.bytes().map(|b| (k, b)))
            .collect()
    }
}

#[derive(Default)]
struct WorkerReport {
    outcomes: Vec<(ObjectRef, ObjectOutcome)>,
    requests: usize,
    bytes: u64,
    error: Option<FetchError>,
}

impl WorkerReport {
    fn absorb(&mut self, conn: &HttpConnection) {
        self.requests += conn.requests_sent();
        self.bytes += conn.bytes_on_wire();
    }
}

/// Loads `plan.page` and every inlined object not already in `cache`.
///
/// Objects answered with 200 are added to the cache.
pub async fn fetch_page(plan: &FetchPlan, cache: &ObjectCache) -> Result<FetchResult, FetchError> {
    if plan.connections == 0 {
        return Err(FetchError::InvalidPlan("connections must be at least 1"));
    }
    match tokio::time::timeout(plan.timeout, load(plan, cache)).await {
        Ok(result) => result,
        Err(_) => Err(FetchError::Timeout(plan.timeout)),
    }
}

async fn load(plan: &FetchPlan, cache: &ObjectCache) -> Result<FetchResult, FetchError> {
    let authority = plan.authority();
    let addr = tokio::net::lookup_host((plan.host.as_str(), plan.port))
        .await?
        .next()
        .ok_or_else(|| FetchError::Resolve(authority.clone()))?;
    let mut first = HttpConnection::connect(addr, &authority).await?;

    let started = Instant::now();
    let page = first.get(&plan.page).await?;
    if page.status != 200 {
        return Err(FetchError::PageStatus(page.status));
    }
    let manifest = extract_manifest_for_origin(&page.body, &plan.page, &authority);

    let mut objects = BTreeMap::new();
    for obj in &manifest.objects {
        if let Some(bytes) = cache.get(obj) {
            objects.insert(obj.clone(), ObjectOutcome::Cached(bytes));
        }
    }
    let missing = diff_cache(&manifest, cache);
    tracing::debug!(page = %plan.page, total = manifest.len(), missing = missing.len(), mode = %plan.mode, "page parsed");

    let reports = if missing.is_empty() {
        let mut report = WorkerReport::default();
        report.absorb(&first);
        vec![report]
    } else {
        match plan.mode {
            Mode::Get => get_phase(first, missing.clone(), plan.connections, addr, &authority).await,
            Mode::Burst => {
                let described: Vec<MissingObject> = missing
                    .iter()
                    .map(|path| MissingObject {
                        size: plan.size_hints.as_ref().and_then(|h| h.get(path).copied()),
                        path: path.clone(),
                    })
                    .collect();
                let groups = partition_missing(&described, plan.connections)?;
                burst_phase(first, groups, addr, &authority).await
            }
        }
    };
    let total_duration = started.elapsed();

    let mut request_count = 0;
    let mut bytes_on_wire = 0;
    let mut failure = None;
    for report in reports {
        request_count += report.requests;
        bytes_on_wire += report.bytes;
        for (path, outcome) in report.outcomes {
            if let ObjectOutcome::Fetched(bytes) = &outcome {
                cache.insert(path.clone(), bytes.clone());
            }
            objects.insert(path, outcome);
        }
        if failure.is_none() {
            failure = report.error;
        }
    }
    if let Some(source) = failure {
        let received = missing.iter().filter(|m| objects.contains_key(m)).count();
        return Err(FetchError::Partial {
            received,
            expected: missing.len(),
            source: Box::new(source),
        });
    }

    Ok(FetchResult {
        manifest,
        html: page.body,
        objects,
        total_duration,
        request_count,
        bytes_on_wire,
    })
}

async fn get_phase(
    first: HttpConnection,
    missing: Vec<ObjectRef>,
    connections: usize,
    addr: SocketAddr,
    authority: &str,
) -> Vec<WorkerReport> {
    let workers = connections.min(missing.len());
    let queue = Arc::new(Mutex::new(VecDeque::from(missing)));
    let mut tasks = JoinSet::new();
    let mut first = Some(first);
    for _ in 0..workers {
        let conn = first.take();
        let queue = Arc::clone(&queue);
        let authority = authority.to_owned();
        tasks.spawn(async move {
            let mut report = WorkerReport::default();
            let mut conn = match conn {
                Some(c) => c,
                None => match HttpConnection::connect(addr, &authority).await {
                    Ok(c) => c,
                    Err(e) => {
                        report.error = Some(e);
                        return report;
                    }
                },
            };
            loop {
                let next = queue.lock().expect("queue lock poisoned").pop_front();
                let Some(path) = next else { break };
                match conn.get(&path).await {
                    Ok(frame) if frame.status == 200 => {
                        report.outcomes.push((path, ObjectOutcome::Fetched(frame.body)));
                    }
                    Ok(frame) => report.outcomes.push((path, ObjectOutcome::Missing(frame.status))),
                    Err(e) => {
                        report.error = Some(e);
                        break;
                    }
                }
            }
            report.absorb(&conn);
            report
        });
    }
    collect(tasks).await
}

async fn burst_phase(
    first: HttpConnection,
    groups: Vec<Vec<ObjectRef>>,
    addr: SocketAddr,
    authority: &str,
) -> Vec<WorkerReport> {
    let mut tasks = JoinSet::new();
    let mut first = Some(first);
    for group in groups {
        let conn = first.take();
        let authority = authority.to_owned();
        tasks.spawn(async move {
            let mut report = WorkerReport::default();
            let mut conn = match conn {
                Some(c) => c,
                None => match HttpConnection::connect(addr, &authority).await {
                    Ok(c) => c,
                    Err(e) => {
                        report.error = Some(e);
                        return report;
                    }
                },
            };
            let req = BurstRequest::new(group).expect("partition groups are non-empty and distinct");
            match conn.burst(&req).await {
                Ok(resp) => {
                    for part in resp.parts {
                        let outcome = match part.status {
                            200 => ObjectOutcome::Fetched(part.body),
                            s => ObjectOutcome::Missing(s),
                        };
                        report.outcomes.push((part.path, outcome));
                    }
                }
                Err(e) => report.error = Some(e),
            }
            report.absorb(&conn);
            report
        });
    }
    collect(tasks).await
}

async fn collect(mut tasks: JoinSet<WorkerReport>) -> Vec<WorkerReport> {
    let mut reports = Vec::with_capacity(tasks.len());
    while let Some(joined) = tasks.join_next().await {
        match joined {
            Ok(report) => reports.push(report),
            Err(e) => reports.push(WorkerReport {
                error: Some(FetchError::Worker(e.to_string())),
                ..WorkerReport::default()
            }),
        }
    }
    reports
}
