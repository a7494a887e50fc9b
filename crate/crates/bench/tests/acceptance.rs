//! End-to-end acceptance checks. Runs every criterion, prints one PASS/FAIL
//! line each and exits non-zero if any failed.
//!
//! `cargo test -p burst-bench --test acceptance -- 4 6` runs only criteria 4
//! and 6.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use burst_bench::fixture::KIB;
use burst_bench::{run_experiment, ExperimentConfig};
use burst_client::partition::round_robin_groups;
use burst_client::{fetch_page, FetchPlan, HttpConnection, MissingObject, Mode, ObjectCache, ObjectOutcome};
use burst_core::model::{
    burst_delay, efficiency_sweep, get_delay, get_efficiency, DelayParams, ObjectSet, OverheadParams, SweepMode,
};
use burst_core::wire::{
    decode_burst_request, decode_burst_response, encode_burst_request, encode_burst_response, BurstRequest,
};
use burst_core::ObjectRef;
use burst_server::{handle_burst_bytes, BackgroundServer, ServerConfig, StatsSnapshot};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use tokio::runtime::Runtime;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn(&Runtime) -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "efficiency golden value",
        limit: Duration::from_secs(1),
        run: efficiency_golden,
    },
    Criterion {
        id: 2,
        name: "efficiency sweep shape",
        limit: Duration::from_secs(1),
        run: efficiency_sweep_shape,
    },
    Criterion {
        id: 3,
        name: "message-count law",
        limit: Duration::from_secs(5),
        run: message_counts,
    },
    Criterion {
        id: 4,
        name: "desk-scale latency ratios",
        limit: Duration::from_secs(180),
        run: latency_ratios,
    },
    Criterion {
        id: 5,
        name: "GET/BURST content equivalence",
        limit: Duration::from_secs(60),
        run: content_equivalence,
    },
    Criterion {
        id: 6,
        name: "partition oracle",
        limit: Duration::from_secs(30),
        run: partition_oracle,
    },
    Criterion {
        id: 7,
        name: "delay-model oracle",
        limit: Duration::from_secs(10),
        run: delay_oracle,
    },
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .expect("tokio runtime");

    let mut failed = 0;
    for c in CRITERIA
        .iter()
        .filter(|c| selected.is_empty() || selected.contains(&c.id))
    {
        let started = Instant::now();
        let mut outcome = (c.run)(&runtime);
        let elapsed = started.elapsed();
        if outcome.is_ok() && elapsed > c.limit {
            outcome = Err(format!("took {elapsed:.2?}, limit {:?}", c.limit));
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{}] {}: {detail} ({:.2}s)", c.id, c.name, elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn r(p: &str) -> ObjectRef {
    ObjectRef::new(p).unwrap()
}

// 1

fn efficiency_golden(_: &Runtime) -> Outcome {
    let params = OverheadParams::new(20, 20, 0);
    let got = get_efficiency(&ObjectSet::uniform(3, 200), &params).map_err(|e| e.to_string())?;
    // Three exchanges of 2*(20+20) headers, a 40-byte ACK and 200 payload bytes.
    let oracle = 600.0 / (3.0 * (80.0 + 40.0 + 200.0));
    ensure((got - 0.625).abs() <= 1e-12 && (got - oracle).abs() <= 1e-12, || {
        format!("got {got}, expected 0.625")
    })?;
    Ok(format!("efficiency = {got}"))
}

// 2

fn efficiency_sweep_shape(_: &Runtime) -> Outcome {
    let params = OverheadParams::new(20, 20, 0);
    let cs = [1usize, 2, 4, 6];
    let rows = efficiency_sweep(1400, 150, &params, &cs).map_err(|e| e.to_string())?;
    ensure(rows.len() == 150 * (1 + cs.len()), || format!("{} rows", rows.len()))?;

    let get_oracle = 1400.0 / 1520.0;
    let mut get_at = HashMap::new();
    for row in &rows {
        if row.mode == SweepMode::Get {
            ensure((row.efficiency - get_oracle).abs() <= 1e-9, || {
                format!("GET at N={} is {}", row.n, row.efficiency)
            })?;
            get_at.insert(row.n, row.efficiency);
        }
    }
    let mut burst1_at_150 = 0.0;
    for row in &rows {
        let SweepMode::Burst { connections: c } = row.mode else {
            continue;
        };
        let n = row.n as f64;
        let oracle = n * 1400.0 / (row.n.min(c) as f64 * 120.0 + n * 1400.0);
        ensure((row.efficiency - oracle).abs() <= 1e-9, || {
            format!("BURST@{c} at N={} is {}, oracle {oracle}", row.n, row.efficiency)
        })?;
        let get = get_at[&row.n];
        if row.n <= c {
            ensure((row.efficiency - get).abs() <= 1e-9, || {
                format!("BURST@{c} != GET at N={}", row.n)
            })?;
        } else {
            ensure(row.efficiency > get, || {
                format!("BURST@{c} not above GET at N={}", row.n)
            })?;
        }
        if c == 1 && row.n == 150 {
            burst1_at_150 = row.efficiency;
        }
    }
    ensure(burst1_at_150 > 0.999, || format!("BURST@1 at N=150 is {burst1_at_150}"))?;
    Ok(format!("GET = {get_oracle:.5}, BURST@1(150) = {burst1_at_150:.6}"))
}

// 3

fn message_counts(rt: &Runtime) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut html = String::from("<html><body>");
    for i in 1..=4 {
        html.push_str(&format!("<img src=\"img{i}.jpg\">"));
        std::fs::write(dir.path().join(format!("img{i}.jpg")), vec![i as u8; 1000 * i]).map_err(|e| e.to_string())?;
    }
    html.push_str("</body></html>");
    std::fs::write(dir.path().join("index.html"), html).map_err(|e| e.to_string())?;
    let server = BackgroundServer::start(ServerConfig::new(dir.path())).map_err(|e| e.to_string())?;

    let stats = || async {
        let mut conn = HttpConnection::connect(server.addr(), "stats").await.unwrap();
        let frame = conn.get(&r("/_stats")).await.unwrap();
        StatsSnapshot::parse(std::str::from_utf8(&frame.body).unwrap()).unwrap()
    };
    let cases = [
        (Mode::Get, 1, 5, 0),
        (Mode::Get, 2, 5, 0),
        (Mode::Get, 6, 5, 0),
        (Mode::Burst, 1, 2, 1),
        (Mode::Burst, 2, 3, 2),
    ];
    let mut seen = Vec::new();
    for (mode, c, want_total, want_burst) in cases {
        let delta = rt.block_on(async {
            let before = stats().await;
            let plan = FetchPlan::for_addr(mode, c, r("/index.html"), server.addr());
            let result = fetch_page(&plan, &ObjectCache::new())
                .await
                .map_err(|e| e.to_string())?;
            ensure(result.bodies().len() == 4, || {
                format!("{mode}@{c}: {} objects", result.bodies().len())
            })?;
            Ok::<_, String>(stats().await.since(&before))
        })?;
        ensure(
            delta.requests_total == want_total && delta.burst_requests == want_burst,
            || {
                format!(
                    "{mode}@{c}: {} requests ({} BURST), expected {want_total} ({want_burst})",
                    delta.requests_total, delta.burst_requests
                )
            },
        )?;
        seen.push(format!("{mode}@{c}={}", delta.requests_total));
    }
    Ok(seen.join(" "))
}

// 4

fn latency_ratios(rt: &Runtime) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = ExperimentConfig {
        image_counts: vec![150],
        modes: vec![(Mode::Get, 6), (Mode::Burst, 1), (Mode::Burst, 6)],
        runs_per_point: 10,
        image_size: 30 * KIB,
        processing_delay: Duration::from_millis(20),
        ..ExperimentConfig::default()
    };
    let stats = rt
        .block_on(run_experiment(&config, dir.path()))
        .map_err(|e| e.to_string())?;
    let mean = |mode, c| {
        stats
            .iter()
            .find(|s| s.mode == mode && s.connections == c)
            .filter(|s| !s.is_failed() && s.samples.len() == 10)
            .map(|s| s.mean)
            .ok_or_else(|| format!("{mode}@{c} missing or failed"))
    };
    let get6 = mean(Mode::Get, 6)?;
    let burst1 = mean(Mode::Burst, 1)?;
    let burst6 = mean(Mode::Burst, 6)?;
    let (q6, q1) = (burst6 / get6, burst1 / get6);
    let detail = format!(
        "GET@6 {:.0} ms, BURST@1 {:.0} ms ({:.1}%), BURST@6 {:.0} ms ({:.1}%)",
        get6 * 1e3,
        burst1 * 1e3,
        q1 * 100.0,
        burst6 * 1e3,
        q6 * 100.0
    );
    ensure(q6 <= 0.55 && q1 <= 0.80, || detail.clone())?;
    Ok(detail)
}

// 5

const EXTENSIONS: [&str; 5] = ["jpg", "png", "css", "js", "woff2"];

/// Writes a page with `n` distinct objects of random bytes under random
/// paths, referenced through a mix of tags and absolute/relative URLs.
fn random_site(rng: &mut ChaCha8Rng, root: &Path, n: usize) -> Vec<ObjectRef> {
    let mut html = String::from("<!DOCTYPE html><html><head><title>t</title>\n");
    let mut objects = Vec::with_capacity(n);
    let mut body = String::from("</head><body>\n");
    for i in 0..n {
        let ext = EXTENSIONS[rng.random_range(0..EXTENSIONS.len())];
        let dir = ["", "a/", "a/b/", "static-1/"][rng.random_range(0..4)];
        let rel = format!("{dir}o_{i}~{}.{ext}", rng.random_range(0..1000u32));
        let size = match rng.random_range(0..10) {
            0 => 0,
            1 => rng.random_range(50_000..200_000),
            _ => rng.random_range(1..20_000),
        };
        let mut bytes = vec![0u8; size];
        rng.fill_bytes(&mut bytes);
        let file = root.join(&rel);
        std::fs::create_dir_all(file.parent().unwrap()).unwrap();
        std::fs::write(&file, bytes).unwrap();

        let url = if rng.random_bool(0.5) {
            format!("/{rel}")
        } else {
            rel.clone()
        };
        match ext {
            "css" => html.push_str(&format!("<link rel=\"stylesheet\" href=\"{url}\">\n")),
            "woff2" => html.push_str(&format!("<link rel=\"preload\" as=\"font\" href=\"{url}\">\n")),
            "js" => body.push_str(&format!("<script src=\"{url}\"></script>\n")),
            _ => body.push_str(&format!("<p><img src='{url}' alt=x></p>\n")),
        }
        if rng.random_bool(0.1) {
            body.push_str(&format!("<img src=\"/{rel}\">\n"));
        }
        objects.push(r(&format!("/{rel}")));
    }
    html.push_str(&body);
    html.push_str("</body></html>\n");
    std::fs::write(root.join("index.html"), html).unwrap();
    objects
}

fn digests(result: &burst_client::FetchResult) -> BTreeMap<ObjectRef, Vec<u8>> {
    result
        .objects
        .iter()
        .map(|(k, v)| match v {
            ObjectOutcome::Fetched(b) => (k.clone(), Sha256::digest(b).to_vec()),
            other => (k.clone(), format!("{other:?}").into_bytes()),
        })
        .collect()
}

fn content_equivalence(rt: &Runtime) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let sizes = [0usize, 1, 2, 7, 50];
    let mut burst_messages = 0;
    for trial in 0..100 {
        let n = sizes[trial % sizes.len()];
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let objects = random_site(&mut rng, dir.path(), n);
        let server = BackgroundServer::start(ServerConfig::new(dir.path())).map_err(|e| e.to_string())?;
        let (get_c, burst_c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let fail = |what: String| format!("trial {trial} (N={n}, GET@{get_c}, BURST@{burst_c}): {what}");

        let (get, burst) = rt.block_on(async {
            let get = fetch_page(
                &FetchPlan::for_addr(Mode::Get, get_c, r("/index.html"), server.addr()),
                &ObjectCache::new(),
            )
            .await;
            let burst = fetch_page(
                &FetchPlan::for_addr(Mode::Burst, burst_c, r("/index.html"), server.addr()),
                &ObjectCache::new(),
            )
            .await;
            (get, burst)
        });
        let get = get.map_err(|e| fail(format!("GET load: {e}")))?;
        let burst = burst.map_err(|e| fail(format!("BURST load: {e}")))?;
        ensure(get.objects.len() == n, || {
            fail(format!("GET saw {} objects", get.objects.len()))
        })?;
        ensure(digests(&get) == digests(&burst), || fail("object maps differ".into()))?;
        for obj in &objects {
            let disk = std::fs::read(dir.path().join(&obj.as_str()[1..])).unwrap();
            ensure(burst.bodies().get(obj) == Some(&&disk[..]), || {
                fail(format!("{obj} differs from disk"))
            })?;
        }

        // Re-create the bursts the client sent and check both directions of
        // the wire round-trip for byte stability.
        if n == 0 {
            continue;
        }
        let missing: Vec<_> = burst
            .manifest
            .objects
            .iter()
            .cloned()
            .map(MissingObject::without_size)
            .collect();
        let groups = burst_client::partition_missing(&missing, burst_c).map_err(|e| fail(e.to_string()))?;
        let docroot = std::fs::canonicalize(dir.path()).unwrap();
        for group in groups {
            let req = BurstRequest::new(group).map_err(|e| fail(e.to_string()))?;
            let bytes = encode_burst_request(&req, "127.0.0.1");
            let decoded = decode_burst_request(&bytes).map_err(|e| fail(format!("request decode: {e}")))?;
            ensure(
                decoded == req && encode_burst_request(&decoded, "127.0.0.1") == bytes,
                || fail("request round-trip unstable".into()),
            )?;
            let resp_bytes = rt.block_on(handle_burst_bytes(&req, &ServerConfig::new(&docroot)));
            let resp = decode_burst_response(&resp_bytes, &req).map_err(|e| fail(format!("response decode: {e}")))?;
            let again = encode_burst_response(&resp).map_err(|e| fail(e.to_string()))?;
            ensure(again == resp_bytes, || fail("response round-trip unstable".into()))?;
            burst_messages += 2;
        }
        server.shutdown().map_err(|e| e.to_string())?;
    }
    Ok(format!("100 trials, {burst_messages} BURST messages round-tripped"))
}

// 6

/// Smallest possible max-group total over every split of `sizes` into at
/// most `c` groups. Groups are opened in order so each set partition is
/// visited once.
fn optimum(sizes: &[u64], c: usize) -> u64 {
    fn go(sizes: &[u64], loads: &mut Vec<u64>, c: usize, best: &mut u64) {
        let current = loads.iter().copied().max().unwrap_or(0);
        if current >= *best {
            return;
        }
        let Some((&first, rest)) = sizes.split_first() else {
            *best = current;
            return;
        };
        for g in 0..loads.len() {
            loads[g] += first;
            go(rest, loads, c, best);
            loads[g] -= first;
        }
        if loads.len() < c {
            loads.push(first);
            go(rest, loads, c, best);
            loads.pop();
        }
    }
    let mut best = u64::MAX;
    go(sizes, &mut Vec::with_capacity(c), c, &mut best);
    best
}

/// Every non-decreasing sequence of length `len` over `1..=max`. LPT sorts
/// its input, so the order of the items cannot change the loads it reaches.
fn multisets(len: usize, max: u64, out: &mut Vec<Vec<u64>>, prefix: &mut Vec<u64>) {
    if prefix.len() == len {
        out.push(prefix.clone());
        return;
    }
    let start = prefix.last().copied().unwrap_or(1);
    for v in start..=max {
        prefix.push(v);
        multisets(len, max, out, prefix);
        prefix.pop();
    }
}

fn partition_oracle(_: &Runtime) -> Outcome {
    let refs: Vec<ObjectRef> = (0..8).map(|i| r(&format!("/o{i}"))).collect();
    let mut checked = 0u64;
    let mut worst_ratio = 1.0f64;
    for len in 1..=8 {
        let mut sets = Vec::new();
        multisets(len, 10, &mut sets, &mut Vec::new());
        for sizes in sets {
            // Present the items in descending order as well, so ties are
            // met in both directions.
            for order in [sizes.clone(), sizes.iter().rev().copied().collect()] {
                let missing: Vec<_> = order
                    .iter()
                    .zip(&refs)
                    .map(|(&s, p)| MissingObject {
                        path: p.clone(),
                        size: Some(s),
                    })
                    .collect();
                for c in 1..=3 {
                    let groups = burst_client::partition_missing(&missing, c).map_err(|e| e.to_string())?;
                    let size_of: HashMap<&ObjectRef, u64> =
                        missing.iter().map(|m| (&m.path, m.size.unwrap())).collect();
                    let mut all: Vec<&ObjectRef> = groups.iter().flatten().collect();
                    all.sort();
                    all.dedup();
                    ensure(
                        all.len() == len && groups.len() == len.min(c) && groups.iter().all(|g| !g.is_empty()),
                        || format!("{order:?} C={c}: not a partition: {groups:?}"),
                    )?;
                    let lpt = groups
                        .iter()
                        .map(|g| g.iter().map(|p| size_of[p]).sum::<u64>())
                        .max()
                        .unwrap();
                    let opt = optimum(&order, c);
                    ensure(3 * lpt <= 4 * opt, || {
                        format!("{order:?} C={c}: LPT {lpt}, optimum {opt}")
                    })?;
                    worst_ratio = worst_ratio.max(lpt as f64 / opt as f64);
                    checked += 1;
                }
            }
        }
    }
    for n in 1..=8 {
        let missing: Vec<_> = refs[..n].iter().cloned().map(MissingObject::without_size).collect();
        for c in 1..=3 {
            let groups = burst_client::partition_missing(&missing, c).map_err(|e| e.to_string())?;
            let lens: Vec<usize> = groups.iter().map(Vec::len).collect();
            let (lo, hi) = (lens.iter().min().unwrap(), lens.iter().max().unwrap());
            ensure(hi - lo <= 1 && lens.iter().sum::<usize>() == n, || {
                format!("round-robin n={n} C={c}: {lens:?}")
            })?;
            ensure(lens.len() == round_robin_groups(n, c).len(), || {
                format!("round-robin n={n} C={c} group count")
            })?;
        }
    }
    Ok(format!("{checked} LPT cases, worst LPT/optimum = {worst_ratio:.4}"))
}

// 7

/// Runs independent per-connection timelines through one event queue and
/// returns the time of the last event. Each timeline is a list of step
/// durations executed back to back from t = 0.
fn simulate(timelines: &[Vec<f64>]) -> f64 {
    #[derive(PartialEq)]
    struct Event(f64, usize, usize);
    impl Eq for Event {}
    impl PartialOrd for Event {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Event {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0
                .total_cmp(&other.0)
                .then(self.1.cmp(&other.1))
                .then(self.2.cmp(&other.2))
        }
    }

    let mut queue = BinaryHeap::new();
    for (conn, steps) in timelines.iter().enumerate() {
        if let Some(&d) = steps.first() {
            queue.push(Reverse(Event(d, conn, 0)));
        }
    }
    let mut clock = 0.0f64;
    while let Some(Reverse(Event(t, conn, step))) = queue.pop() {
        assert!(t >= clock, "events out of order");
        clock = t;
        if let Some(&d) = timelines[conn].get(step + 1) {
            queue.push(Reverse(Event(t + d, conn, step + 1)));
        }
    }
    clock
}

fn delay_oracle(_: &Runtime) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut max_err = 0.0f64;
    for instance in 0..1000 {
        let n = rng.random_range(1..=6usize);
        let c = rng.random_range(1..=3usize);
        let (d_cs, d_sc, p) = (
            rng.random_range(0.0..0.2),
            rng.random_range(0.0..0.2),
            rng.random_range(0.0..0.05),
        );
        let delay = DelayParams::new(d_cs, d_sc, p, c).map_err(|e| e.to_string())?;
        let sizes: Vec<u64> = (0..n).map(|_| rng.random_range(1..100_000)).collect();

        // GET: every exchange is striped evenly over the C connections, so
        // each connection walks all N exchanges at 1/C of their length.
        let stripe: Vec<f64> = (0..n)
            .flat_map(|_| [d_cs / c as f64, p / c as f64, d_sc / c as f64])
            .collect();
        let get_sim = simulate(&vec![stripe; c]);
        let get_model = get_delay(&ObjectSet::new(sizes), &delay).map_err(|e| e.to_string())?;

        // BURST: a random assignment of objects to at most C connections;
        // each connection sends one request, processes its objects in turn
        // and streams them back.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut partition = vec![Vec::new(); c];
        for i in order {
            partition[rng.random_range(0..c)].push(i);
        }
        partition.retain(|g| !g.is_empty());
        let timelines: Vec<Vec<f64>> = partition
            .iter()
            .map(|g| {
                std::iter::once(d_cs)
                    .chain(g.iter().map(|_| p))
                    .chain(std::iter::once(d_sc))
                    .collect()
            })
            .collect();
        let burst_sim = simulate(&timelines);
        let burst_model = burst_delay(&partition, &delay).map_err(|e| e.to_string())?;

        for (what, model, sim) in [
            ("get_delay", get_model, get_sim),
            ("burst_delay", burst_model, burst_sim),
        ] {
            let err = (model - sim).abs();
            max_err = max_err.max(err);
            ensure(err <= 1e-12, || {
                format!("instance {instance} (N={n}, C={c}): {what} {model} vs simulation {sim}")
            })?;
        }
    }
    Ok(format!("1000 instances, max |model - simulation| = {max_err:.1e}"))
}
