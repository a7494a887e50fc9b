use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use burst_bench::fixture::{page_objects, KIB};
use burst_bench::{
    generate_fixture, mean_stddev, measure_point, run_experiment, summarize, ExperimentConfig, FixtureConfig,
    PointSpec, RunStats,
};
use burst_client::Mode;
use burst_core::ObjectRef;
use sha2::{Digest, Sha256};

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, Sha256::digest(std::fs::read(&path).unwrap()).to_vec());
            }
        }
    }
    out
}

#[test]
fn four_images_make_eight_files() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = generate_fixture(&FixtureConfig::new(4), dir.path()).unwrap();
    let files = tree(dir.path());
    assert_eq!(files.len(), 8);
    assert_eq!(fixture.sizes.len(), 7);
    assert_eq!(std::fs::metadata(dir.path().join("jquery.js")).unwrap().len(), 86016);
    assert_eq!(
        std::fs::metadata(dir.path().join("font.woff2")).unwrap().len(),
        44 * KIB
    );
    assert_eq!(
        std::fs::metadata(dir.path().join("style.css")).unwrap().len(),
        120 * KIB
    );
    assert_eq!(
        std::fs::metadata(dir.path().join("img/img0004.jpg")).unwrap().len(),
        30 * KIB
    );

    let html = std::fs::read(dir.path().join("index.html")).unwrap();
    let manifest = burst_core::extract_manifest(&html, fixture.page(4).unwrap());
    assert_eq!(manifest.objects, page_objects(4));
}

#[test]
fn no_images_leaves_three_objects() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = generate_fixture(&FixtureConfig::new(0), dir.path()).unwrap();
    let html = std::fs::read(dir.path().join("index.html")).unwrap();
    assert_eq!(burst_core::extract_manifest(&html, fixture.page(0).unwrap()).len(), 3);
}

#[test]
fn same_seed_same_tree() {
    let config = FixtureConfig::new(5).with_image_size(3000).with_seed(7);
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    generate_fixture(&config, a.path()).unwrap();
    generate_fixture(&config, b.path()).unwrap();
    generate_fixture(&config.clone().with_seed(8), c.path()).unwrap();
    assert_eq!(tree(a.path()), tree(b.path()));
    assert_ne!(tree(a.path()), tree(c.path()));

    let images: Vec<_> = (1..=5)
        .map(|i| std::fs::read(a.path().join(format!("img/img{i:04}.jpg"))).unwrap())
        .collect();
    for i in 1..images.len() {
        assert_ne!(images[0], images[i]);
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn means(stats: &[RunStats], mode: Mode) -> Vec<f64> {
    stats.iter().filter(|s| s.mode == mode).map(|s| s.mean).collect()
}

/// Parses the summary CSV back and recomputes mean and stddev per row.
fn check_recomputation(csv_bytes: &[u8], rows: usize, runs: usize) {
    let mut reader = csv::Reader::from_reader(csv_bytes);
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["n", "mode", "connections", "mean_ms", "stddev_ms", "samples"]
    );
    let mut count = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let mean: f64 = record[3].parse().unwrap();
        let sd: f64 = record[4].parse().unwrap();
        let samples: Vec<f64> = record[5].split(';').map(|s| s.parse().unwrap()).collect();
        assert_eq!(samples.len(), runs);
        let n = samples.len() as f64;
        let m = samples.iter().sum::<f64>() / n;
        let v = (samples.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / n).sqrt();
        assert!(((mean - m) / m).abs() <= 1e-9, "mean {mean} vs {m}");
        assert!((sd - v).abs() <= 1e-9 * v.max(m), "stddev {sd} vs {v}");
        count += 1;
    }
    assert_eq!(count, rows);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn get_grows_with_n_and_burst_stays_flat() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        image_counts: vec![2, 14, 26, 38],
        modes: vec![(Mode::Get, 6), (Mode::Burst, 6)],
        runs_per_point: 3,
        image_size: 2 * KIB,
        processing_delay: Duration::from_millis(20),
        ..ExperimentConfig::default()
    };
    let stats = run_experiment(&config, dir.path()).await.unwrap();
    assert_eq!(stats.len(), 8);
    assert!(stats.iter().all(|s| !s.is_failed() && s.samples.len() == 3));
    let keys: Vec<_> = stats.iter().map(RunStats::sort_key).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let ns = [2.0, 14.0, 26.0, 38.0];
    let get = means(&stats, Mode::Get);
    let burst = means(&stats, Mode::Burst);
    // Every step of 12 images adds two GET rounds of 20 ms on each of 6
    // connections, so the means must rise strictly.
    assert!(get.windows(2).all(|w| w[1] > w[0]), "GET means {get:?}");
    let (get_slope, burst_slope) = (slope(&ns, &get), slope(&ns, &burst));
    assert!(get_slope > 0.0);
    assert!(
        burst_slope <= 0.2 * get_slope,
        "slopes GET {get_slope} BURST {burst_slope}"
    );

    check_recomputation(&summarize(&stats).unwrap(), 8, 3);
    for s in &stats {
        let (m, sd) = mean_stddev(&s.samples);
        assert_eq!((m, sd), (s.mean, s.stddev));
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn burst_not_slower_without_delay() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        image_counts: vec![150],
        modes: vec![(Mode::Get, 6), (Mode::Burst, 6)],
        runs_per_point: 3,
        image_size: 2 * KIB,
        processing_delay: Duration::ZERO,
        ..ExperimentConfig::default()
    };
    let stats = run_experiment(&config, dir.path()).await.unwrap();
    let (get, burst) = (&stats[0], &stats[1]);
    assert_eq!((get.mode, burst.mode), (Mode::Get, Mode::Burst));
    assert!(burst.mean <= get.mean, "BURST {} GET {}", burst.mean, get.mean);
}

#[tokio::test]
async fn unreachable_server_is_an_error() {
    let free = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let point = PointSpec {
        addr: free,
        page: ObjectRef::new("/index.html").unwrap(),
        mode: Mode::Get,
        connections: 2,
        runs: 2,
        timeout: Duration::from_secs(5),
        size_hints: Default::default(),
    };
    assert!(measure_point(&point).await.is_err());
}
