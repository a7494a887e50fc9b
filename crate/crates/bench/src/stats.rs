use burst_client::Mode;

use crate::BenchError;

pub const CSV_HEADER: [&str; 6] = ["n", "mode", "connections", "mean_ms", "stddev_ms", "samples"];

/// Page-load durations for one (N, mode, C) point, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Number of images on the page (the page also carries font, CSS and JS).
    pub n_objects: usize,
    pub mode: Mode,
    pub connections: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub samples: Vec<f64>,
    /// Set when a fetch at this point failed; the samples are then empty.
    pub failure: Option<String>,
}

impl RunStats {
    pub fn from_samples(n_objects: usize, mode: Mode, connections: usize, samples: Vec<f64>) -> Self {
        let (mean, stddev) = mean_stddev(&samples);
        Self {
            n_objects,
            mode,
            connections,
            mean,
            stddev,
            samples,
            failure: None,
        }
    }

    pub fn failed(n_objects: usize, mode: Mode, connections: usize, reason: impl Into<String>) -> Self {
        Self {
            n_objects,
            mode,
            connections,
            mean: f64::NAN,
            stddev: f64::NAN,
            samples: Vec::new(),
            failure: Some(reason.into()),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn sort_key(&self) -> (usize, Mode, usize) {
        (self.n_objects, self.mode, self.connections)
    }
}

/// Mean and population standard deviation; NaN for an empty slice.
pub fn mean_stddev(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Relative reduction of `candidate` against `baseline`: (b - c) / b.
pub fn improvement(baseline_mean: f64, candidate_mean: f64) -> f64 {
    (baseline_mean - candidate_mean) / baseline_mean
}

/// CSV with one row per point, sorted by (N, mode, C). Durations are in
/// milliseconds; failed points have empty statistics.
pub fn summarize(stats: &[RunStats]) -> Result<Vec<u8>, BenchError> {
    if stats.is_empty() {
        return Err(BenchError::EmptyStats);
    }
    let mut rows: Vec<&RunStats> = stats.iter().collect();
    rows.sort_by_key(|s| s.sort_key());

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for s in rows {
        let (mean, stddev) = if s.is_failed() {
            (String::new(), String::new())
        } else {
            (ms(s.mean), ms(s.stddev))
        };
        let samples = s.samples.iter().map(|&x| ms(x)).collect::<Vec<_>>().join(";");
        w.write_record([
            s.n_objects.to_string(),
            s.mode.to_string(),
            s.connections.to_string(),
            mean,
            stddev,
            samples,
        ])?;
    }
    w.into_inner().map_err(|e| BenchError::Csv(e.into_error().into()))
}

fn ms(seconds: f64) -> String {
    format!("{}", seconds * 1000.0)
}
