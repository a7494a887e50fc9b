//! Closed-form byte-efficiency and page-delay model for GET versus BURST.
//!
//! A GET page load pays the full per-exchange header overhead once per
//! object, whereas a BURST load pays it once per connection actually used.
//! The delay side follows the same split: GET round trips scale with the
//! object count, BURST round trips with the connection count.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("object set is empty; efficiency is undefined")]
    EmptyObjectSet,
    #[error("total bytes on the wire are zero; efficiency is undefined")]
    ZeroDenominator,
    #[error("connection count must be at least 1")]
    ZeroConnections,
    #[error("partition is empty")]
    EmptyPartition,
    #[error("partition has {groups} groups but only {connections} connections")]
    TooManyGroups { groups: usize, connections: usize },
    #[error("object {0} appears in more than one group")]
    OverlappingGroups(usize),
    #[error("partition contains an empty group")]
    EmptyGroup,
    #[error("invalid delay parameter: {0}")]
    InvalidDelay(&'static str),
}

/// Header sizes in bytes of the layers that wrap every HTTP exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OverheadParams {
    pub ip_header: u64,
    pub tcp_header: u64,
    pub http_header: u64,
}

impl OverheadParams {
    /// IPv4 + TCP without options, and no HTTP header bytes.
    pub const IPV4_TCP: OverheadParams = OverheadParams {
        ip_header: 20,
        tcp_header: 20,
        http_header: 0,
    };

    pub fn new(ip_header: u64, tcp_header: u64, http_header: u64) -> Self {
        Self {
            ip_header,
            tcp_header,
            http_header,
        }
    }

    /// Size of the bare TCP acknowledgement segment returned by the server.
    pub fn ack_total(&self) -> u64 {
        self.ip_header + self.tcp_header
    }

    /// Overhead of one request/response exchange: request and response
    /// headers plus the acknowledgement.
    pub fn per_exchange(&self) -> u64 {
        2 * (self.ip_header + self.tcp_header + self.http_header) + self.ack_total()
    }
}

/// Payload sizes of the objects inlined in a page, in page order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObjectSet {
    sizes: Vec<u64>,
}

impl ObjectSet {
    pub fn new(sizes: Vec<u64>) -> Self {
        Self { sizes }
    }

    pub fn uniform(count: usize, size: u64) -> Self {
        Self {
            sizes: vec![size; count],
        }
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn total_payload(&self) -> u64 {
        self.sizes.iter().sum()
    }
}

/// One-way latencies, server processing time and connection budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayParams {
    pub client_to_server: f64,
    pub server_to_client: f64,
    pub processing_per_object: f64,
    pub connections: usize,
}

impl DelayParams {
    pub fn new(
        client_to_server: f64,
        server_to_client: f64,
        processing_per_object: f64,
        connections: usize,
    ) -> Result<Self, ModelError> {
        let params = Self {
            client_to_server,
            server_to_client,
            processing_per_object,
            connections,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.connections == 0 {
            return Err(ModelError::ZeroConnections);
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.client_to_server) || !ok(self.server_to_client) {
            return Err(ModelError::InvalidDelay("leg delays must be finite and >= 0"));
        }
        if !ok(self.processing_per_object) {
            return Err(ModelError::InvalidDelay("processing delay must be finite and >= 0"));
        }
        Ok(())
    }

    fn round_trip(&self) -> f64 {
        self.client_to_server + self.server_to_client
    }
}

/// Minimum bytes exchanged to fetch one object of `size` bytes with GET.
pub fn request_bytes(size: u64, params: &OverheadParams) -> u64 {
    params.per_exchange() + size
}

/// Payload share of all bytes exchanged when every object costs one GET.
pub fn get_efficiency(objects: &ObjectSet, params: &OverheadParams) -> Result<f64, ModelError> {
    if objects.is_empty() {
        return Err(ModelError::EmptyObjectSet);
    }
    let payload = objects.total_payload();
    let total: u64 = objects.sizes().iter().map(|&l| request_bytes(l, params)).sum();
    ratio(payload, total)
}

/// Payload share of all bytes exchanged when the objects travel in BURST
/// exchanges over `connections` connections.
///
/// A connection that carries no object exchanges nothing, so the overhead is
/// charged `min(connections, N)` times.
pub fn burst_efficiency(objects: &ObjectSet, params: &OverheadParams, connections: usize) -> Result<f64, ModelError> {
    if objects.is_empty() {
        return Err(ModelError::EmptyObjectSet);
    }
    if connections == 0 {
        return Err(ModelError::ZeroConnections);
    }
    let used = connections.min(objects.len()) as u64;
    let payload = objects.total_payload();
    ratio(payload, used * params.per_exchange() + payload)
}

fn ratio(payload: u64, total: u64) -> Result<f64, ModelError> {
    if total == 0 {
        return Err(ModelError::ZeroDenominator);
    }
    Ok(payload as f64 / total as f64)
}

/// Serial GET page delay spread evenly over the connection budget.
pub fn get_delay(objects: &ObjectSet, delay: &DelayParams) -> Result<f64, ModelError> {
    delay.validate()?;
    if objects.is_empty() {
        return Err(ModelError::EmptyObjectSet);
    }
    let per_object = delay.client_to_server + delay.processing_per_object + delay.server_to_client;
    let serial: f64 = (0..objects.len()).map(|_| per_object).sum();
    Ok(serial / delay.connections as f64)
}

/// BURST page delay: the slowest connection, where each connection costs one
/// round trip plus the processing of every object it carries.
///
/// `partition` holds object indices, one group per connection.
pub fn burst_delay(partition: &[Vec<usize>], delay: &DelayParams) -> Result<f64, ModelError> {
    delay.validate()?;
    if partition.is_empty() {
        return Err(ModelError::EmptyPartition);
    }
    if partition.len() > delay.connections {
        return Err(ModelError::TooManyGroups {
            groups: partition.len(),
            connections: delay.connections,
        });
    }
    let mut seen = std::collections::HashSet::new();
    let mut worst = 0.0f64;
    for group in partition {
        if group.is_empty() {
            return Err(ModelError::EmptyGroup);
        }
        for &idx in group {
            if !seen.insert(idx) {
                return Err(ModelError::OverlappingGroups(idx));
            }
        }
        let processing = group.len() as f64 * delay.processing_per_object;
        worst = worst.max(delay.round_trip() + processing);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Get,
    Burst { connections: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub mode: SweepMode,
    pub efficiency: f64,
}

/// Efficiency of GET and of BURST at each connection count, for every page
/// size from 1 to `max_n` objects of `payload` bytes each.
pub fn efficiency_sweep(
    payload: u64,
    max_n: usize,
    params: &OverheadParams,
    connection_counts: &[usize],
) -> Result<Vec<SweepRow>, ModelError> {
    if connection_counts.contains(&0) {
        return Err(ModelError::ZeroConnections);
    }
    let mut rows = Vec::with_capacity(max_n * (1 + connection_counts.len()));
    for n in 1..=max_n {
        let objects = ObjectSet::uniform(n, payload);
        rows.push(SweepRow {
            n,
            mode: SweepMode::Get,
            efficiency: get_efficiency(&objects, params)?,
        });
        for &c in connection_counts {
            rows.push(SweepRow {
                n,
                mode: SweepMode::Burst { connections: c },
                efficiency: burst_efficiency(&objects, params, c)?,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "n,mode,connections,efficiency";

/// Renders sweep rows as CSV. GET rows leave `connections` empty.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let (mode, connections) = match row.mode {
            SweepMode::Get => ("get", String::new()),
            SweepMode::Burst { connections } => ("burst", connections.to_string()),
        };
        let _ = writeln!(out, "{},{},{},{:.12}", row.n, mode, connections, row.efficiency);
    }
    out
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn params() -> impl Strategy<Value = OverheadParams> {
        (0u64..64, 0u64..64, 0u64..1024).prop_map(|(ip, tcp, http)| OverheadParams::new(ip, tcp, http))
    }

    proptest! {
        #[test]
        fn burst_dominates_get(
            sizes in prop::collection::vec(1u64..5000, 1..60),
            p in params(),
            c in 1usize..10,
        ) {
            let objects = ObjectSet::new(sizes);
            let get = get_efficiency(&objects, &p).unwrap();
            let burst = burst_efficiency(&objects, &p, c).unwrap();
            prop_assert!(burst >= get);
            prop_assert!(get > 0.0 && get <= 1.0);
            prop_assert!(burst > 0.0 && burst <= 1.0);
            if objects.len() <= c {
                prop_assert_eq!(burst, get);
            } else if p.per_exchange() > 0 {
                prop_assert!(burst > get);
            }
        }

        #[test]
        fn burst_monotone_in_n_and_c(
            size in 1u64..5000,
            p in params(),
            n in 1usize..200,
            c in 1usize..10,
        ) {
            let here = burst_efficiency(&ObjectSet::uniform(n, size), &p, c).unwrap();
            let more_objects = burst_efficiency(&ObjectSet::uniform(n + 1, size), &p, c).unwrap();
            prop_assert!(more_objects >= here);
            if n > c {
                let more_conns = burst_efficiency(&ObjectSet::uniform(n, size), &p, c + 1).unwrap();
                prop_assert!(more_conns <= here);
            }
        }

        #[test]
        fn get_delay_scales_exactly_with_connections(
            n in 1usize..100,
            cs in 0.0f64..1.0,
            sc in 0.0f64..1.0,
            proc_ in 0.0f64..0.5,
            c in 1usize..16,
        ) {
            let objects = ObjectSet::uniform(n, 1);
            let one = DelayParams::new(cs, sc, proc_, 1).unwrap();
            let many = DelayParams { connections: c, ..one };
            let serial = get_delay(&objects, &one).unwrap();
            prop_assert_eq!(get_delay(&objects, &many).unwrap(), serial / c as f64);
        }

        #[test]
        fn burst_delay_bounds(
            groups in prop::collection::vec(1usize..6, 1..5),
            cs in 0.0f64..1.0,
            sc in 0.0f64..1.0,
            proc_ in 0.0f64..0.5,
        ) {
            let mut next = 0;
            let partition: Vec<Vec<usize>> = groups
                .iter()
                .map(|&len| { let g = (next..next + len).collect(); next += len; g })
                .collect();
            let d = DelayParams::new(cs, sc, proc_, partition.len()).unwrap();
            let total = burst_delay(&partition, &d).unwrap();
            for g in &partition {
                let single = burst_delay(std::slice::from_ref(g), &d).unwrap();
                prop_assert!(total >= single);
            }
            let merged = vec![(0..next).collect::<Vec<_>>()];
            let all = burst_delay(&merged, &DelayParams { connections: 1, ..d }).unwrap();
            prop_assert!((all - (cs + next as f64 * proc_ + sc)).abs() < 1e-12);
        }
    }
}
