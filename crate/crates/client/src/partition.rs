//! Splitting the missing objects of a page over the available connections.
//!
//! The page is done when the slowest connection is done, so with known sizes
//! the goal is to minimise the largest group (classic makespan scheduling,
//! solved greedily with longest-processing-time-first). Without sizes the
//! objects are dealt round-robin in manifest order.

use burst_core::{ObjectRef, PageManifest};
use thiserror::Error;

use crate::ObjectCache;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("nothing to partition")]
    Empty,
    #[error("connection count must be at least 1")]
    ZeroConnections,
}

/// A missing object, with its size when the caller knows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingObject {
    pub path: ObjectRef,
    pub size: Option<u64>,
}

impl MissingObject {
    pub fn without_size(path: ObjectRef) -> Self {
        Self { path, size: None }
    }
}

/// Manifest entries not present in `cache`, in manifest order.
pub fn diff_cache(manifest: &PageManifest, cache: &ObjectCache) -> Vec<ObjectRef> {
    manifest
        .objects
        .iter()
        .filter(|o| !cache.contains(o))
        .cloned()
        .collect()
}

/// Groups `missing` into at most `connections` non-empty groups.
///
/// LPT is used only when every size is known; otherwise round-robin.
/// Objects keep manifest order inside each group.
pub fn partition_missing(missing: &[MissingObject], connections: usize) -> Result<Vec<Vec<ObjectRef>>, PartitionError> {
    if missing.is_empty() {
        return Err(PartitionError::Empty);
    }
    if connections == 0 {
        return Err(PartitionError::ZeroConnections);
    }
    let sizes: Option<Vec<u64>> = missing.iter().map(|m| m.size).collect();
    let groups = match sizes {
        Some(sizes) => lpt_groups(&sizes, connections),
        None => round_robin_groups(missing.len(), connections),
    };
    Ok(groups
        .into_iter()
        .map(|g| g.into_iter().map(|i| missing[i].path.clone()).collect())
        .collect())
}

/// Deals indices `0..n` over `min(n, connections)` groups.
pub fn round_robin_groups(n: usize, connections: usize) -> Vec<Vec<usize>> {
    let k = n.min(connections);
    let mut groups = vec![Vec::new(); k];
    for i in 0..n {
        groups[i % k].push(i);
    }
    groups
}

/// Longest-processing-time-first: largest item to the currently lightest
/// group. Ties go to the earlier item and the lower-numbered group, and an
/// empty group beats a non-empty one of equal load so zero-sized items still
/// spread out.
pub fn lpt_groups(sizes: &[u64], connections: usize) -> Vec<Vec<usize>> {
    let k = sizes.len().min(connections);
    if k == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
    let mut loads = vec![0u64; k];
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in order {
        let target = (0..k).min_by_key(|&g| (loads[g], groups[g].len())).expect("k > 0");
        loads[target] += sizes[i];
        groups[target].push(i);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups
}

/// Largest group total, the quantity LPT tries to keep small.
pub fn max_group_load(groups: &[Vec<usize>], sizes: &[u64]) -> u64 {
    groups
        .iter()
        .map(|g| g.iter().map(|&i| sizes[i]).sum())
        .max()
        .unwrap_or(0)
}
