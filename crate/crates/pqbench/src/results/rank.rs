//! Filtering and top-N ranking.
//!
//! Four criteria: mean operation time and peak memory footprint are
//! minimized, real-time handshake connections and operation throughput are
//! maximized. An algorithm's score is the unweighted arithmetic mean over
//! its three operations (or its connection count for handshakes). Ties break
//! by ascending algorithm id so rankings are deterministic.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Capability, Operation, Registry};

use super::average::{AveragedCpu, AveragedHandshake, AveragedMemory, AveragedSpeed};
use super::ResultsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCriterion {
    CpuMeanTime,
    MemPeakFootprint,
    HandshakeRealConnections,
    SpeedMeanThroughput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl RankCriterion {
    pub fn direction(self) -> Direction {
        match self {
            RankCriterion::CpuMeanTime | RankCriterion::MemPeakFootprint => Direction::Minimize,
            RankCriterion::HandshakeRealConnections | RankCriterion::SpeedMeanThroughput => {
                Direction::Maximize
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RankCriterion::CpuMeanTime => "cpu_mean_time",
            RankCriterion::MemPeakFootprint => "mem_peak_footprint",
            RankCriterion::HandshakeRealConnections => "handshake_real_connections",
            RankCriterion::SpeedMeanThroughput => "speed_mean_throughput",
        }
    }
}

/// What to drop before ranking.
#[derive(Debug, Clone, Default)]
pub struct FilterSet {
    /// When a standardised and a non-standardised variant of the same base
    /// scheme (per the registry alias table) both have records, drop the
    /// non-standardised one.
    pub prefer_standardised: bool,
    pub exclude_ids: Vec<String>,
    pub require_capability: Option<Capability>,
}

impl FilterSet {
    pub fn is_empty(&self) -> bool {
        !self.prefer_standardised && self.exclude_ids.is_empty() && self.require_capability.is_none()
    }
}

/// Ids to drop under `prefer_standardised`: non-standardised ids whose alias
/// base also has a standardised id among `present`.
fn shadowed_ids(present: &BTreeSet<String>, registry: &Registry) -> BTreeSet<String> {
    let mut by_base: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for id in present {
        if let Some(base) = registry.aliases.get(id.as_str()) {
            by_base.entry(base.as_str()).or_default().push(id);
        }
    }
    let mut dropped = BTreeSet::new();
    for ids in by_base.values() {
        let standardised_present = ids.iter().any(|id| {
            registry
                .find(id)
                .map(|d| d.standardised)
                .unwrap_or(false)
        });
        if !standardised_present {
            continue;
        }
        for id in ids {
            let is_std = registry.find(id).map(|d| d.standardised).unwrap_or(false);
            if !is_std {
                dropped.insert(id.to_string());
            }
        }
    }
    dropped
}

/// Generic filter pass. `ids_of` yields every algorithm id a record depends
/// on; the record is kept only if all of them survive. Unknown ids in
/// `exclude_ids` produce warnings, not errors.
fn apply_filters_by<R: Clone>(
    records: &[R],
    registry: &Registry,
    filters: &FilterSet,
    ids_of: impl Fn(&R) -> Vec<String>,
) -> (Vec<R>, Vec<String>) {
    let mut warnings = Vec::new();
    for ex in &filters.exclude_ids {
        if registry.find(ex).is_none() {
            warnings.push(format!("UNKNOWN_EXCLUDE_ID: {ex:?} is not in the registry"));
        }
    }
    let present: BTreeSet<String> = records.iter().flat_map(|r| ids_of(r)).collect();
    let shadowed = if filters.prefer_standardised {
        shadowed_ids(&present, registry)
    } else {
        BTreeSet::new()
    };

    let keep_id = |id: &str| -> bool {
        if filters.exclude_ids.iter().any(|ex| ex == id) {
            return false;
        }
        if shadowed.contains(id) {
            return false;
        }
        if let Some(cap) = filters.require_capability {
            match registry.find(id) {
                Some(desc) if desc.has(cap) => {}
                _ => return false,
            }
        }
        true
    };

    let kept = records
        .iter()
        .filter(|r| ids_of(r).iter().all(|id| keep_id(id)))
        .cloned()
        .collect();
    (kept, warnings)
}

pub fn apply_filters_cpu(
    records: &[AveragedCpu],
    registry: &Registry,
    filters: &FilterSet,
) -> (Vec<AveragedCpu>, Vec<String>) {
    apply_filters_by(records, registry, filters, |r| vec![r.algorithm_id.clone()])
}

pub fn apply_filters_memory(
    records: &[AveragedMemory],
    registry: &Registry,
    filters: &FilterSet,
) -> (Vec<AveragedMemory>, Vec<String>) {
    apply_filters_by(records, registry, filters, |r| vec![r.algorithm_id.clone()])
}

pub fn apply_filters_speed(
    records: &[AveragedSpeed],
    registry: &Registry,
    filters: &FilterSet,
) -> (Vec<AveragedSpeed>, Vec<String>) {
    apply_filters_by(records, registry, filters, |r| vec![r.algorithm_id.clone()])
}

pub fn apply_filters_handshake(
    records: &[AveragedHandshake],
    registry: &Registry,
    filters: &FilterSet,
) -> (Vec<AveragedHandshake>, Vec<String>) {
    apply_filters_by(records, registry, filters, |r| {
        vec![r.sig_algorithm_id.clone(), r.kem_algorithm_id.clone()]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedAlgorithm {
    pub algorithm_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPair {
    pub sig_algorithm_id: String,
    pub kem_algorithm_id: String,
    pub score: f64,
}

fn order_and_truncate<K: Ord + Clone>(
    mut scored: Vec<(K, f64)>,
    direction: Direction,
    n: usize,
) -> Vec<(K, f64)> {
    scored.sort_by(|(ka, sa), (kb, sb)| {
        let by_score = match direction {
            Direction::Minimize => sa.partial_cmp(sb),
            Direction::Maximize => sb.partial_cmp(sa),
        }
        .unwrap_or(std::cmp::Ordering::Equal);
        by_score.then_with(|| ka.cmp(kb))
    });
    scored.truncate(n);
    scored
}

/// Per-algorithm mean of the per-operation values, enforcing that each
/// algorithm contributed exactly its three operations.
fn triple_means(
    values: Vec<(String, Operation, f64)>,
    criterion: RankCriterion,
) -> Result<Vec<(String, f64)>, ResultsError> {
    let mut per_alg: BTreeMap<String, Vec<(Operation, f64)>> = BTreeMap::new();
    for (alg, op, v) in values {
        per_alg.entry(alg).or_default().push((op, v));
    }
    let mut out = Vec::with_capacity(per_alg.len());
    for (alg, ops) in per_alg {
        if ops.len() != 3 {
            return Err(ResultsError::IncompleteTriple {
                algorithm: alg,
                criterion: criterion.label().to_string(),
                detail: format!(
                    "have {:?}",
                    ops.iter().map(|(o, _)| o.label()).collect::<Vec<_>>()
                ),
            });
        }
        let distinct: BTreeSet<Operation> = ops.iter().map(|(o, _)| *o).collect();
        if distinct.len() != 3 {
            return Err(ResultsError::IncompleteTriple {
                algorithm: alg,
                criterion: criterion.label().to_string(),
                detail: "duplicate operations in group".into(),
            });
        }
        let score = ops.iter().map(|(_, v)| v).sum::<f64>() / 3.0;
        out.push((alg, score));
    }
    Ok(out)
}

/// Rank algorithms under a triple-based criterion after applying filters.
pub fn rank_top_n_algorithms(
    cpu: Option<&[AveragedCpu]>,
    memory: Option<&[AveragedMemory]>,
    speed: Option<&[AveragedSpeed]>,
    registry: &Registry,
    criterion: RankCriterion,
    n: usize,
    filters: &FilterSet,
) -> Result<(Vec<RankedAlgorithm>, Vec<String>), ResultsError> {
    if n < 1 {
        return Err(ResultsError::InvalidArgument("top-N requires n >= 1".into()));
    }
    let (values, warnings): (Vec<(String, Operation, f64)>, Vec<String>) = match criterion {
        RankCriterion::CpuMeanTime => {
            let records = cpu.ok_or_else(|| {
                ResultsError::InvalidArgument("CPU records required for this criterion".into())
            })?;
            let (kept, warnings) = apply_filters_cpu(records, registry, filters);
            (
                kept.iter()
                    .map(|r| (r.algorithm_id.clone(), r.operation, r.mean_time_us))
                    .collect(),
                warnings,
            )
        }
        RankCriterion::MemPeakFootprint => {
            let records = memory.ok_or_else(|| {
                ResultsError::InvalidArgument("memory records required for this criterion".into())
            })?;
            let (kept, warnings) = apply_filters_memory(records, registry, filters);
            (
                kept.iter()
                    .map(|r| (r.algorithm_id.clone(), r.operation, r.footprint()))
                    .collect(),
                warnings,
            )
        }
        RankCriterion::SpeedMeanThroughput => {
            let records = speed.ok_or_else(|| {
                ResultsError::InvalidArgument("speed records required for this criterion".into())
            })?;
            let (kept, warnings) = apply_filters_speed(records, registry, filters);
            (
                kept.iter()
                    .map(|r| (r.algorithm_id.clone(), r.operation, r.ops_per_second))
                    .collect(),
                warnings,
            )
        }
        RankCriterion::HandshakeRealConnections => {
            return Err(ResultsError::InvalidArgument(
                "handshake criterion ranks (sig, kem) pairs; use rank_top_n_handshake".into(),
            ))
        }
    };
    let means = triple_means(values, criterion)?;
    let ranked = order_and_truncate(means, criterion.direction(), n)
        .into_iter()
        .map(|(algorithm_id, score)| RankedAlgorithm {
            algorithm_id,
            score,
        })
        .collect();
    Ok((ranked, warnings))
}

/// Rank (sig, kem) pairs by real-time connections, averaged over whatever
/// modes are present for the pair.
pub fn rank_top_n_handshake(
    records: &[AveragedHandshake],
    registry: &Registry,
    n: usize,
    filters: &FilterSet,
) -> Result<(Vec<RankedPair>, Vec<String>), ResultsError> {
    if n < 1 {
        return Err(ResultsError::InvalidArgument("top-N requires n >= 1".into()));
    }
    let (kept, warnings) = apply_filters_handshake(records, registry, filters);
    let mut per_pair: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in &kept {
        per_pair
            .entry((r.sig_algorithm_id.clone(), r.kem_algorithm_id.clone()))
            .or_default()
            .push(r.connections);
    }
    let scored: Vec<((String, String), f64)> = per_pair
        .into_iter()
        .map(|(pair, conns)| {
            let score = conns.iter().sum::<f64>() / conns.len() as f64;
            (pair, score)
        })
        .collect();
    let ranked = order_and_truncate(scored, Direction::Maximize, n)
        .into_iter()
        .map(|((sig, kem), score)| RankedPair {
            sig_algorithm_id: sig,
            kem_algorithm_id: kem,
            score,
        })
        .collect();
    Ok((ranked, warnings))
}
