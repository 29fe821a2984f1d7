//! Update-frequency counting and hot-set selection.
//!
//! A parameter is counted once per batch in which it appears with a
//! nonzero gradient. The hot set is the shortest frequency-ranked prefix
//! whose cumulative share of updates reaches the traffic target `p`,
//! clamped by the switch memory budget `c * chip_bytes`.

use alloc::vec::Vec;
use core::fmt;

use hashbrown::{HashMap, HashSet};

use crate::types::{GradientUpdate, MappedId, RawId};

pub const DEFAULT_BYTES_PER_PARAM: u32 = 4;
/// 20 MiB of on-chip memory.
pub const DEFAULT_CHIP_BYTES: u64 = 20 * 1024 * 1024;

/// Per-parameter batch-appearance counts over a training trace.
#[derive(Debug, Clone, Default)]
pub struct HeatProfile {
    freq: HashMap<u64, u64>,
    total: u64,
    batches: u64,
}

impl HeatProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts one appearance per key with a nonzero gradient. Batch keys
    /// are expected to be unique (the packaging layer enforces this for
    /// pushed batches).
    pub fn record_batch(&mut self, batch: &[GradientUpdate]) {
        self.batches += 1;
        for g in batch {
            if g.value != 0.0 {
                *self.freq.entry(g.raw_id.0).or_insert(0) += 1;
                self.total += 1;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn batches(&self) -> u64 {
        self.batches
    }

    pub fn distinct(&self) -> usize {
        self.freq.len()
    }

    pub fn count(&self, id: RawId) -> u64 {
        self.freq.get(&id.0).copied().unwrap_or(0)
    }

    /// `(raw_id, count)` sorted by count descending, ties by ascending
    /// raw_id so ranking is deterministic.
    pub fn ranked(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.freq.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// Builds a profile from an in-memory trace.
pub fn count_frequencies(trace: &[Vec<GradientUpdate>]) -> Result<HeatProfile, EmptyTrace> {
    if trace.is_empty() {
        return Err(EmptyTrace);
    }
    let mut p = HeatProfile::new();
    for batch in trace {
        p.record_batch(batch);
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyTrace;

impl fmt::Display for EmptyTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trace contains no batches")
    }
}

impl core::error::Error for EmptyTrace {}

/// The selected hot parameters, ranked, with the rank index map workers
/// keep locally.
#[derive(Debug, Clone)]
pub struct HotSet {
    /// Top-k raw ids in rank order (frequency descending).
    pub ranked_ids: Vec<RawId>,
    /// Counts aligned with `ranked_ids`.
    pub counts: Vec<u64>,
    /// Fraction of all updates covered by the set: `T_k / T_n`.
    pub coverage: f64,
    /// True when the memory cap forced `k` below the traffic target.
    pub memory_clamped: bool,
    index_map: HashMap<u64, u32>,
}

impl HotSet {
    fn from_ranked(ranked: &[(u64, u64)], k: usize, total: u64, memory_clamped: bool) -> Self {
        let k = k.min(ranked.len());
        let ranked_ids: Vec<RawId> = ranked[..k].iter().map(|(id, _)| RawId(*id)).collect();
        let counts: Vec<u64> = ranked[..k].iter().map(|(_, c)| *c).collect();
        let tk: u64 = counts.iter().sum();
        let index_map = ranked_ids
            .iter()
            .enumerate()
            .map(|(r, id)| (id.0, r as u32))
            .collect();
        let coverage = if total == 0 { 0.0 } else { tk as f64 / total as f64 };
        Self { ranked_ids, counts, coverage, memory_clamped, index_map }
    }

    pub fn k(&self) -> usize {
        self.ranked_ids.len()
    }

    pub fn mapped_id(&self, raw: RawId) -> Option<MappedId> {
        self.index_map.get(&raw.0).map(|r| MappedId(*r))
    }

    pub fn raw_id(&self, mapped: MappedId) -> Option<RawId> {
        self.ranked_ids.get(mapped.0 as usize).copied()
    }

    /// Rank-order index map `raw_id -> mapped_id`.
    pub fn index_map(&self) -> &HashMap<u64, u32> {
        &self.index_map
    }
}

/// Selects the hot set: smallest `k` with `T_k/T_n >= p`, then clamped so
/// `bytes_per_param * k <= c * chip_bytes`. Clamping is reported via
/// `memory_clamped`, not an error.
pub fn select_hot(
    profile: &HeatProfile,
    p: f64,
    c: f64,
    bytes_per_param: u32,
    chip_bytes: u64,
) -> HotSet {
    debug_assert!(p > 0.0 && p < 1.0 && c > 0.0 && c < 1.0);
    let ranked = profile.ranked();
    let total = profile.total();
    let cap = ((c * chip_bytes as f64) / f64::from(bytes_per_param)) as usize;

    let mut k_target = ranked.len();
    let mut acc: u64 = 0;
    for (i, (_, count)) in ranked.iter().enumerate() {
        acc += count;
        if acc as f64 >= p * total as f64 {
            k_target = i + 1;
            break;
        }
    }
    let clamped = k_target > cap;
    HotSet::from_ranked(&ranked, k_target.min(cap), total, clamped)
}

/// Hot set of exactly the top `k` ranked parameters (no memory clamp).
pub fn select_top_k(profile: &HeatProfile, k: usize) -> HotSet {
    let ranked = profile.ranked();
    HotSet::from_ranked(&ranked, k, profile.total(), false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyHotSet;

impl fmt::Display for EmptyHotSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "reference hot set is empty")
    }
}

impl core::error::Error for EmptyHotSet {}

/// `|H_g intersect H_s| / |H_g|`: how much of the full-trace hot set the
/// sampled run recovered.
pub fn identification_precision(full: &HotSet, sampled: &HotSet) -> Result<f64, EmptyHotSet> {
    if full.ranked_ids.is_empty() {
        return Err(EmptyHotSet);
    }
    let sampled_ids: HashSet<u64> = sampled.ranked_ids.iter().map(|r| r.0).collect();
    let hits = full
        .ranked_ids
        .iter()
        .filter(|r| sampled_ids.contains(&r.0))
        .count();
    Ok(hits as f64 / full.ranked_ids.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeoffError {
    /// Fewer than `2 * step` ranked parameters.
    ProfileTooSmall { have: usize, need: usize },
    BadStep,
}

impl fmt::Display for TradeoffError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ProfileTooSmall { have, need } => {
                write!(f, "profile has {have} parameters, trade-off scan needs {need}")
            }
            Self::BadStep => write!(f, "step must be >= 1"),
        }
    }
}

impl core::error::Error for TradeoffError {}

/// Scans the ranked cumulative-coverage curve in blocks of `step` and
/// returns the smallest `k` (a multiple of `step`) where the next block
/// adds less than `epsilon` coverage. A profile whose marginal gain never
/// drops below `epsilon` yields `n` rounded down to `step`.
pub fn tradeoff_point(
    profile: &HeatProfile,
    epsilon: f64,
    step: usize,
) -> Result<usize, TradeoffError> {
    if step < 1 {
        return Err(TradeoffError::BadStep);
    }
    let ranked = profile.ranked();
    let n = ranked.len();
    if n < 2 * step {
        return Err(TradeoffError::ProfileTooSmall { have: n, need: 2 * step });
    }
    let total = profile.total() as f64;
    let mut prefix: u64 = ranked[..step].iter().map(|(_, c)| c).sum();
    let mut k = step;
    while k + step <= n {
        let block: u64 = ranked[k..k + step].iter().map(|(_, c)| c).sum();
        if (block as f64) / total < epsilon {
            return Ok(k);
        }
        prefix += block;
        k += step;
    }
    let _ = prefix;
    Ok((n / step) * step)
}
