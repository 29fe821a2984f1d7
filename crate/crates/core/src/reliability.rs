//! Loss recovery and failover support: the switch-local agent that
//! suppresses repeat writes and retains unacked aggregation results, and
//! the controller that heartbeats switches and drives detection-migration
//! failover.
//!
//! Retransmission itself runs in the sender state machines (workers keep
//! an in-flight table, the agent re-sends unacked results); this module
//! holds the shared bookkeeping and the failure decision logic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::clock::SimTime;
use crate::packet::{Packet, SwitchStats};

/// Sequence-number horizon under which seen-set entries are pruned. The
/// worker window is far smaller, so a pruned (worker, seq) can never be
/// retransmitted again.
const SEEN_GC_HORIZON: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupOutcome {
    Fresh,
    Duplicate,
}

/// Fixed-size Bloom filter over (worker_id, seq); the pipeline-friendly
/// alternative to exact local records.
#[derive(Debug, Clone)]
pub struct BloomFilter {
    bits: Vec<u64>,
    mask: u64,
    hashes: u32,
}

impl BloomFilter {
    /// `log2_bits` in 10..=30.
    pub fn new(log2_bits: u8, hashes: u32) -> Self {
        assert!((10..=30).contains(&log2_bits) && hashes >= 1);
        let nbits = 1usize << log2_bits;
        Self { bits: alloc::vec![0u64; nbits / 64], mask: (nbits - 1) as u64, hashes }
    }

    fn probe(&self, key: u64, i: u32) -> (usize, u64) {
        // splitmix-style double hashing
        let mut h = key ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(u64::from(i) + 1);
        h ^= h >> 30;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 27;
        h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
        let bit = h & self.mask;
        ((bit / 64) as usize, 1u64 << (bit % 64))
    }

    pub fn insert(&mut self, key: u64) {
        for i in 0..self.hashes {
            let (w, b) = self.probe(key, i);
            self.bits[w] |= b;
        }
    }

    pub fn contains(&self, key: u64) -> bool {
        (0..self.hashes).all(|i| {
            let (w, b) = self.probe(key, i);
            self.bits[w] & b != 0
        })
    }
}

fn seen_key(worker: u16, seq: u32) -> u64 {
    (u64::from(worker) << 32) | u64::from(seq)
}

/// Switch-local CPU state: which (worker, seq) gradient packets have been
/// aggregated, plus copies of aggregation results not yet acknowledged by
/// their worker.
#[derive(Debug, Clone, Default)]
pub struct LocalAgent {
    seen: BTreeSet<(u16, u32)>,
    max_seq: BTreeMap<u16, u32>,
    unacked: BTreeMap<(u16, u32, u16), UnackedResult>,
    /// Bloom mode answers dedup queries from the filter; the exact set is
    /// still tracked so false-positive drops of fresh writes are counted.
    bloom: Option<BloomFilter>,
    pub bloom_false_positive_drops: u64,
}

#[derive(Debug, Clone)]
pub struct UnackedResult {
    pub pkt: Packet,
    pub retries: u8,
    pub timer_gen: u32,
}

impl LocalAgent {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bloom(log2_bits: u8, hashes: u32) -> Self {
        Self { bloom: Some(BloomFilter::new(log2_bits, hashes)), ..Self::default() }
    }

    /// Queried for retransmit-flagged gradient packets: was this
    /// (worker, seq) already aggregated?
    pub fn dedup_check(&mut self, worker: u16, seq: u32) -> DedupOutcome {
        let exact = self.seen.contains(&(worker, seq));
        match &self.bloom {
            Some(filter) => {
                if filter.contains(seen_key(worker, seq)) {
                    if !exact {
                        self.bloom_false_positive_drops += 1;
                    }
                    DedupOutcome::Duplicate
                } else {
                    DedupOutcome::Fresh
                }
            }
            None => {
                if exact {
                    DedupOutcome::Duplicate
                } else {
                    DedupOutcome::Fresh
                }
            }
        }
    }

    /// Records an aggregated packet. Returns false if the entry already
    /// existed (which the exactly-once machinery should have prevented).
    pub fn mark_seen(&mut self, worker: u16, seq: u32) -> bool {
        if let Some(f) = &mut self.bloom {
            f.insert(seen_key(worker, seq));
        }
        let fresh = self.seen.insert((worker, seq));
        let horizon = self.max_seq.entry(worker).or_insert(0);
        *horizon = (*horizon).max(seq);
        // GC: entries far below the newest seq are unreachable by retransmission
        if seq == *horizon && seq > SEEN_GC_HORIZON {
            let cutoff = seq - SEEN_GC_HORIZON;
            let stale: Vec<(u16, u32)> = self
                .seen
                .range((worker, 0)..(worker, cutoff))
                .copied()
                .collect();
            for k in stale {
                self.seen.remove(&k);
            }
        }
        fresh
    }

    pub fn seen_len(&self) -> usize {
        self.seen.len()
    }

    pub fn seen_iter(&self) -> impl Iterator<Item = &(u16, u32)> {
        self.seen.iter()
    }

    pub fn restore_seen(&mut self, entries: impl IntoIterator<Item = (u16, u32)>) {
        for (w, s) in entries {
            if let Some(f) = &mut self.bloom {
                f.insert(seen_key(w, s));
            }
            self.seen.insert((w, s));
            let horizon = self.max_seq.entry(w).or_insert(0);
            *horizon = (*horizon).max(s);
        }
    }

    pub fn store_unacked(&mut self, worker: u16, seq: u32, chunk: u16, pkt: Packet, timer_gen: u32) {
        self.unacked
            .insert((worker, seq, chunk), UnackedResult { pkt, retries: 0, timer_gen });
    }

    /// Worker acknowledged a result chunk.
    pub fn on_ack(&mut self, worker: u16, seq: u32, chunk: u16) -> bool {
        self.unacked.remove(&(worker, seq, chunk)).is_some()
    }

    pub fn unacked_len(&self) -> usize {
        self.unacked.len()
    }

    pub fn unacked_get_mut(&mut self, key: &(u16, u32, u16)) -> Option<&mut UnackedResult> {
        self.unacked.get_mut(key)
    }

    pub fn drop_unacked(&mut self, key: &(u16, u32, u16)) {
        self.unacked.remove(key);
    }
}

/// Reasons the controller can flag a switch as about to fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailSignal {
    MissedReplies(u8),
    ReplyLatency(SimTime),
    DropRate,
    MemoryPressure(u64),
}

impl fmt::Display for FailSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissedReplies(n) => write!(f, "missed {n} heartbeat replies"),
            Self::ReplyLatency(t) => write!(f, "heartbeat reply latency {t} ticks"),
            Self::DropRate => write!(f, "observed drop rate over threshold"),
            Self::MemoryPressure(b) => write!(f, "memory_in_use {b} over threshold"),
        }
    }
}

/// Failure predicate knobs. The paper lists example signals without
/// numbers; these defaults are configuration, not claims.
#[derive(Debug, Clone, Copy)]
pub struct FailureThresholds {
    pub max_reply_latency: SimTime,
    pub max_drop_rate: f64,
    pub max_memory_in_use: u64,
    pub missed_reply_limit: u8,
}

impl Default for FailureThresholds {
    fn default() -> Self {
        Self {
            max_reply_latency: 64,
            max_drop_rate: 0.05,
            max_memory_in_use: u64::MAX,
            missed_reply_limit: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MigrationRecord {
    pub at: SimTime,
    pub from: u8,
    pub to: u8,
}

/// Controller view of the job: heartbeat bookkeeping for the active
/// switch, a roster of preloaded standbys, and the migration log.
#[derive(Debug, Clone)]
pub struct Controller {
    pub thresholds: FailureThresholds,
    pub active_switch: u8,
    pub standbys: Vec<u8>,
    hb_seq: u32,
    outstanding: Option<(u32, SimTime)>,
    consecutive_missed: u8,
    last_stats: Option<SwitchStats>,
    pub migrations: Vec<MigrationRecord>,
    pub alarms: Vec<FailSignal>,
    flagged: bool,
}

impl Controller {
    pub fn new(active_switch: u8, standbys: Vec<u8>, thresholds: FailureThresholds) -> Self {
        Self {
            thresholds,
            active_switch,
            standbys,
            hb_seq: 0,
            outstanding: None,
            consecutive_missed: 0,
            last_stats: None,
            migrations: Vec::new(),
            alarms: Vec::new(),
            flagged: false,
        }
    }

    /// Opens a heartbeat round: notes a missed reply if the previous one
    /// is still outstanding and returns the seq to send.
    pub fn begin_round(&mut self, now: SimTime) -> u32 {
        if self.outstanding.is_some() {
            self.consecutive_missed = self.consecutive_missed.saturating_add(1);
        }
        self.hb_seq = self.hb_seq.wrapping_add(1);
        self.outstanding = Some((self.hb_seq, now));
        self.hb_seq
    }

    /// Ingests a STATS reply; returns the measured reply latency.
    pub fn on_stats(&mut self, seq: u32, stats: SwitchStats, now: SimTime) -> Option<SimTime> {
        match self.outstanding {
            Some((expect, sent)) if expect == seq => {
                self.outstanding = None;
                self.consecutive_missed = 0;
                self.last_stats = Some(stats);
                Some(now - sent)
            }
            _ => None,
        }
    }

    /// Evaluates the failure predicate. Marks at most once.
    pub fn about_to_fail(&mut self, reply_latency: Option<SimTime>) -> Option<FailSignal> {
        if self.flagged {
            return None;
        }
        let t = &self.thresholds;
        let signal = if self.consecutive_missed >= t.missed_reply_limit {
            Some(FailSignal::MissedReplies(self.consecutive_missed))
        } else if let Some(lat) = reply_latency.filter(|l| *l > t.max_reply_latency) {
            Some(FailSignal::ReplyLatency(lat))
        } else if let Some(s) = &self.last_stats {
            if s.packets_in > 0
                && s.drops_observed as f64 / s.packets_in as f64 > t.max_drop_rate
            {
                Some(FailSignal::DropRate)
            } else if s.memory_in_use > t.max_memory_in_use {
                Some(FailSignal::MemoryPressure(s.memory_in_use))
            } else {
                None
            }
        } else {
            None
        };
        if let Some(sig) = signal {
            self.flagged = true;
            self.alarms.push(sig);
            return Some(sig);
        }
        None
    }

    /// Picks the standby to migrate to, recording the event. The actual
    /// state transfer is `switchd::export_state` / `import_state` invoked
    /// at a quiescent point by the run loop.
    pub fn take_standby(&mut self, now: SimTime) -> Option<MigrationRecord> {
        let to = if self.standbys.is_empty() {
            return None;
        } else {
            self.standbys.remove(0)
        };
        let rec = MigrationRecord { at: now, from: self.active_switch, to };
        self.active_switch = to;
        self.migrations.push(rec);
        // a fresh active switch starts with a clean slate of suspicion
        self.outstanding = None;
        self.consecutive_missed = 0;
        self.flagged = false;
        Some(rec)
    }
}
