//! Worker and parameter-server state machines.
//!
//! Workers split each sparse batch into hot gradients (rank-mapped,
//! packaged register-aware, pushed to the switch) and cold gradients
//! (pushed to the PS through the switch). Every pushed packet sits in an
//! in-flight table with an ACK timer; retransmissions reuse the sequence
//! number with the retransmit bit set. The PS aggregates cold gradients
//! with exact host arithmetic and per-(worker, seq) dedup.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::clock::SimTime;
use crate::heat::HotSet;
use crate::packaging::package_gradients;
use crate::packet::{
    AggEntry, Body, Packet, PacketType, AGG_ERROR_VERSION, HOT_PAIRS_MAX, WIDE_ENTRIES_MAX,
};
use crate::types::{GradientUpdate, HotUpdate, MappedId, RawId};

/// Partition of a batch by hot-set membership: a key is hot iff the index
/// map knows it. The two sides together are exactly the input.
pub fn split_hot_cold(
    batch: &[GradientUpdate],
    hot: &HotSet,
) -> (Vec<HotUpdate>, Vec<(RawId, f32)>) {
    let mut hots = Vec::new();
    let mut colds = Vec::new();
    for g in batch {
        match hot.mapped_id(g.raw_id) {
            Some(id) => hots.push(HotUpdate { id, value: g.value }),
            None => colds.push((g.raw_id, g.value)),
        }
    }
    (hots, colds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireDest {
    Switch,
    Ps,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkerAction {
    Send { dest: WireDest, pkt: Packet },
    ArmTimer { at: SimTime, seq: u32, gen: u32 },
    /// Unrecoverable invariant breach; the run aborts with this diagnostic.
    Fatal(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkerCounters {
    pub pushed_hot_pairs: u64,
    pub pushed_cold_pairs: u64,
    pub batches_sent: u64,
    pub retransmits: u64,
    pub acks_received: u64,
    pub backpressure_events: u64,
    pub agg_chunks_received: u64,
    pub version_regressions: u64,
    pub pull_error_entries: u64,
    pub spilled_keys: u64,
}

#[derive(Debug)]
struct InFlight {
    dest: WireDest,
    pkt: Packet,
    retries: u8,
    timer_gen: u32,
    is_pull: bool,
    chunks_seen: BTreeSet<u16>,
    chunk_total: Option<u16>,
}

#[derive(Debug)]
pub struct Worker {
    pub id: u16,
    job_id: u8,
    hot_set: Arc<HotSet>,
    num_registers: u32,
    window_cap: usize,
    retransmit_cap: u8,
    ack_timeout: SimTime,
    next_seq: u32,
    pending_batches: VecDeque<Vec<GradientUpdate>>,
    prepared: VecDeque<(WireDest, Packet)>,
    inflight: BTreeMap<u32, InFlight>,
    /// Pulled hot view: mapped id -> (value, version).
    model_hot: BTreeMap<u32, (f32, u32)>,
    /// Pulled cold view keyed by model-native id.
    model_cold: BTreeMap<u64, f32>,
    pub counters: WorkerCounters,
}

impl Worker {
    pub fn new(
        id: u16,
        job_id: u8,
        hot_set: Arc<HotSet>,
        num_registers: u32,
        window_cap: usize,
        retransmit_cap: u8,
        ack_timeout: SimTime,
    ) -> Self {
        Self {
            id,
            job_id,
            hot_set,
            num_registers,
            window_cap,
            retransmit_cap,
            ack_timeout,
            next_seq: 0,
            pending_batches: VecDeque::new(),
            prepared: VecDeque::new(),
            inflight: BTreeMap::new(),
            model_hot: BTreeMap::new(),
            model_cold: BTreeMap::new(),
            counters: WorkerCounters::default(),
        }
    }

    pub fn hot_set(&self) -> &HotSet {
        &self.hot_set
    }

    pub fn queue_batch(&mut self, batch: Vec<GradientUpdate>) {
        self.pending_batches.push_back(batch);
    }

    pub fn in_flight(&self) -> usize {
        self.inflight.len()
    }

    /// Everything pushed, acked and pulled.
    pub fn is_drained(&self) -> bool {
        self.pending_batches.is_empty() && self.prepared.is_empty() && self.inflight.is_empty()
    }

    fn take_seq(&mut self) -> u32 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Turns queued batches into packets, then sends as far as the window
    /// cap allows. Call after queueing work or consuming an ACK.
    pub fn pump(&mut self, now: SimTime) -> Vec<WorkerAction> {
        let mut actions = Vec::new();
        while let Some(batch) = self.pending_batches.pop_front() {
            if let Err(e) = self.prepare_batch(&batch) {
                actions.push(WorkerAction::Fatal(e));
                return actions;
            }
        }
        let mut stalled = false;
        while let Some((dest, pkt)) = self.prepared.pop_front() {
            if self.inflight.len() >= self.window_cap {
                self.prepared.push_front((dest, pkt));
                stalled = true;
                break;
            }
            actions.extend(self.dispatch(dest, pkt, now));
        }
        if stalled {
            self.counters.backpressure_events += 1;
        }
        actions
    }

    fn prepare_batch(&mut self, batch: &[GradientUpdate]) -> Result<(), String> {
        let (hots, colds) = split_hot_cold(batch, &self.hot_set);
        let packaged = package_gradients(&hots, self.num_registers, HOT_PAIRS_MAX)
            .map_err(|e| alloc::format!("worker {}: {e}", self.id))?;
        self.counters.spilled_keys += packaged.spilled_keys as u64;
        for group in packaged.groups {
            self.counters.pushed_hot_pairs += group.len() as u64;
            let seq = self.take_seq();
            let pkt =
                Packet::new(self.job_id, PacketType::Gradient, seq, self.id, Body::HotPairs(group));
            self.prepared.push_back((WireDest::Switch, pkt));
        }
        for chunk in colds.chunks(WIDE_ENTRIES_MAX) {
            self.counters.pushed_cold_pairs += chunk.len() as u64;
            let seq = self.take_seq();
            let mut pkt = Packet::new(
                self.job_id,
                PacketType::Gradient,
                seq,
                self.id,
                Body::ColdPairs(chunk.to_vec()),
            );
            pkt.cold = true;
            self.prepared.push_back((WireDest::Ps, pkt));
        }
        self.counters.batches_sent += 1;
        Ok(())
    }

    fn dispatch(&mut self, dest: WireDest, pkt: Packet, now: SimTime) -> Vec<WorkerAction> {
        let seq = pkt.seq;
        let is_pull = pkt.ptype == PacketType::Pull;
        self.inflight.insert(
            seq,
            InFlight {
                dest,
                pkt: pkt.clone(),
                retries: 0,
                timer_gen: 0,
                is_pull,
                chunks_seen: BTreeSet::new(),
                chunk_total: None,
            },
        );
        alloc::vec![
            WorkerAction::Send { dest, pkt },
            WorkerAction::ArmTimer { at: now + self.ack_timeout, seq, gen: 0 },
        ]
    }

    /// Issues pulls for the given hot ranks plus (optionally) a full cold
    /// dump from the PS. Runs through the same window/timer machinery.
    pub fn begin_pull(&mut self, hot_ids: &[MappedId], cold_dump: bool) {
        for chunk in hot_ids.chunks(HOT_PAIRS_MAX) {
            let seq = self.take_seq();
            let pkt = Packet::new(
                self.job_id,
                PacketType::Pull,
                seq,
                self.id,
                Body::HotIds(chunk.to_vec()),
            );
            self.prepared.push_back((WireDest::Switch, pkt));
        }
        if cold_dump {
            let seq = self.take_seq();
            let mut pkt =
                Packet::new(self.job_id, PacketType::Pull, seq, self.id, Body::ColdIds(Vec::new()));
            pkt.cold = true;
            self.prepared.push_back((WireDest::Ps, pkt));
        }
    }

    /// ACK consumption: clears the in-flight entry for pushed gradients.
    pub fn on_ack(&mut self, seq: u32) {
        if let Some(entry) = self.inflight.get(&seq) {
            if entry.is_pull {
                return; // pulls complete via their AGG_RESULT chunks
            }
            self.inflight.remove(&seq);
            self.counters.acks_received += 1;
        }
    }

    /// Applies an aggregation-result chunk and acknowledges it toward its
    /// origin. Re-deliveries are re-acked and applied idempotently.
    pub fn on_agg_result(&mut self, pkt: &Packet) -> Vec<WorkerAction> {
        let mut actions = Vec::new();
        let origin = if pkt.cold { WireDest::Ps } else { WireDest::Switch };
        // always ack the chunk so the agent can clear its copy
        let mut ack = Packet::new(self.job_id, PacketType::Ack, pkt.seq, self.id, Body::Empty);
        ack.chunk_index = pkt.chunk_index;
        ack.chunk_total = pkt.chunk_total;
        ack.cold = pkt.cold;
        actions.push(WorkerAction::Send { dest: origin, pkt: ack });

        self.counters.agg_chunks_received += 1;
        match &pkt.body {
            Body::AggEntries(entries) => {
                for e in entries {
                    self.apply_hot_entry(e);
                }
            }
            Body::ColdAggEntries(entries) => {
                for (id, v) in entries {
                    self.model_cold.insert(id.0, *v);
                }
            }
            _ => {}
        }

        if let Some(entry) = self.inflight.get_mut(&pkt.seq) {
            if entry.is_pull {
                entry.chunk_total = Some(pkt.chunk_total);
                entry.chunks_seen.insert(pkt.chunk_index);
                if entry.chunks_seen.len() == usize::from(pkt.chunk_total) {
                    self.inflight.remove(&pkt.seq);
                }
            }
        }
        actions
    }

    fn apply_hot_entry(&mut self, e: &AggEntry) {
        if e.version == AGG_ERROR_VERSION {
            self.counters.pull_error_entries += 1;
            return;
        }
        match self.model_hot.get(&e.id.0) {
            Some((_, old)) if *old > e.version => {
                // a pulled value must never go backwards in version
                self.counters.version_regressions += 1;
            }
            _ => {
                self.model_hot.insert(e.id.0, (e.value, e.version));
            }
        }
    }

    /// ACK-timeout expiry: retransmits the identical payload under the
    /// same sequence number with the retransmit bit set.
    pub fn on_timer(&mut self, seq: u32, gen: u32, now: SimTime) -> Vec<WorkerAction> {
        let cap = self.retransmit_cap;
        let timeout = self.ack_timeout;
        let Some(entry) = self.inflight.get_mut(&seq) else {
            return Vec::new();
        };
        if entry.timer_gen != gen {
            return Vec::new();
        }
        if entry.retries >= cap {
            return alloc::vec![WorkerAction::Fatal(alloc::format!(
                "worker {}: seq {} exceeded {} retransmissions",
                self.id,
                seq,
                cap
            ))];
        }
        entry.retries += 1;
        entry.timer_gen += 1;
        let gen = entry.timer_gen;
        let mut pkt = entry.pkt.clone();
        pkt.retransmit = true;
        let dest = entry.dest;
        self.counters.retransmits += 1;
        alloc::vec![
            WorkerAction::Send { dest, pkt },
            WorkerAction::ArmTimer { at: now + timeout, seq, gen },
        ]
    }

    pub fn pulled_hot(&self) -> &BTreeMap<u32, (f32, u32)> {
        &self.model_hot
    }

    pub fn pulled_cold(&self) -> &BTreeMap<u64, f32> {
        &self.model_cold
    }

    /// Merges the pulled switch view (inverse-mapped to model-native ids)
    /// with the pulled PS view.
    pub fn reconstruct_model(&self) -> Result<BTreeMap<u64, f32>, PartitionViolation> {
        let mut out = BTreeMap::new();
        for (mapped, (value, _version)) in &self.model_hot {
            let raw = self
                .hot_set
                .raw_id(MappedId(*mapped))
                .ok_or(PartitionViolation { raw_id: u64::from(*mapped) })?;
            out.insert(raw.0, *value);
        }
        for (raw, value) in &self.model_cold {
            if out.insert(*raw, *value).is_some() {
                return Err(PartitionViolation { raw_id: *raw });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionViolation {
    pub raw_id: u64,
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parameter {} appears in both hot and cold views", self.raw_id)
    }
}

impl core::error::Error for PartitionViolation {}

/// One plain SGD step over a reconstructed gradient view; exists to
/// exercise the pull path, not to model training.
pub fn sgd_apply(params: &mut BTreeMap<u64, f32>, grads: &BTreeMap<u64, f32>, lr: f32) {
    for (id, g) in grads {
        *params.entry(*id).or_insert(0.0) -= lr * *g;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PsCounters {
    pub packets_in: u64,
    pub applied_pairs: u64,
    pub duplicate_packets: u64,
    pub anomalies: u64,
    pub gradient_payload_bytes: u64,
    pub acks_sent: u64,
}

/// Parameter server: exact f64 accumulators for cold parameters.
#[derive(Debug, Default)]
pub struct Ps {
    job_id: u8,
    store: BTreeMap<u64, f64>,
    write_counts: BTreeMap<u64, u64>,
    seen: BTreeSet<(u16, u32)>,
    pub counters: PsCounters,
}

impl Ps {
    pub fn new(job_id: u8) -> Self {
        Self { job_id, ..Self::default() }
    }

    pub fn value(&self, raw: RawId) -> f64 {
        self.store.get(&raw.0).copied().unwrap_or(0.0)
    }

    pub fn write_count(&self, raw: RawId) -> u64 {
        self.write_counts.get(&raw.0).copied().unwrap_or(0)
    }

    pub fn store(&self) -> &BTreeMap<u64, f64> {
        &self.store
    }

    pub fn handle_packet(&mut self, pkt: &Packet) -> Vec<(u16, Packet)> {
        self.counters.packets_in += 1;
        match (&pkt.ptype, &pkt.body) {
            (PacketType::Gradient, Body::ColdPairs(pairs)) => {
                self.counters.gradient_payload_bytes += 12 * pairs.len() as u64;
                let key = (pkt.worker_id, pkt.seq);
                if self.seen.contains(&key) {
                    if pkt.retransmit {
                        self.counters.duplicate_packets += 1;
                    } else {
                        self.counters.anomalies += 1;
                    }
                } else {
                    self.seen.insert(key);
                    for (id, v) in pairs {
                        *self.store.entry(id.0).or_insert(0.0) += f64::from(*v);
                        *self.write_counts.entry(id.0).or_insert(0) += 1;
                        self.counters.applied_pairs += 1;
                    }
                }
                let mut ack =
                    Packet::new(self.job_id, PacketType::Ack, pkt.seq, pkt.worker_id, Body::Empty);
                ack.cold = true;
                self.counters.acks_sent += 1;
                alloc::vec![(pkt.worker_id, ack)]
            }
            (PacketType::Pull, Body::ColdIds(ids)) => self.answer_pull(pkt, ids),
            (PacketType::Ack, _) => Vec::new(), // agg-result acks need no action
            _ => Vec::new(),
        }
    }

    fn answer_pull(&mut self, pkt: &Packet, ids: &[RawId]) -> Vec<(u16, Packet)> {
        let entries: Vec<(RawId, f32)> = if ids.is_empty() {
            // full dump in ascending id order
            self.store.iter().map(|(id, v)| (RawId(*id), *v as f32)).collect()
        } else {
            ids.iter().map(|id| (*id, self.value(*id) as f32)).collect()
        };
        let chunks: Vec<&[(RawId, f32)]> = if entries.is_empty() {
            alloc::vec![&entries[..]]
        } else {
            entries.chunks(WIDE_ENTRIES_MAX).collect()
        };
        assert!(chunks.len() <= usize::from(u16::MAX), "cold store exceeds chunk addressing");
        let total = chunks.len() as u16;
        chunks
            .into_iter()
            .enumerate()
            .map(|(i, chunk)| {
                let mut resp = Packet::new(
                    self.job_id,
                    PacketType::AggResult,
                    pkt.seq,
                    pkt.worker_id,
                    Body::ColdAggEntries(chunk.to_vec()),
                );
                resp.cold = true;
                resp.chunk_index = i as u16;
                resp.chunk_total = total;
                (pkt.worker_id, resp)
            })
            .collect()
    }
}
