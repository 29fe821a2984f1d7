//! The modeled switch data plane.
//!
//! Gradient packets addressed to the switch are parsed, their pairs
//! aggregated into register slots under the one-access-per-register-per-
//! pass constraint (conflicts cost recirculation passes), and ACKed.
//! Traffic addressed elsewhere transits the switch unmodified. Pulls are
//! answered from the live accumulators without resetting them; a copy of
//! every aggregation result goes to the local agent, which retransmits
//! results the worker never acknowledged.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::clock::SimTime;
use crate::layout::{LayoutMode, RegisterLayout};
use crate::lns::{self, LnsTables, LnsValue, LNS_ZERO};
use crate::packet::{
    AggEntry, Body, Packet, PacketType, SwitchStats, AGG_ERROR_VERSION, WIDE_ENTRIES_MAX,
};
use crate::reliability::{DedupOutcome, LocalAgent};
use crate::types::{HotUpdate, MappedId};

const SNAPSHOT_MAGIC: &[u8; 8] = b"HASNAP01";

/// One register slot: the running LNS sum and its write counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub acc: LnsValue,
    pub version: u32,
}

impl Default for Slot {
    fn default() -> Self {
        Self { acc: LNS_ZERO, version: 0 }
    }
}

/// `m x slots_per_register` accumulator array.
#[derive(Debug, Clone)]
pub struct RegisterBank {
    slots: Vec<Slot>,
}

impl RegisterBank {
    fn new(capacity: usize) -> Self {
        Self { slots: alloc::vec![Slot::default(); capacity] }
    }

    pub fn slot(&self, index: usize) -> &Slot {
        &self.slots[index]
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Where an emitted packet should go; the run loop owns addressing.
#[derive(Debug, Clone, PartialEq)]
pub enum SwitchOutput {
    ToWorker(u16, Packet),
    ToPs(Packet),
    ToController(Packet),
    /// Ask the run loop to fire `on_agent_timer` for this result chunk.
    ArmAgentTimer { at: SimTime, worker: u16, seq: u32, chunk: u16, gen: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotError {
    Magic,
    Truncated,
    ConfigMismatch(&'static str),
}

impl fmt::Display for SnapshotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Magic => write!(f, "snapshot magic mismatch"),
            Self::Truncated => write!(f, "snapshot truncated"),
            Self::ConfigMismatch(field) => write!(f, "snapshot {field} differs from switch config"),
        }
    }
}

impl core::error::Error for SnapshotError {}

#[derive(Debug)]
pub struct Switch {
    pub id: u8,
    pub job_id: u8,
    layout: RegisterLayout,
    tables: Arc<LnsTables>,
    hot_k: u32,
    bank: RegisterBank,
    pub agent: LocalAgent,
    stats: SwitchStats,
    agent_timeout: SimTime,
    agent_retry_cap: u8,
    agent_timer_gen: u32,
    control_overhead_bytes: u64,
    /// Fault injection: a degraded switch drops all dataplane traffic and
    /// stops answering heartbeats; its state stays pullable off-band.
    pub degraded: bool,
}

impl Switch {
    pub fn new(
        id: u8,
        job_id: u8,
        layout: RegisterLayout,
        tables: Arc<LnsTables>,
        hot_k: u32,
        agent_timeout: SimTime,
        control_overhead_bytes: u64,
    ) -> Self {
        assert!(hot_k <= layout.capacity());
        let capacity = layout.capacity() as usize;
        Self {
            id,
            job_id,
            layout,
            tables,
            hot_k,
            bank: RegisterBank::new(capacity),
            agent: LocalAgent::new(),
            stats: SwitchStats::default(),
            agent_timeout,
            agent_retry_cap: 16,
            agent_timer_gen: 0,
            control_overhead_bytes,
            degraded: false,
        }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn bank(&self) -> &RegisterBank {
        &self.bank
    }

    pub fn hot_k(&self) -> u32 {
        self.hot_k
    }

    fn slot_of(&self, id: MappedId) -> usize {
        self.layout.slot_index(id)
    }

    /// Read a slot by mapped id (test and harness convenience).
    pub fn slot_for(&self, id: MappedId) -> &Slot {
        self.bank.slot(self.slot_of(id))
    }

    /// Decoded value of a slot.
    pub fn decoded(&self, id: MappedId) -> f32 {
        lns::lns_to_float(self.slot_for(id).acc, &self.tables)
    }

    /// Ingests a frame off the wire; malformed frames are dropped and
    /// counted.
    pub fn handle_frame(&mut self, bytes: &[u8], now: SimTime) -> Vec<SwitchOutput> {
        match crate::packet::decode(bytes) {
            Ok(pkt) => self.handle_packet(pkt, now),
            Err(_) => {
                self.stats.packets_in += 1;
                self.stats.drops_observed += 1;
                Vec::new()
            }
        }
    }

    /// Processes a packet addressed to this switch.
    pub fn handle_packet(&mut self, pkt: Packet, now: SimTime) -> Vec<SwitchOutput> {
        self.stats.packets_in += 1;
        if self.degraded {
            self.stats.drops_observed += 1;
            return Vec::new();
        }
        match pkt.ptype {
            PacketType::Gradient => self.on_gradient(pkt),
            PacketType::Pull => self.on_pull(pkt, now),
            PacketType::Heartbeat => self.on_heartbeat(pkt),
            PacketType::Ack => {
                self.agent.on_ack(pkt.worker_id, pkt.seq, pkt.chunk_index);
                Vec::new()
            }
            _ => {
                self.stats.drops_observed += 1;
                Vec::new()
            }
        }
    }

    /// Carries a packet through the switch between a worker and the PS.
    /// Cold gradient traffic is counted; a degraded switch drops transit.
    pub fn transit(&mut self, pkt: Packet) -> Option<Packet> {
        self.stats.packets_in += 1;
        if self.degraded {
            self.stats.drops_observed += 1;
            return None;
        }
        if pkt.ptype == PacketType::Gradient && pkt.cold {
            self.stats.cold_forwarded += 1;
        }
        self.stats.packets_out += 1;
        Some(pkt)
    }

    fn on_gradient(&mut self, pkt: Packet) -> Vec<SwitchOutput> {
        let Body::HotPairs(pairs) = &pkt.body else {
            // cold gradients are never addressed to the switch
            self.stats.drops_observed += 1;
            return Vec::new();
        };
        let mut out = Vec::new();
        let duplicate = pkt.retransmit
            && self.agent.dedup_check(pkt.worker_id, pkt.seq) == DedupOutcome::Duplicate;
        if duplicate {
            self.stats.duplicates_suppressed += 1;
        } else {
            self.apply_pairs(pairs);
            self.agent.mark_seen(pkt.worker_id, pkt.seq);
        }
        let mut ack = Packet::new(self.job_id, PacketType::Ack, pkt.seq, pkt.worker_id, Body::Empty);
        ack.cold = pkt.cold;
        self.stats.packets_out += 1;
        out.push(SwitchOutput::ToWorker(pkt.worker_id, ack));
        out
    }

    /// One register may be touched once per pipeline pass; conflicting
    /// pairs defer to recirculation passes. Passes beyond the single
    /// recirculation the hardware allows are still applied but flagged.
    fn apply_pairs(&mut self, pairs: &[HotUpdate]) {
        let mut pending: Vec<&HotUpdate> = pairs.iter().collect();
        let mut passes: u64 = 0;
        let mut touched: Vec<u32> = Vec::with_capacity(pending.len());
        while !pending.is_empty() {
            passes += 1;
            touched.clear();
            let mut deferred = Vec::new();
            for g in pending {
                if g.id.0 >= self.hot_k {
                    self.stats.drops_observed += 1;
                    continue;
                }
                let reg = self.layout.register(g.id);
                if touched.contains(&reg) {
                    deferred.push(g);
                    continue;
                }
                touched.push(reg);
                let idx = self.slot_of(g.id);
                let slot = &mut self.bank.slots[idx];
                let enc = lns::float_to_lns(g.value, &self.tables)
                    .expect("codec guarantees finite gradient values");
                let (acc, saturated) = lns::lns_add(slot.acc, enc, &self.tables);
                slot.acc = acc;
                slot.version += 1;
                self.stats.aggregated_pairs += 1;
                if saturated {
                    self.stats.saturations += 1;
                }
            }
            pending = deferred;
        }
        let recirculations = passes.saturating_sub(1);
        self.stats.recirculations += recirculations;
        if recirculations >= 2 {
            self.stats.infeasible_passes += 1;
        }
    }

    fn on_pull(&mut self, pkt: Packet, now: SimTime) -> Vec<SwitchOutput> {
        let Body::HotIds(ids) = &pkt.body else {
            self.stats.drops_observed += 1;
            return Vec::new();
        };
        let entries: Vec<AggEntry> = ids
            .iter()
            .map(|id| {
                if id.0 < self.hot_k {
                    let slot = self.slot_for(*id);
                    AggEntry {
                        id: *id,
                        value: lns::lns_to_float(slot.acc, &self.tables),
                        version: slot.version,
                    }
                } else {
                    AggEntry { id: *id, value: 0.0, version: AGG_ERROR_VERSION }
                }
            })
            .collect();
        let chunks: Vec<&[AggEntry]> = if entries.is_empty() {
            alloc::vec![&entries[..]]
        } else {
            entries.chunks(WIDE_ENTRIES_MAX).collect()
        };
        let total = chunks.len() as u16;
        let mut out = Vec::new();
        for (i, chunk) in chunks.into_iter().enumerate() {
            let mut resp = Packet::new(
                self.job_id,
                PacketType::AggResult,
                pkt.seq,
                pkt.worker_id,
                Body::AggEntries(chunk.to_vec()),
            );
            resp.chunk_index = i as u16;
            resp.chunk_total = total;
            self.stats.packets_out += 1;
            // copy to the local agent for retransmission on silence
            self.agent_timer_gen += 1;
            let gen = self.agent_timer_gen;
            self.agent
                .store_unacked(pkt.worker_id, pkt.seq, i as u16, resp.clone(), gen);
            out.push(SwitchOutput::ArmAgentTimer {
                at: now + self.agent_timeout,
                worker: pkt.worker_id,
                seq: pkt.seq,
                chunk: i as u16,
                gen,
            });
            out.push(SwitchOutput::ToWorker(pkt.worker_id, resp));
        }
        out
    }

    fn on_heartbeat(&mut self, pkt: Packet) -> Vec<SwitchOutput> {
        let stats = self.report_stats();
        let resp = Packet::new(self.job_id, PacketType::Stats, pkt.seq, 0, Body::Stats(stats));
        self.stats.packets_out += 1;
        alloc::vec![SwitchOutput::ToController(resp)]
    }

    /// Agent retransmission of a result chunk the worker never ACKed.
    pub fn on_agent_timer(
        &mut self,
        worker: u16,
        seq: u32,
        chunk: u16,
        gen: u32,
        now: SimTime,
    ) -> Vec<SwitchOutput> {
        if self.degraded {
            return Vec::new();
        }
        let key = (worker, seq, chunk);
        let Some(entry) = self.agent.unacked_get_mut(&key) else {
            return Vec::new();
        };
        if entry.timer_gen != gen {
            return Vec::new();
        }
        if entry.retries >= self.agent_retry_cap {
            // give up; the worker's own pull retry will re-request
            self.agent.drop_unacked(&key);
            return Vec::new();
        }
        entry.retries += 1;
        let mut pkt = entry.pkt.clone();
        pkt.retransmit = true;
        self.agent_timer_gen += 1;
        let gen = self.agent_timer_gen;
        entry.timer_gen = gen;
        self.stats.packets_out += 1;
        alloc::vec![
            SwitchOutput::ArmAgentTimer { at: now + self.agent_timeout, worker, seq, chunk, gen },
            SwitchOutput::ToWorker(worker, pkt),
        ]
    }

    pub fn report_stats(&self) -> SwitchStats {
        let mut s = self.stats;
        s.memory_in_use = u64::from(self.hot_k) * 4
            + self.tables.byte_size() as u64
            + self.control_overhead_bytes;
        s
    }

    /// Serializes slot accumulators, versions and the dedup summary.
    /// Format: magic, hot_k, m, slots_per_register, frac_bits, mode, then
    /// per-rank `(mapped_id: u32, sign: u8, logmag: i16, version: u32)`,
    /// then the seen-set as `count: u64` + `(worker: u16, seq: u32)`.
    pub fn export_state(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&self.hot_k.to_le_bytes());
        out.extend_from_slice(&self.layout.m.to_le_bytes());
        out.extend_from_slice(&self.layout.slots_per_register.to_le_bytes());
        out.push(self.tables.frac_bits);
        out.push(match self.layout.mode {
            LayoutMode::HeatBased => 0,
            LayoutMode::Random => 1,
        });
        for rank in 0..self.hot_k {
            let slot = self.slot_for(MappedId(rank));
            out.extend_from_slice(&rank.to_le_bytes());
            out.push(slot.acc.sign as u8);
            out.extend_from_slice(&slot.acc.logmag.to_le_bytes());
            out.extend_from_slice(&slot.version.to_le_bytes());
        }
        let seen: Vec<(u16, u32)> = self.agent.seen_iter().copied().collect();
        out.extend_from_slice(&(seen.len() as u64).to_le_bytes());
        for (w, s) in seen {
            out.extend_from_slice(&w.to_le_bytes());
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    /// Restores a snapshot bit-exactly. The receiving switch must already
    /// run the identical layout and table configuration.
    pub fn import_state(&mut self, bytes: &[u8]) -> Result<(), SnapshotError> {
        let need_header = 8 + 4 + 4 + 4 + 2;
        if bytes.len() < need_header {
            return Err(SnapshotError::Truncated);
        }
        if &bytes[..8] != SNAPSHOT_MAGIC {
            return Err(SnapshotError::Magic);
        }
        let hot_k = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
        let m = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]);
        let spr = u32::from_le_bytes([bytes[16], bytes[17], bytes[18], bytes[19]]);
        let frac_bits = bytes[20];
        let mode = bytes[21];
        if hot_k != self.hot_k {
            return Err(SnapshotError::ConfigMismatch("hot_k"));
        }
        if m != self.layout.m {
            return Err(SnapshotError::ConfigMismatch("num_registers"));
        }
        if spr != self.layout.slots_per_register {
            return Err(SnapshotError::ConfigMismatch("slots_per_register"));
        }
        if frac_bits != self.tables.frac_bits {
            return Err(SnapshotError::ConfigMismatch("frac_bits"));
        }
        let my_mode = match self.layout.mode {
            LayoutMode::HeatBased => 0,
            LayoutMode::Random => 1,
        };
        if mode != my_mode {
            return Err(SnapshotError::ConfigMismatch("layout_mode"));
        }
        let mut off = need_header;
        let entry_bytes = 4 + 1 + 2 + 4;
        if bytes.len() < off + hot_k as usize * entry_bytes + 8 {
            return Err(SnapshotError::Truncated);
        }
        for _ in 0..hot_k {
            let rank = u32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]);
            let sign = bytes[off + 4] as i8;
            let logmag = i16::from_le_bytes([bytes[off + 5], bytes[off + 6]]);
            let version =
                u32::from_le_bytes([bytes[off + 7], bytes[off + 8], bytes[off + 9], bytes[off + 10]]);
            off += entry_bytes;
            let idx = self.slot_of(MappedId(rank));
            self.bank.slots[idx] = Slot { acc: LnsValue { sign, logmag }, version };
        }
        let count = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
        off += 8;
        if bytes.len() < off + count * 6 {
            return Err(SnapshotError::Truncated);
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let w = u16::from_le_bytes([bytes[off], bytes[off + 1]]);
            let s = u32::from_le_bytes([bytes[off + 2], bytes[off + 3], bytes[off + 4], bytes[off + 5]]);
            entries.push((w, s));
            off += 6;
        }
        self.agent.restore_seen(entries);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lns::build_tables;
    use crate::packet::encode;
    use alloc::vec;

    fn test_switch(hot_k: u32) -> Switch {
        let layout = RegisterLayout::heat_based(4, 8);
        Switch::new(0, 1, layout, Arc::new(build_tables(8)), hot_k, 40, 130 * 1024)
    }

    fn gradient(worker: u16, seq: u32, pairs: Vec<HotUpdate>) -> Packet {
        Packet::new(1, PacketType::Gradient, seq, worker, Body::HotPairs(pairs))
    }

    fn hot(id: u32, value: f32) -> HotUpdate {
        HotUpdate { id: MappedId(id), value }
    }

    #[test]
    fn distinct_registers_need_no_recirculation() {
        let mut sw = test_switch(32);
        let out = sw.handle_packet(gradient(0, 1, vec![hot(0, 0.5), hot(1, 0.5), hot(2, 0.5)]), 0);
        assert_eq!(out.len(), 1); // just the ack
        let s = sw.report_stats();
        assert_eq!(s.recirculations, 0);
        assert_eq!(s.aggregated_pairs, 3);
    }

    #[test]
    fn register_conflict_costs_one_recirculation() {
        let mut sw = test_switch(32);
        // ids 0 and 4 share register 0 under m=4
        sw.handle_packet(gradient(0, 1, vec![hot(0, 0.5), hot(4, 0.25)]), 0);
        let s = sw.report_stats();
        assert_eq!(s.recirculations, 1);
        assert_eq!(s.infeasible_passes, 0);
        // three on one register: two extra passes, flagged infeasible
        sw.handle_packet(gradient(0, 2, vec![hot(8, 0.1), hot(12, 0.1), hot(16, 0.1)]), 0);
        let s = sw.report_stats();
        assert_eq!(s.recirculations, 3);
        assert_eq!(s.infeasible_passes, 1);
    }

    #[test]
    fn accumulates_within_lns_tolerance() {
        let mut sw = test_switch(32);
        let vals = [0.5f32, 0.25, -0.125, 0.75, -0.5, 0.3125];
        for (i, v) in vals.iter().enumerate() {
            sw.handle_packet(gradient(0, i as u32, vec![hot(7, *v)]), 0);
        }
        let exact: f64 = vals.iter().map(|v| f64::from(*v)).sum();
        let got = f64::from(sw.decoded(MappedId(7)));
        assert!((got - exact).abs() <= vals.len() as f64 * 0.005 * 0.75, "{got} vs {exact}");
        assert_eq!(sw.slot_for(MappedId(7)).version, vals.len() as u32);
    }

    #[test]
    fn retransmit_after_lost_ack_is_suppressed() {
        let mut sw = test_switch(32);
        let pkt = gradient(3, 9, vec![hot(1, 1.0)]);
        sw.handle_packet(pkt.clone(), 0);
        let v1 = sw.decoded(MappedId(1));
        let mut retrans = pkt;
        retrans.retransmit = true;
        let out = sw.handle_packet(retrans, 5);
        assert_eq!(out.len(), 1, "duplicate still ACKed");
        assert_eq!(sw.decoded(MappedId(1)), v1, "no second aggregation");
        assert_eq!(sw.report_stats().duplicates_suppressed, 1);
        assert_eq!(sw.slot_for(MappedId(1)).version, 1);
    }

    #[test]
    fn retransmit_whose_original_was_lost_is_fresh() {
        let mut sw = test_switch(32);
        let mut pkt = gradient(3, 9, vec![hot(1, 1.0)]);
        pkt.retransmit = true; // original never arrived
        sw.handle_packet(pkt, 0);
        assert_eq!(sw.slot_for(MappedId(1)).version, 1);
        assert_eq!(sw.report_stats().duplicates_suppressed, 0);
    }

    #[test]
    fn pull_reads_without_reset() {
        let mut sw = test_switch(32);
        // never-written key reads zero at version zero
        let pull = Packet::new(1, PacketType::Pull, 50, 2, Body::HotIds(vec![MappedId(5)]));
        let out = sw.handle_packet(pull.clone(), 0);
        let resp = out.iter().find_map(|o| match o {
            SwitchOutput::ToWorker(2, p) => Some(p),
            _ => None,
        });
        let Body::AggEntries(entries) = &resp.unwrap().body else { panic!() };
        assert_eq!(entries[0], AggEntry { id: MappedId(5), value: 0.0, version: 0 });

        sw.handle_packet(gradient(0, 1, vec![hot(5, 0.5)]), 0);
        let out = sw.handle_packet(pull.clone(), 1);
        let count_agg = |out: &[SwitchOutput]| {
            out.iter()
                .filter_map(|o| match o {
                    SwitchOutput::ToWorker(_, p) => Some(p.clone()),
                    _ => None,
                })
                .next()
                .unwrap()
        };
        let Body::AggEntries(e1) = count_agg(&out).body else { panic!() };
        assert!((f64::from(e1[0].value) - 0.5).abs() < 0.0015);
        assert_eq!(e1[0].version, 1);
        // pulling twice returns the same value: reads are not destructive
        let out = sw.handle_packet(pull, 2);
        let Body::AggEntries(e2) = count_agg(&out).body else { panic!() };
        assert_eq!(e1, e2);
    }

    #[test]
    fn out_of_range_pull_id_yields_error_entry() {
        let mut sw = test_switch(8);
        let pull = Packet::new(1, PacketType::Pull, 1, 0, Body::HotIds(vec![MappedId(100)]));
        let out = sw.handle_packet(pull, 0);
        let SwitchOutput::ArmAgentTimer { .. } = &out[0] else { panic!() };
        let SwitchOutput::ToWorker(_, p) = &out[1] else { panic!() };
        let Body::AggEntries(entries) = &p.body else { panic!() };
        assert_eq!(entries[0].version, AGG_ERROR_VERSION);
    }

    #[test]
    fn malformed_frames_are_dropped_and_counted() {
        let mut sw = test_switch(8);
        let mut bytes = encode(&gradient(0, 1, vec![hot(0, 1.0)])).unwrap();
        bytes[12] = 0xff; // corrupt reserved area
        let out = sw.handle_frame(&bytes, 0);
        assert!(out.is_empty());
        assert_eq!(sw.report_stats().drops_observed, 1);
        assert_eq!(sw.report_stats().aggregated_pairs, 0);
    }

    #[test]
    fn stats_reply_and_memory_accounting() {
        let mut sw = test_switch(30); // stand-in; accounting scales with hot_k
        let hb = Packet::new(1, PacketType::Heartbeat, 77, 0, Body::Empty);
        let out = sw.handle_packet(hb, 0);
        let SwitchOutput::ToController(p) = &out[0] else { panic!() };
        assert_eq!(p.seq, 77);
        let Body::Stats(s) = &p.body else { panic!() };
        assert_eq!(s.packets_in, 1);
        assert_eq!(s.memory_in_use, 30 * 4 + 418_304 + 130 * 1024);
    }

    #[test]
    fn fresh_switch_reports_zero_counters() {
        let sw = test_switch(8);
        let s = sw.report_stats();
        assert_eq!(s.packets_in, 0);
        assert_eq!(s.aggregated_pairs, 0);
        assert_eq!(s.recirculations, 0);
    }

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let mut a = test_switch(32);
        for i in 0..20u32 {
            a.handle_packet(gradient(1, i, vec![hot(i % 32, 0.5 - i as f32 * 0.01)]), 0);
        }
        let snap = a.export_state();
        let mut b = test_switch(32);
        b.import_state(&snap).unwrap();
        for r in 0..32u32 {
            assert_eq!(a.slot_for(MappedId(r)), b.slot_for(MappedId(r)));
        }
        assert_eq!(b.export_state(), snap);
        // dedup summary travelled: a retransmit of an applied seq stays suppressed
        let mut dup = gradient(1, 3, vec![hot(3, 0.5 - 0.03)]);
        dup.retransmit = true;
        b.handle_packet(dup, 1);
        assert_eq!(b.report_stats().duplicates_suppressed, 1);
    }

    #[test]
    fn empty_bank_snapshot_is_all_zero_versions() {
        let a = test_switch(16);
        let snap = a.export_state();
        let mut b = test_switch(16);
        b.import_state(&snap).unwrap();
        for r in 0..16u32 {
            assert_eq!(b.slot_for(MappedId(r)).version, 0);
            assert!(b.slot_for(MappedId(r)).acc.is_zero());
        }
    }

    #[test]
    fn snapshot_config_mismatch_is_rejected() {
        let a = test_switch(32);
        let snap = a.export_state();
        let layout = RegisterLayout::heat_based(8, 8);
        let mut b = Switch::new(1, 1, layout, Arc::new(build_tables(8)), 32, 40, 0);
        assert_eq!(b.import_state(&snap), Err(SnapshotError::ConfigMismatch("num_registers")));
        let mut c = Switch::new(1, 1, RegisterLayout::heat_based(4, 8), Arc::new(build_tables(6)), 32, 40, 0);
        assert_eq!(c.import_state(&snap), Err(SnapshotError::ConfigMismatch("frac_bits")));
    }

    #[test]
    fn degraded_switch_goes_silent() {
        let mut sw = test_switch(8);
        sw.degraded = true;
        assert!(sw.handle_packet(gradient(0, 1, vec![hot(0, 1.0)]), 0).is_empty());
        let hb = Packet::new(1, PacketType::Heartbeat, 1, 0, Body::Empty);
        assert!(sw.handle_packet(hb, 0).is_empty());
        assert!(sw
            .transit(Packet::new(1, PacketType::Ack, 1, 0, Body::Empty))
            .is_none());
        assert_eq!(sw.report_stats().drops_observed, 3);
    }
}
