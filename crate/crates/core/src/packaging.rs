//! Register-layout-aware gradient packaging (the worker side of
//! parameter orchestration).
//!
//! A batch of hot gradients is spread over an estimated number of packets
//! so that no packet carries two keys believed to share a register
//! (`id % m`). Keys that cannot be placed under that constraint spill
//! into `G'` and are packed densely into fresh padding packets without
//! the constraint; those are the packets that may recirculate.

use alloc::vec::Vec;
use core::fmt;

use crate::layout::{register_of, RegisterLayout};
use crate::types::{HotUpdate, MappedId};

/// `ceil(|G| / capacity)` packets for a batch.
pub fn estimate_packets(batch_len: usize, capacity: usize) -> usize {
    debug_assert!(capacity >= 1);
    batch_len.div_ceil(capacity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DuplicateKey(pub MappedId);

impl fmt::Display for DuplicateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "key {} appears twice in batch; merge before packaging", self.0)
    }
}

impl core::error::Error for DuplicateKey {}

/// Result of packaging one batch. `groups` are packet payloads in
/// creation order: the register-constrained phase first, then the `G'`
/// padding packets.
#[derive(Debug, Clone, PartialEq)]
pub struct PackagedBatch {
    pub groups: Vec<Vec<HotUpdate>>,
    /// Packets produced by the constrained phase (prefix of `groups`).
    pub constrained_groups: usize,
    /// Keys that fell through to the `G'` path.
    pub spilled_keys: usize,
}

impl PackagedBatch {
    pub fn total_pairs(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

struct OpenPacket {
    pairs: Vec<HotUpdate>,
    regs: Vec<u64>, // bitset over registers
}

impl OpenPacket {
    fn new(m: u32) -> Self {
        Self { pairs: Vec::new(), regs: alloc::vec![0u64; (m as usize).div_ceil(64)] }
    }

    fn has_register(&self, r: u32) -> bool {
        self.regs[(r / 64) as usize] & (1u64 << (r % 64)) != 0
    }

    fn mark_register(&mut self, r: u32) {
        self.regs[(r / 64) as usize] |= 1u64 << (r % 64);
    }
}

/// Packages a merged batch of hot gradients.
///
/// For each key the candidate packets are those not yet full and not yet
/// carrying a key of the same register; the first candidate in creation
/// order wins. Every input gradient appears in exactly one output group.
pub fn package_gradients(
    batch: &[HotUpdate],
    m: u32,
    capacity: usize,
) -> Result<PackagedBatch, DuplicateKey> {
    assert!(capacity >= 1 && m >= 1);
    if batch.is_empty() {
        return Ok(PackagedBatch { groups: Vec::new(), constrained_groups: 0, spilled_keys: 0 });
    }
    let mut seen = hashbrown::HashSet::with_capacity(batch.len());
    for g in batch {
        if !seen.insert(g.id.0) {
            return Err(DuplicateKey(g.id));
        }
    }

    let estimated = estimate_packets(batch.len(), capacity);
    let mut packets: Vec<OpenPacket> = (0..estimated).map(|_| OpenPacket::new(m)).collect();
    // live candidate set, by creation index
    let mut live: Vec<usize> = (0..estimated).collect();
    let mut spill: Vec<HotUpdate> = Vec::new();

    for g in batch {
        let reg = register_of(g.id, m);
        let pos = live.iter().position(|&i| !packets[i].has_register(reg));
        match pos {
            Some(pos) => {
                let idx = live[pos];
                packets[idx].pairs.push(*g);
                packets[idx].mark_register(reg);
                if packets[idx].pairs.len() == capacity {
                    live.remove(pos);
                }
            }
            None => spill.push(*g),
        }
    }

    let mut groups: Vec<Vec<HotUpdate>> = packets
        .into_iter()
        .filter(|p| !p.pairs.is_empty())
        .map(|p| p.pairs)
        .collect();
    let constrained_groups = groups.len();
    let spilled_keys = spill.len();

    // G' padding: greedy fill to capacity in key order, constraint-free
    spill.sort_unstable_by_key(|g| g.id.0);
    for chunk in spill.chunks(capacity) {
        groups.push(chunk.to_vec());
    }

    Ok(PackagedBatch { groups, constrained_groups, spilled_keys })
}

/// Mean recirculations a packet stream needs under the actual switch
/// layout: each packet costs `max over registers of (pairs hitting that
/// register) - 1` extra passes.
pub fn expected_recirculations(groups: &[Vec<HotUpdate>], layout: &RegisterLayout) -> f64 {
    if groups.is_empty() {
        return 0.0;
    }
    let total: u64 = groups.iter().map(|g| recirculations_for(g, layout)).sum();
    total as f64 / groups.len() as f64
}

/// Extra pipeline passes one packet needs under `layout`.
pub fn recirculations_for(group: &[HotUpdate], layout: &RegisterLayout) -> u64 {
    let mut counts: hashbrown::HashMap<u32, u64> = hashbrown::HashMap::new();
    for g in group {
        *counts.entry(layout.register(g.id)).or_insert(0) += 1;
    }
    counts.values().max().copied().unwrap_or(0).saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn upd(id: u32) -> HotUpdate {
        HotUpdate { id: MappedId(id), value: 0.5 }
    }

    #[test]
    fn estimate_boundaries() {
        assert_eq!(estimate_packets(1, 22), 1);
        assert_eq!(estimate_packets(22, 22), 1);
        assert_eq!(estimate_packets(23, 22), 2);
    }

    #[test]
    fn distinct_registers_fit_one_packet() {
        let batch = vec![upd(0), upd(1), upd(2)];
        let out = package_gradients(&batch, 3, 30).unwrap();
        assert_eq!(out.groups.len(), 1);
        assert_eq!(out.spilled_keys, 0);
        assert_eq!(out.groups[0], batch);
    }

    #[test]
    fn same_register_keys_spill_to_padding() {
        // all three keys hit register 0 of m=3; one estimated packet takes
        // the first, the rest travel via G' as one padded packet
        let batch = vec![upd(0), upd(3), upd(6)];
        let out = package_gradients(&batch, 3, 30).unwrap();
        assert_eq!(out.groups.len(), 2);
        assert_eq!(out.constrained_groups, 1);
        assert_eq!(out.spilled_keys, 2);
        assert_eq!(out.groups[0], vec![upd(0)]);
        assert_eq!(out.groups[1], vec![upd(3), upd(6)]);
        // constrained-phase packets never share a register
        let layout = RegisterLayout::heat_based(3, 4);
        assert_eq!(recirculations_for(&out.groups[0], &layout), 0);
        assert_eq!(recirculations_for(&out.groups[1], &layout), 1);
    }

    #[test]
    fn duplicate_key_is_an_error() {
        let batch = vec![upd(4), upd(4)];
        assert_eq!(package_gradients(&batch, 3, 30).unwrap_err(), DuplicateKey(MappedId(4)));
    }

    #[test]
    fn conservation_and_constraint_hold() {
        // a skew-ish batch: keys 0..40 plus extra multiples of m
        let mut batch: Vec<HotUpdate> = (0..40).map(upd).collect();
        batch.extend([upd(48), upd(56), upd(64)]);
        let m = 8;
        let out = package_gradients(&batch, m, 5).unwrap();
        assert_eq!(out.total_pairs(), batch.len());
        let mut all: Vec<u32> = out.groups.iter().flatten().map(|g| g.id.0).collect();
        all.sort_unstable();
        let mut expect: Vec<u32> = batch.iter().map(|g| g.id.0).collect();
        expect.sort_unstable();
        assert_eq!(all, expect);
        for group in &out.groups[..out.constrained_groups] {
            let mut regs: Vec<u32> = group.iter().map(|g| register_of(g.id, m)).collect();
            regs.sort_unstable();
            regs.dedup();
            assert_eq!(regs.len(), group.len(), "constrained packet shares a register");
            assert!(group.len() <= 5);
        }
    }

    #[test]
    fn recirculation_counts() {
        let layout = RegisterLayout::heat_based(4, 8);
        // distinct registers: zero recirculations
        assert_eq!(recirculations_for(&[upd(0), upd(1), upd(2)], &layout), 0);
        // three pairs on one register: two extra passes
        assert_eq!(recirculations_for(&[upd(0), upd(4), upd(8)], &layout), 2);
        let groups = vec![vec![upd(0), upd(1)], vec![upd(0), upd(4), upd(8)]];
        assert!((expected_recirculations(&groups, &layout) - 1.0).abs() < 1e-12);
    }
}
