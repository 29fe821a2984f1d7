//! Placement of hot parameters into switch registers.
//!
//! Rank `r` lands in register `r % m`, slot `r / m`. Because ranks are
//! frequency-ordered, the parameters sharing a register are `m` ranks
//! apart and thus unlikely to ride in one packet. The random mode applies
//! a seeded permutation to the ranks first and is the evaluation baseline.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::rng::sub_rng;
use crate::types::MappedId;

/// Register id a worker derives for a rank; Algorithm-style `id % m`.
pub fn register_of(key: MappedId, m: u32) -> u32 {
    key.0 % m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutMode {
    HeatBased,
    Random,
}

#[derive(Debug, Clone)]
pub struct RegisterLayout {
    pub m: u32,
    pub slots_per_register: u32,
    pub mode: LayoutMode,
    /// Random mode only: permutation of `[0, hot_k)` applied before the
    /// modular rule.
    perm: Option<Vec<u32>>,
}

impl RegisterLayout {
    pub fn heat_based(m: u32, slots_per_register: u32) -> Self {
        assert!(m >= 1 && slots_per_register >= 1);
        Self { m, slots_per_register, mode: LayoutMode::HeatBased, perm: None }
    }

    /// Seeded Fisher-Yates permutation of the hot ranks.
    pub fn random(m: u32, slots_per_register: u32, hot_k: u32, seed: u64) -> Self {
        assert!(m >= 1 && slots_per_register >= 1);
        assert!(hot_k <= m * slots_per_register);
        let mut perm: Vec<u32> = (0..hot_k).collect();
        let mut rng = sub_rng(seed, "layout-perm");
        for i in (1..perm.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        Self { m, slots_per_register, mode: LayoutMode::Random, perm: Some(perm) }
    }

    pub fn capacity(&self) -> u32 {
        self.m * self.slots_per_register
    }

    /// `(register, slot)` actually holding `id` on the switch.
    pub fn placement(&self, id: MappedId) -> (u32, u32) {
        let x = match &self.perm {
            Some(p) => p[id.0 as usize],
            None => id.0,
        };
        (x % self.m, x / self.m)
    }

    pub fn register(&self, id: MappedId) -> u32 {
        self.placement(id).0
    }

    /// Flat slot index for register-bank storage.
    pub fn slot_index(&self, id: MappedId) -> usize {
        let (r, s) = self.placement(id);
        (r * self.slots_per_register + s) as usize
    }
}
