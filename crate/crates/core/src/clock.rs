//! Deterministic event clock.
//!
//! Simulation time is an integer tick count. Events fire in
//! `(fire_time, ordinal)` order where the ordinal is assigned at schedule
//! time, so replaying the same schedule calls yields an identical trace.

use alloc::collections::BinaryHeap;
use core::cmp::Reverse;

pub type SimTime = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct EventKey {
    fire_time: SimTime,
    ordinal: u64,
}

/// Min-heap event queue owning the simulation clock.
#[derive(Debug)]
pub struct EventQueue<P> {
    now: SimTime,
    next_ordinal: u64,
    heap: BinaryHeap<Reverse<(EventKey, usize)>>,
    payloads: alloc::vec::Vec<Option<P>>,
    free: alloc::vec::Vec<usize>,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self {
            now: 0,
            next_ordinal: 0,
            heap: BinaryHeap::new(),
            payloads: alloc::vec::Vec::new(),
            free: alloc::vec::Vec::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    /// Schedules `payload` at `fire_time`. Scheduling in the past is a
    /// logic error; the event is clamped to `now` so it still fires.
    pub fn schedule(&mut self, fire_time: SimTime, payload: P) -> u64 {
        let fire_time = fire_time.max(self.now);
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;
        let slot = match self.free.pop() {
            Some(i) => {
                self.payloads[i] = Some(payload);
                i
            }
            None => {
                self.payloads.push(Some(payload));
                self.payloads.len() - 1
            }
        };
        self.heap.push(Reverse((EventKey { fire_time, ordinal }, slot)));
        ordinal
    }

    /// Pops the next event, advancing the clock. Time never moves backwards.
    pub fn pop(&mut self) -> Option<(SimTime, u64, P)> {
        let Reverse((key, slot)) = self.heap.pop()?;
        debug_assert!(key.fire_time >= self.now);
        self.now = key.fire_time;
        let payload = self.payloads[slot].take().expect("event payload present");
        self.free.push(slot);
        Some((key.fire_time, key.ordinal, payload))
    }
}
