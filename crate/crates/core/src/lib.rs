//! Core model of in-network aggregation for sparse distributed training.
//!
//! Workers push sparse gradients as key-value pairs. A small set of "hot"
//! parameters (identified by update frequency) is aggregated on a modeled
//! programmable switch using table-lookup floating-point arithmetic; the
//! cold remainder flows to a parameter server. A reliability layer covers
//! packet loss, duplicate writes after lost ACKs, and switch failover.
//!
//! This crate is `no_std` (alloc required) and holds the deterministic
//! state machines and arithmetic. IO, workload generation, the event-loop
//! runner and the CLI live in the companion `hotagg-sim` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clock;
pub mod config;
pub mod endhost;
pub mod heat;
pub mod layout;
pub mod lns;
pub mod packaging;
pub mod packet;
pub mod reliability;
pub mod rng;
pub mod switchd;
pub mod types;

pub use clock::{EventQueue, SimTime};
pub use config::SimConfig;
pub use heat::{HeatProfile, HotSet};
pub use layout::{LayoutMode, RegisterLayout};
pub use lns::{LnsTables, LnsValue};
pub use packet::{Packet, PacketType};
pub use types::{GradientUpdate, HotUpdate, MappedId, ParameterKey, RawId};
