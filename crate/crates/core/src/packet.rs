//! Packet model and the bit-exact wire codec.
//!
//! Header layout (big-endian), 16 bytes:
//!
//! ```text
//! byte 0      job_id
//! byte 1      type (high nibble) | flags (low nibble; bit0 retransmit, bit1 cold)
//! bytes 2-5   seq (u32)
//! bytes 6-7   worker_id (u16)
//! byte 8      pair_count
//! bytes 9-15  reserved zero
//! ```
//!
//! GRADIENT payloads follow as `pair_count` entries: hot pairs are
//! `{mapped_id: u32, value: f32}` (8 bytes), cold pairs carry the 64-bit
//! model-native id (12 bytes). Response types (ACK, AGG_RESULT, STATS)
//! repurpose reserved bytes 9-12 as `{chunk_index: u16, chunk_total: u16}`
//! so multi-packet replies can be reassembled and acknowledged per chunk;
//! AGG_RESULT entries additionally carry the slot version counter
//! (12 bytes per entry). Every frame is capped at 192 bytes.

use alloc::vec::Vec;
use core::fmt;

use crate::types::{HotUpdate, MappedId, RawId};

pub const MAX_PACKET_BYTES: usize = 192;
pub const HEADER_BYTES: usize = 16;
/// Hot gradient pairs per packet: (192 - 16) / 8.
pub const HOT_PAIRS_MAX: usize = 22;
/// 12-byte entries per packet: (192 - 16) / 12.
pub const WIDE_ENTRIES_MAX: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketType {
    Gradient = 0,
    Ack = 1,
    AggResult = 2,
    Pull = 3,
    Heartbeat = 4,
    Stats = 5,
    StateMigrate = 6,
}

impl PacketType {
    pub fn from_nibble(n: u8) -> Option<Self> {
        Some(match n {
            0 => Self::Gradient,
            1 => Self::Ack,
            2 => Self::AggResult,
            3 => Self::Pull,
            4 => Self::Heartbeat,
            5 => Self::Stats,
            6 => Self::StateMigrate,
            _ => return None,
        })
    }

    /// Response types carry chunk fields in the reserved area.
    fn chunked(self) -> bool {
        matches!(self, Self::Ack | Self::AggResult | Self::Stats)
    }
}

/// One aggregated value returned from the switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggEntry {
    pub id: MappedId,
    pub value: f32,
    pub version: u32,
}

/// Per-error marker in a pull response: version is set to `u32::MAX`.
pub const AGG_ERROR_VERSION: u32 = u32::MAX;

/// Switch counters reported to the controller. Doubles as the STATS wire
/// body (ten big-endian u64 words in field order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SwitchStats {
    pub packets_in: u64,
    pub packets_out: u64,
    pub recirculations: u64,
    pub aggregated_pairs: u64,
    pub cold_forwarded: u64,
    pub memory_in_use: u64,
    pub drops_observed: u64,
    pub duplicates_suppressed: u64,
    pub saturations: u64,
    pub infeasible_passes: u64,
}

impl SwitchStats {
    const WORDS: usize = 10;

    fn to_words(self) -> [u64; Self::WORDS] {
        [
            self.packets_in,
            self.packets_out,
            self.recirculations,
            self.aggregated_pairs,
            self.cold_forwarded,
            self.memory_in_use,
            self.drops_observed,
            self.duplicates_suppressed,
            self.saturations,
            self.infeasible_passes,
        ]
    }

    fn from_words(w: [u64; Self::WORDS]) -> Self {
        Self {
            packets_in: w[0],
            packets_out: w[1],
            recirculations: w[2],
            aggregated_pairs: w[3],
            cold_forwarded: w[4],
            memory_in_use: w[5],
            drops_observed: w[6],
            duplicates_suppressed: w[7],
            saturations: w[8],
            infeasible_passes: w[9],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    /// GRADIENT toward the switch: rank-mapped pairs.
    HotPairs(Vec<HotUpdate>),
    /// GRADIENT toward the parameter server: model-native ids.
    ColdPairs(Vec<(RawId, f32)>),
    /// PULL of explicit hot ranks.
    HotIds(Vec<MappedId>),
    /// PULL toward the PS; an empty list requests a full dump.
    ColdIds(Vec<RawId>),
    /// AGG_RESULT from the switch.
    AggEntries(Vec<AggEntry>),
    /// AGG_RESULT from the PS.
    ColdAggEntries(Vec<(RawId, f32)>),
    Stats(SwitchStats),
    Empty,
}

impl Body {
    pub fn pair_count(&self) -> usize {
        match self {
            Body::HotPairs(v) => v.len(),
            Body::ColdPairs(v) => v.len(),
            Body::HotIds(v) => v.len(),
            Body::ColdIds(v) => v.len(),
            Body::AggEntries(v) => v.len(),
            Body::ColdAggEntries(v) => v.len(),
            Body::Stats(_) => SwitchStats::WORDS,
            Body::Empty => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub job_id: u8,
    pub ptype: PacketType,
    pub retransmit: bool,
    pub cold: bool,
    pub seq: u32,
    pub worker_id: u16,
    /// Chunk coordinates for multi-packet responses; `(0, 1)` elsewhere.
    pub chunk_index: u16,
    pub chunk_total: u16,
    pub body: Body,
}

impl Packet {
    pub fn new(job_id: u8, ptype: PacketType, seq: u32, worker_id: u16, body: Body) -> Self {
        Self {
            job_id,
            ptype,
            retransmit: false,
            cold: false,
            seq,
            worker_id,
            chunk_index: 0,
            chunk_total: 1,
            body,
        }
    }

    pub fn wire_size(&self) -> usize {
        let entry = match &self.body {
            Body::HotPairs(_) | Body::HotIds(_) => 8,
            Body::Empty => 0,
            Body::Stats(_) => 8,
            _ => 12,
        };
        HEADER_BYTES + entry * self.body.pair_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecError {
    TooShort,
    Oversize(usize),
    UnknownType(u8),
    UnknownFlags(u8),
    ReservedNonZero,
    CountMismatch { declared: u8, actual: usize },
    CountOverflow(usize),
    DuplicateId(u32),
    NonFiniteValue,
    BadChunk { index: u16, total: u16 },
    BodyTypeMismatch,
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooShort => write!(f, "frame shorter than header"),
            Self::Oversize(n) => write!(f, "frame of {n} bytes exceeds {MAX_PACKET_BYTES}"),
            Self::UnknownType(t) => write!(f, "unknown packet type {t}"),
            Self::UnknownFlags(x) => write!(f, "unknown flag bits {x:#x}"),
            Self::ReservedNonZero => write!(f, "reserved header bytes must be zero"),
            Self::CountMismatch { declared, actual } => {
                write!(f, "pair_count {declared} but payload holds {actual}")
            }
            Self::CountOverflow(n) => write!(f, "pair_count {n} exceeds capacity"),
            Self::DuplicateId(id) => write!(f, "duplicate mapped id {id} in packet"),
            Self::NonFiniteValue => write!(f, "non-finite gradient value"),
            Self::BadChunk { index, total } => write!(f, "chunk {index}/{total} invalid"),
            Self::BodyTypeMismatch => write!(f, "body does not match packet type"),
        }
    }
}

impl core::error::Error for CodecError {}

fn body_matches(ptype: PacketType, cold: bool, body: &Body) -> bool {
    match (ptype, cold, body) {
        (PacketType::Gradient, false, Body::HotPairs(_)) => true,
        (PacketType::Gradient, true, Body::ColdPairs(_)) => true,
        (PacketType::Pull, false, Body::HotIds(_)) => true,
        (PacketType::Pull, true, Body::ColdIds(_)) => true,
        (PacketType::AggResult, false, Body::AggEntries(_)) => true,
        (PacketType::AggResult, true, Body::ColdAggEntries(_)) => true,
        (PacketType::Stats, _, Body::Stats(_)) => true,
        (PacketType::Ack | PacketType::Heartbeat | PacketType::StateMigrate, _, Body::Empty) => {
            true
        }
        _ => false,
    }
}

/// Serializes to the wire image. Errors on contract violations rather
/// than emitting malformed frames.
pub fn encode(p: &Packet) -> Result<Vec<u8>, CodecError> {
    if !body_matches(p.ptype, p.cold, &p.body) {
        return Err(CodecError::BodyTypeMismatch);
    }
    let count = p.body.pair_count();
    let cap = match &p.body {
        Body::HotPairs(_) | Body::HotIds(_) => HOT_PAIRS_MAX,
        Body::Stats(_) => SwitchStats::WORDS,
        Body::Empty => 0,
        _ => WIDE_ENTRIES_MAX,
    };
    if count > cap {
        return Err(CodecError::CountOverflow(count));
    }
    if p.chunk_total == 0 || p.chunk_index >= p.chunk_total {
        return Err(CodecError::BadChunk { index: p.chunk_index, total: p.chunk_total });
    }
    if !p.ptype.chunked() && (p.chunk_index, p.chunk_total) != (0, 1) {
        return Err(CodecError::BadChunk { index: p.chunk_index, total: p.chunk_total });
    }

    let mut out = Vec::with_capacity(p.wire_size());
    out.push(p.job_id);
    let flags = u8::from(p.retransmit) | (u8::from(p.cold) << 1);
    out.push(((p.ptype as u8) << 4) | flags);
    out.extend_from_slice(&p.seq.to_be_bytes());
    out.extend_from_slice(&p.worker_id.to_be_bytes());
    out.push(count as u8);
    if p.ptype.chunked() {
        out.extend_from_slice(&p.chunk_index.to_be_bytes());
        out.extend_from_slice(&p.chunk_total.to_be_bytes());
        out.extend_from_slice(&[0u8; 3]);
    } else {
        out.extend_from_slice(&[0u8; 7]);
    }
    debug_assert_eq!(out.len(), HEADER_BYTES);

    match &p.body {
        Body::HotPairs(pairs) => {
            let mut seen = hashbrown::HashSet::with_capacity(pairs.len());
            for pr in pairs {
                if !seen.insert(pr.id.0) {
                    return Err(CodecError::DuplicateId(pr.id.0));
                }
                if !pr.value.is_finite() {
                    return Err(CodecError::NonFiniteValue);
                }
                out.extend_from_slice(&pr.id.0.to_be_bytes());
                out.extend_from_slice(&pr.value.to_bits().to_be_bytes());
            }
        }
        Body::ColdPairs(pairs) => {
            for (id, v) in pairs {
                if !v.is_finite() {
                    return Err(CodecError::NonFiniteValue);
                }
                out.extend_from_slice(&id.0.to_be_bytes());
                out.extend_from_slice(&v.to_bits().to_be_bytes());
            }
        }
        Body::HotIds(ids) => {
            for id in ids {
                out.extend_from_slice(&id.0.to_be_bytes());
                out.extend_from_slice(&0u32.to_be_bytes());
            }
        }
        Body::ColdIds(ids) => {
            for id in ids {
                out.extend_from_slice(&id.0.to_be_bytes());
                out.extend_from_slice(&0u32.to_be_bytes());
            }
        }
        Body::AggEntries(entries) => {
            for e in entries {
                out.extend_from_slice(&e.id.0.to_be_bytes());
                out.extend_from_slice(&e.value.to_bits().to_be_bytes());
                out.extend_from_slice(&e.version.to_be_bytes());
            }
        }
        Body::ColdAggEntries(entries) => {
            for (id, v) in entries {
                out.extend_from_slice(&id.0.to_be_bytes());
                out.extend_from_slice(&v.to_bits().to_be_bytes());
            }
        }
        Body::Stats(s) => {
            for w in s.to_words() {
                out.extend_from_slice(&w.to_be_bytes());
            }
        }
        Body::Empty => {}
    }

    if out.len() > MAX_PACKET_BYTES {
        return Err(CodecError::Oversize(out.len()));
    }
    Ok(out)
}

fn rd_u16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn rd_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn rd_u64(b: &[u8]) -> u64 {
    u64::from_be_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
}

/// Parses and validates a wire image. Malformed frames are rejected so
/// the switch can count and drop them.
pub fn decode(bytes: &[u8]) -> Result<Packet, CodecError> {
    if bytes.len() < HEADER_BYTES {
        return Err(CodecError::TooShort);
    }
    if bytes.len() > MAX_PACKET_BYTES {
        return Err(CodecError::Oversize(bytes.len()));
    }
    let job_id = bytes[0];
    let ptype = PacketType::from_nibble(bytes[1] >> 4).ok_or(CodecError::UnknownType(bytes[1] >> 4))?;
    let flags = bytes[1] & 0x0f;
    if flags & !0b11 != 0 {
        return Err(CodecError::UnknownFlags(flags));
    }
    let retransmit = flags & 1 != 0;
    let cold = flags & 2 != 0;
    let seq = rd_u32(&bytes[2..6]);
    let worker_id = rd_u16(&bytes[6..8]);
    let count = bytes[8] as usize;
    let (chunk_index, chunk_total) = if ptype.chunked() {
        let ci = rd_u16(&bytes[9..11]);
        let ct = rd_u16(&bytes[11..13]);
        if bytes[13..16] != [0, 0, 0] {
            return Err(CodecError::ReservedNonZero);
        }
        if ct == 0 || ci >= ct {
            return Err(CodecError::BadChunk { index: ci, total: ct });
        }
        (ci, ct)
    } else {
        if bytes[9..16] != [0; 7] {
            return Err(CodecError::ReservedNonZero);
        }
        (0, 1)
    };

    let payload = &bytes[HEADER_BYTES..];
    let entry = |sz: usize| -> Result<(), CodecError> {
        if payload.len() != count * sz {
            Err(CodecError::CountMismatch { declared: count as u8, actual: payload.len() / sz })
        } else {
            Ok(())
        }
    };

    let body = match (ptype, cold) {
        (PacketType::Gradient, false) => {
            if count > HOT_PAIRS_MAX {
                return Err(CodecError::CountOverflow(count));
            }
            entry(8)?;
            let mut pairs = Vec::with_capacity(count);
            let mut seen = hashbrown::HashSet::with_capacity(count);
            for i in 0..count {
                let off = i * 8;
                let id = rd_u32(&payload[off..off + 4]);
                if !seen.insert(id) {
                    return Err(CodecError::DuplicateId(id));
                }
                let value = f32::from_bits(rd_u32(&payload[off + 4..off + 8]));
                if !value.is_finite() {
                    return Err(CodecError::NonFiniteValue);
                }
                pairs.push(HotUpdate { id: MappedId(id), value });
            }
            Body::HotPairs(pairs)
        }
        (PacketType::Gradient, true) => {
            if count > WIDE_ENTRIES_MAX {
                return Err(CodecError::CountOverflow(count));
            }
            entry(12)?;
            let mut pairs = Vec::with_capacity(count);
            for i in 0..count {
                let off = i * 12;
                let id = rd_u64(&payload[off..off + 8]);
                let value = f32::from_bits(rd_u32(&payload[off + 8..off + 12]));
                if !value.is_finite() {
                    return Err(CodecError::NonFiniteValue);
                }
                pairs.push((RawId(id), value));
            }
            Body::ColdPairs(pairs)
        }
        (PacketType::Pull, false) => {
            if count > HOT_PAIRS_MAX {
                return Err(CodecError::CountOverflow(count));
            }
            entry(8)?;
            let ids = (0..count)
                .map(|i| MappedId(rd_u32(&payload[i * 8..i * 8 + 4])))
                .collect();
            Body::HotIds(ids)
        }
        (PacketType::Pull, true) => {
            if count > WIDE_ENTRIES_MAX {
                return Err(CodecError::CountOverflow(count));
            }
            entry(12)?;
            let ids = (0..count)
                .map(|i| RawId(rd_u64(&payload[i * 12..i * 12 + 8])))
                .collect();
            Body::ColdIds(ids)
        }
        (PacketType::AggResult, false) => {
            if count > WIDE_ENTRIES_MAX {
                return Err(CodecError::CountOverflow(count));
            }
            entry(12)?;
            let entries = (0..count)
                .map(|i| {
                    let off = i * 12;
                    AggEntry {
                        id: MappedId(rd_u32(&payload[off..off + 4])),
                        value: f32::from_bits(rd_u32(&payload[off + 4..off + 8])),
                        version: rd_u32(&payload[off + 8..off + 12]),
                    }
                })
                .collect();
            Body::AggEntries(entries)
        }
        (PacketType::AggResult, true) => {
            if count > WIDE_ENTRIES_MAX {
                return Err(CodecError::CountOverflow(count));
            }
            entry(12)?;
            let entries = (0..count)
                .map(|i| {
                    let off = i * 12;
                    (
                        RawId(rd_u64(&payload[off..off + 8])),
                        f32::from_bits(rd_u32(&payload[off + 8..off + 12])),
                    )
                })
                .collect();
            Body::ColdAggEntries(entries)
        }
        (PacketType::Stats, _) => {
            if count != SwitchStats::WORDS {
                return Err(CodecError::CountMismatch {
                    declared: count as u8,
                    actual: SwitchStats::WORDS,
                });
            }
            entry(8)?;
            let mut words = [0u64; SwitchStats::WORDS];
            for (i, w) in words.iter_mut().enumerate() {
                *w = rd_u64(&payload[i * 8..i * 8 + 8]);
            }
            Body::Stats(SwitchStats::from_words(words))
        }
        (PacketType::Ack | PacketType::Heartbeat | PacketType::StateMigrate, _) => {
            if count != 0 || !payload.is_empty() {
                return Err(CodecError::CountMismatch { declared: count as u8, actual: 0 });
            }
            Body::Empty
        }
    };

    Ok(Packet {
        job_id,
        ptype,
        retransmit,
        cold,
        seq,
        worker_id,
        chunk_index,
        chunk_total,
        body,
    })
}
