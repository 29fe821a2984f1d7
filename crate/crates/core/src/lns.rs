//! 32-bit float summation by table lookup, as a match-action pipeline
//! would execute it, plus the float-to-integer scaling baseline.
//!
//! A finite nonzero float is carried as `sign * 2^(logmag / 2^frac_bits)`
//! where `logmag` is a signed 16-bit fixed-point base-2 logarithm. Addition
//! of same-sign operands becomes `hi + miTable[hi - lo]` with
//! `miTable[d] = log2(1 + 2^(-d/2^fb))`; opposite signs use an analogous
//! subtraction table. Table construction uses host math once; every
//! runtime operation is integer arithmetic plus lookups, mirroring what
//! the switch pipeline can do.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub const EPO_ENTRIES: usize = 256;
pub const LOG_ENTRIES: usize = 4096;
pub const WIDE_ENTRIES: usize = 65536;

/// Exact byte footprint of all seven tables at 2 bytes per entry.
pub const TABLE_BYTES: usize = EPO_ENTRIES * 2 + 3 * LOG_ENTRIES * 2 + 3 * WIDE_ENTRIES * 2;

const DUMP_MAGIC: &[u8; 8] = b"HALNTBL1";

/// A value in the log number system. `sign` is -1, 0 or +1; `logmag` is
/// meaningful only for nonzero signs and is fixed point with
/// `LnsTables::frac_bits` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LnsValue {
    pub sign: i8,
    pub logmag: i16,
}

pub const LNS_ZERO: LnsValue = LnsValue { sign: 0, logmag: 0 };

impl LnsValue {
    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteInput;

impl fmt::Display for NonFiniteInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NaN/Inf cannot be encoded")
    }
}

impl core::error::Error for NonFiniteInput {}

/// The seven lookup tables: an 8-bit exponent table, three 12-bit log
/// tables and three 16-bit wide tables (magnitude add, magnitude
/// subtract, log-to-linear).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LnsTables {
    pub frac_bits: u8,
    /// `epoTable[e] = (e - 127)` in fixed point.
    pub epo: Vec<i16>,
    /// `logTable_m[k] = log2(1 + k/2048)` for the top 11 fraction bits.
    pub log_m: Vec<i16>,
    /// `logTable_dm[k] = log2(k * 2^-23)` for the low 12 fraction bits.
    pub log_dm: Vec<i16>,
    /// `logTable_mln2[k] = log2((1 + k/2048) * ln 2)`.
    pub log_mln2: Vec<i16>,
    /// `miTable[d] = log2(1 + 2^(-d/2^fb))`.
    pub mi: Vec<i16>,
    /// `sbTable[d] = log2(1 - 2^(-d/2^fb))`, `d >= 1`.
    pub sb: Vec<i16>,
    /// `expTable[key] = 2^frac(key)` as a 1.15 fixed-point mantissa.
    pub exp: Vec<u16>,
}

fn quant(x: f64, one: i32) -> i32 {
    libm::round(x * f64::from(one)) as i32
}

fn sat16(units: i32) -> (i16, bool) {
    if units > i32::from(i16::MAX) {
        (i16::MAX, true)
    } else if units < i32::from(i16::MIN) {
        (i16::MIN, true)
    } else {
        (units as i16, false)
    }
}

/// Populates all tables for the given fixed-point precision.
/// Deterministic: round-to-nearest quantization of exact host values.
pub fn build_tables(frac_bits: u8) -> LnsTables {
    assert!((4..=10).contains(&frac_bits), "frac_bits must be in 4..=10");
    let one = 1i32 << frac_bits;

    let mut epo = vec![0i16; EPO_ENTRIES];
    for (e, entry) in epo.iter_mut().enumerate() {
        *entry = sat16((e as i32 - 127) * one).0;
    }

    let mut log_m = vec![0i16; LOG_ENTRIES];
    let mut log_mln2 = vec![0i16; LOG_ENTRIES];
    for k in 0..LOG_ENTRIES {
        // 11-bit key space; the upper half of the 4096-entry table repeats it
        let m = 1.0 + (k % 2048) as f64 / 2048.0;
        log_m[k] = sat16(quant(libm::log2(m), one)).0;
        log_mln2[k] = sat16(quant(libm::log2(m * core::f64::consts::LN_2), one)).0;
    }

    let mut log_dm = vec![0i16; LOG_ENTRIES];
    log_dm[0] = i16::MIN; // no low bits set: correction term vanishes
    for k in 1..LOG_ENTRIES {
        let dm = k as f64 * libm::exp2(-23.0);
        log_dm[k] = sat16(quant(libm::log2(dm), one)).0;
    }

    let mut mi = vec![0i16; WIDE_ENTRIES];
    let mut sb = vec![0i16; WIDE_ENTRIES];
    for d in 0..WIDE_ENTRIES {
        let theta = -(d as f64) / f64::from(one);
        mi[d] = sat16(quant(libm::log2(1.0 + libm::exp2(theta)), one)).0;
        if d > 0 {
            sb[d] = sat16(quant(libm::log2(1.0 - libm::exp2(theta)), one)).0;
        }
        // sb[0] stays 0: exact cancellation is resolved before lookup
    }

    let mut exp = vec![0u16; WIDE_ENTRIES];
    for (key, entry) in exp.iter_mut().enumerate() {
        let signed = key as u16 as i16;
        let fr = (i32::from(signed)).rem_euclid(one);
        let mant = libm::round(libm::exp2(f64::from(fr) / f64::from(one)) * 32768.0) as i64;
        *entry = mant.clamp(0, 65535) as u16;
    }

    LnsTables { frac_bits, epo, log_m, log_dm, log_mln2, mi, sb, exp }
}

impl LnsTables {
    /// On-chip memory the seven tables would occupy.
    pub fn byte_size(&self) -> usize {
        (self.epo.len() + self.log_m.len() + self.log_dm.len() + self.log_mln2.len()) * 2
            + (self.mi.len() + self.sb.len()) * 2
            + self.exp.len() * 2
    }

    /// Binary dump: 8-byte magic, frac_bits byte, then little-endian
    /// 16-bit entries in fixed table order.
    pub fn dump(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.byte_size());
        out.extend_from_slice(DUMP_MAGIC);
        out.push(self.frac_bits);
        for v in &self.epo {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for table in [&self.log_m, &self.log_dm, &self.log_mln2, &self.mi, &self.sb] {
            for v in table.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in &self.exp {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self, TableLoadError> {
        if bytes.len() != 9 + TABLE_BYTES {
            return Err(TableLoadError::Length(bytes.len()));
        }
        if &bytes[..8] != DUMP_MAGIC {
            return Err(TableLoadError::Magic);
        }
        let frac_bits = bytes[8];
        if !(4..=10).contains(&frac_bits) {
            return Err(TableLoadError::FracBits(frac_bits));
        }
        let mut off = 9;
        let read_i16 = |n: usize, off: &mut usize| {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(i16::from_le_bytes([bytes[*off], bytes[*off + 1]]));
                *off += 2;
            }
            v
        };
        let epo = read_i16(EPO_ENTRIES, &mut off);
        let log_m = read_i16(LOG_ENTRIES, &mut off);
        let log_dm = read_i16(LOG_ENTRIES, &mut off);
        let log_mln2 = read_i16(LOG_ENTRIES, &mut off);
        let mi = read_i16(WIDE_ENTRIES, &mut off);
        let sb = read_i16(WIDE_ENTRIES, &mut off);
        let mut exp = Vec::with_capacity(WIDE_ENTRIES);
        for _ in 0..WIDE_ENTRIES {
            exp.push(u16::from_le_bytes([bytes[off], bytes[off + 1]]));
            off += 2;
        }
        Ok(Self { frac_bits, epo, log_m, log_dm, log_mln2, mi, sb, exp })
    }

    fn one(&self) -> i32 {
        1i32 << self.frac_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableLoadError {
    Length(usize),
    Magic,
    FracBits(u8),
}

impl fmt::Display for TableLoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Length(n) => write!(f, "table dump has wrong length {n}"),
            Self::Magic => write!(f, "table dump magic mismatch"),
            Self::FracBits(b) => write!(f, "table dump frac_bits {b} out of range"),
        }
    }
}

impl core::error::Error for TableLoadError {}

/// `2^(theta_units / 2^fb)` expressed in logmag grid units, computed with
/// the expTable the way the pipeline would: mantissa lookup plus shifts.
fn exp_in_grid_units(theta_units: i32, t: &LnsTables) -> i32 {
    let one = t.one();
    let ip = theta_units.div_euclid(one);
    let fr = theta_units.rem_euclid(one);
    let mant = i64::from(t.exp[fr as usize]);
    // value = mant * 2^(ip - 15); grid units carry an extra 2^fb
    let sh = 15 - i32::from(t.frac_bits) - ip;
    if sh <= 0 {
        (mant << (-sh).min(16)) as i32
    } else if sh < 63 {
        ((mant + (1i64 << (sh - 1))) >> sh) as i32
    } else {
        0
    }
}

/// Encodes a finite binary32 into the log number system.
///
/// The fraction field splits into an 11-bit slice `m = 1.f1..f11` and a
/// 12-bit slice `dm = 0.f12..f23 * 2^-11`; the encoded log is
/// `(e-127) + log2(m) + 2^(log2(dm) - log2(m ln2))`, all by lookup.
/// Zero and subnormal inputs flush to the LNS zero.
pub fn float_to_lns(x: f32, t: &LnsTables) -> Result<LnsValue, NonFiniteInput> {
    let bits = x.to_bits();
    let e = ((bits >> 23) & 0xff) as usize;
    if e == 0xff {
        return Err(NonFiniteInput);
    }
    if e == 0 {
        return Ok(LNS_ZERO);
    }
    let sign: i8 = if bits >> 31 == 1 { -1 } else { 1 };
    let f = bits & 0x7f_ffff;
    let mk = (f >> 12) as usize;
    let dk = (f & 0xfff) as usize;
    let mut units = i32::from(t.epo[e]) + i32::from(t.log_m[mk]);
    if dk != 0 {
        let theta = i32::from(t.log_dm[dk]).saturating_sub(i32::from(t.log_mln2[mk]));
        units += exp_in_grid_units(theta, t);
    }
    let (logmag, _sat) = sat16(units);
    Ok(LnsValue { sign, logmag })
}

/// Sum of two LNS values. Returns the result and whether the fixed-point
/// range saturated. Commutative bit-for-bit; either zero operand returns
/// the other; exact cancellation (equal magnitude, opposite sign) yields
/// zero.
pub fn lns_add(a: LnsValue, b: LnsValue, t: &LnsTables) -> (LnsValue, bool) {
    if a.sign == 0 {
        return (b, false);
    }
    if b.sign == 0 {
        return (a, false);
    }
    let (hi, lo) = if a.logmag >= b.logmag { (a, b) } else { (b, a) };
    let d = (i32::from(hi.logmag) - i32::from(lo.logmag)).min(WIDE_ENTRIES as i32 - 1) as usize;
    if a.sign == b.sign {
        let (logmag, sat) = sat16(i32::from(hi.logmag) + i32::from(t.mi[d]));
        (LnsValue { sign: hi.sign, logmag }, sat)
    } else if d == 0 {
        (LNS_ZERO, false)
    } else {
        let (logmag, sat) = sat16(i32::from(hi.logmag) + i32::from(t.sb[d]));
        (LnsValue { sign: hi.sign, logmag }, sat)
    }
}

/// Decodes back to binary32: exponent reassembled from the integer part,
/// mantissa looked up from the 16-bit logmag pattern.
pub fn lns_to_float(v: LnsValue, t: &LnsTables) -> f32 {
    if v.sign == 0 {
        return 0.0;
    }
    let one = t.one();
    let units = i32::from(v.logmag);
    let ip = units.div_euclid(one);
    let mant = u32::from(t.exp[(v.logmag as u16) as usize]);
    let e = ip + 127;
    if e <= 0 {
        return 0.0; // below normal range: flush, mirroring ingress
    }
    if e >= 255 {
        return if v.sign < 0 { f32::MIN } else { f32::MAX };
    }
    let sign_bit = if v.sign < 0 { 1u32 << 31 } else { 0 };
    f32::from_bits(sign_bit | ((e as u32) << 23) | ((mant & 0x7fff) << 8))
}

/// Float-to-integer baseline: `round(x * scale)` with 32-bit saturation.
pub fn f2i_convert(x: f32, scale: i64) -> i32 {
    debug_assert!(scale > 0);
    let r = libm::round(f64::from(x) * scale as f64);
    if r >= f64::from(i32::MAX) {
        i32::MAX
    } else if r <= f64::from(i32::MIN) {
        i32::MIN
    } else {
        r as i32
    }
}

pub fn f2i_restore(i: i32, scale: i64) -> f32 {
    (f64::from(i) / scale as f64) as f32
}

/// Largest power-of-two scaling factor keeping the widest pair sum
/// (bounded by `2 * max_abs`) inside 32-bit range.
pub fn f2i_widest_range_scale(max_abs: f32) -> i64 {
    assert!(max_abs > 0.0 && max_abs.is_finite());
    let k = libm::floor(30.0 - libm::log2(f64::from(max_abs))) as i64;
    1i64 << k.clamp(0, 62)
}

/// `1 - relative error`, clamped to `[0, 1]`. An exact zero must be
/// reproduced exactly to score 1.
pub fn accuracy(computed: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        return if computed == 0.0 { 1.0 } else { 0.0 };
    }
    let rel = (computed - exact).abs() / exact.abs();
    (1.0 - rel).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t8() -> LnsTables {
        build_tables(8)
    }

    #[test]
    fn byte_accounting_is_exact() {
        assert_eq!(TABLE_BYTES, 418_304);
        assert_eq!(t8().byte_size(), 418_304);
        // 408.5 KiB on the nose
        assert_eq!(418_304 % 1024, 512);
        assert_eq!(418_304 / 1024, 408);
    }

    #[test]
    fn bias_and_log_identities() {
        let t = t8();
        assert_eq!(t.epo[127], 0);
        assert_eq!(t.log_m[0], 0); // m = 1.0
        assert_eq!(t.mi[0], 256); // log2(1 + 2^0) = 1.0 in Q.8
    }

    #[test]
    fn encodes_powers_of_two_exactly() {
        let t = t8();
        let one = float_to_lns(1.0, &t).unwrap();
        assert_eq!(one, LnsValue { sign: 1, logmag: 0 });
        let two = float_to_lns(2.0, &t).unwrap();
        assert_eq!(two.logmag, 256);
        let neg_half = float_to_lns(-0.5, &t).unwrap();
        assert_eq!((neg_half.sign, neg_half.logmag), (-1, -256));
    }

    #[test]
    fn zero_subnormal_and_non_finite() {
        let t = t8();
        assert_eq!(float_to_lns(0.0, &t).unwrap(), LNS_ZERO);
        assert_eq!(float_to_lns(1.0e-40, &t).unwrap(), LNS_ZERO); // subnormal flush
        assert!(float_to_lns(f32::NAN, &t).is_err());
        assert!(float_to_lns(f32::INFINITY, &t).is_err());
    }

    #[test]
    fn additive_identity_and_cancellation() {
        let t = t8();
        let x = float_to_lns(0.71875, &t).unwrap();
        assert_eq!(lns_add(x, LNS_ZERO, &t).0, x);
        assert_eq!(lns_add(LNS_ZERO, x, &t).0, x);
        let neg = LnsValue { sign: -x.sign, logmag: x.logmag };
        assert_eq!(lns_add(x, neg, &t).0, LNS_ZERO);
    }

    #[test]
    fn doubling_is_one_octave() {
        let t = t8();
        let x = float_to_lns(0.75, &t).unwrap();
        let (y, sat) = lns_add(x, x, &t);
        assert!(!sat);
        assert_eq!(y.logmag, x.logmag + 256);
        let dec = lns_to_float(y, &t);
        assert!((f64::from(dec) - 1.5).abs() / 1.5 < 3.0e-3, "decoded {dec}");
    }

    #[test]
    fn decode_trivials() {
        let t = t8();
        assert_eq!(lns_to_float(LNS_ZERO, &t), 0.0);
        assert_eq!(lns_to_float(LnsValue { sign: 1, logmag: 0 }, &t), 1.0);
        assert_eq!(lns_to_float(LnsValue { sign: -1, logmag: 256 }, &t), -2.0);
    }

    #[test]
    fn f2i_examples() {
        assert_eq!(f2i_convert(0.5, 1 << 16), 32768);
        assert_eq!(f2i_convert(1.0e-9, 1 << 16), 0);
        assert_eq!(f2i_restore(32768, 1 << 16), 0.5);
        // saturation
        assert_eq!(f2i_convert(3.0e9, 1), i32::MAX);
        assert_eq!(f2i_widest_range_scale(0.999), 1 << 30);
        assert_eq!(f2i_widest_range_scale(0.4), 1 << 31);
    }

    #[test]
    fn dump_load_roundtrip_and_determinism() {
        let t = t8();
        let d1 = t.dump();
        let d2 = build_tables(8).dump();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 9 + TABLE_BYTES);
        let back = LnsTables::load(&d1).unwrap();
        assert_eq!(back, t);
        assert!(LnsTables::load(&d1[..100]).is_err());
    }

    #[test]
    fn accuracy_edge_cases() {
        assert_eq!(accuracy(0.0, 0.0), 1.0);
        assert_eq!(accuracy(1.0e-9, 0.0), 0.0);
        assert_eq!(accuracy(2.0, 1.0), 0.0); // clamped
        assert!((accuracy(1.001, 1.0) - 0.999).abs() < 1e-12);
    }
}
