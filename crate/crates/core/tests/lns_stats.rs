//! Statistical accuracy of the table-lookup arithmetic against exact host
//! math, on distributions the unit tests cannot cover pointwise.

use hotagg_core::lns::{build_tables, float_to_lns, lns_add, lns_to_float, LnsValue, LNS_ZERO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

fn percentile(xs: &mut [f64], p: f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((xs.len() as f64 - 1.0) * p).round() as usize;
    xs[idx]
}

#[test]
fn roundtrip_median_error_within_a_tenth_percent() {
    let t = build_tables(8);
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let mut rel = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let x = loop {
            let v: f32 = rng.gen_range(-1.0..1.0);
            if v != 0.0 {
                break v;
            }
        };
        let enc = float_to_lns(x, &t).unwrap();
        let dec = f64::from(lns_to_float(enc, &t));
        rel.push((dec - f64::from(x)).abs() / f64::from(x).abs());
    }
    let med = median(&mut rel);
    assert!(med <= 0.001, "median roundtrip error {med:.6}");
}

#[test]
fn roundtrip_error_shrinks_with_frac_bits() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let values: Vec<f32> = (0..20_000)
        .map(|_| loop {
            let v: f32 = rng.gen_range(-1.0f32..1.0);
            if v != 0.0 {
                break v;
            }
        })
        .collect();
    let mut last = f64::INFINITY;
    for fb in [4u8, 6, 8, 10] {
        let t = build_tables(fb);
        let mut rel: Vec<f64> = values
            .iter()
            .map(|x| {
                let dec = f64::from(lns_to_float(float_to_lns(*x, &t).unwrap(), &t));
                (dec - f64::from(*x)).abs() / f64::from(*x).abs()
            })
            .collect();
        let med = median(&mut rel);
        assert!(med < last, "precision must improve with frac_bits (fb={fb})");
        last = med;
    }
}

/// Quantization error per lookup is about `2^(2^-8) - 1`; with no
/// cancellation in play the 99th percentile stays under 0.5%. Opposite
/// signs are exercised separately: near-cancellation amplifies any
/// log-domain representation unboundedly, so no such percentile bound can
/// exist there.
#[test]
fn same_sign_sum_error_99th_percentile() {
    let t = build_tables(8);
    let mut rng = ChaCha12Rng::seed_from_u64(21);
    let mut rel = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let a: f32 = rng.gen_range(1.0e-6f32..1.0);
        let b: f32 = rng.gen_range(1.0e-6f32..1.0);
        let ea = float_to_lns(a, &t).unwrap();
        let eb = float_to_lns(b, &t).unwrap();
        let dec = f64::from(lns_to_float(lns_add(ea, eb, &t).0, &t));
        let exact = f64::from(a) + f64::from(b);
        rel.push((dec - exact).abs() / exact);
    }
    let p99 = percentile(&mut rel, 0.99);
    assert!(p99 <= 0.005, "99th percentile relative error {p99:.6}");
}

#[test]
fn commutative_bit_for_bit() {
    let t = build_tables(8);
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    for _ in 0..50_000 {
        let a: f32 = rng.gen_range(-2.0f32..2.0);
        let b: f32 = rng.gen_range(-2.0f32..2.0);
        let ea = float_to_lns(a, &t).unwrap();
        let eb = float_to_lns(b, &t).unwrap();
        assert_eq!(lns_add(ea, eb, &t).0, lns_add(eb, ea, &t).0, "a={a} b={b}");
    }
}

#[test]
fn same_sign_magnitude_is_monotone() {
    let t = build_tables(8);
    let mut rng = ChaCha12Rng::seed_from_u64(41);
    let step = 2f64.powi(-8);
    for _ in 0..50_000 {
        let a: f32 = rng.gen_range(1.0e-5f32..1.0);
        let b: f32 = rng.gen_range(1.0e-5f32..1.0);
        let ea = float_to_lns(a, &t).unwrap();
        let eb = float_to_lns(b, &t).unwrap();
        let sum = lns_add(ea, eb, &t).0;
        // |result| >= max(|a|,|b|) up to one quantization step
        let hi = ea.logmag.max(eb.logmag);
        assert!(
            i32::from(sum.logmag) >= i32::from(hi) - 1,
            "sum logmag {} below operand {} beyond one step (a={a}, b={b}, step={step})",
            sum.logmag,
            hi
        );
    }
}

/// Accumulating a random multiset in any order stays within
/// `tol(n) = n * 0.5% * max|v|` of the exact sum at the default precision.
#[test]
fn accumulation_stays_within_linear_tolerance() {
    let t = build_tables(8);
    let mut rng = ChaCha12Rng::seed_from_u64(51);
    for _ in 0..300 {
        let n = rng.gen_range(2usize..400);
        let values: Vec<f32> = (0..n)
            .map(|_| loop {
                let grid: i32 = rng.gen_range(-65535..=65535);
                if grid != 0 {
                    break grid as f32 / 65536.0;
                }
            })
            .collect();
        let mut acc = LNS_ZERO;
        for v in &values {
            acc = lns_add(acc, float_to_lns(*v, &t).unwrap(), &t).0;
        }
        let dec = f64::from(lns_to_float(acc, &t));
        let exact: f64 = values.iter().map(|v| f64::from(*v)).sum();
        let max_abs = values.iter().map(|v| f64::from(v.abs())).fold(0.0, f64::max);
        let tol = n as f64 * 0.005 * max_abs;
        assert!(
            (dec - exact).abs() <= tol,
            "n={n}: |{dec} - {exact}| > tol {tol}"
        );
    }
}

#[test]
fn zero_is_identity_across_magnitudes() {
    let t = build_tables(8);
    for logmag in [-32000i16, -256, -1, 0, 1, 256, 32000] {
        for sign in [-1i8, 1] {
            let v = LnsValue { sign, logmag };
            assert_eq!(lns_add(v, LNS_ZERO, &t).0, v);
            assert_eq!(lns_add(LNS_ZERO, v, &t).0, v);
        }
    }
}
