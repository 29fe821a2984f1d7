//! Hot-identification checked against brute-force oracles on synthetic
//! skewed traces.

use std::collections::BTreeMap;

use hotagg_core::heat::{select_hot, tradeoff_point, HeatProfile, DEFAULT_CHIP_BYTES};
use hotagg_core::types::{GradientUpdate, RawId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Zipf};

fn zipf_trace(
    n_ids: u64,
    batches: usize,
    nnz: usize,
    s: f64,
    seed: u64,
) -> Vec<Vec<GradientUpdate>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let zipf = Zipf::new(n_ids, s).unwrap();
    (0..batches)
        .map(|_| {
            let mut keys = std::collections::BTreeSet::new();
            while keys.len() < nnz {
                keys.insert(zipf.sample(&mut rng) as u64 - 1);
            }
            keys.into_iter()
                .map(|k| GradientUpdate { raw_id: RawId(k), value: rng.gen_range(-1.0f32..1.0) })
                .collect()
        })
        .collect()
}

#[test]
fn counting_matches_brute_force_histogram() {
    let trace = zipf_trace(100_000, 200, 500, 1.0, 3);
    let mut profile = HeatProfile::new();
    let mut oracle: BTreeMap<u64, u64> = BTreeMap::new();
    for batch in &trace {
        profile.record_batch(batch);
        for g in batch {
            if g.value != 0.0 {
                *oracle.entry(g.raw_id.0).or_insert(0) += 1;
            }
        }
    }
    assert_eq!(profile.total(), oracle.values().sum::<u64>());
    assert_eq!(profile.distinct(), oracle.len());
    for (id, count) in &oracle {
        assert_eq!(profile.count(RawId(*id)), *count, "id {id}");
    }
    // the rank-1 id of a skewed trace is the most frequent one
    let ranked = profile.ranked();
    let max = oracle.values().max().copied().unwrap();
    assert_eq!(ranked[0].1, max);
}

#[test]
fn selection_matches_exhaustive_prefix_scan() {
    let trace = zipf_trace(50_000, 400, 400, 1.1, 9);
    let mut profile = HeatProfile::new();
    for b in &trace {
        profile.record_batch(b);
    }
    for p in [0.3, 0.5, 0.7] {
        let hs = select_hot(&profile, p, 0.05, 4, DEFAULT_CHIP_BYTES);
        let k = hs.k();
        // oracle: exhaustive scan over the ranked counts
        let ranked = profile.ranked();
        let total = profile.total() as f64;
        let prefix: u64 = ranked[..k].iter().map(|(_, c)| c).sum();
        assert!(prefix as f64 / total >= p, "coverage condition violated at k={k}");
        if k > 1 {
            let prev: u64 = ranked[..k - 1].iter().map(|(_, c)| c).sum();
            assert!((prev as f64) / total < p, "k={k} not minimal");
        }
        assert!((hs.coverage - prefix as f64 / total).abs() < 1e-12);
        // incremental coverage equals from-scratch recomputation on counts
        let recomputed: u64 = hs.counts.iter().sum();
        assert_eq!(recomputed, prefix);
    }
}

#[test]
fn tradeoff_point_agrees_with_cumulative_rescan() {
    let trace = zipf_trace(60_000, 600, 600, 1.2, 17);
    let mut profile = HeatProfile::new();
    for b in &trace {
        profile.record_batch(b);
    }
    let step = 1000;
    let eps = 0.01;
    let k = tradeoff_point(&profile, eps, step).unwrap();
    let ranked = profile.ranked();
    let total = profile.total() as f64;
    let cumsum: Vec<u64> = ranked
        .iter()
        .scan(0u64, |acc, (_, c)| {
            *acc += c;
            Some(*acc)
        })
        .collect();
    let marginal = |k: usize| (cumsum[k + step - 1] - cumsum[k - 1]) as f64 / total;
    // oracle: k is the first step multiple whose next block is below eps
    let mut expect = (ranked.len() / step) * step;
    let mut probe = step;
    while probe + step <= ranked.len() {
        if marginal(probe) < eps {
            expect = probe;
            break;
        }
        probe += step;
    }
    assert_eq!(k, expect);
    assert!(marginal(k) < eps);
}
