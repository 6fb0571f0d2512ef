mod common;

use common::*;
use kpolar::becpolar::enumerate_level;
use kpolar::codec::*;
use kpolar::construct::{digit_reverse, polar_selection, selection_bounds};
use kpolar::gf2kernel::*;
use kpolar::stats::binomial_sigma;
use proptest::prelude::*;
use rand::Rng;

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

fn code(g: &BitMatrix, n: usize, info: &[u64]) -> PolarCode {
    PolarCode::new(kernel_profile(g).unwrap(), n, info).unwrap()
}

fn erasure_word(x: &[u8], erased: &[bool]) -> ErasureWord {
    ErasureWord { symbols: x.iter().zip(erased).map(|(&b, &e)| if e { Symbol::Erased } else { Symbol::bit(b) }).collect() }
}

/// Kronecker row that channel `i` is multiplied with.
fn channel_rows(g: &BitMatrix, n: usize) -> Vec<Vec<u8>> {
    let kron = kronecker_power(g, n);
    (1..=kron.len() as u64).map(|i| kron[(digit_reverse(i, g.ell(), n).unwrap() - 1) as usize].clone()).collect()
}

fn restrict(row: &[u8], erased: &[bool]) -> Vec<u8> {
    row.iter().zip(erased).filter(|(_, &e)| !e).map(|(&b, _)| b).collect()
}

/// SC fails iff some information row, restricted to unerased positions, lies
/// in the span of the rows of all later channels restricted the same way.
fn sc_fails_oracle(rows: &[Vec<u8>], info: &[u64], erased: &[bool]) -> bool {
    info.iter().any(|&i| {
        let later: Vec<Vec<u8>> = rows[i as usize..].iter().map(|r| restrict(r, erased)).collect();
        let mut with = later.clone();
        with.push(restrict(&rows[(i - 1) as usize], erased));
        dense_rank(&with) == dense_rank(&later)
    })
}

/// MAP fails iff some nonzero combination of information rows is supported on erasures.
fn map_fails_oracle(rows: &[Vec<u8>], info: &[u64], erased: &[bool]) -> bool {
    (1u64..1 << info.len()).any(|mask| {
        let mut v = vec![0u8; erased.len()];
        for (k, &i) in info.iter().enumerate() {
            if mask >> k & 1 == 1 {
                v = xor(&v, &rows[(i - 1) as usize]);
            }
        }
        v.iter().zip(erased).all(|(&b, &e)| b == 0 || e)
    })
}

#[test]
fn encoding_matches_kronecker_rows() {
    for g in tested_kernels().into_iter().take(8).chain(["100;110;101".parse().unwrap()]) {
        let ell = g.ell();
        let n = match ell { 2 => 6, 3 => 4, _ => 3 };
        let all: Vec<u64> = (1..=(ell as u64).pow(n as u32)).collect();
        let c = code(&g, n, &all);
        let rows = channel_rows(&g, n);
        let weights = g.row_weights();
        for &i in &all {
            let mut u = vec![0u8; all.len()];
            u[(i - 1) as usize] = 1;
            let x = encode(&u, &c).unwrap();
            assert_eq!(x, rows[(i - 1) as usize], "kernel {g} index {i}");
            let w = x.iter().map(|&b| b as u64).sum::<u64>();
            assert_eq!(w, row_weight(i, &weights, n), "kernel {g} index {i}");
        }
    }
}

fn row_weight(i: u64, w: &[u32], n: usize) -> u64 {
    kpolar::construct::row_weight(i, w, n)
}

#[test]
fn encoding_is_linear() {
    let mut r = rng(11);
    for g in [arikan_kernel(), "100;110;101".parse().unwrap()] {
        let n = if g.ell() == 2 { 8 } else { 5 };
        let len = g.ell().pow(n as u32);
        for _ in 0..100 {
            let u: Vec<u8> = (0..len).map(|_| r.random::<bool>() as u8).collect();
            let v: Vec<u8> = (0..len).map(|_| r.random::<bool>() as u8).collect();
            let lhs = encode_raw(&xor(&u, &v), &g, n);
            assert_eq!(lhs, xor(&encode_raw(&u, &g, n), &encode_raw(&v, &g, n)));
        }
        assert!(encode_raw(&vec![0; len], &g, n).iter().all(|&b| b == 0));
    }
}

#[test]
fn frozen_bits_must_be_zero() {
    let c = code(&arikan_kernel(), 2, &[4]);
    assert!(matches!(encode(&[0, 1, 0, 0], &c), Err(kpolar::Error::FrozenBitNonzero { index: 2 })));
}

#[test]
fn decoders_match_linear_algebra_oracles() {
    let mut r = rng(5);
    for (g, n) in [(arikan_kernel(), 4), ("100;110;101".parse().unwrap(), 2), (tested_kernels().pop().unwrap(), 2)] {
        let len = g.ell().pow(n as u32);
        let rows = channel_rows(&g, n);
        for _ in 0..300 {
            let mut info: Vec<u64> = (1..=len as u64).filter(|_| r.random::<f64>() < 0.4).collect();
            info.truncate(10);
            let c = code(&g, n, &info);
            let eps = r.random::<f64>();
            let erased: Vec<bool> = (0..len).map(|_| r.random::<f64>() < eps).collect();
            let mut u = vec![0u8; len];
            for &i in &info {
                u[(i - 1) as usize] = r.random::<bool>() as u8;
            }
            let y = erasure_word(&encode(&u, &c).unwrap(), &erased);
            let sc = sc_decode_bec(&y, &c);
            let sc_failed = match &sc {
                ScOutcome::Decoded(v) => {
                    assert_eq!(v, &u);
                    false
                }
                ScOutcome::Undetermined(_) => true,
            };
            assert_eq!(sc_failed, sc_fails_oracle(&rows, &info, &erased), "kernel {g} info {info:?} erased {erased:?}");
            let map_failed = map_decode_bec(&y, &c) == MapOutcome::Ambiguous;
            assert_eq!(map_failed, map_fails_oracle(&rows, &info, &erased));
            assert!(!map_failed || sc_failed);
        }
    }
}

#[test]
fn clean_channel_recovers_codewords() {
    let g = arikan_kernel();
    let sel = polar_selection(&enumerate_level(&g, 0.5, 8).unwrap(), 0.5).unwrap();
    let c = PolarCode::from_selection(kernel_profile(&g).unwrap(), &sel).unwrap();
    let mut r = rng(2);
    for _ in 0..100 {
        let mut u = vec![0u8; 256];
        for &i in c.info_indices() {
            u[(i - 1) as usize] = r.random::<bool>() as u8;
        }
        let y = transmit_bec(&encode(&u, &c).unwrap(), 0.0, r.random());
        assert_eq!(sc_decode_bec(&y, &c), ScOutcome::Decoded(u));
        assert_eq!(map_decode_bec(&y, &c), MapOutcome::Unique);
    }
}

#[test]
fn fully_erased_word_is_undetermined() {
    let c = code(&arikan_kernel(), 3, &[8]);
    let y = transmit_bec(&[0; 8], 1.0, 1);
    assert_eq!(y.erasures(), 8);
    assert!(matches!(sc_decode_bec(&y, &c), ScOutcome::Undetermined(_)));
    assert_eq!(map_decode_bec(&y, &c), MapOutcome::Ambiguous);
}

#[test]
fn erased_support_of_a_row_is_ambiguous() {
    let g = arikan_kernel();
    let rows = channel_rows(&g, 4);
    let c = code(&g, 4, &[12, 16]);
    let erased: Vec<bool> = rows[11].iter().map(|&b| b == 1).collect();
    assert_eq!(map_decode_bec(&erasure_word(&[0; 16], &erased), &c), MapOutcome::Ambiguous);
}

#[test]
fn erasure_fraction() {
    let y = transmit_bec(&vec![0; 1_000_000], 0.3, 77);
    let f = y.erasures() as f64 / 1e6;
    assert!((f - 0.3).abs() <= 0.002, "{f}");
    assert_eq!(transmit_bec(&[1; 100], 0.0, 3).erasures(), 0);
}

#[test]
fn single_bit_codes_fail_with_probability_z() {
    let g = arikan_kernel();
    let cdf = enumerate_level(&g, 0.5, 8).unwrap();
    let trials = 10_000;
    for i in [40u64, 100, 128, 160, 200] {
        let z = cdf.value_at_index(i).value();
        let c = code(&g, 8, &[i]);
        let rep = simulate(&c, 0.5, trials, i).unwrap();
        let sigma = binomial_sigma(z, trials);
        assert!((rep.sc_rate() - z).abs() <= 3.0 * sigma, "index {i}: {} vs {z}", rep.sc_rate());
    }
}

#[test]
fn dominance_on_every_trial() {
    let g = arikan_kernel();
    let sel = polar_selection(&enumerate_level(&g, 0.4, 8).unwrap(), 0.5).unwrap();
    let c = PolarCode::from_selection(kernel_profile(&g).unwrap(), &sel).unwrap();
    for seed in 0..5 {
        let rep = simulate(&c, 0.4, 1000, seed).unwrap();
        assert_eq!(rep.dominance_violations, 0);
        assert!(rep.sc_errors >= rep.map_errors);
    }
}

#[test]
fn sc_error_rate_between_bounds() {
    let g = arikan_kernel();
    let profile = kernel_profile(&g).unwrap();
    let cdf = enumerate_level(&g, 0.3, 10).unwrap();
    let sel = polar_selection(&cdf, 0.3).unwrap();
    let b = selection_bounds(&sel, &cdf, &profile, 0.3).unwrap();
    let c = PolarCode::from_selection(profile, &sel).unwrap();
    let trials = 10_000;
    let rep = simulate(&c, 0.3, trials, 1).unwrap();
    let p = rep.sc_rate();
    let lower = b.sc_lower.value();
    let upper = 2f64.powf(b.union_bound_log2);
    assert!(p >= lower - 3.0 * binomial_sigma(lower, trials), "{p} < {lower}");
    assert!(p <= upper + 3.0 * binomial_sigma(upper.min(1.0), trials), "{p} > {upper}");
    assert_eq!(rep.dominance_violations, 0);
}

#[test]
fn map_error_rate_above_lower_bound() {
    let g = arikan_kernel();
    let profile = kernel_profile(&g).unwrap();
    let cdf = enumerate_level(&g, 0.5, 10).unwrap();
    let sel = polar_selection(&cdf, 0.25).unwrap();
    let b = selection_bounds(&sel, &cdf, &profile, 0.5).unwrap();
    let c = PolarCode::from_selection(profile, &sel).unwrap();
    let trials = 10_000;
    let rep = simulate(&c, 0.5, trials, 2).unwrap();
    let lower = b.map_lower.value();
    assert!(rep.map_rate() >= lower - 3.0 * binomial_sigma(lower, trials));
}

#[test]
fn simulation_is_reproducible() {
    let c = code(&arikan_kernel(), 6, &[48, 56, 60, 62, 63, 64]);
    assert_eq!(simulate(&c, 0.4, 500, 9).unwrap(), simulate(&c, 0.4, 500, 9).unwrap());
    let clean = simulate(&c, 0.0, 50, 1).unwrap();
    assert_eq!((clean.sc_errors, clean.map_errors), (0, 0));
    let row = clean.csv_row();
    assert_eq!(row.split(',').count(), SimulationReport::CSV_HEADER.split(',').count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn sc_failure_contains_map_failure(seed in any::<u64>(), eps in 0.0f64..1.0) {
        let g = arikan_kernel();
        let c = code(&g, 5, &[16, 24, 28, 30, 31, 32]);
        let o = run_trial(&c, eps, seed, 0);
        prop_assert!(!o.map_error || o.sc_error);
    }
}
