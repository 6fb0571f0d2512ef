mod common;

use common::*;
use kpolar::becpolar::*;
use kpolar::extended::{ExtendedUnitValue, Mode};
use kpolar::gf2kernel::*;
use kpolar::stats::{wilson_interval, Z_999};
use proptest::prelude::*;

/// Undetermined iff adding row j to the later rows, both cut down to the
/// unerased columns, does not raise the rank.
fn rank_oracle_counts(g: &BitMatrix) -> Vec<Vec<u64>> {
    let ell = g.ell();
    let e = entries(g);
    let mut counts = vec![vec![0u64; ell + 1]; ell];
    for erased in 0u32..1 << ell {
        let keep: Vec<usize> = (0..ell).filter(|c| erased >> c & 1 == 0).collect();
        let cut = |rows: &[Vec<u8>]| -> Vec<Vec<u8>> { rows.iter().map(|r| keep.iter().map(|&c| r[c]).collect()).collect() };
        for j in 0..ell {
            let later = cut(&e[j + 1..]);
            let with = cut(&e[j..]);
            if dense_rank(&with) == dense_rank(&later) {
                counts[j][erased.count_ones() as usize] += 1;
            }
        }
    }
    counts
}

#[test]
fn counts_match_rank_oracle() {
    for g in tested_kernels() {
        let p = split_erasure_polynomials(&g).unwrap();
        assert_eq!(p.counts, rank_oracle_counts(&g), "{g}");
    }
}

#[test]
fn conservation_law() {
    for g in tested_kernels() {
        let p = split_erasure_polynomials(&g).unwrap();
        for k in 0..=10 {
            let eps = k as f64 / 10.0;
            let total: f64 = (0..g.ell()).map(|j| p.eval(j, eps)).sum();
            assert!((total - g.ell() as f64 * eps).abs() <= 1e-12, "{g} at {eps}");
        }
        for j in 0..g.ell() {
            assert_eq!(p.eval(j, 0.0), 0.0);
        }
    }
}

#[test]
fn leading_degree_is_partial_distance() {
    for g in tested_kernels() {
        let p = split_erasure_polynomials(&g).unwrap();
        assert_eq!(p.leading_degree, brute_partial_distances(&g), "{g}");
    }
}

#[test]
fn sandwich_on_grid() {
    for g in tested_kernels() {
        let p = split_erasure_polynomials(&g).unwrap();
        let ell = g.ell();
        for j in 0..ell {
            let d = p.leading_degree[j] as i32;
            for k in 1..100 {
                let eps = k as f64 / 100.0;
                let lower = eps.powi(d);
                let upper = 2f64.powi((ell - j) as i32) * lower;
                let v = p.eval(j, eps);
                assert!(v >= lower * (1.0 - 1e-14) && v <= upper * (1.0 + 1e-14), "{g} branch {j} at {eps}");
            }
        }
    }
}

#[test]
fn large_kernel_uses_structural_polarization_check() {
    // 12x12 lower-triangular with an extra bit, still polarizing
    let mut rows: Vec<u32> = (0..12).map(|i| (1u32 << (i + 1)) - 1).collect();
    rows[0] = 1;
    let g = BitMatrix::new(12, rows).unwrap();
    let p = split_erasure_polynomials(&g).unwrap();
    assert_eq!(p.leading_degree, partial_distances(&g).unwrap());
    assert!(split_erasure_polynomials(&BitMatrix::identity(12)).is_err());
}

#[test]
fn neglog_branch_matches_plain_evaluation_near_switch() {
    for g in tested_kernels().iter().step_by(7) {
        let p = split_erasure_polynomials(g).unwrap();
        for j in 0..g.ell() {
            for bits in [36.0, 39.5, 40.5, 44.0] {
                let z = 2f64.powf(-bits);
                let plain: f64 = (0..=g.ell())
                    .map(|k| p.counts[j][k] as f64 * z.powi(k as i32) * (1.0 - z).powi((g.ell() - k) as i32))
                    .sum();
                let got = p.step(ExtendedUnitValue::from_neglog(bits), j).neglog();
                assert!((got - (-plain.log2())).abs() <= 1e-9 * got, "{g} branch {j} at 2^-{bits}");
            }
        }
    }
}

#[test]
fn complement_branch_matches_dual_near_one() {
    let g: BitMatrix = "100;110;101".parse().unwrap();
    let p = split_erasure_polynomials(&g).unwrap();
    let dual = p.dual();
    for j in 0..3 {
        for mu in [45.0, 200.0, 5000.0] {
            let v = p.step(ExtendedUnitValue::from_complog(mu), j);
            let w = dual.step(ExtendedUnitValue::from_neglog(mu), j);
            assert!((v.complog() - w.neglog()).abs() <= 1e-12 * w.neglog());
        }
        // linear range: absolute accuracy only
        let v = p.step(ExtendedUnitValue::from_complog(30.0), j);
        let w = dual.step(ExtendedUnitValue::from_neglog(30.0), j);
        assert!((v.complement_value() - w.value()).abs() <= 1e-15);
    }
}

#[test]
fn martingale_mean() {
    for (lit, eps, n) in [("10;11", 0.5, 14), ("10;11", 0.3, 12), ("100;110;101", 0.6, 9), ("1000;1100;1010;1111", 0.25, 7)] {
        let g: BitMatrix = lit.parse().unwrap();
        let cdf = enumerate_level(&g, eps, n).unwrap();
        assert!((cdf.mean_value() - eps).abs() < 1e-9, "{lit}");
    }
}

#[test]
fn exact_level_agrees_with_plain_recursion() {
    let g = arikan_kernel();
    let p = split_erasure_polynomials(&g).unwrap();
    let plain = plain_level(&p.counts, 0.5, 12);
    let cdf = enumerate_level(&g, 0.5, 12).unwrap();
    for (k, z) in plain.iter().enumerate() {
        let got = cdf.value_at_index(k as u64 + 1);
        if *z > 1e-250 && *z < 1.0 - 1e-12 {
            assert!((got.value() - z).abs() <= 1e-9 * z, "leaf {k}");
        }
    }
    for nu in [3.0, 4.8, 6.0, 7.2] {
        let thr = 2f64.powf(-(2f64.powf(nu)));
        let expected = plain.iter().filter(|&&z| z <= thr).count();
        assert_eq!(cdf.count_neglog_at_least(2f64.powf(nu)), expected);
    }
}

#[test]
fn cdf_endpoints() {
    let cdf = enumerate_level(&"100;110;101".parse().unwrap(), 0.4, 6).unwrap();
    assert_eq!(cdf.len(), 729);
    assert_eq!(cdf.cdf_at(1.0), (729, 729));
    assert_eq!(cdf.cdf_at(f64::MIN_POSITIVE).0, cdf.count_neglog_at_least(1022.0));
    assert_eq!(cdf.fraction_below_double_exponent(100.0), 0.0);
}

#[test]
fn monte_carlo_inside_exact_wilson_band() {
    let g = arikan_kernel();
    let exact = enumerate_level(&g, 0.5, 16).unwrap();
    let mc = sample_level(&g, 0.5, 16, 100_000, 2024).unwrap();
    for nu in [2.0, 5.0, 8.0, 10.0, 12.0] {
        let lambda = 2f64.powf(nu);
        let f = exact.count_neglog_at_least(lambda) as f64 / exact.len() as f64;
        let k = mc.count_neglog_at_least(lambda) as u64;
        let (lo, hi) = wilson_interval(k, 100_000, Z_999);
        assert!(lo <= f && f <= hi, "ν = {nu}: exact {f} vs [{lo}, {hi}]");
    }
}

#[test]
fn sampled_distance_sums_concentrate() {
    let paths = sample_paths(&arikan_kernel(), 0.5, 100, 100_000, 77).unwrap();
    let mean = paths.iter().map(|p| p.sum_log_d).sum::<f64>() / paths.len() as f64;
    // Binomial(100, 1/2): σ = 5, standard error 5/√(10^5)
    assert!((mean - 50.0).abs() <= 3.0 * 5.0 / (100_000f64).sqrt());
    assert!(paths.iter().all(|p| p.sum_log_d == p.sum_log_w));
    assert!(paths.iter().any(|p| p.z_final.mode() == Mode::NegLog));
}

#[test]
fn csv_export_is_sorted_and_parsable() {
    let cdf = enumerate_level(&arikan_kernel(), 0.5, 6).unwrap();
    let csv = cdf.to_csv();
    let rows: Vec<f64> = csv.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(csv.lines().next(), Some("lambda"));
    assert_eq!(rows.len(), 64);
    assert!(rows.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(rows, cdf.sorted_neglogs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_is_monotone(eps in 0.05f64..0.95, n in 0usize..8, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let cdf = enumerate_level(&arikan_kernel(), eps, n).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cdf.cdf_at(lo).0 <= cdf.cdf_at(hi).0);
    }

    #[test]
    fn steps_stay_ordered(bits in 1.0f64..2000.0, j in 0usize..3) {
        let p = split_erasure_polynomials(&"100;110;101".parse().unwrap()).unwrap();
        let a = ExtendedUnitValue::from_neglog(bits);
        let b = ExtendedUnitValue::from_neglog(bits * 1.01);
        // each p_j is increasing on [0, 1]
        prop_assert!(p.step(b, j).le(&p.step(a, j)));
    }
}
