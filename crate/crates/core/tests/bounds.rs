mod common;

use common::*;
use kpolar::becpolar::{split_erasure_polynomials, ErasurePolynomialSet};
use kpolar::boundprop::*;
use kpolar::construct::index_digits;
use kpolar::extended::ExtendedUnitValue;
use kpolar::gf2kernel::*;
use rand::Rng;

struct Violations {
    z: usize,
    comp: usize,
    paths: usize,
}

fn check_path(polys: &ErasurePolynomialSet, profile: &KernelProfile, plan: Option<&ComplementPlan>, eps: f64, digits: &[u8], v: &mut Violations) {
    let root = ExtendedUnitValue::from_prob(eps);
    let dual = polys.dual();
    let mut exact = root;
    // 1 - Z evolved directly so it keeps full relative precision near Z = 1
    let mut exact_comp = root.complement();
    let mut z = IntervalState::point(root);
    let mut c = IntervalState::point(root.complement());
    for &b in digits {
        exact = polys.step(exact, b as usize);
        exact_comp = dual.step(exact_comp, b as usize);
        z = propagate_z_interval(z, b as usize, profile);
        assert!(z.lo.le(&z.hi));
        if !z.contains(&exact) {
            v.z += 1;
        }
        if let Some(plan) = plan {
            c = propagate_comp_interval(c, b as usize, plan);
            assert!(c.lo.le(&c.hi));
            if !c.contains(&exact_comp) {
                v.comp += 1;
            }
        }
    }
    v.paths += 1;
}

#[test]
fn arikan_every_path_inside_both_intervals() {
    let g = arikan_kernel();
    let profile = kernel_profile(&g).unwrap();
    let polys = split_erasure_polynomials(&g).unwrap();
    let plan = ComplementPlan::from_polys(&polys).unwrap();
    for eps in [0.5, 0.1, 0.9] {
        let mut v = Violations { z: 0, comp: 0, paths: 0 };
        for i in 1..=4096 {
            check_path(&polys, &profile, Some(&plan), eps, &index_digits(i, 2, 12), &mut v);
        }
        assert_eq!((v.z, v.comp, v.paths), (0, 0, 4096), "eps {eps}");
    }
}

#[test]
fn every_tested_kernel_inside_intervals() {
    let mut r = rng(3);
    for g in tested_kernels() {
        let profile = kernel_profile(&g).unwrap();
        let polys = split_erasure_polynomials(&g).unwrap();
        let plan = ComplementPlan::from_polys(&polys).ok();
        let ell = g.ell();
        let n = if ell == 3 { 5 } else { 4 };
        let mut v = Violations { z: 0, comp: 0, paths: 0 };
        for i in 1..=(ell as u64).pow(n as u32) {
            check_path(&polys, &profile, plan.as_ref(), 0.45, &index_digits(i, ell, n), &mut v);
        }
        for _ in 0..200 {
            let digits: Vec<u8> = (0..12).map(|_| r.random_range(0..ell) as u8).collect();
            check_path(&polys, &profile, plan.as_ref(), r.random_range(0.01..0.99), &digits, &mut v);
        }
        assert_eq!((v.z, v.comp), (0, 0), "{g}");
    }
}

#[test]
fn complement_plan_refuses_unresolved_kernels() {
    // complement exponents [1, 2, 1] fit D(H) only in natural order, which is not non-increasing
    let g: BitMatrix = "110;100;101".parse().unwrap();
    let profile = kernel_profile(&g).unwrap();
    assert!(matches!(ComplementPlan::new(&profile), Err(kpolar::Error::AssumptionUnmet(_))));
}

#[test]
fn neglog_and_linear_propagation_agree_across_switch() {
    let g: BitMatrix = "100;110;101".parse().unwrap();
    let profile = kernel_profile(&g).unwrap();
    for bits in [20.0, 39.0, 39.99] {
        let linear = ExtendedUnitValue::from_prob(2f64.powf(-bits));
        for j in 0..3 {
            let s = propagate_z_interval(IntervalState::point(linear), j, &profile);
            let d = profile.partial_distances[j] as f64;
            let lo_expected = d * bits;
            let hi_expected = d * bits - (3 - j) as f64;
            assert!((s.lo.neglog() - lo_expected).abs() <= 1e-9 * lo_expected);
            if hi_expected > 0.0 {
                assert!((s.hi.neglog() - hi_expected).abs() <= 1e-9 * hi_expected);
            }
        }
    }
}

#[test]
fn process_conditions_hold_on_full_arikan_level() {
    let g = arikan_kernel();
    let profile = kernel_profile(&g).unwrap();
    let polys = split_erasure_polynomials(&g).unwrap();
    let mut total: Option<ConditionReport> = None;
    for i in 1..=4096 {
        let trace = bec_trace(&polys, &profile, ExtendedUnitValue::from_prob(0.5), &index_digits(i, 2, 12));
        let r = check_process_conditions(&trace, profile.c3_constant);
        match total.as_mut() {
            Some(t) => t.merge(&r),
            None => total = Some(r),
        }
    }
    let total = total.unwrap();
    assert_eq!((total.c2_violations, total.c3_violations), (0, 0));
    assert_eq!(total.steps, 4096 * 12);
    assert!(total.max_c3_constant_observed <= 4.0 * (1.0 + 1e-9));
    assert!(total.max_c3_constant_observed >= 1.0);
}

#[test]
fn process_conditions_hold_for_larger_kernels() {
    let mut r = rng(99);
    for g in tested_kernels().into_iter().rev().take(5) {
        let profile = kernel_profile(&g).unwrap();
        let polys = split_erasure_polynomials(&g).unwrap();
        for _ in 0..100 {
            let digits: Vec<u8> = (0..20).map(|_| r.random_range(0..g.ell()) as u8).collect();
            let trace = bec_trace(&polys, &profile, ExtendedUnitValue::from_prob(0.5), &digits);
            let rep = check_process_conditions(&trace, profile.c3_constant);
            assert_eq!((rep.c2_violations, rep.c3_violations), (0, 0), "{g}");
        }
    }
}
