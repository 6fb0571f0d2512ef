//! Gaussian tail machinery for the scaling laws of the polarization process.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::ExtendedUnitValue;
use crate::gf2kernel::KernelProfile;
use crate::numfmt::ser_sig17;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal upper tail `Q(t) = P(N(0,1) ≥ t)`.
pub fn q_function(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t < 0.0 {
        return 1.0 - q_function(-t);
    }
    0.5 * libm::erfc(t / SQRT_2)
}

/// Standard normal density.
pub fn gaussian_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `t` with `Q(t) = p`.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DomainError(format!("Q^-1 needs p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-q_inverse(1.0 - p)?);
    }
    // Q is decreasing; for p < 1/2 the root lies in (0, 40)
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..4 {
        let dens = gaussian_pdf(t);
        if dens == 0.0 {
            break;
        }
        let next = t + (q_function(t) - p) / dens;
        if !(next > lo - 1e-9 && next < hi + 1e-9) {
            break;
        }
        t = next;
    }
    Ok(t)
}

/// Which end of `[0, 1]` a threshold refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `Z ≤ 2^{-ℓ^ν}`, governed by `E(G), V(G)`.
    Good,
    /// `Z ≥ 1 - 2^{-ℓ^ν}`, governed by `E(H), V(H)`.
    Bad,
}

impl Side {
    fn moments(self, profile: &KernelProfile) -> (f64, f64) {
        match self {
            Side::Good => (profile.exponent, profile.second_exponent),
            Side::Bad => (profile.h_exponent, profile.h_second_exponent),
        }
    }
}

/// The threshold `2^{-ℓ^ν}`, compared in the log-log domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoubleExponent {
    #[serde(serialize_with = "ser_sig17")]
    pub nu: f64,
    pub ell: usize,
}

impl DoubleExponent {
    /// `log2` of `-log2 z*`, i.e. `ν · log2 ℓ`.
    pub fn log2_neglog(&self) -> f64 {
        self.nu * (self.ell as f64).log2()
    }

    /// `Z ≤ z*`.
    pub fn admits(&self, z: &ExtendedUnitValue) -> bool {
        let lambda = z.neglog();
        lambda > 0.0 && lambda.log2() >= self.log2_neglog()
    }

    /// `1 - Z ≤ z*`.
    pub fn admits_complement(&self, z: &ExtendedUnitValue) -> bool {
        self.admits(&z.complement())
    }
}

/// `log_ℓ(-log2 z)` for a value `z`, the coordinate `DoubleExponent` lives in.
pub fn loglog(z: &ExtendedUnitValue, ell: usize) -> f64 {
    z.neglog().log2() / (ell as f64).log2()
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::DomainError("n must be at least 1".into()));
    }
    Ok(())
}

/// `ν = nE + t√(nV) + f`.
pub fn polar_threshold(n: usize, t: f64, profile: &KernelProfile, side: Side, f_of_n: f64) -> Result<DoubleExponent> {
    check_n(n)?;
    let (e, v) = side.moments(profile);
    if v <= 0.0 && t != 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let spread = if t == 0.0 { 0.0 } else { t * (n as f64 * v).sqrt() };
    Ok(DoubleExponent { nu: n as f64 * e + spread + f_of_n, ell: profile.ell() })
}

/// Limiting probability mass beyond a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPrediction {
    pub n: usize,
    #[serde(serialize_with = "ser_sig17")]
    pub t: f64,
    #[serde(serialize_with = "ser_sig17")]
    pub predicted_probability: f64,
    pub side: Side,
}

/// Inverts [`polar_threshold`] at `f = 0`: `t = (ν - nE)/√(nV)` and the
/// prediction is `I·Q(t)` on the good side, `(1-I)·Q(t)` on the bad side.
pub fn predicted_cdf(n: usize, nu: f64, channel_i: f64, profile: &KernelProfile, side: Side) -> Result<GaussianPrediction> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&channel_i) {
        return Err(Error::DomainError(format!("capacity {channel_i} outside [0, 1]")));
    }
    let (e, v) = side.moments(profile);
    if v <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let t = (nu - n as f64 * e) / (n as f64 * v).sqrt();
    let mass = match side {
        Side::Good => channel_i,
        Side::Bad => 1.0 - channel_i,
    };
    Ok(GaussianPrediction { n, t, predicted_probability: mass * q_function(t), side })
}

/// Adaptive Simpson integration of `f` on `[a, b]`.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `P(A ≥ t, B ≥ v)` for a standard bivariate normal pair with correlation `rho`.
pub fn bivariate_orthant(t: f64, v: f64, rho: f64) -> f64 {
    assert!((-1.0..=1.0).contains(&rho), "correlation {rho} outside [-1, 1]");
    if rho == 1.0 {
        return q_function(t.max(v));
    }
    if rho == -1.0 {
        return (q_function(t) - q_function(-v)).max(0.0);
    }
    if rho == 0.0 {
        return q_function(t) * q_function(v);
    }
    let s = (1.0 - rho * rho).sqrt();
    let integrand = |x: f64| gaussian_pdf(x) * q_function((v - rho * x) / s);
    // the conditional tail switches on around x = v/ρ; split there
    const UPPER: f64 = 40.0;
    let lo = t.max(-UPPER);
    if lo >= UPPER {
        return 0.0;
    }
    let knot = v / rho;
    let mut total = 0.0;
    if knot > lo && knot < UPPER {
        total += simpson(&integrand, lo, knot, 1e-13);
        total += simpson(&integrand, knot, UPPER, 1e-13);
    } else {
        total += simpson(&integrand, lo, UPPER, 1e-13);
    }
    total.clamp(0.0, q_function(t.max(v)).min(1.0))
}

/// Limiting fraction of indices chosen by both the polar rule at rate `r`
/// and the Reed-Muller rule at rate `r_prime`.
pub fn overlap_limit(channel_i: f64, r: f64, r_prime: f64) -> Result<f64> {
    if !(r > 0.0 && r < channel_i) || !(r_prime > 0.0 && r_prime < 1.0) {
        return Err(Error::DomainError(format!("need 0 < R < I and 0 < R' < 1 (R = {r}, I = {channel_i}, R' = {r_prime})")));
    }
    Ok(channel_i * (r / channel_i).min(r_prime))
}
