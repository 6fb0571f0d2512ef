//! Numbers in `[0, 1]` that stay meaningful far below `f64` range on either
//! side: `2^-λ` with `λ` up to `~1e300`, and `1 - 2^-μ` likewise.
//!
//! Three modes, switched at 40 bits:
//! - `Linear` stores `z` for `z ∈ [2^-40, 1 - 2^-40]`;
//! - `NegLog` stores `λ = -log2 z` for `λ > 40`;
//! - `CompLog` stores `μ = -log2(1 - z)` for `μ > 40`.
//!
//! The closed endpoints `0` and `1` are representable as `NegLog(∞)` and
//! `CompLog(∞)`; they appear only as saturated bounds.

use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Mode switch threshold in bits.
pub const SWITCH_BITS: f64 = 40.0;
const SWITCH_LINEAR: f64 = 9.094947017729282e-13; // 2^-40

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Linear,
    NegLog,
    CompLog,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Linear => "LINEAR",
            Mode::NegLog => "NEGLOG",
            Mode::CompLog => "COMPLOG",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "LINEAR" => Some(Mode::Linear),
            "NEGLOG" => Some(Mode::NegLog),
            "COMPLOG" => Some(Mode::CompLog),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedUnitValue {
    mode: Mode,
    payload: f64,
}

/// `-log2(1 - 2^-x)` computed without cancellation.
fn neg_log2_one_minus_pow2(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    -(-(-x * LN_2).exp()).ln_1p() / LN_2
}

/// `1 - 2^-x` computed without cancellation.
fn one_minus_pow2(x: f64) -> f64 {
    -(-x * LN_2).exp_m1()
}

/// `x^d` by repeated squaring.
pub(crate) fn pow_int(x: f64, d: u32) -> f64 {
    let mut base = x;
    let mut e = d;
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

impl ExtendedUnitValue {
    pub const ZERO: ExtendedUnitValue = ExtendedUnitValue { mode: Mode::NegLog, payload: f64::INFINITY };
    pub const ONE: ExtendedUnitValue = ExtendedUnitValue { mode: Mode::CompLog, payload: f64::INFINITY };

    /// Reconstructs a value from its serialized `(mode, payload)` pair,
    /// rejecting payloads outside the range of their mode.
    pub fn from_parts(mode: Mode, payload: f64) -> Option<Self> {
        let ok = match mode {
            Mode::Linear => (SWITCH_LINEAR..=1.0 - SWITCH_LINEAR).contains(&payload),
            Mode::NegLog | Mode::CompLog => payload > SWITCH_BITS,
        };
        ok.then_some(Self { mode, payload })
    }

    /// From a plain probability `z ∈ [0, 1]`.
    pub fn from_prob(z: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&z), "probability out of range: {z}");
        if z < SWITCH_LINEAR {
            Self { mode: Mode::NegLog, payload: -z.log2() }
        } else if z > 1.0 - SWITCH_LINEAR {
            Self { mode: Mode::CompLog, payload: -(1.0 - z).log2() }
        } else {
            Self { mode: Mode::Linear, payload: z }
        }
    }

    /// The value `1 - d`, given `d` accurately.
    pub fn from_complement(d: f64) -> Self {
        Self::from_prob(d).complement()
    }

    /// The value `2^-λ`, `λ ≥ 0`.
    pub fn from_neglog(lambda: f64) -> Self {
        debug_assert!(lambda >= 0.0 || lambda.is_nan(), "negative λ {lambda}");
        let lambda = lambda.max(0.0);
        if lambda > SWITCH_BITS {
            return Self { mode: Mode::NegLog, payload: lambda };
        }
        let comp = one_minus_pow2(lambda);
        if comp < SWITCH_LINEAR {
            if comp <= 0.0 {
                return Self::ONE;
            }
            Self { mode: Mode::CompLog, payload: -comp.log2() }
        } else {
            Self { mode: Mode::Linear, payload: (-lambda * LN_2).exp() }
        }
    }

    /// The value `1 - 2^-μ`, `μ ≥ 0`.
    pub fn from_complog(mu: f64) -> Self {
        Self::from_neglog(mu).complement()
    }

    /// The value `2^L`, `L ≤ 0`.
    pub fn from_log2(l: f64) -> Self {
        Self::from_neglog(-l)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn payload(&self) -> f64 {
        self.payload
    }

    /// The represented value as a plain `f64` (may underflow to 0 or round to 1).
    pub fn value(&self) -> f64 {
        match self.mode {
            Mode::Linear => self.payload,
            Mode::NegLog => (-self.payload * LN_2).exp(),
            Mode::CompLog => one_minus_pow2(self.payload),
        }
    }

    /// `1 - z` as a plain `f64`, accurate in the `CompLog` regime.
    pub fn complement_value(&self) -> f64 {
        match self.mode {
            Mode::Linear => 1.0 - self.payload,
            Mode::NegLog => one_minus_pow2(self.payload),
            Mode::CompLog => (-self.payload * LN_2).exp(),
        }
    }

    /// `λ = -log2 z`.
    pub fn neglog(&self) -> f64 {
        match self.mode {
            Mode::Linear => -self.payload.log2(),
            Mode::NegLog => self.payload,
            Mode::CompLog => neg_log2_one_minus_pow2(self.payload),
        }
    }

    /// `μ = -log2(1 - z)`.
    pub fn complog(&self) -> f64 {
        match self.mode {
            Mode::Linear => -(1.0 - self.payload).log2(),
            Mode::NegLog => neg_log2_one_minus_pow2(self.payload),
            Mode::CompLog => self.payload,
        }
    }

    /// `log2 z`.
    pub fn log2(&self) -> f64 {
        -self.neglog()
    }

    /// The value `1 - z`.
    pub fn complement(&self) -> Self {
        match self.mode {
            Mode::Linear => Self { mode: Mode::Linear, payload: 1.0 - self.payload },
            Mode::NegLog => Self { mode: Mode::CompLog, payload: self.payload },
            Mode::CompLog => Self { mode: Mode::NegLog, payload: self.payload },
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mode == Mode::NegLog && self.payload == f64::INFINITY
    }

    pub fn is_one(&self) -> bool {
        self.mode == Mode::CompLog && self.payload == f64::INFINITY
    }

    /// `z^d`.
    pub fn powi(&self, d: u32) -> Self {
        if d == 0 {
            return Self::ONE;
        }
        match self.mode {
            Mode::Linear if self.payload > 0.5 => {
                let delta = 1.0 - self.payload;
                Self::from_complement(-(d as f64 * (-delta).ln_1p()).exp_m1())
            }
            Mode::Linear => {
                let p = pow_int(self.payload, d);
                if p < SWITCH_LINEAR {
                    Self::from_neglog(d as f64 * -self.payload.log2())
                } else {
                    Self::from_prob(p)
                }
            }
            Mode::NegLog => Self::from_neglog(d as f64 * self.payload),
            // 1 - (1-δ)^d = dδ(1 + O(dδ))
            Mode::CompLog if self.payload > 100.0 => Self::from_complog(self.payload - (d as f64).log2()),
            Mode::CompLog => {
                let delta = (-self.payload * LN_2).exp();
                Self::from_complement(-(d as f64 * (-delta).ln_1p()).exp_m1())
            }
        }
    }

    /// `min(1, 2^k · z)`.
    pub fn scale_pow2(&self, k: f64) -> Self {
        if k == 0.0 {
            return *self;
        }
        match self.mode {
            Mode::NegLog => {
                let lambda = self.payload - k;
                if lambda <= 0.0 {
                    Self::ONE
                } else {
                    Self::from_neglog(lambda)
                }
            }
            _ => {
                let l = self.log2() + k;
                if l >= 0.0 {
                    Self::ONE
                } else {
                    Self::from_log2(l)
                }
            }
        }
    }

    /// Moves the value down by a relative amount `rel` in the active domain.
    pub fn nudge_down(&self, rel: f64) -> Self {
        match self.mode {
            Mode::Linear => Self::from_prob(self.payload * (1.0 - rel)),
            Mode::NegLog => Self { mode: Mode::NegLog, payload: self.payload * (1.0 + rel) },
            Mode::CompLog => Self::from_complog(self.payload * (1.0 - rel)),
        }
    }

    /// Moves the value up by a relative amount `rel` in the active domain,
    /// saturating at 1.
    pub fn nudge_up(&self, rel: f64) -> Self {
        match self.mode {
            Mode::Linear => Self::from_prob((self.payload * (1.0 + rel)).min(1.0)),
            Mode::NegLog => Self::from_neglog(self.payload * (1.0 - rel)),
            Mode::CompLog => Self { mode: Mode::CompLog, payload: self.payload * (1.0 + rel) },
        }
    }

    /// Sort key that orders values exactly across modes.
    fn order_key(&self) -> (u8, f64) {
        match self.mode {
            Mode::NegLog => (0, -self.payload),
            Mode::CompLog => (1, self.payload),
            Mode::Linear if self.payload <= 0.5 => (0, self.payload.log2()),
            Mode::Linear => (1, -(1.0 - self.payload).log2()),
        }
    }

    /// Total order on represented values.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        let (ra, ka) = self.order_key();
        let (rb, kb) = other.order_key();
        ra.cmp(&rb).then(ka.total_cmp(&kb))
    }

    pub fn le(&self, other: &Self) -> bool {
        self.cmp_value(other) != Ordering::Greater
    }

    pub fn lt(&self, other: &Self) -> bool {
        self.cmp_value(other) == Ordering::Less
    }
}

impl fmt::Debug for ExtendedUnitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({:e})", self.mode.as_str(), self.payload)
    }
}

impl fmt::Display for ExtendedUnitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.mode.as_str(), crate::numfmt::sig17(self.payload))
    }
}
