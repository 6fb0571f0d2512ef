//! Choosing which synthetic channels carry information, and the error
//! bounds attached to a choice.
//!
//! Channel indices are 1-based. The base-`ℓ` digits of `i - 1`, most
//! significant first, give the branch taken at each level of the tree.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::q_inverse;
use crate::becpolar::{enumerate_leaves, level_size, split_erasure_polynomials, LevelCdf, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::extended::ExtendedUnitValue;
use crate::gf2kernel::{BitMatrix, KernelProfile};
use crate::numfmt::{ser_sig17, sig17};
use crate::stats::compensated_sum;

/// Largest code length any selection rule will materialize.
pub const SELECTION_BUDGET: u64 = 1 << 24;

/// The rule that produced a selection, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    Polar,
    Rm,
    Hybrid {
        m: usize,
        #[serde(serialize_with = "ser_sig17")]
        beta: f64,
        #[serde(serialize_with = "ser_sig17")]
        t: f64,
        /// Indices added from the fallback ranking because the events were too small.
        shortfall: u64,
    },
    HybridRecursive {
        schedule: Vec<usize>,
        #[serde(serialize_with = "ser_sig17")]
        beta: f64,
        #[serde(serialize_with = "ser_sig17")]
        epsilon_slack: f64,
        #[serde(serialize_with = "ser_sig17")]
        t: f64,
        shortfall: u64,
    },
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Polar => "polar",
            Rule::Rm => "rm",
            Rule::Hybrid { .. } => "hybrid",
            Rule::HybridRecursive { .. } => "hybrid_recursive",
        }
    }
}

/// Information set of a code of length `ℓ^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionSet {
    pub n: usize,
    pub ell: usize,
    #[serde(serialize_with = "ser_sig17")]
    pub rate: f64,
    /// Ascending, 1-based.
    pub indices: Vec<u64>,
    #[serde(flatten)]
    pub rule: Rule,
}

impl SelectionSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn code_length(&self) -> u64 {
        (self.ell as u64).pow(self.n as u32)
    }

    pub fn contains(&self, i: u64) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// One index per line under an `index` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index\n");
        for i in &self.indices {
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }

    /// Rule, parameters and (optionally) bounds, without the index list.
    pub fn metadata_json(&self, bounds: Option<&SelectionBounds>) -> String {
        #[derive(Serialize)]
        struct Meta<'a> {
            n: usize,
            ell: usize,
            #[serde(serialize_with = "ser_sig17")]
            rate: f64,
            size: usize,
            #[serde(flatten)]
            rule: &'a Rule,
            #[serde(skip_serializing_if = "Option::is_none")]
            bounds: Option<&'a SelectionBounds>,
        }
        let meta = Meta { n: self.n, ell: self.ell, rate: self.rate, size: self.len(), rule: &self.rule, bounds };
        serde_json::to_string_pretty(&meta).expect("metadata serializes")
    }
}

fn code_length(ell: usize, n: usize) -> Result<u64> {
    let size = level_size(ell, n)?;
    if size > SELECTION_BUDGET as u128 {
        return Err(Error::BudgetExceeded { required: size, budget: SELECTION_BUDGET });
    }
    Ok(size as u64)
}

/// `⌊ℓ^n · rate⌋`.
pub fn target_size(length: u64, rate: f64) -> Result<u64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::DomainError(format!("rate {rate} outside (0, 1]")));
    }
    Ok(((length as f64) * rate).floor() as u64)
}

/// Base-`ℓ` digits of `i - 1`, most significant first.
pub fn index_digits(i: u64, ell: usize, n: usize) -> Vec<u8> {
    let mut x = i - 1;
    let mut digits = vec![0u8; n];
    for d in digits.iter_mut().rev() {
        *d = (x % ell as u64) as u8;
        x /= ell as u64;
    }
    digits
}

fn digits_to_index(digits: &[u8], ell: usize) -> u64 {
    digits.iter().fold(0u64, |acc, &d| acc * ell as u64 + d as u64) + 1
}

/// Index whose digits are those of `i` in reverse order.
pub fn digit_reverse(i: u64, ell: usize, n: usize) -> Result<u64> {
    let max = (ell as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if i == 0 || i > max {
        return Err(Error::IndexOutOfRange { index: i, max });
    }
    let mut digits = index_digits(i, ell, n);
    digits.reverse();
    Ok(digits_to_index(&digits, ell))
}

/// Row weight of `G^{⊗n}` at index `i`: `Π_j w_{i_j}(G)`.
pub fn row_weight(i: u64, weights: &[u32], n: usize) -> u64 {
    let ell = weights.len() as u64;
    let mut x = i - 1;
    let mut w = 1u64;
    for _ in 0..n {
        w *= weights[(x % ell) as usize] as u64;
        x /= ell;
    }
    w
}

fn finish(n: usize, ell: usize, rate: f64, mut indices: Vec<u64>, rule: Rule) -> SelectionSet {
    indices.sort_unstable();
    SelectionSet { n, ell, rate, indices, rule }
}

/// The `⌊ℓ^n·rate⌋` channels with the smallest `Z`; ties go to the smaller index.
pub fn polar_selection(cdf: &LevelCdf, rate: f64) -> Result<SelectionSet> {
    if !cdf.is_exact() {
        return Err(Error::RequiresExactCdf);
    }
    let k = target_size(cdf.len() as u64, rate)? as usize;
    let ranked = polar_ranking(cdf);
    Ok(finish(cdf.n, cdf.ell, rate, ranked[..k].to_vec(), Rule::Polar))
}

/// Every index, best (smallest `Z`) first.
fn polar_ranking(cdf: &LevelCdf) -> Vec<u64> {
    let values = cdf.values();
    let mut order: Vec<u64> = (1..=values.len() as u64).collect();
    order.par_sort_by(|&a, &b| {
        values[(a - 1) as usize].cmp_value(&values[(b - 1) as usize]).then(a.cmp(&b))
    });
    order
}

/// The `⌊ℓ^n·rate⌋` rows of `G^{⊗n}` with the largest weight; ties go to the smaller index.
pub fn rm_selection(g: &BitMatrix, n: usize, rate: f64) -> Result<SelectionSet> {
    let ell = g.ell();
    let length = code_length(ell, n)?;
    let k = target_size(length, rate)? as usize;
    let weights = g.row_weights();
    let mut order: Vec<(u64, u64)> = (1..=length).into_par_iter().map(|i| (row_weight(i, &weights, n), i)).collect();
    order.par_sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(finish(n, ell, rate, order[..k].iter().map(|&(_, i)| i).collect(), Rule::Rm))
}

/// `⌈(log2 n + log2 log2 c)/β⌉`, clamped to `[0, n]`.
pub fn default_prefix_depth(n: usize, beta: f64, c: f64) -> usize {
    let m = (((n as f64).log2() + c.log2().log2()) / beta).ceil();
    if m.is_nan() || m < 0.0 {
        0
    } else {
        (m as usize).min(n)
    }
}

/// `t·√(len·v)`, zero when the spread vanishes.
fn offset(t: f64, len: usize, v: f64) -> f64 {
    let s = (len as f64 * v).sqrt();
    if s == 0.0 {
        0.0
    } else {
        t * s
    }
}

/// A constraint `Σ_{i ∈ [start, end)} log2 D_{B_i} ≥ threshold` on a digit range.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start: usize,
    end: usize,
    threshold: f64,
}

/// Shared core of the hybrid rules: channel-dependent prefix event on the
/// first `m` digits, channel-independent segment events on the rest.
struct Structured<'a> {
    prefix: &'a LevelCdf,
    profile: &'a KernelProfile,
    n: usize,
    beta: f64,
    segments: Vec<Segment>,
    fallback: Option<&'a LevelCdf>,
}

impl Structured<'_> {
    /// Returns the selected indices and the shortfall.
    fn select(&self, k: u64) -> Result<(Vec<u64>, u64)> {
        let ell = self.profile.ell();
        let m = self.prefix.n;
        let tail_len = self.n - m;
        let tail_size = (ell as u64).pow(tail_len as u32);
        let lambda_min = (self.beta * m as f64).exp2();
        let prefix_values = self.prefix.values();

        let d = &self.profile.partial_distances;
        // per tail: passes every segment, and Π D over the whole tail
        let tails: Vec<(bool, u64)> = (0..tail_size)
            .into_par_iter()
            .map(|s| {
                let digits = index_digits(s + 1, ell, tail_len);
                let ok = self.segments.iter().all(|seg| {
                    let prod: u64 = digits[seg.start - m..seg.end - m].iter().map(|&b| d[b as usize] as u64).product();
                    (prod as f64).log2() >= seg.threshold
                });
                (ok, digits.iter().map(|&b| d[b as usize] as u64).product())
            })
            .collect();

        let prefix_ok: Vec<bool> = prefix_values.iter().map(|v| v.neglog() > lambda_min).collect();
        let mut candidates: Vec<u64> = Vec::new();
        for (p, _) in prefix_ok.iter().enumerate().filter(|(_, ok)| **ok) {
            let base = p as u64 * tail_size;
            candidates.extend(tails.iter().enumerate().filter(|(_, t)| t.0).map(|(s, _)| base + s as u64 + 1));
        }

        let key_tail = |i: u64| tails[((i - 1) % tail_size) as usize].1;
        let key_prefix = |i: u64| &prefix_values[((i - 1) / tail_size) as usize];
        if candidates.len() as u64 > k {
            candidates.par_sort_by(|&a, &b| {
                key_tail(b).cmp(&key_tail(a)).then_with(|| key_prefix(a).cmp_value(key_prefix(b))).then(a.cmp(&b))
            });
            candidates.truncate(k as usize);
            return Ok((candidates, 0));
        }

        let shortfall = k - candidates.len() as u64;
        if shortfall > 0 {
            let mut chosen = vec![false; (prefix_values.len() as u64 * tail_size) as usize];
            for &i in &candidates {
                chosen[(i - 1) as usize] = true;
            }
            let ranking = match self.fallback {
                Some(full) => polar_ranking(full),
                None => self.surrogate_ranking(tail_size, &tails),
            };
            candidates.extend(ranking.into_iter().filter(|&i| !chosen[(i - 1) as usize]).take(shortfall as usize));
        }
        Ok((candidates, shortfall))
    }

    /// Without the level-`n` values, rank by `log2 λ_m + Σ log2 D` over the tail.
    fn surrogate_ranking(&self, tail_size: u64, tails: &[(bool, u64)]) -> Vec<u64> {
        let values = self.prefix.values();
        let score = |i: u64| {
            values[((i - 1) / tail_size) as usize].neglog().log2() + (tails[((i - 1) % tail_size) as usize].1 as f64).log2()
        };
        let mut order: Vec<u64> = (1..=values.len() as u64 * tail_size).collect();
        order.par_sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
        order
    }
}

fn check_prefix(prefix: &LevelCdf, profile: &KernelProfile, n: usize) -> Result<()> {
    if !prefix.is_exact() {
        return Err(Error::RequiresExactCdf);
    }
    if prefix.ell != profile.ell() || prefix.n > n {
        return Err(Error::MismatchedLevel(format!(
            "prefix level (ℓ = {}, m = {}) does not fit ℓ = {}, n = {n}",
            prefix.ell,
            prefix.n,
            profile.ell()
        )));
    }
    Ok(())
}

fn check_fallback(fallback: Option<&LevelCdf>, ell: usize, n: usize) -> Result<()> {
    if let Some(full) = fallback {
        if !full.is_exact() || full.n != n || full.ell != ell {
            return Err(Error::MismatchedLevel("fallback level must be exact at depth n".into()));
        }
    }
    Ok(())
}

/// Prefix digits in `D_m(β)` (`-log2 Z_m > 2^{βm}`) and suffix digits with
/// `Σ_{i=m}^{n-1} log2 D_{B_i} ≥ (n-m)E' + t√((n-m)V')`, where `E', V'` are
/// the exponent moments in log2 units. Oversized intersections keep the
/// largest suffix sums; undersized ones are padded from `fallback` (the
/// exact level-`n` ranking) or, without it, from `log2 λ_m + Σ log2 D`.
pub fn hybrid_selection(
    prefix: &LevelCdf,
    profile: &KernelProfile,
    n: usize,
    rate: f64,
    beta: f64,
    t: f64,
    fallback: Option<&LevelCdf>,
) -> Result<SelectionSet> {
    check_prefix(prefix, profile, n)?;
    check_fallback(fallback, profile.ell(), n)?;
    let length = code_length(profile.ell(), n)?;
    let k = target_size(length, rate)?;
    let m = prefix.n;
    let len = n - m;
    let threshold = len as f64 * profile.exponent_log2() + offset(t, len, profile.second_exponent_log2());
    let segments = vec![Segment { start: m, end: n, threshold }];
    let (indices, shortfall) = Structured { prefix, profile, n, beta, segments, fallback }.select(k)?;
    Ok(finish(n, profile.ell(), rate, indices, Rule::Hybrid { m, beta, t, shortfall }))
}

/// Like [`hybrid_selection`] with a schedule `m_0 < m_1 < … < m_k < n`: the
/// prefix event is taken at `m_0`, every middle segment `[m_i, m_{i+1})` must
/// have mean `log2 D` at least `E' - epsilon_slack`, and the last segment
/// `[m_k, n)` carries the `t` threshold. Trimming ranks by `Σ log2 D` from `m_0`.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_selection_recursive(
    prefix: &LevelCdf,
    profile: &KernelProfile,
    n: usize,
    rate: f64,
    schedule: &[usize],
    beta: f64,
    epsilon_slack: f64,
    t: f64,
    fallback: Option<&LevelCdf>,
) -> Result<SelectionSet> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) || *schedule.last().unwrap() > n {
        return Err(Error::DomainError(format!("schedule {schedule:?} must be strictly increasing and end at most at n = {n}")));
    }
    if prefix.n != schedule[0] {
        return Err(Error::MismatchedLevel(format!("prefix depth {} differs from the first breakpoint {}", prefix.n, schedule[0])));
    }
    check_prefix(prefix, profile, n)?;
    check_fallback(fallback, profile.ell(), n)?;
    let length = code_length(profile.ell(), n)?;
    let k = target_size(length, rate)?;
    let e = profile.exponent_log2();
    let mut segments: Vec<Segment> = schedule
        .windows(2)
        .map(|w| Segment { start: w[0], end: w[1], threshold: (w[1] - w[0]) as f64 * (e - epsilon_slack) })
        .collect();
    let last = *schedule.last().unwrap();
    let len = n - last;
    segments.push(Segment {
        start: last,
        end: n,
        threshold: len as f64 * e + offset(t, len, profile.second_exponent_log2()),
    });
    let (indices, shortfall) = Structured { prefix, profile, n, beta, segments, fallback }.select(k)?;
    Ok(finish(
        n,
        profile.ell(),
        rate,
        indices,
        Rule::HybridRecursive { schedule: schedule.to_vec(), beta, epsilon_slack, t, shortfall },
    ))
}

/// Exact BEC prefix level at depth `m`, or `PrefixTooDeep` past the budget.
pub fn enumerate_prefix(profile: &KernelProfile, eps: f64, m: usize, budget: u64) -> Result<LevelCdf> {
    let polys = split_erasure_polynomials(&profile.kernel)?;
    let leaves = enumerate_leaves(&polys, eps, m, budget).map_err(|e| match e {
        Error::BudgetExceeded { required, budget } => Error::PrefixTooDeep { m, required, budget },
        other => other,
    })?;
    Ok(LevelCdf::from_values(m, profile.ell(), crate::becpolar::CdfSource::Exact, leaves))
}

/// Default enumeration budget for prefixes.
pub const PREFIX_BUDGET: u64 = DEFAULT_BUDGET;

/// Error bounds for a selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionBounds {
    /// `log2 Σ_{i∈I} Z_i`; may be positive.
    #[serde(serialize_with = "ser_sig17")]
    pub union_bound_log2: f64,
    /// `Σ Z_i` when it is below 1.
    pub union_bound: Option<ExtendedUnitValue>,
    /// `max_i ½(1 - √(1 - Z_i²))`.
    pub sc_lower: ExtendedUnitValue,
    /// Smallest row weight of `G^{⊗n}` among the selected rows.
    pub dmin_upper: u64,
    /// `Z(W)^{2·dmin}/4`.
    pub map_lower: ExtendedUnitValue,
}

/// `log2(½(1 - √(1 - z²)))`, written as `2 log2 z - 1 - log2(1 + √(1 - z²))`.
fn sc_lower_log2(z: &ExtendedUnitValue) -> f64 {
    let root = (z.complement_value() * (1.0 + z.value())).sqrt();
    2.0 * z.log2() - 1.0 - (1.0 + root).log2()
}

/// Union bound, SC lower bound, minimum-distance and MAP bounds of `sel`.
pub fn selection_bounds(sel: &SelectionSet, cdf: &LevelCdf, profile: &KernelProfile, root_z: f64) -> Result<SelectionBounds> {
    if !cdf.is_exact() {
        return Err(Error::RequiresExactCdf);
    }
    if cdf.n != sel.n || cdf.ell != sel.ell || profile.ell() != sel.ell {
        return Err(Error::MismatchedLevel(format!(
            "selection (ℓ = {}, n = {}) against level (ℓ = {}, n = {})",
            sel.ell, sel.n, cdf.ell, cdf.n
        )));
    }
    if sel.is_empty() {
        return Err(Error::DomainError("selection is empty".into()));
    }
    if !(root_z > 0.0 && root_z < 1.0) {
        return Err(Error::DomainError(format!("Z(W) = {root_z} is not in (0, 1)")));
    }
    let zs: Vec<ExtendedUnitValue> = sel.indices.iter().map(|&i| cdf.value_at_index(i)).collect();
    let logs: Vec<f64> = zs.iter().map(|z| z.log2()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let union_bound_log2 = if top == f64::NEG_INFINITY {
        top
    } else {
        top + compensated_sum(logs.iter().map(|l| (l - top).exp2())).log2()
    };
    let union_bound = (union_bound_log2 < 0.0).then(|| ExtendedUnitValue::from_log2(union_bound_log2));
    let worst = zs.iter().copied().max_by(|a, b| a.cmp_value(b)).expect("non-empty");
    let sc_lower = ExtendedUnitValue::from_log2(sc_lower_log2(&worst));
    let weights = &profile.row_weights;
    let dmin_upper = sel.indices.iter().map(|&i| row_weight(i, weights, sel.n)).min().expect("non-empty");
    let map_lower = ExtendedUnitValue::from_log2(2.0 * dmin_upper as f64 * root_z.log2() - 2.0);
    Ok(SelectionBounds { union_bound_log2, union_bound, sc_lower, dmin_upper, map_lower })
}

impl SelectionBounds {
    /// `log_ℓ(-log2 x)` for each bound, the coordinate the scaling laws use.
    pub fn loglog(x_log2: f64, ell: usize) -> f64 {
        (-x_log2).log2() / (ell as f64).log2()
    }

    pub fn describe(&self) -> String {
        format!(
            "union_log2={} sc_lower={} dmin={} map_lower={}",
            sig17(self.union_bound_log2),
            self.sc_lower,
            self.dmin_upper,
            self.map_lower
        )
    }
}

/// `|a ∩ b| / ℓ^n`.
pub fn overlap_fraction(a: &SelectionSet, b: &SelectionSet) -> Result<f64> {
    if a.n != b.n || a.ell != b.ell {
        return Err(Error::MismatchedLevel(format!("(ℓ = {}, n = {}) vs (ℓ = {}, n = {})", a.ell, a.n, b.ell, b.n)));
    }
    let (mut x, mut y, mut common) = (0, 0, 0u64);
    while x < a.indices.len() && y < b.indices.len() {
        match a.indices[x].cmp(&b.indices[y]) {
            Ordering::Less => x += 1,
            Ordering::Greater => y += 1,
            Ordering::Equal => {
                common += 1;
                x += 1;
                y += 1;
            }
        }
    }
    Ok(common as f64 / a.code_length() as f64)
}

/// Whether some selected row has `Σ_j log_ℓ w_{i_j} ≤ nE_w + √(nV_w)(Q^{-1}(R/I) + ε)`.
pub fn check_min_weight_row(
    sel: &SelectionSet,
    profile: &KernelProfile,
    n: usize,
    rate: f64,
    channel_i: f64,
    epsilon_slack: f64,
) -> Result<bool> {
    if sel.is_empty() {
        return Ok(false);
    }
    if epsilon_slack == f64::INFINITY {
        return Ok(true);
    }
    if !(rate > 0.0 && rate < channel_i) {
        return Err(Error::DomainError(format!("rate {rate} must lie in (0, I = {channel_i})")));
    }
    let ell = profile.ell();
    let threshold = n as f64 * profile.weight_exponent
        + offset(q_inverse(rate / channel_i)? + epsilon_slack, n, profile.weight_second_exponent);
    let log2_ell = (ell as f64).log2();
    Ok(sel.indices.iter().any(|&i| {
        let s = (row_weight(i, &profile.row_weights, n) as f64).log2() / log2_ell;
        s <= threshold + 1e-12 * threshold.abs().max(1.0)
    }))
}
