//! Exact channel polarization over the binary erasure channel.
//!
//! Over a BEC every synthetic channel is again a BEC, so the Bhattacharyya
//! parameter of branch `j` is a polynomial `p_j(ε)` in the erasure
//! probability of the parent. The polynomial is stored as pattern counts:
//! `a[j][k]` is the number of erasure patterns of weight `k` under which
//! input `u_j` cannot be recovered from the outputs once `u_0..u_{j-1}` are
//! known. That happens exactly when `g_j`, restricted to the unerased
//! coordinates, lies in the span of `g_{j+1}, …, g_{ℓ-1}` restricted the same way.
//!
//! Branch `j` is the `j`-th input bit of the kernel and the `ℓ`-ary tree is
//! walked branch 0 first, so leaf `i` (1-based) has digits equal to the
//! base-`ℓ` expansion of `i - 1`, most significant digit first.

use std::f64::consts::LN_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::{pow_int, ExtendedUnitValue, Mode};
use crate::gf2kernel::{self, insert_into_basis, reduce_by_basis, BitMatrix, KernelProfile};
use crate::numfmt::sig17;
use crate::rng;
use crate::stats::compensated_sum;

/// Default cap on the number of enumerated leaves.
pub const DEFAULT_BUDGET: u64 = 1 << 22;
/// `sample_paths` requires `n · E(G) · log2 ℓ` below this, keeping `λ` finite.
pub const MAX_SAMPLED_LOG2_GROWTH: f64 = 900.0;

/// How the complement exponents of the erasure maps line up with the partial
/// distances of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HBranchMapping {
    /// Branch `j` pairs with `D_j(H)`.
    Direct,
    /// Branch `j` pairs with `D_{ℓ-1-j}(H)`.
    Reversed,
    /// Neither ordering matches.
    Unresolved,
}

/// Exact per-branch erasure maps of a kernel over the BEC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErasurePolynomialSet {
    pub ell: usize,
    /// `counts[j][k]`: erasure patterns of weight `k` leaving branch `j` undetermined.
    pub counts: Vec<Vec<u64>>,
    pub leading_degree: Vec<u32>,
    /// `complement_counts[j][s]`: unerased sets of size `s` that determine branch `j`,
    /// so `1 - p_j(1-δ) = Σ_s c[j][s] δ^s (1-δ)^{ℓ-s}`.
    pub complement_counts: Vec<Vec<u64>>,
    pub complement_leading_degree: Vec<u32>,
    pub h_mapping: HBranchMapping,
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

fn leading(counts: &[Vec<u64>]) -> Vec<u32> {
    counts
        .iter()
        .map(|row| row.iter().position(|&c| c > 0).unwrap_or(row.len()) as u32)
        .collect()
}

/// Polarizing check that scales to `ℓ = 16`: peel rows from the bottom, each
/// of which may introduce at most one column not already claimed.
fn is_polarizing_structural(g: &BitMatrix) -> bool {
    if !g.is_invertible() {
        return false;
    }
    let mut claimed = 0u32;
    for i in (0..g.ell()).rev() {
        let fresh = g.row(i) & !claimed;
        match fresh.count_ones() {
            0 => return true,
            1 => claimed |= fresh,
            _ => return true,
        }
    }
    false
}

impl ErasurePolynomialSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("counts serialize")
    }

    /// Parses and validates an exported set.
    pub fn from_json(s: &str) -> Result<Self> {
        let set: ErasurePolynomialSet = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        let ell = self.ell;
        if ell == 0 || ell > gf2kernel::MAX_ELL {
            return Err(Error::Parse(format!("ℓ = {ell} out of range")));
        }
        let shape_ok = |t: &Vec<Vec<u64>>| t.len() == ell && t.iter().all(|r| r.len() == ell + 1);
        if !shape_ok(&self.counts) || !shape_ok(&self.complement_counts) {
            return Err(Error::Parse("count table has the wrong shape".into()));
        }
        for j in 0..ell {
            for k in 0..=ell {
                let cap = binomial(ell, k);
                if self.counts[j][k] > cap {
                    return Err(Error::Parse(format!("count a[{j}][{k}] exceeds C(ℓ,k)")));
                }
                if self.complement_counts[j][k] != cap - self.counts[j][ell - k] {
                    return Err(Error::Parse(format!("complement count c[{j}][{k}] is inconsistent")));
                }
            }
            if self.counts[j][0] != 0 || self.counts[j][ell] != 1 {
                return Err(Error::Parse(format!("branch {j} violates the boundary counts")));
            }
        }
        if self.leading_degree != leading(&self.counts)
            || self.complement_leading_degree != leading(&self.complement_counts)
        {
            return Err(Error::Parse("leading degrees do not match the counts".into()));
        }
        Ok(())
    }

    /// `p_j(z)` evaluated directly.
    pub fn eval(&self, j: usize, z: f64) -> f64 {
        Self::eval_counts(&self.counts[j], z)
    }

    /// `q_j(δ) = 1 - p_j(1 - δ)` evaluated directly.
    pub fn eval_complement(&self, j: usize, delta: f64) -> f64 {
        Self::eval_counts(&self.complement_counts[j], delta)
    }

    fn eval_counts(counts: &[u64], x: f64) -> f64 {
        let ell = counts.len() - 1;
        let y = 1.0 - x;
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| c as f64 * pow_int(x, k as u32) * pow_int(y, (ell - k) as u32))
            .sum()
    }

    /// `log2` of the polynomial divided by its leading term, for tiny `x = 2^-bits`.
    fn log2_leading_correction(counts: &[u64], lead: usize, bits: f64) -> f64 {
        let ell = counts.len() - 1;
        let x = (-bits * LN_2).exp();
        let l1p = (-x).ln_1p();
        let a_lead = counts[lead] as f64;
        let mut excess = ((ell - lead) as f64 * l1p).exp_m1();
        for (k, &c) in counts.iter().enumerate().skip(lead + 1) {
            if c > 0 {
                excess += c as f64 / a_lead * pow_int(x, (k - lead) as u32) * ((ell - k) as f64 * l1p).exp();
            }
        }
        excess.ln_1p() / LN_2
    }

    /// One polarization step along branch `j`.
    pub fn step(&self, v: ExtendedUnitValue, j: usize) -> ExtendedUnitValue {
        match v.mode() {
            Mode::Linear => {
                let z = v.payload();
                if z <= 0.5 {
                    ExtendedUnitValue::from_prob(self.eval(j, z))
                } else {
                    ExtendedUnitValue::from_complement(self.eval_complement(j, 1.0 - z))
                }
            }
            Mode::NegLog => {
                let lambda = v.payload();
                if lambda.is_infinite() {
                    return ExtendedUnitValue::ZERO;
                }
                let d = self.leading_degree[j] as usize;
                let next = d as f64 * lambda - (self.counts[j][d] as f64).log2()
                    - Self::log2_leading_correction(&self.counts[j], d, lambda);
                ExtendedUnitValue::from_neglog(next)
            }
            Mode::CompLog => {
                let mu = v.payload();
                if mu.is_infinite() {
                    return ExtendedUnitValue::ONE;
                }
                let e = self.complement_leading_degree[j] as usize;
                let next = e as f64 * mu - (self.complement_counts[j][e] as f64).log2()
                    - Self::log2_leading_correction(&self.complement_counts[j], e, mu);
                ExtendedUnitValue::from_complog(next)
            }
        }
    }

    /// The set describing the complement process `1 - Z`: erasure and
    /// non-erasure swap roles.
    pub fn dual(&self) -> ErasurePolynomialSet {
        ErasurePolynomialSet {
            ell: self.ell,
            counts: self.complement_counts.clone(),
            leading_degree: self.complement_leading_degree.clone(),
            complement_counts: self.counts.clone(),
            complement_leading_degree: self.leading_degree.clone(),
            h_mapping: self.h_mapping,
        }
    }

    /// `Z_0, Z_1, …, Z_n` along a digit path.
    pub fn trace(&self, z0: ExtendedUnitValue, digits: &[u8]) -> Vec<ExtendedUnitValue> {
        let mut out = Vec::with_capacity(digits.len() + 1);
        let mut v = z0;
        out.push(v);
        for &b in digits {
            v = self.step(v, b as usize);
            out.push(v);
        }
        out
    }

    /// Exponents `e_j` of the complement maps `1 - Z(W^j) ≈ c·(1 - Z(W))^{e_j}`,
    /// provided they match `D(H)` in a resolved order and are non-increasing
    /// in `j`.
    pub fn complement_exponents(&self) -> Result<Vec<u32>> {
        if self.h_mapping == HBranchMapping::Unresolved {
            return Err(Error::AssumptionUnmet(
                "complement exponents do not match the partial distances of H in either order".into(),
            ));
        }
        let e = &self.complement_leading_degree;
        if e.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::AssumptionUnmet(format!(
                "partial distances of H are not non-increasing along the branches: {e:?}"
            )));
        }
        Ok(e.clone())
    }
}

/// Exact erasure maps of every branch of `g`.
pub fn split_erasure_polynomials(g: &BitMatrix) -> Result<ErasurePolynomialSet> {
    let ell = g.ell();
    if ell > gf2kernel::MAX_ELL {
        return Err(Error::DimensionTooLarge { ell, max: gf2kernel::MAX_ELL });
    }
    let polarizing = if ell <= gf2kernel::MAX_POLARIZING_CHECK_ELL {
        gf2kernel::is_polarizing(g)?
    } else {
        is_polarizing_structural(g)
    };
    if !polarizing {
        return Err(Error::NotPolarizing);
    }
    let full = BitMatrix::full_mask(ell);
    let mut counts = vec![vec![0u64; ell + 1]; ell];
    for erased in 0..=full {
        let kept = full & !erased;
        let weight = erased.count_ones() as usize;
        let mut basis = [0u32; 32];
        for j in (0..ell).rev() {
            let r = g.row(j) & kept;
            if reduce_by_basis(&basis, r) == 0 {
                counts[j][weight] += 1;
            } else {
                insert_into_basis(&mut basis, r);
            }
        }
    }
    let complement_counts: Vec<Vec<u64>> = counts
        .iter()
        .map(|row| (0..=ell).map(|s| binomial(ell, s) - row[ell - s]).collect())
        .collect();
    let leading_degree = leading(&counts);
    let complement_leading_degree = leading(&complement_counts);

    let h = gf2kernel::derived_h(g)?;
    let dh = gf2kernel::partial_distances(&h)?;
    let dh_rev: Vec<u32> = dh.iter().rev().copied().collect();
    let h_mapping = if complement_leading_degree == dh {
        HBranchMapping::Direct
    } else if complement_leading_degree == dh_rev {
        HBranchMapping::Reversed
    } else {
        HBranchMapping::Unresolved
    };
    Ok(ErasurePolynomialSet {
        ell,
        counts,
        leading_degree,
        complement_counts,
        complement_leading_degree,
        h_mapping,
    })
}

fn check_open_unit(z: f64, what: &str) -> Result<()> {
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::DomainError(format!("{what} = {z} is not in (0, 1)")));
    }
    Ok(())
}

/// Applies `z ↦ p_b(z)` for each digit `b` in turn.
pub fn evolve_exact(z0: ExtendedUnitValue, digits: &[u8], polys: &ErasurePolynomialSet) -> Result<ExtendedUnitValue> {
    if z0.is_zero() || z0.is_one() {
        return Err(Error::DomainError("initial value must lie in (0, 1)".into()));
    }
    if let Some(&b) = digits.iter().find(|&&b| b as usize >= polys.ell) {
        return Err(Error::DomainError(format!("digit {b} is not below ℓ = {}", polys.ell)));
    }
    Ok(digits.iter().fold(z0, |v, &b| polys.step(v, b as usize)))
}

/// Where a level's values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfSource {
    Exact,
    MonteCarlo { num_samples: u64, seed: u64 },
    /// Read back from a CSV export; leaf order is not preserved.
    Imported,
}

/// The multiset of Bhattacharyya parameters at one level of the tree.
#[derive(Debug, Clone)]
pub struct LevelCdf {
    pub n: usize,
    pub ell: usize,
    pub source: CdfSource,
    /// Leaf order for exact levels, sample order for Monte Carlo.
    values: Vec<ExtendedUnitValue>,
    sorted_neglogs: Vec<f64>,
    sorted_complogs: Vec<f64>,
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.par_sort_unstable_by(|a, b| a.total_cmp(b));
    xs
}

impl LevelCdf {
    pub fn from_values(n: usize, ell: usize, source: CdfSource, values: Vec<ExtendedUnitValue>) -> Self {
        let sorted_neglogs = sorted(values.par_iter().map(|v| v.neglog()).collect());
        let sorted_complogs = sorted(values.par_iter().map(|v| v.complog()).collect());
        LevelCdf { n, ell, source, values, sorted_neglogs, sorted_complogs }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.source == CdfSource::Exact
    }

    pub fn values(&self) -> &[ExtendedUnitValue] {
        &self.values
    }

    /// `Z` of the channel with 1-based index `i` (exact levels only).
    pub fn value_at_index(&self, i: u64) -> ExtendedUnitValue {
        self.values[(i - 1) as usize]
    }

    /// `λ = -log2 Z` in ascending order.
    pub fn sorted_neglogs(&self) -> &[f64] {
        &self.sorted_neglogs
    }

    /// Number of values with `-log2 Z ≥ lambda`, i.e. `Z ≤ 2^-lambda`.
    pub fn count_neglog_at_least(&self, lambda: f64) -> usize {
        self.len() - self.sorted_neglogs.partition_point(|&x| x < lambda)
    }

    /// Number of values with `-log2(1 - Z) ≥ mu`, i.e. `Z ≥ 1 - 2^-mu`.
    pub fn count_complog_at_least(&self, mu: f64) -> usize {
        self.len() - self.sorted_complogs.partition_point(|&x| x < mu)
    }

    /// `F(n, z)` as `(count, total)`.
    pub fn cdf_at(&self, z: f64) -> (usize, usize) {
        let lambda = if z >= 1.0 { 0.0 } else { -z.log2() };
        (self.count_neglog_at_least(lambda), self.len())
    }

    /// `F(n, 2^{-ℓ^ν})`, compared in the log-log domain.
    pub fn fraction_below_double_exponent(&self, nu: f64) -> f64 {
        let lambda = (nu * (self.ell as f64).log2()).exp2();
        self.count_neglog_at_least(lambda) as f64 / self.len() as f64
    }

    /// Fraction with `Z ≥ 1 - 2^{-ℓ^ν}`.
    pub fn fraction_above_double_exponent(&self, nu: f64) -> f64 {
        let mu = (nu * (self.ell as f64).log2()).exp2();
        self.count_complog_at_least(mu) as f64 / self.len() as f64
    }

    /// Mean of `Z` over the level, with compensated summation.
    pub fn mean_value(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v.value())) / self.len() as f64
    }

    /// CSV with header `lambda`, one ascending `-log2 Z` per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24 + 8);
        out.push_str("lambda\n");
        for x in &self.sorted_neglogs {
            out.push_str(&sig17(*x));
            out.push('\n');
        }
        out
    }

    /// Reads a `lambda` CSV back. The row count must be `ℓ^n`.
    pub fn from_csv(text: &str, ell: usize, n: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?;
        if headers.len() != 1 || &headers[0] != "lambda" {
            return Err(Error::Parse("expected a single `lambda` column".into()));
        }
        let mut lambdas = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = rec.get(0).ok_or_else(|| Error::Parse("empty record".into()))?;
            let lambda: f64 = field.trim().parse().map_err(|_| Error::Parse(format!("bad number {field:?}")))?;
            if lambda.is_nan() || lambda < 0.0 {
                return Err(Error::Parse(format!("lambda must be non-negative, got {field:?}")));
            }
            lambdas.push(lambda);
        }
        let expected = level_size(ell, n)?;
        if lambdas.len() as u128 != expected {
            return Err(Error::Parse(format!("expected {expected} rows, found {}", lambdas.len())));
        }
        let values = lambdas.iter().map(|&l| ExtendedUnitValue::from_neglog(l)).collect();
        let mut cdf = Self::from_values(n, ell, CdfSource::Imported, values);
        // keep the parsed λ bit-exact
        cdf.sorted_neglogs = sorted(lambdas);
        Ok(cdf)
    }
}

pub(crate) fn level_size(ell: usize, n: usize) -> Result<u128> {
    let mut size: u128 = 1;
    for _ in 0..n {
        size = size.checked_mul(ell as u128).ok_or(Error::BudgetExceeded { required: u128::MAX, budget: 0 })?;
        if size > u64::MAX as u128 {
            return Err(Error::BudgetExceeded { required: size, budget: 0 });
        }
    }
    Ok(size)
}

fn collect_leaves(polys: &ErasurePolynomialSet, v: ExtendedUnitValue, depth: usize, out: &mut Vec<ExtendedUnitValue>) {
    if depth == 0 {
        out.push(v);
        return;
    }
    for j in 0..polys.ell {
        collect_leaves(polys, polys.step(v, j), depth - 1, out);
    }
}

/// Every leaf at depth `n`, in channel-index order.
pub fn enumerate_leaves(polys: &ErasurePolynomialSet, eps: f64, n: usize, budget: u64) -> Result<Vec<ExtendedUnitValue>> {
    check_open_unit(eps, "erasure probability")?;
    let size = level_size(polys.ell, n).map_err(|_| Error::BudgetExceeded { required: u128::MAX, budget })?;
    if size > budget as u128 {
        return Err(Error::BudgetExceeded { required: size, budget });
    }
    let root = ExtendedUnitValue::from_prob(eps);
    // split the first few levels into independent subtrees
    let mut frontier = vec![root];
    let mut depth = 0;
    while depth < n && frontier.len() < 256 {
        frontier = frontier.iter().flat_map(|&v| (0..polys.ell).map(move |j| (v, j))).map(|(v, j)| polys.step(v, j)).collect();
        depth += 1;
    }
    let rest = n - depth;
    let chunks: Vec<Vec<ExtendedUnitValue>> = frontier
        .par_iter()
        .map(|&v| {
            let mut out = Vec::with_capacity(polys.ell.pow(rest as u32));
            collect_leaves(polys, v, rest, &mut out);
            out
        })
        .collect();
    Ok(chunks.concat())
}

/// Exact level-`n` distribution for the BEC with erasure probability `eps`.
pub fn enumerate_level(g: &BitMatrix, eps: f64, n: usize) -> Result<LevelCdf> {
    enumerate_level_with_budget(g, eps, n, DEFAULT_BUDGET)
}

pub fn enumerate_level_with_budget(g: &BitMatrix, eps: f64, n: usize, budget: u64) -> Result<LevelCdf> {
    let polys = split_erasure_polynomials(g)?;
    let leaves = enumerate_leaves(&polys, eps, n, budget)?;
    Ok(LevelCdf::from_values(n, g.ell(), CdfSource::Exact, leaves))
}

/// One realization of the polarization process.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub digits: Vec<u8>,
    pub z_final: ExtendedUnitValue,
    /// `Σ log2 D_{B_i}(G)`.
    pub sum_log_d: f64,
    /// `Σ log2 w_{B_i}(G)`.
    pub sum_log_w: f64,
}

/// `count` independent paths of length `n`, path `i` drawn from stream `(seed, i)`.
pub fn sample_paths(g: &BitMatrix, eps: f64, n: usize, count: u64, seed: u64) -> Result<Vec<PathSample>> {
    let profile = gf2kernel::kernel_profile(g)?;
    let polys = split_erasure_polynomials(g)?;
    sample_paths_with(&polys, &profile, eps, n, count, seed)
}

pub fn sample_paths_with(
    polys: &ErasurePolynomialSet,
    profile: &KernelProfile,
    eps: f64,
    n: usize,
    count: u64,
    seed: u64,
) -> Result<Vec<PathSample>> {
    check_open_unit(eps, "erasure probability")?;
    if count == 0 {
        return Err(Error::DomainError("count must be at least 1".into()));
    }
    if n as f64 * profile.exponent_log2() > MAX_SAMPLED_LOG2_GROWTH {
        return Err(Error::DomainError(format!(
            "n = {n} lets -log2 Z outgrow floating range (n·E·log2 ℓ must stay ≤ {MAX_SAMPLED_LOG2_GROWTH})"
        )));
    }
    let ell = profile.ell();
    let log_d: Vec<f64> = profile.partial_distances.iter().map(|&d| (d as f64).log2()).collect();
    let log_w: Vec<f64> = profile.row_weights.iter().map(|&w| (w as f64).log2()).collect();
    let root = ExtendedUnitValue::from_prob(eps);
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let digits: Vec<u8> = (0..n).map(|_| r.random_range(0..ell) as u8).collect();
            let mut v = root;
            let (mut sd, mut sw) = (0.0, 0.0);
            for &b in &digits {
                v = polys.step(v, b as usize);
                sd += log_d[b as usize];
                sw += log_w[b as usize];
            }
            PathSample { digits, z_final: v, sum_log_d: sd, sum_log_w: sw }
        })
        .collect())
}

/// Monte Carlo estimate of the level-`n` distribution.
pub fn sample_level(g: &BitMatrix, eps: f64, n: usize, count: u64, seed: u64) -> Result<LevelCdf> {
    let paths = sample_paths(g, eps, n, count, seed)?;
    let values = paths.into_iter().map(|p| p.z_final).collect();
    Ok(LevelCdf::from_values(n, g.ell(), CdfSource::MonteCarlo { num_samples: count, seed }, values))
}
