//! GF(2) linear algebra on small square binary matrices and the kernel
//! invariants that drive polarization: partial distances, exponents, row
//! weights and the derived matrix `H` governing the behavior near `Z = 1`.
//!
//! Rows are stored as bitmasks; bit `k` of row `i` is the entry in column `k`.
//! Exponents use logarithms in base `ℓ`.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numfmt::ser_sig17;

/// Largest supported kernel dimension.
pub const MAX_ELL: usize = 16;
/// Largest dimension for which the column-permutation search is attempted.
pub const MAX_POLARIZING_CHECK_ELL: usize = 8;

/// Square binary matrix of dimension `ℓ ≤ 16`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    ell: usize,
    rows: Vec<u32>,
}

impl BitMatrix {
    pub fn new(ell: usize, rows: Vec<u32>) -> Result<Self> {
        if ell == 0 {
            return Err(Error::Parse("empty matrix".into()));
        }
        if ell > MAX_ELL {
            return Err(Error::DimensionTooLarge { ell, max: MAX_ELL });
        }
        if rows.len() != ell {
            return Err(Error::Parse(format!("expected {ell} rows, got {}", rows.len())));
        }
        let mask = Self::full_mask(ell);
        if rows.iter().any(|r| r & !mask != 0) {
            return Err(Error::Parse("row has bits beyond column ℓ-1".into()));
        }
        Ok(Self { ell, rows })
    }

    pub fn identity(ell: usize) -> Self {
        assert!((1..=MAX_ELL).contains(&ell));
        Self { ell, rows: (0..ell).map(|i| 1u32 << i).collect() }
    }

    /// Builds a matrix from 0/1 entries given row by row.
    pub fn from_entries(entries: &[&[u8]]) -> Result<Self> {
        let ell = entries.len();
        let mut rows = Vec::with_capacity(ell);
        for row in entries {
            if row.len() != ell {
                return Err(Error::Parse("matrix is not square".into()));
            }
            let mut bits = 0u32;
            for (k, &e) in row.iter().enumerate() {
                match e {
                    0 => {}
                    1 => bits |= 1 << k,
                    _ => return Err(Error::Parse(format!("entry {e} is not binary"))),
                }
            }
            rows.push(bits);
        }
        Self::new(ell, rows)
    }

    pub(crate) fn full_mask(ell: usize) -> u32 {
        if ell == 32 {
            u32::MAX
        } else {
            (1u32 << ell) - 1
        }
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn row(&self, i: usize) -> u32 {
        self.rows[i]
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        ((self.rows[i] >> j) & 1) as u8
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![0u32; self.ell];
        for (i, &r) in self.rows.iter().enumerate() {
            for (j, t) in rows.iter_mut().enumerate() {
                *t |= ((r >> j) & 1) << i;
            }
        }
        Self { ell: self.ell, rows }
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.ell, other.ell);
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                (0..self.ell)
                    .filter(|&k| (r >> k) & 1 == 1)
                    .fold(0u32, |acc, k| acc ^ other.rows[k])
            })
            .collect();
        BitMatrix { ell: self.ell, rows }
    }

    /// Row vector times matrix: `v·M`.
    pub fn apply(&self, v: u32) -> u32 {
        (0..self.ell)
            .filter(|&k| (v >> k) & 1 == 1)
            .fold(0u32, |acc, k| acc ^ self.rows[k])
    }

    pub fn rank(&self) -> usize {
        rank_of(&self.rows)
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.ell
    }

    /// Returns a copy whose column `k` is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> BitMatrix {
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                perm.iter()
                    .enumerate()
                    .fold(0u32, |acc, (k, &src)| acc | (((r >> src) & 1) << k))
            })
            .collect();
        BitMatrix { ell: self.ell, rows }
    }

    /// True when every entry strictly below the diagonal is zero.
    pub fn is_upper_triangular(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, &r)| r & ((1u32 << i) - 1) == 0)
    }

    pub fn row_weights(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.count_ones()).collect()
    }

    pub fn invert(&self) -> Result<BitMatrix> {
        gf2_invert(self)
    }

    pub fn partial_distances(&self) -> Result<Vec<u32>> {
        partial_distances(self)
    }

    pub fn to_literal(&self) -> String {
        self.rows
            .iter()
            .map(|&r| (0..self.ell).map(|k| if (r >> k) & 1 == 1 { '1' } else { '0' }).collect::<String>())
            .join(";")
    }
}

/// Rank over GF(2) of a set of row bitmasks.
pub(crate) fn rank_of(rows: &[u32]) -> usize {
    let mut basis = [0u32; 32];
    let mut rank = 0;
    for &r in rows {
        if insert_into_basis(&mut basis, r) {
            rank += 1;
        }
    }
    rank
}

/// XOR basis keyed by leading bit. Returns false if `v` was already spanned.
pub(crate) fn insert_into_basis(basis: &mut [u32; 32], mut v: u32) -> bool {
    while v != 0 {
        let top = 31 - v.leading_zeros() as usize;
        if basis[top] == 0 {
            basis[top] = v;
            return true;
        }
        v ^= basis[top];
    }
    false
}

pub(crate) fn reduce_by_basis(basis: &[u32; 32], mut v: u32) -> u32 {
    while v != 0 {
        let top = 31 - v.leading_zeros() as usize;
        if basis[top] == 0 {
            return v;
        }
        v ^= basis[top];
    }
    0
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMatrix({})", self.to_literal())
    }
}

impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

/// Parses the kernel literal: rows of '0'/'1' separated by ';', e.g. `10;11`.
impl FromStr for BitMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty kernel literal".into()));
        }
        let parts: Vec<&str> = s.split(';').map(str::trim).collect();
        let ell = parts.len();
        if ell > MAX_ELL {
            return Err(Error::DimensionTooLarge { ell, max: MAX_ELL });
        }
        let mut rows = Vec::with_capacity(ell);
        for (i, p) in parts.iter().enumerate() {
            if p.chars().count() != ell {
                return Err(Error::Parse(format!(
                    "row {i} has length {} but the matrix has {ell} rows",
                    p.chars().count()
                )));
            }
            let mut bits = 0u32;
            for (k, c) in p.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => bits |= 1 << k,
                    other => return Err(Error::Parse(format!("unexpected character {other:?} in row {i}"))),
                }
            }
            rows.push(bits);
        }
        BitMatrix::new(ell, rows)
    }
}

impl Serialize for BitMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_literal())
    }
}

/// Inverse over GF(2) by Gauss-Jordan elimination.
pub fn gf2_invert(m: &BitMatrix) -> Result<BitMatrix> {
    let ell = m.ell;
    let mut a = m.rows.clone();
    let mut inv: Vec<u32> = (0..ell).map(|i| 1u32 << i).collect();
    for col in 0..ell {
        let pivot = (col..ell).find(|&r| (a[r] >> col) & 1 == 1).ok_or(Error::SingularMatrix)?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        for r in 0..ell {
            if r != col && (a[r] >> col) & 1 == 1 {
                a[r] ^= a[col];
                inv[r] ^= inv[col];
            }
        }
    }
    Ok(BitMatrix { ell, rows: inv })
}

/// Column permutation that makes `g` upper triangular, if one exists.
/// Brute force over all `ℓ!` permutations.
pub fn upper_triangular_witness(g: &BitMatrix) -> Result<Option<Vec<usize>>> {
    if g.ell > MAX_POLARIZING_CHECK_ELL {
        return Err(Error::DimensionTooLarge { ell: g.ell, max: MAX_POLARIZING_CHECK_ELL });
    }
    Ok((0..g.ell)
        .permutations(g.ell)
        .find(|perm| g.permute_columns(perm).is_upper_triangular()))
}

/// Invertible, and no column permutation is upper triangular.
pub fn is_polarizing(g: &BitMatrix) -> Result<bool> {
    if g.ell > MAX_POLARIZING_CHECK_ELL {
        return Err(Error::DimensionTooLarge { ell: g.ell, max: MAX_POLARIZING_CHECK_ELL });
    }
    if !g.is_invertible() {
        return Ok(false);
    }
    Ok(upper_triangular_witness(g)?.is_none())
}

/// `D_i = min over v in span(g_{i+1}, …, g_{ℓ-1}) of d_H(g_i, v)`, with the
/// span walked in Gray-code order.
pub fn partial_distances(g: &BitMatrix) -> Result<Vec<u32>> {
    if !g.is_invertible() {
        return Err(Error::SingularMatrix);
    }
    let ell = g.ell;
    Ok((0..ell)
        .map(|i| {
            let tail = &g.rows[i + 1..];
            let mut v = 0u32;
            let mut best = g.rows[i].count_ones();
            for step in 1u64..(1u64 << tail.len()) {
                v ^= tail[step.trailing_zeros() as usize];
                best = best.min((g.rows[i] ^ v).count_ones());
            }
            best
        })
        .collect())
}

/// Mean and population variance of `log_ℓ x` over the given values.
pub fn log_moments(values: &[u32], ell: usize) -> (f64, f64) {
    let ln_ell = (ell as f64).ln();
    let logs: Vec<f64> = values.iter().map(|&d| (d as f64).ln() / ln_ell).collect();
    let k = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / k;
    let var = logs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k;
    (mean, var)
}

/// `H = [g_{ℓ-1}^T, …, g_0^T]^{-1}`: the inverse of the matrix whose column
/// `k` is row `ℓ-1-k` of `g`.
pub fn derived_h(g: &BitMatrix) -> Result<BitMatrix> {
    let ell = g.ell;
    let mut rows = vec![0u32; ell];
    for (k, src) in (0..ell).rev().enumerate() {
        let col = g.rows[src];
        for (r, row) in rows.iter_mut().enumerate() {
            *row |= ((col >> r) & 1) << k;
        }
    }
    gf2_invert(&BitMatrix { ell, rows })
}

fn non_increasing(xs: &[u32]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

/// A polarizing kernel with every invariant used by the scaling laws.
#[derive(Debug, Clone, Serialize)]
pub struct KernelProfile {
    pub kernel: BitMatrix,
    pub partial_distances: Vec<u32>,
    #[serde(serialize_with = "ser_sig17")]
    pub exponent: f64,
    #[serde(serialize_with = "ser_sig17")]
    pub second_exponent: f64,
    pub row_weights: Vec<u32>,
    #[serde(serialize_with = "ser_sig17")]
    pub weight_exponent: f64,
    #[serde(serialize_with = "ser_sig17")]
    pub weight_second_exponent: f64,
    pub derived_h: BitMatrix,
    pub h_partial_distances: Vec<u32>,
    #[serde(serialize_with = "ser_sig17")]
    pub h_exponent: f64,
    #[serde(serialize_with = "ser_sig17")]
    pub h_second_exponent: f64,
    /// `D_i(H) ≤ D_{i-1}(H)` in the natural row order of `H`.
    pub h_monotone: bool,
    /// The same condition with the rows of `H` read in reverse order.
    pub h_monotone_reversed: bool,
    #[serde(serialize_with = "ser_sig17")]
    pub c3_constant: f64,
}

impl KernelProfile {
    pub fn ell(&self) -> usize {
        self.kernel.ell()
    }

    /// Mean of `log2 D_B`, i.e. `E(G)·log2 ℓ`.
    pub fn exponent_log2(&self) -> f64 {
        self.exponent * (self.ell() as f64).log2()
    }

    /// Variance of `log2 D_B`, i.e. `V(G)·(log2 ℓ)²`.
    pub fn second_exponent_log2(&self) -> f64 {
        let l = (self.ell() as f64).log2();
        self.second_exponent * l * l
    }

    /// Correlation of `log D_B` and `log w_B` under a uniform branch, if both
    /// have positive variance.
    pub fn distance_weight_correlation(&self) -> Option<f64> {
        let ell = self.ell();
        let d: Vec<f64> = self.partial_distances.iter().map(|&x| (x as f64).ln()).collect();
        let w: Vec<f64> = self.row_weights.iter().map(|&x| (x as f64).ln()).collect();
        let md = d.iter().sum::<f64>() / ell as f64;
        let mw = w.iter().sum::<f64>() / ell as f64;
        let (mut sdd, mut sww, mut sdw) = (0.0, 0.0, 0.0);
        for (a, b) in d.iter().zip(&w) {
            sdd += (a - md) * (a - md);
            sww += (b - mw) * (b - mw);
            sdw += (a - md) * (b - mw);
        }
        if sdd <= 0.0 || sww <= 0.0 {
            return None;
        }
        Some((sdw / (sdd * sww).sqrt()).clamp(-1.0, 1.0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }
}

/// Computes the full profile of a polarizing kernel.
pub fn kernel_profile(g: &BitMatrix) -> Result<KernelProfile> {
    if !is_polarizing(g)? {
        return Err(Error::NotPolarizing);
    }
    let ell = g.ell();
    let partial = partial_distances(g)?;
    let (exponent, second_exponent) = log_moments(&partial, ell);
    let row_weights = g.row_weights();
    let (weight_exponent, weight_second_exponent) = log_moments(&row_weights, ell);
    let h = derived_h(g)?;
    let h_partial = partial_distances(&h)?;
    let (h_exponent, h_second_exponent) = log_moments(&h_partial, ell);
    let h_monotone = non_increasing(&h_partial);
    let reversed: Vec<u32> = h_partial.iter().rev().copied().collect();
    let h_monotone_reversed = non_increasing(&reversed);
    Ok(KernelProfile {
        kernel: g.clone(),
        partial_distances: partial,
        exponent,
        second_exponent,
        row_weights,
        weight_exponent,
        weight_second_exponent,
        derived_h: h,
        h_partial_distances: h_partial,
        h_exponent,
        h_second_exponent,
        h_monotone,
        h_monotone_reversed,
        c3_constant: 2f64.powi(ell as i32),
    })
}

/// The 2×2 kernel `[[1,0],[1,1]]`.
pub fn arikan_kernel() -> BitMatrix {
    "10;11".parse().expect("valid literal")
}

/// All invertible `ℓ×ℓ` matrices, in lexicographic order of row masks.
/// Intended for small `ℓ` (≤ 4).
pub fn all_invertible(ell: usize) -> Vec<BitMatrix> {
    assert!(ell <= 4, "exhaustive enumeration is only meant for tiny kernels");
    let n = 1u32 << ell;
    let mut out = Vec::new();
    let mut rows = vec![0u32; ell];
    fn rec(depth: usize, ell: usize, n: u32, rows: &mut Vec<u32>, out: &mut Vec<BitMatrix>) {
        if depth == ell {
            if rank_of(rows) == ell {
                out.push(BitMatrix { ell, rows: rows.clone() });
            }
            return;
        }
        for r in 1..n {
            rows[depth] = r;
            rec(depth + 1, ell, n, rows, out);
        }
    }
    rec(0, ell, n, &mut rows, &mut out);
    out
}
