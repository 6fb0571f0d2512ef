//! Polar encoding for any kernel, and exact successive-cancellation and MAP
//! decoding over the binary erasure channel.
//!
//! Encoding follows the channel tree: the input vector is split into groups
//! of `ℓ` consecutive bits (same leading digits, last digit varying), each
//! group is multiplied by `G`, and output `j` of group `p` becomes input `p`
//! of the `j`-th copy of the length-`ℓ^{n-1}` code. The codeword is the
//! concatenation of the copies. Equivalently, the unit vector at channel `i`
//! encodes to row `digit_reverse(i)` of the Kronecker power `G^{⊗n}`.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::construct::SelectionSet;
use crate::error::{Error, Result};
use crate::gf2kernel::{BitMatrix, KernelProfile, MAX_ELL};
use crate::numfmt::{ser_sig17, sig17};
use crate::rng::{self, StreamRng};
use crate::stats::{wilson_interval, Z_95};

/// A received BEC symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    Zero,
    One,
    Erased,
}

impl Symbol {
    pub fn bit(bit: u8) -> Symbol {
        if bit & 1 == 1 {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }
}

/// Channel output for one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErasureWord {
    pub symbols: Vec<Symbol>,
}

impl ErasureWord {
    pub fn erasures(&self) -> usize {
        self.symbols.iter().filter(|&&s| s == Symbol::Erased).count()
    }
}

/// A polar code: kernel, depth and information set.
#[derive(Debug)]
pub struct PolarCode {
    pub profile: KernelProfile,
    pub n: usize,
    pub block_length: usize,
    /// `is_info[i - 1]` for channel index `i`.
    is_info: Vec<bool>,
    info_indices: Vec<u64>,
    /// Column `j` of `G` as a mask over rows.
    columns: Vec<u32>,
    info_rows: OnceLock<Vec<Vec<u64>>>,
}

/// Largest block length the codec accepts.
pub const MAX_BLOCK_LENGTH: usize = 1 << 20;

impl PolarCode {
    pub fn new(profile: KernelProfile, n: usize, info_indices: &[u64]) -> Result<Self> {
        let ell = profile.ell();
        let block_length = (ell as u64)
            .checked_pow(n as u32)
            .filter(|&len| len <= MAX_BLOCK_LENGTH as u64)
            .ok_or(Error::BudgetExceeded { required: (ell as u128).pow(n as u32), budget: MAX_BLOCK_LENGTH as u64 })?
            as usize;
        let mut is_info = vec![false; block_length];
        for &i in info_indices {
            if i == 0 || i > block_length as u64 {
                return Err(Error::IndexOutOfRange { index: i, max: block_length as u64 });
            }
            is_info[(i - 1) as usize] = true;
        }
        let info_indices: Vec<u64> = (1..=block_length as u64).filter(|&i| is_info[(i - 1) as usize]).collect();
        let g = &profile.kernel;
        let columns = (0..ell).map(|j| (0..ell).fold(0u32, |acc, t| acc | ((g.get(t, j) as u32) << t))).collect();
        Ok(Self { profile, n, block_length, is_info, info_indices, columns, info_rows: OnceLock::new() })
    }

    pub fn from_selection(profile: KernelProfile, sel: &SelectionSet) -> Result<Self> {
        if sel.ell != profile.ell() {
            return Err(Error::MismatchedLevel(format!("selection has ℓ = {}, kernel has ℓ = {}", sel.ell, profile.ell())));
        }
        Self::new(profile, sel.n, &sel.indices)
    }

    pub fn kernel(&self) -> &BitMatrix {
        &self.profile.kernel
    }

    pub fn ell(&self) -> usize {
        self.profile.ell()
    }

    pub fn dimension(&self) -> usize {
        self.info_indices.len()
    }

    pub fn info_indices(&self) -> &[u64] {
        &self.info_indices
    }

    pub fn is_info(&self, i: u64) -> bool {
        self.is_info[(i - 1) as usize]
    }

    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.block_length as f64
    }

    /// Codewords of the unit vectors at the information indices, as bitsets.
    fn info_rows(&self) -> &[Vec<u64>] {
        self.info_rows.get_or_init(|| {
            self.info_indices
                .par_iter()
                .map(|&i| {
                    let mut u = vec![0u8; self.block_length];
                    u[(i - 1) as usize] = 1;
                    pack(&encode_raw(&u, self.kernel(), self.n))
                })
                .collect()
        })
    }
}

fn pack(bits: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; bits.len().div_ceil(64)];
    for (k, &b) in bits.iter().enumerate() {
        out[k / 64] |= ((b & 1) as u64) << (k % 64);
    }
    out
}

/// `u · G^{⊗n}` under the channel-tree index convention, no frozen-bit checks.
pub fn encode_raw(u: &[u8], g: &BitMatrix, n: usize) -> Vec<u8> {
    let ell = g.ell();
    let mut cur: Vec<u8> = u.iter().map(|&b| b & 1).collect();
    let mut next = vec![0u8; cur.len()];
    let mut block = cur.len();
    for _ in 0..n {
        let inner = block / ell;
        for (src, dst) in cur.chunks(block).zip(next.chunks_mut(block)) {
            for p in 0..inner {
                // v_j = Σ_t u_t G[t][j]
                let mut v = 0u32;
                for t in 0..ell {
                    if src[p * ell + t] == 1 {
                        v ^= g.row(t);
                    }
                }
                for j in 0..ell {
                    dst[j * inner + p] = (v >> j & 1) as u8;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        block = inner;
    }
    cur
}

/// Encodes `u` (indexed by channel index minus one); frozen positions must be zero.
pub fn encode(u: &[u8], code: &PolarCode) -> Result<Vec<u8>> {
    if u.len() != code.block_length {
        return Err(Error::DomainError(format!("input has length {}, block length is {}", u.len(), code.block_length)));
    }
    if let Some(pos) = u.iter().enumerate().position(|(k, &b)| b != 0 && !code.is_info[k]) {
        return Err(Error::FrozenBitNonzero { index: pos as u64 + 1 });
    }
    Ok(encode_raw(u, code.kernel(), code.n))
}

fn erase_with(x: &[u8], eps: f64, r: &mut StreamRng) -> ErasureWord {
    let symbols = x
        .iter()
        .map(|&b| if r.random::<f64>() < eps { Symbol::Erased } else { Symbol::bit(b) })
        .collect();
    ErasureWord { symbols }
}

/// Erases each symbol independently with probability `eps`, using stream `(seed, 0)`.
pub fn transmit_bec(x: &[u8], eps: f64, seed: u64) -> ErasureWord {
    assert!((0.0..=1.0).contains(&eps), "erasure probability {eps} outside [0, 1]");
    erase_with(x, eps, &mut rng::stream(seed, 0))
}

/// Outcome of SC decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScOutcome {
    Decoded(Vec<u8>),
    /// Channel indices of information bits that could not be determined.
    Undetermined(Vec<u64>),
}

/// SC decoder state. Node `q` at level `L` covers `y[q ℓ^L .. (q+1) ℓ^L]`
/// and its children are nodes `q ℓ + j` at level `L - 1`; level 0 is `y`.
struct ScState<'a> {
    columns: &'a [u32],
    y: &'a [Symbol],
    /// Per level `L ≥ 1`: child estimates, `ℓ` per node.
    group: Vec<Vec<Symbol>>,
    /// Per level `L ≥ 1`: bits `u_0 … u_{b-1}` of the current group of each node.
    decided: Vec<Vec<u32>>,
    b: Vec<Vec<u8>>,
}

impl<'a> ScState<'a> {
    fn new(columns: &'a [u32], y: &'a [Symbol], n: usize) -> Self {
        let ell = columns.len();
        let mut group = vec![Vec::new()];
        let mut decided = vec![Vec::new()];
        let mut b = vec![Vec::new()];
        let mut nodes = y.len();
        for _ in 0..n {
            nodes /= ell;
            group.push(vec![Symbol::Erased; nodes * ell]);
            decided.push(vec![0; nodes]);
            b.push(vec![0; nodes]);
        }
        ScState { columns, y, group, decided, b }
    }

    /// Estimate of the next input bit of node `q` at `level` given every earlier one.
    fn next_symbol(&mut self, level: usize, q: usize) -> Symbol {
        if level == 0 {
            return self.y[q];
        }
        let ell = self.columns.len();
        let b = self.b[level][q] as usize;
        if b == 0 {
            for j in 0..ell {
                let s = self.next_symbol(level - 1, q * ell + j);
                self.group[level][q * ell + j] = s;
            }
        }
        let decided = self.decided[level][q];
        let unknown_mask = !((1u32 << b) - 1);
        // basis of (coefficients over u_b…u_{ℓ-1}, right-hand side) keyed by leading bit
        let mut basis = [(0u32, 0u8); MAX_ELL];
        for (j, &s) in self.group[level][q * ell..(q + 1) * ell].iter().enumerate() {
            let rhs = match s {
                Symbol::Erased => continue,
                Symbol::Zero => 0,
                Symbol::One => 1,
            } ^ (decided & self.columns[j]).count_ones() as u8 & 1;
            let (mut c, mut r) = (self.columns[j] & unknown_mask, rhs);
            while c != 0 {
                let lead = 31 - c.leading_zeros() as usize;
                if basis[lead].0 == 0 {
                    basis[lead] = (c, r);
                    break;
                }
                c ^= basis[lead].0;
                r ^= basis[lead].1;
            }
        }
        let (mut target, mut value) = (1u32 << b, 0u8);
        while target != 0 {
            let lead = 31 - target.leading_zeros() as usize;
            if basis[lead].0 == 0 {
                return Symbol::Erased;
            }
            target ^= basis[lead].0;
            value ^= basis[lead].1;
        }
        Symbol::bit(value)
    }

    fn commit(&mut self, level: usize, q: usize, bit: u8) {
        if level == 0 {
            return;
        }
        let ell = self.columns.len();
        self.decided[level][q] |= ((bit & 1) as u32) << self.b[level][q];
        self.b[level][q] += 1;
        if self.b[level][q] as usize == ell {
            let decided = self.decided[level][q];
            for j in 0..ell {
                self.commit(level - 1, q * ell + j, (decided & self.columns[j]).count_ones() as u8 & 1);
            }
            self.decided[level][q] = 0;
            self.b[level][q] = 0;
        }
    }
}

/// Successive cancellation in channel-index order; frozen bits are zero and
/// decoding stops at the first undetermined information bit.
pub fn sc_decode_bec(y: &ErasureWord, code: &PolarCode) -> ScOutcome {
    assert_eq!(y.symbols.len(), code.block_length, "received word has the wrong length");
    let mut state = ScState::new(&code.columns, &y.symbols, code.n);
    let mut u = vec![0u8; code.block_length];
    for pos in 0..code.block_length {
        let s = state.next_symbol(code.n, 0);
        if !code.is_info[pos] {
            state.commit(code.n, 0, 0);
            continue;
        }
        let bit = match s {
            Symbol::Erased => return ScOutcome::Undetermined(vec![pos as u64 + 1]),
            Symbol::Zero => 0,
            Symbol::One => 1,
        };
        u[pos] = bit;
        state.commit(code.n, 0, bit);
    }
    ScOutcome::Decoded(u)
}

/// Outcome of MAP decoding over the BEC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapOutcome {
    Unique,
    Ambiguous,
}

/// MAP fails exactly when some nonzero codeword vanishes on every unerased
/// position, i.e. when the information rows restricted to the unerased
/// positions are linearly dependent.
pub fn map_decode_bec(y: &ErasureWord, code: &PolarCode) -> MapOutcome {
    assert_eq!(y.symbols.len(), code.block_length, "received word has the wrong length");
    let k = code.dimension();
    let kept_count = y.symbols.len() - y.erasures();
    if kept_count < k {
        return MapOutcome::Ambiguous;
    }
    let kept = pack(&y.symbols.iter().map(|&s| (s != Symbol::Erased) as u8).collect::<Vec<_>>());
    let mut pivots: Vec<(usize, Vec<u64>)> = Vec::with_capacity(k);
    for row in code.info_rows() {
        let mut r: Vec<u64> = row.iter().zip(&kept).map(|(a, b)| a & b).collect();
        for (p, basis_row) in &pivots {
            if r[p / 64] >> (p % 64) & 1 == 1 {
                for (a, b) in r.iter_mut().zip(basis_row) {
                    *a ^= b;
                }
            }
        }
        match r.iter().position(|&w| w != 0) {
            None => return MapOutcome::Ambiguous,
            Some(w) => pivots.push((w * 64 + r[w].trailing_zeros() as usize, r)),
        }
    }
    MapOutcome::Unique
}

/// Block error counts for SC and MAP decoding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    #[serde(serialize_with = "ser_sig17")]
    pub eps: f64,
    pub n: usize,
    #[serde(serialize_with = "ser_sig17")]
    pub rate: f64,
    pub trials: u64,
    pub sc_errors: u64,
    pub map_errors: u64,
    /// Trials where MAP failed but SC succeeded; always zero over the BEC.
    pub dominance_violations: u64,
}

impl SimulationReport {
    pub fn sc_rate(&self) -> f64 {
        self.sc_errors as f64 / self.trials as f64
    }

    pub fn map_rate(&self) -> f64 {
        self.map_errors as f64 / self.trials as f64
    }

    pub fn sc_wilson(&self) -> (f64, f64) {
        wilson_interval(self.sc_errors, self.trials, Z_95)
    }

    pub fn map_wilson(&self) -> (f64, f64) {
        wilson_interval(self.map_errors, self.trials, Z_95)
    }

    pub const CSV_HEADER: &'static str =
        "eps,n,rate,trials,sc_errors,map_errors,sc_rate,map_rate,sc_wilson_lo,sc_wilson_hi,map_wilson_lo,map_wilson_hi";

    pub fn csv_row(&self) -> String {
        let (slo, shi) = self.sc_wilson();
        let (mlo, mhi) = self.map_wilson();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            sig17(self.eps),
            self.n,
            sig17(self.rate),
            self.trials,
            self.sc_errors,
            self.map_errors,
            sig17(self.sc_rate()),
            sig17(self.map_rate()),
            sig17(slo),
            sig17(shi),
            sig17(mlo),
            sig17(mhi)
        )
    }
}

/// Per-trial result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub sc_error: bool,
    pub map_error: bool,
}

/// Trial `index` under `seed`: random information bits, encode, erase, decode both ways.
pub fn run_trial(code: &PolarCode, eps: f64, seed: u64, index: u64) -> TrialOutcome {
    let mut r = rng::stream(seed, index);
    let mut u = vec![0u8; code.block_length];
    for &i in code.info_indices() {
        u[(i - 1) as usize] = r.random::<bool>() as u8;
    }
    let x = encode_raw(&u, code.kernel(), code.n);
    let y = erase_with(&x, eps, &mut r);
    let sc_error = match sc_decode_bec(&y, code) {
        ScOutcome::Decoded(v) => v != u,
        ScOutcome::Undetermined(_) => true,
    };
    let map_error = map_decode_bec(&y, code) == MapOutcome::Ambiguous;
    TrialOutcome { sc_error, map_error }
}

/// `trials` independent blocks; trial `k` uses stream `(seed, k)`.
pub fn simulate(code: &PolarCode, eps: f64, trials: u64, seed: u64) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::DomainError("at least one trial is required".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::DomainError(format!("erasure probability {eps} outside [0, 1]")));
    }
    code.info_rows();
    let (sc_errors, map_errors, dominance_violations) = (0..trials)
        .into_par_iter()
        .map(|k| {
            let o = run_trial(code, eps, seed, k);
            (o.sc_error as u64, o.map_error as u64, (o.map_error && !o.sc_error) as u64)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(SimulationReport {
        eps,
        n: code.n,
        rate: code.rate(),
        trials,
        sc_errors,
        map_errors,
        dominance_violations,
    })
}
