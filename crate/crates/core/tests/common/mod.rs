//! Slow, obviously-correct reference computations shared by the integration tests.
#![allow(dead_code)]

use kpolar::gf2kernel::{all_invertible, is_polarizing, BitMatrix};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn entries(g: &BitMatrix) -> Vec<Vec<u8>> {
    (0..g.ell()).map(|i| (0..g.ell()).map(|j| g.get(i, j)).collect()).collect()
}

/// Rank by textbook Gaussian elimination on 0/1 rows.
pub fn dense_rank(rows: &[Vec<u8>]) -> usize {
    let mut m: Vec<Vec<u8>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| m[r][c] == 1) else { continue };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank && m[r][c] == 1 {
                let pivot = m[rank].clone();
                for (a, b) in m[r].iter_mut().zip(&pivot) {
                    *a ^= b;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Minimum distance from row `i` to every combination of the later rows,
/// listing combinations by subset mask.
pub fn brute_partial_distances(g: &BitMatrix) -> Vec<u32> {
    let e = entries(g);
    let ell = g.ell();
    (0..ell)
        .map(|i| {
            let later = &e[i + 1..];
            (0u64..1 << later.len())
                .map(|mask| {
                    let mut v = vec![0u8; ell];
                    for (k, row) in later.iter().enumerate() {
                        if mask >> k & 1 == 1 {
                            for (a, b) in v.iter_mut().zip(row) {
                                *a ^= b;
                            }
                        }
                    }
                    e[i].iter().zip(&v).filter(|(a, b)| a != b).count() as u32
                })
                .min()
                .unwrap()
        })
        .collect()
}

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn random_invertible(ell: usize, r: &mut Xoshiro256PlusPlus) -> BitMatrix {
    loop {
        let rows: Vec<u32> = (0..ell).map(|_| r.random_range(0..1u32 << ell)).collect();
        let g = BitMatrix::new(ell, rows).unwrap();
        if g.is_invertible() {
            return g;
        }
    }
}

pub fn random_polarizing(ell: usize, r: &mut Xoshiro256PlusPlus) -> BitMatrix {
    loop {
        let g = random_invertible(ell, r);
        if is_polarizing(&g).unwrap() {
            return g;
        }
    }
}

/// Every polarizing ℓ = 2, 3 kernel plus 20 random polarizing ℓ = 4 kernels.
pub fn tested_kernels() -> Vec<BitMatrix> {
    let mut out: Vec<BitMatrix> = (2..=3)
        .flat_map(all_invertible)
        .filter(|g| is_polarizing(g).unwrap())
        .collect();
    let mut r = rng(0x5eed);
    out.extend((0..20).map(|_| random_polarizing(4, &mut r)));
    out
}

/// `G^{⊗n}` with row `r` equal to `g_{r_1} ⊗ … ⊗ g_{r_n}` (digits of `r`, most significant first).
pub fn kronecker_power(g: &BitMatrix, n: usize) -> Vec<Vec<u8>> {
    let e = entries(g);
    let mut m = vec![vec![1u8]];
    for _ in 0..n {
        let size = m.len() * e.len();
        let mut next = vec![vec![0u8; size]; size];
        for (a, ra) in m.iter().enumerate() {
            for (b, rb) in e.iter().enumerate() {
                for (c, &x) in ra.iter().enumerate() {
                    for (d, &y) in rb.iter().enumerate() {
                        next[a * e.len() + b][c * e.len() + d] = x & y;
                    }
                }
            }
        }
        m = next;
    }
    m
}

/// Level `n` of the plain floating-point recursion, leaf order.
pub fn plain_level(counts: &[Vec<u64>], eps: f64, n: usize) -> Vec<f64> {
    let ell = counts.len();
    let eval = |j: usize, z: f64| -> f64 {
        (0..=ell).map(|k| counts[j][k] as f64 * z.powi(k as i32) * (1.0 - z).powi((ell - k) as i32)).sum()
    };
    let mut zs = vec![eps];
    for _ in 0..n {
        zs = zs.iter().flat_map(|&z| (0..ell).map(move |j| (j, z))).map(|(j, z)| eval(j, z)).collect();
    }
    zs
}
