//! Polar-transform arithmetic and Q1 code bookkeeping.
//!
//! Vectors are plain `u8` slices holding 0/1 entries. Positions are 0-based
//! here; anything printed for users is shifted to 1-based.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Logical state kind of a Q1 code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// Transversal two-qubit measurement used at a recursion level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairBasis {
    ZZ,
    XX,
}

impl PairBasis {
    pub fn from_bit(b: u8) -> Self {
        if b == 1 {
            PairBasis::ZZ
        } else {
            PairBasis::XX
        }
    }
}

/// A length `2^n` polar code encoding one logical qubit at position `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Q1Code {
    n: usize,
    i: usize,
    basis: Basis,
    i_n: usize,
    bits: Vec<u8>,
}

impl Q1Code {
    pub fn new(n: usize, i: usize, basis: Basis) -> Result<Self> {
        if n > 30 {
            return invalid(format!("recursion depth {n} too large"));
        }
        let len = 1usize << n;
        if i < 1 || i > len {
            return invalid(format!("information position {i} outside 1..={len}"));
        }
        let i_n = match basis {
            Basis::Z => i,
            Basis::X => i - 1,
        };
        let bits = if i_n == 0 {
            vec![0; n]
        } else {
            recursion_bits(i_n, n)?
        };
        Ok(Q1Code {
            n,
            i,
            basis,
            i_n,
            bits,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Code length `N = 2^n`.
    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn i_n(&self) -> usize {
        self.i_n
    }

    /// `b_1..b_n`, stored at indices `0..n`.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Z-frozen length `i(k)` after level `k` (`i(0) = 1` unless `i_n = 0`).
    pub fn frozen_len(&self, k: usize) -> usize {
        assert!(k <= self.n);
        if self.i_n == 0 {
            0
        } else {
            1 + ((self.i_n - 1) & ((1usize << k) - 1))
        }
    }

    pub fn level_basis(&self, k: usize) -> PairBasis {
        PairBasis::from_bit(self.bits[k - 1])
    }

    /// Basis in which data qubits are initialised at level zero.
    pub fn data_init_basis(&self) -> Basis {
        if self.i_n == 0 {
            Basis::X
        } else {
            Basis::Z
        }
    }
}

fn check_pow2(len: usize) -> Result<()> {
    if len == 0 || !len.is_power_of_two() {
        return invalid(format!("length {len} is not a power of two"));
    }
    Ok(())
}

/// In-place `x <- P x` with `P = [[1,1],[0,1]]^{⊗n}`.
pub fn polar_transform_in_place(x: &mut [u8]) {
    let len = x.len();
    let mut h = 1;
    while h < len {
        for block in x.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        h *= 2;
    }
}

/// In-place `x <- P^T x`.
pub fn polar_transform_transpose_in_place(x: &mut [u8]) {
    let len = x.len();
    let mut h = 1;
    while h < len {
        for block in x.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter().zip(hi.iter_mut()) {
                *b ^= *a;
            }
        }
        h *= 2;
    }
}

pub fn polar_transform(u: &[u8]) -> Result<Vec<u8>> {
    check_pow2(u.len())?;
    let mut x = u.to_vec();
    polar_transform_in_place(&mut x);
    Ok(x)
}

pub fn polar_transform_transpose(u: &[u8]) -> Result<Vec<u8>> {
    check_pow2(u.len())?;
    let mut x = u.to_vec();
    polar_transform_transpose_in_place(&mut x);
    Ok(x)
}

/// Bits `b_1..b_n` of `i_n - 1`, least significant first.
pub fn recursion_bits(i_n: usize, n: usize) -> Result<Vec<u8>> {
    if n > 30 || i_n < 1 || i_n > (1usize << n) {
        return invalid(format!("i_n = {i_n} out of range for n = {n}"));
    }
    Ok((0..n).map(|k| (((i_n - 1) >> k) & 1) as u8).collect())
}

/// Lowest level `k` of `B_{i->j}` from which all levels up to `j` share the
/// basis of level `j`; `None` for single-level blocks.
pub fn k_min(i: usize, j: usize, bits: &[u8]) -> Result<Option<usize>> {
    if j <= i || j > bits.len() {
        return invalid(format!("k_min needs i < j <= n, got i = {i}, j = {j}"));
    }
    if j == i + 1 {
        return Ok(None);
    }
    let bj = bits[j - 1];
    let mut k = j - 1;
    while k > i + 1 && bits[k - 1] == bj {
        k -= 1;
    }
    Ok(Some(k))
}

/// Z⊗Z-level check: `P(flips)` restricted to the first `i_prev` entries.
pub fn detection_syndrome(flips: &[u8], i_prev: usize) -> Result<Vec<u8>> {
    if i_prev > flips.len() {
        return invalid("i_prev exceeds flip vector length");
    }
    let mut s = polar_transform(flips)?;
    s.truncate(i_prev);
    Ok(s)
}

/// X⊗X-level check: `P^T(flips)` restricted to the X-frozen entries
/// `i_prev..len`.
pub fn detection_syndrome_xx(flips: &[u8], i_prev: usize) -> Result<Vec<u8>> {
    if i_prev > flips.len() {
        return invalid("i_prev exceeds flip vector length");
    }
    let s = polar_transform_transpose(flips)?;
    Ok(s[i_prev..].to_vec())
}

/// True iff the level check fires. Works in place on a scratch copy.
pub(crate) fn syndrome_nonzero(basis: PairBasis, flips: &mut [u8], i_prev: usize) -> bool {
    match basis {
        PairBasis::ZZ => {
            polar_transform_in_place(flips);
            flips[..i_prev].iter().any(|&b| b != 0)
        }
        PairBasis::XX => {
            polar_transform_transpose_in_place(flips);
            flips[i_prev..].iter().any(|&b| b != 0)
        }
    }
}

/// `C_N = N (1 + 2 log2 N)`.
pub fn component_count(len: usize) -> Result<usize> {
    check_pow2(len)?;
    Ok(len * (1 + 2 * len.trailing_zeros() as usize))
}
