//! Brute-force oracles shared by the integration and acceptance tests.
//! Nothing here calls into the library's transform or decoder code.

#![allow(dead_code)]

/// `x_c = XOR of u_r over r ⊇ c`, written out bit by bit.
pub fn arikan_encode(u: u32, n: usize) -> u32 {
    let len = 1u32 << n;
    let mut x = 0;
    for c in 0..len {
        let mut bit = 0;
        for r in 0..len {
            if r & c == c {
                bit ^= (u >> r) & 1;
            }
        }
        x |= bit << c;
    }
    x
}

/// Exact genie-aided SC bit error probability of every position on a BSC(q).
///
/// With the all-zero codeword sent and noise `e = G w`, the decision on `u_i`
/// compares the likelihoods of the two prefixes `w_{≤i}` and `w_{≤i} ⊕ 1_i`,
/// each a sum over the free suffix. Both are kept as integer weight
/// distributions, so exact ties are recognised exactly and count as half an
/// error.
pub fn sc_bit_error_exhaustive(n: usize, q: f64) -> Vec<f64> {
    let len = 1usize << n;
    assert!(n <= 4, "2^N enumeration");
    let weight: Vec<usize> = (0..1u32 << len)
        .map(|w| arikan_encode(w, n).count_ones() as usize)
        .collect();
    let prob = |dist: &[u64]| -> f64 {
        dist.iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * q.powi(k as i32) * (1.0 - q).powi((len - k) as i32))
            .sum()
    };
    (0..len)
        .map(|i| {
            let prefixes = 1usize << (i + 1);
            let mut dist = vec![vec![0u64; len + 1]; prefixes];
            for (w, &k) in weight.iter().enumerate() {
                dist[w & (prefixes - 1)][k] += 1;
            }
            let mut err = 0.0;
            for s in 0..prefixes {
                let flipped = s ^ (1 << i);
                let (mine, other) = (prob(&dist[s]), prob(&dist[flipped]));
                if dist[s] == dist[flipped] {
                    err += 0.5 * mine;
                } else if other > mine {
                    err += mine;
                }
            }
            err
        })
        .collect()
}

/// Support of row `r` of `P = F^{⊗n}`, `P[r][c] = [r ⊆ c]`, as a bitmask.
pub fn p_row(r: usize, n: usize) -> u32 {
    (0..1usize << n).filter(|&c| c & r == r).fold(0, |m, c| m | 1 << c)
}

/// Support of column `c` of `P`.
pub fn p_col(c: usize, n: usize) -> u32 {
    (0..1usize << n).filter(|&r| c & r == r).fold(0, |m, r| m | 1 << r)
}

/// Stabilizer group of a Q1 code state: Z-type rows `l < i_n` and X-type
/// columns `l ≥ i_n` of `P`, expanded to every group element.
pub struct StabilizerGroup {
    pub x: Vec<u32>,
    pub z: Vec<u32>,
}

fn span(gens: &[u32]) -> Vec<u32> {
    let mut out = vec![0u32];
    for &g in gens {
        let more: Vec<u32> = out.iter().map(|s| s ^ g).collect();
        out.extend(more);
    }
    out
}

impl StabilizerGroup {
    pub fn new(n: usize, i_n: usize) -> Self {
        let len = 1usize << n;
        let z: Vec<u32> = (0..i_n).map(|l| p_row(l, n)).collect();
        let x: Vec<u32> = (i_n..len).map(|l| p_col(l, n)).collect();
        StabilizerGroup {
            x: span(&x),
            z: span(&z),
        }
    }

    /// Smallest X weight and smallest Z weight over the coset of `(x, z)`,
    /// each minimised on its own.
    pub fn min_css_weights(&self, x: u32, z: u32) -> (u32, u32) {
        let min_x = self.x.iter().map(|s| (x ^ s).count_ones()).min().unwrap();
        let min_z = self.z.iter().map(|s| (z ^ s).count_ones()).min().unwrap();
        (min_x, min_z)
    }

    /// Fewest qubits carrying a non-identity Pauli over the coset of `(x, z)`.
    pub fn min_coset_weight(&self, x: u32, z: u32) -> u32 {
        let (min_x, min_z) = self.min_css_weights(x, z);
        let lower = min_x.max(min_z);
        if lower == min_x + min_z {
            return lower;
        }
        let mut best = min_x + min_z;
        for sx in &self.x {
            let xs = x ^ sx;
            if xs.count_ones() >= best {
                continue;
            }
            for sz in &self.z {
                best = best.min((xs | (z ^ sz)).count_ones());
                if best == lower {
                    return best;
                }
            }
        }
        best
    }
}
