//! Logical error rate under Steane error correction.
//!
//! Each syndrome decoder is a successive-cancellation decoder for the
//! classical polar code on a binary symmetric channel. The error probability
//! of the logical position is estimated by Monte-Carlo density evolution with
//! genie prior decisions, and bracketed by tracking the synthetic channel as
//! a finite mixture of BSCs that is degraded (upper bound) or upgraded (lower
//! bound) onto a fixed grid after every polar transform.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::noise_model::{stream_rng, NoiseParams};
use crate::polar_core::Q1Code;

/// Smallest accepted Monte-Carlo sample count for density evolution.
pub const MIN_DE_SAMPLES: usize = 10_000;
/// Grid resolution of [`quantized_bracket`] used by [`logical_error_rate`].
pub const DEFAULT_BINS: usize = 1500;
/// Monte-Carlo estimates with fewer error events fall back to the bracket.
pub const MIN_DE_EVENTS: f64 = 100.0;

const SHARD: usize = 4096;
const TIE_TOL: f64 = 1e-12;
// ln of the smallest crossover tracked on the grid; anything below is lumped
const LN_FLOOR: f64 = -700.0;

fn check_q(name: &str, q: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&q) {
        return invalid(format!("{name} = {q} outside [0, 1/2]"));
    }
    Ok(())
}

fn check_index(n: usize, index: usize) -> Result<()> {
    if n > 24 {
        return invalid(format!("n = {n} too large"));
    }
    if index >= 1 << n {
        return invalid(format!("position {index} outside a length-{} code", 1usize << n));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderInput {
    /// Bit-flip probability seen by the X-error decoder.
    pub q_x: f64,
    /// Bit-flip probability seen by the Z-error decoder.
    pub q_z: f64,
}

impl DecoderInput {
    pub fn new(q_x: f64, q_z: f64) -> Result<Self> {
        check_q("q_x", q_x)?;
        check_q("q_z", q_z)?;
        Ok(DecoderInput { q_x, q_z })
    }
}

/// How preparation errors and the extraction circuit combine into the
/// decoder's per-qubit flip probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mapping {
    /// Ancilla preparation error, one transversal CNOT fault (8p/15) and one
    /// readout fault, combined as independent events.
    #[default]
    IndependentOr,
    /// Also counts what the data picked up in the preceding half-round: the
    /// other ancilla's errors copied through its transversal CNOT, and that
    /// CNOT's own fault.
    SteaneRound,
    /// The preparation error alone.
    PrepOnly,
}

impl Mapping {
    pub const ALL: [Mapping; 3] = [Mapping::IndependentOr, Mapping::SteaneRound, Mapping::PrepOnly];

    pub fn name(&self) -> &'static str {
        match self {
            Mapping::IndependentOr => "independent-or",
            Mapping::SteaneRound => "steane-round",
            Mapping::PrepOnly => "prep-only",
        }
    }

    pub fn apply(&self, params: &NoiseParams, p_prep: f64) -> f64 {
        let p = params.p();
        let cnot = 8.0 * p / 15.0;
        let q = match self {
            Mapping::IndependentOr => 1.0 - (1.0 - p_prep) * (1.0 - cnot) * (1.0 - p),
            Mapping::SteaneRound => {
                1.0 - (1.0 - p_prep).powi(2) * (1.0 - cnot).powi(2) * (1.0 - p)
            }
            Mapping::PrepOnly => p_prep,
        };
        q.min(0.5)
    }
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mapping::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mapping {s:?}")))
    }
}

pub fn steane_input_probs(
    params: &NoiseParams,
    p_x_prep: f64,
    p_z_prep: f64,
    mapping: Mapping,
) -> Result<DecoderInput> {
    check_q("p_x_prep", p_x_prep)?;
    check_q("p_z_prep", p_z_prep)?;
    DecoderInput::new(mapping.apply(params, p_x_prep), mapping.apply(params, p_z_prep))
}

/// Check-node combination of two LLRs, written so that results are exact
/// negatives under sign flips and exactly zero when either input is zero.
fn boxplus(a: f64, b: f64) -> f64 {
    let (x, y) = (a.abs(), b.abs());
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    let mag = (lo + (-(hi + lo)).exp().ln_1p() - (-(hi - lo)).exp().ln_1p()).max(0.0);
    if (a < 0.0) != (b < 0.0) {
        -mag
    } else {
        mag
    }
}

/// Variable-node combination; cancellation below rounding noise is a tie.
fn llr_sum(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.abs() <= TIE_TOL * a.abs().max(b.abs()) {
        0.0
    } else {
        s
    }
}

/// Genie-aided SC LLR of `u[index]` computed in place from channel LLRs.
fn target_llr(buf: &mut [f64], mut index: usize) -> f64 {
    let mut len = buf.len();
    while len > 1 {
        let half = len / 2;
        let upper = index < half;
        if !upper {
            index -= half;
        }
        for j in 0..half {
            buf[j] = if upper {
                boxplus(buf[j], buf[j + half])
            } else {
                llr_sum(buf[j], buf[j + half])
            };
        }
        len = half;
    }
    buf[0]
}

/// Genie-aided SC LLRs of every position. `scratch` needs `llr.len()` slots.
fn all_llrs(llr: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    let len = llr.len();
    if len == 1 {
        out[0] = llr[0];
        return;
    }
    let half = len / 2;
    let (cur, rest) = scratch.split_at_mut(half);
    for j in 0..half {
        cur[j] = boxplus(llr[j], llr[j + half]);
    }
    all_llrs(cur, &mut out[..half], rest);
    for j in 0..half {
        cur[j] = llr_sum(llr[j], llr[j + half]);
    }
    all_llrs(cur, &mut out[half..], rest);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeEstimate {
    /// Error probability; a tie counts as half an error.
    pub p: f64,
    pub stderr: f64,
    pub samples: usize,
    pub errors: u64,
    pub ties: u64,
}

impl DeEstimate {
    fn from_counts(errors: u64, ties: u64, samples: usize) -> Self {
        let s = samples as f64;
        let p = (errors as f64 + 0.5 * ties as f64) / s;
        let second = (errors as f64 + 0.25 * ties as f64) / s;
        DeEstimate {
            p,
            stderr: ((second - p * p).max(0.0) / s).sqrt(),
            samples,
            errors,
            ties,
        }
    }

    /// Error events, with ties weighted by one half.
    pub fn events(&self) -> f64 {
        self.errors as f64 + 0.5 * self.ties as f64
    }
}

fn fill_bsc<R: Rng + ?Sized>(rng: &mut R, q: f64, l0: f64, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = if rng.random::<f64>() < q { -l0 } else { l0 };
    }
}

fn de_args(n: usize, q: f64, samples: usize) -> Result<()> {
    check_q("q", q)?;
    check_index(n, 0)?;
    if samples < MIN_DE_SAMPLES {
        return invalid(format!("need at least {MIN_DE_SAMPLES} samples, got {samples}"));
    }
    Ok(())
}

fn shards(samples: usize) -> impl ParallelIterator<Item = (u64, usize)> {
    (0..samples.div_ceil(SHARD))
        .into_par_iter()
        .map(move |s| (s as u64, SHARD.min(samples - s * SHARD)))
}

/// Monte-Carlo density evolution for position `index` (0-based) of the
/// length-2^n polar code on BSC(q), all-zero codeword, genie prior bits.
/// Shard `s` of `SHARD` samples draws from stream `s` of `seed`.
pub fn sc_density_evolution(
    n: usize,
    q: f64,
    index: usize,
    samples: usize,
    seed: u64,
) -> Result<DeEstimate> {
    de_args(n, q, samples)?;
    check_index(n, index)?;
    if q == 0.0 {
        return Ok(DeEstimate::from_counts(0, 0, samples));
    }
    let l0 = ((1.0 - q) / q).ln();
    let len = 1usize << n;
    let (errors, ties) = shards(samples)
        .map(|(s, count)| {
            let mut rng = stream_rng(seed, s);
            let mut buf = vec![0.0; len];
            let (mut e, mut t) = (0u64, 0u64);
            for _ in 0..count {
                fill_bsc(&mut rng, q, l0, &mut buf);
                let l = target_llr(&mut buf, index);
                if l < 0.0 {
                    e += 1;
                } else if l == 0.0 {
                    t += 1;
                }
            }
            (e, t)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(DeEstimate::from_counts(errors, ties, samples))
}

/// [`sc_density_evolution`] for every position at once, sharing samples.
pub fn sc_density_evolution_all(
    n: usize,
    q: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<DeEstimate>> {
    de_args(n, q, samples)?;
    let len = 1usize << n;
    if q == 0.0 {
        return Ok(vec![DeEstimate::from_counts(0, 0, samples); len]);
    }
    let l0 = ((1.0 - q) / q).ln();
    let counts = shards(samples)
        .map(|(s, count)| {
            let mut rng = stream_rng(seed, s);
            let mut buf = vec![0.0; len];
            let mut out = vec![0.0; len];
            let mut scratch = vec![0.0; len];
            let mut c = vec![(0u64, 0u64); len];
            for _ in 0..count {
                fill_bsc(&mut rng, q, l0, &mut buf);
                all_llrs(&buf, &mut out, &mut scratch);
                for (ci, &l) in c.iter_mut().zip(&out) {
                    if l < 0.0 {
                        ci.0 += 1;
                    } else if l == 0.0 {
                        ci.1 += 1;
                    }
                }
            }
            c
        })
        .reduce(
            || vec![(0, 0); len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.0 += y.0;
                    x.1 += y.1;
                }
                a
            },
        );
    Ok(counts
        .into_iter()
        .map(|(e, t)| DeEstimate::from_counts(e, t, samples))
        .collect())
}

/// Lower and upper bound on an error probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Geometric midpoint, or the upper bound when the lower one is zero.
    pub fn midpoint(&self) -> f64 {
        if self.lower > 0.0 {
            (self.lower * self.upper).sqrt()
        } else {
            self.upper
        }
    }

    /// Bracket of `P_X + P_Z - P_X P_Z`, which is increasing in both.
    pub fn combine(&self, other: &Bracket) -> Bracket {
        Bracket {
            lower: or_combine(self.lower, other.lower),
            upper: or_combine(self.upper, other.upper),
        }
    }
}

fn or_combine(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Bracket from the Bhattacharyya parameter recursion: Z(W+) = Z², and
/// Z(W-) between Z·sqrt(2 - Z²) and 2Z - Z².
pub fn bhattacharyya_bracket(n: usize, q: f64, index: usize) -> Result<Bracket> {
    check_q("q", q)?;
    check_index(n, index)?;
    let z0 = 2.0 * (q * (1.0 - q)).sqrt();
    let (mut lo, mut up) = (z0, z0);
    for lvl in (0..n).rev() {
        if index >> lvl & 1 == 1 {
            lo *= lo;
            up *= up;
        } else {
            lo *= (2.0 - lo * lo).sqrt();
            up = 2.0 * up - up * up;
        }
    }
    let lo = lo.min(1.0);
    Ok(Bracket {
        lower: lo * lo / (2.0 * (1.0 + (1.0 - lo * lo).sqrt())),
        upper: (0.5 * up).min(0.5),
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Degrade,
    Upgrade,
}

/// Accumulator for a BSC mixture on a grid of crossover probabilities
/// spaced uniformly in ln(eps) between e^LN_FLOOR and 1/2.
struct Grid {
    bins: usize,
    step: f64,
    edges: Vec<f64>,
    mass: Vec<f64>,
    // mass-weighted crossover per bin (degrade) or unused (upgrade)
    moment: Vec<f64>,
    floor_mass: f64,
    floor_moment: f64,
    dir: Direction,
}

impl Grid {
    fn new(bins: usize, dir: Direction) -> Self {
        let top = 0.5f64.ln();
        let step = (top - LN_FLOOR) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|j| (LN_FLOOR + j as f64 * step).exp()).collect();
        edges[bins] = 0.5;
        Grid {
            bins,
            step,
            edges,
            mass: vec![0.0; bins + 1],
            moment: vec![0.0; bins + 1],
            floor_mass: 0.0,
            floor_moment: 0.0,
            dir,
        }
    }

    fn clear(&mut self) {
        self.mass.iter_mut().for_each(|m| *m = 0.0);
        self.moment.iter_mut().for_each(|m| *m = 0.0);
        self.floor_mass = 0.0;
        self.floor_moment = 0.0;
    }

    fn add(&mut self, w: f64, eps: f64) {
        if w == 0.0 {
            return;
        }
        let eps = eps.min(0.5);
        if eps <= self.edges[0] {
            self.floor_mass += w;
            self.floor_moment += w * eps;
            return;
        }
        let mut j = (((eps.ln() - LN_FLOOR) / self.step) as usize).min(self.bins - 1);
        if eps < self.edges[j] {
            j -= 1;
        } else if eps > self.edges[j + 1] {
            j += 1;
        }
        match self.dir {
            Direction::Degrade => {
                self.mass[j] += w;
                self.moment[j] += w * eps;
            }
            Direction::Upgrade => {
                let (lo, hi) = (self.edges[j], self.edges[j + 1]);
                let a = ((hi - eps) / (hi - lo)).clamp(0.0, 1.0);
                self.mass[j] += w * a;
                self.mass[j + 1] += w * (1.0 - a);
            }
        }
    }

    /// The reduced mixture as (weight, crossover) pairs.
    fn drain(&self, out: &mut Vec<(f64, f64)>) {
        out.clear();
        if self.floor_mass > 0.0 {
            let eps = match self.dir {
                Direction::Degrade => self.floor_moment / self.floor_mass,
                Direction::Upgrade => 0.0,
            };
            out.push((self.floor_mass, eps));
        }
        for j in 0..=self.bins {
            let m = self.mass[j];
            if m > 0.0 {
                let eps = match self.dir {
                    Direction::Degrade => self.moment[j] / m,
                    Direction::Upgrade => self.edges[j],
                };
                out.push((m, eps));
            }
        }
    }
}

fn transform(mix: &[(f64, f64)], plus: bool, grid: &mut Grid) {
    grid.clear();
    for (k, &(wa, a)) in mix.iter().enumerate() {
        for (l, &(wb, b)) in mix.iter().enumerate().skip(k) {
            // ordered pairs (k, l) and (l, k) give the same outputs
            let w = if l == k { wa * wb } else { 2.0 * wa * wb };
            if plus {
                let agree = (1.0 - a) * (1.0 - b) + a * b;
                let differ = 1.0 - agree;
                grid.add(w * agree, a * b / agree);
                if differ > 0.0 {
                    let e = (a * (1.0 - b)).min(b * (1.0 - a)) / differ;
                    grid.add(w * differ, e);
                }
            } else {
                grid.add(w, a + b - 2.0 * a * b);
            }
        }
    }
}

fn tracked_error(n: usize, q: f64, index: usize, bins: usize, dir: Direction) -> f64 {
    let mut grid = Grid::new(bins, dir);
    let mut mix = vec![(1.0, q)];
    for lvl in (0..n).rev() {
        transform(&mix, index >> lvl & 1 == 1, &mut grid);
        grid.drain(&mut mix);
    }
    mix.iter().map(|&(w, e)| w * e).sum::<f64>().clamp(0.0, 0.5)
}

/// Rigorous bracket on the genie-aided SC error probability of `index`
/// (0-based). Merging grid bins to their mean crossover degrades the
/// channel and spreading points onto bin edges upgrades it; both keep the
/// current error probability and the polar transforms preserve the order.
pub fn quantized_bracket(n: usize, q: f64, index: usize, bins: usize) -> Result<Bracket> {
    check_q("q", q)?;
    check_index(n, index)?;
    if bins < 2 {
        return invalid("need at least two bins");
    }
    Ok(Bracket {
        lower: tracked_error(n, q, index, bins, Direction::Upgrade),
        upper: tracked_error(n, q, index, bins, Direction::Degrade),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DensityEvolution,
    Bracket,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::DensityEvolution => "de-mc",
            Method::Bracket => "bracket",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogicalRates {
    pub p_x: f64,
    pub p_z: f64,
    pub p_e: f64,
    pub p_x_bracket: Bracket,
    pub p_z_bracket: Bracket,
    pub p_e_bracket: Bracket,
    pub method: Method,
}

impl LogicalRates {
    fn new(p_x: f64, p_z: f64, bx: Bracket, bz: Bracket, method: Method) -> Self {
        LogicalRates {
            p_x,
            p_z,
            p_e: or_combine(p_x, p_z),
            p_x_bracket: bx,
            p_z_bracket: bz,
            p_e_bracket: bx.combine(&bz),
            method,
        }
    }
}

/// X-decoder and Z-decoder positions (0-based) of a Q1 code's logical qubit.
/// The Z decoder works on the index-reversed code, where the X-frozen tail
/// becomes the frozen prefix.
pub fn decoder_positions(code: &Q1Code) -> (usize, usize) {
    (code.i() - 1, code.len() - code.i())
}

/// Logical error rate of a Q1 code. Monte-Carlo density evolution is used
/// when both decoders show at least [`MIN_DE_EVENTS`] errors in `samples`;
/// otherwise the reported point is the bracket midpoint.
pub fn logical_error_rate(
    code: &Q1Code,
    input: &DecoderInput,
    samples: usize,
    seed: u64,
) -> Result<LogicalRates> {
    DecoderInput::new(input.q_x, input.q_z)?;
    let n = code.n();
    let (ix, iz) = decoder_positions(code);
    let bx = quantized_bracket(n, input.q_x, ix, DEFAULT_BINS)?;
    let bz = quantized_bracket(n, input.q_z, iz, DEFAULT_BINS)?;
    let reachable = |b: &Bracket| b.upper * samples as f64 >= MIN_DE_EVENTS;
    if samples >= MIN_DE_SAMPLES && reachable(&bx) && reachable(&bz) {
        let dx = sc_density_evolution(n, input.q_x, ix, samples, seed)?;
        let dz = sc_density_evolution(n, input.q_z, iz, samples, seed ^ 0x5a5a_5a5a_5a5a_5a5a)?;
        if dx.events() >= MIN_DE_EVENTS && dz.events() >= MIN_DE_EVENTS {
            return Ok(LogicalRates::new(dx.p, dz.p, bx, bz, Method::DensityEvolution));
        }
    }
    Ok(LogicalRates::new(bx.midpoint(), bz.midpoint(), bx, bz, Method::Bracket))
}
