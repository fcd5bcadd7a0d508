//! Circuit-level depolarizing faults.
//!
//! Every component fails independently with probability `p`: initialisations
//! and measurements pick up a single flip in the conjugate basis, CNOTs one of
//! the 15 non-identity two-qubit Paulis uniformly.

use crate::error::{invalid, Result};
use crate::polar_core::Basis;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Geometric};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    p: f64,
}

impl NoiseParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("physical error rate {p} outside [0, 1]"));
        }
        Ok(NoiseParams { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Single-qubit Pauli, stored as its (x, z) symplectic bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn x(self) -> u8 {
        matches!(self, Pauli::X | Pauli::Y) as u8
    }

    pub fn z(self) -> u8 {
        matches!(self, Pauli::Z | Pauli::Y) as u8
    }

    pub fn from_bits(x: u8, z: u8) -> Pauli {
        match (x & 1, z & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(c)
    }
}

/// Two-qubit Pauli on (control, target).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pauli2(pub Pauli, pub Pauli);

impl Pauli2 {
    /// Index 1..=15 enumerates the non-identity pairs, control-major.
    pub fn from_index(idx: usize) -> Pauli2 {
        assert!((1..16).contains(&idx), "two-qubit Pauli index {idx}");
        Pauli2(Pauli::ALL[idx / 4], Pauli::ALL[idx % 4])
    }

    pub fn index(self) -> usize {
        let pos = |p: Pauli| Pauli::ALL.iter().position(|&q| q == p).unwrap();
        4 * pos(self.0) + pos(self.1)
    }

    pub fn non_identity() -> impl Iterator<Item = Pauli2> {
        (1..16).map(Pauli2::from_index)
    }
}

impl fmt::Display for Pauli2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    InitZ,
    InitX,
    MeasZ,
    MeasX,
    Cnot,
}

impl ComponentKind {
    pub fn label(self) -> &'static str {
        match self {
            ComponentKind::InitZ => "init_z",
            ComponentKind::InitX => "init_x",
            ComponentKind::MeasZ => "meas_z",
            ComponentKind::MeasX => "meas_x",
            ComponentKind::Cnot => "cnot",
        }
    }

    pub fn init(basis: Basis) -> Self {
        match basis {
            Basis::Z => ComponentKind::InitZ,
            Basis::X => ComponentKind::InitX,
        }
    }

    pub fn meas(basis: Basis) -> Self {
        match basis {
            Basis::Z => ComponentKind::MeasZ,
            Basis::X => ComponentKind::MeasX,
        }
    }
}

/// Pauli carried by a faulty component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultPauli {
    One(Pauli),
    Two(Pauli2),
}

impl fmt::Display for FaultPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultPauli::One(p) => write!(f, "{p}"),
            FaultPauli::Two(p) => write!(f, "{p}"),
        }
    }
}

/// Position of a component inside a block: level `k` (0 for data
/// initialisation), time step `t` and the qubits it touches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub level: usize,
    pub step: usize,
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentFault {
    pub kind: ComponentKind,
    pub pauli: FaultPauli,
    pub location: Location,
}

impl ComponentFault {
    /// The Pauli a fault of this kind must carry, for single-qubit kinds.
    pub fn flip_for(kind: ComponentKind) -> Option<Pauli> {
        match kind {
            ComponentKind::InitZ | ComponentKind::MeasZ => Some(Pauli::X),
            ComponentKind::InitX | ComponentKind::MeasX => Some(Pauli::Z),
            ComponentKind::Cnot => None,
        }
    }
}

/// With probability `p`: X after a Z-basis preparation, Z after an X-basis one.
pub fn sample_init_fault<R: Rng + ?Sized>(
    rng: &mut R,
    params: &NoiseParams,
    basis: Basis,
) -> Option<Pauli> {
    if rng.random::<f64>() < params.p {
        Some(match basis {
            Basis::Z => Pauli::X,
            Basis::X => Pauli::Z,
        })
    } else {
        None
    }
}

/// With probability `p`, one of the 15 non-identity two-qubit Paulis.
pub fn sample_cnot_fault<R: Rng + ?Sized>(rng: &mut R, params: &NoiseParams) -> Option<Pauli2> {
    if rng.random::<f64>() < params.p {
        Some(Pauli2::from_index(rng.random_range(1..16)))
    } else {
        None
    }
}

/// True with probability `p`; the caller flips the measured qubit in the
/// conjugate basis before readout.
pub fn sample_meas_fault<R: Rng + ?Sized>(rng: &mut R, params: &NoiseParams) -> bool {
    rng.random::<f64>() < params.p
}

/// Indices of failing components among `count`, drawn by geometric skipping.
/// Distributionally identical to `count` independent Bernoulli(p) draws.
pub fn sample_fault_positions<R: Rng + ?Sized>(
    rng: &mut R,
    params: &NoiseParams,
    count: usize,
    out: &mut Vec<usize>,
) {
    out.clear();
    let p = params.p;
    if p <= 0.0 || count == 0 {
        return;
    }
    if p >= 1.0 {
        out.extend(0..count);
        return;
    }
    let geo = Geometric::new(p).expect("p in (0, 1)");
    let mut pos: u64 = 0;
    loop {
        let skip = geo.sample(rng);
        pos = match pos.checked_add(skip) {
            Some(v) => v,
            None => return,
        };
        if pos >= count as u64 {
            return;
        }
        out.push(pos as usize);
        pos += 1;
    }
}

/// Deterministic stream for work unit `stream` under a global `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
