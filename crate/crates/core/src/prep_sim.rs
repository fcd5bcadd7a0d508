//! Pauli-frame simulation of a recursion segment `B_{i->j}`.
//!
//! The frame holds X/Z error indicators relative to the state the preparer
//! believes it holds. Each level runs four time steps over all ancillas
//! (init, CNOT to the first qubit of each pair, CNOT to the second, readout),
//! then checks the outcome flips of every merged sub-block. When a level is
//! accepted, every flipped outcome has been absorbed into the inferred frozen
//! values, which leaves the conjugate Pauli on the first qubit of that pair
//! relative to the believed state.

use crate::error::{invalid, Result};
use crate::noise_model::{
    sample_cnot_fault, sample_fault_positions, sample_init_fault, sample_meas_fault,
    ComponentKind, FaultPauli, Location, NoiseParams, Pauli, Pauli2,
};
use crate::polar_core::{syndrome_nonzero, Basis, PairBasis, Q1Code};
use rand::Rng;

/// X/Z error indicators over data qubits; Y sets both.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PauliFrame {
    pub x: Vec<u8>,
    pub z: Vec<u8>,
}

impl PauliFrame {
    pub fn zeros(len: usize) -> Self {
        PauliFrame {
            x: vec![0; len],
            z: vec![0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.x.iter().all(|&b| b == 0) && self.z.iter().all(|&b| b == 0)
    }

    pub fn apply(&mut self, q: usize, p: Pauli) {
        self.x[q] ^= p.x();
        self.z[q] ^= p.z();
    }

    pub fn pauli(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x[q], self.z[q])
    }

    pub fn concat(frames: &[PauliFrame]) -> PauliFrame {
        let mut out = PauliFrame::default();
        for f in frames {
            out.x.extend_from_slice(&f.x);
            out.z.extend_from_slice(&f.z);
        }
        out
    }
}

/// `x_t ^= x_c; z_c ^= z_t`.
pub fn apply_cnot(frame: &mut PauliFrame, control: usize, target: usize) -> Result<()> {
    let len = frame.len();
    if control == target || control >= len || target >= len {
        return invalid(format!("cnot({control}, {target}) on {len} qubits"));
    }
    frame.x[target] ^= frame.x[control];
    frame.z[control] ^= frame.z[target];
    Ok(())
}

/// Hamming weights of the X and Z parts.
pub fn residual_weights(frame: &PauliFrame) -> (usize, usize) {
    let wx = frame.x.iter().filter(|&&b| b != 0).count();
    let wz = frame.z.iter().filter(|&&b| b != 0).count();
    (wx, wz)
}

/// One component of a block, decoded from its enumeration index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub kind: ComponentKind,
    pub location: Location,
}

/// The segment `B_{i->j}` of a given code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    i: usize,
    j: usize,
    bits: Vec<u8>,
    frozen: Vec<usize>,
    data_init: Basis,
}

impl BlockSpec {
    pub fn new(code: &Q1Code, i: usize, j: usize) -> Result<Self> {
        if i >= j || j > code.n() {
            return invalid(format!("block {i}->{j} for n = {}", code.n()));
        }
        Ok(BlockSpec {
            i,
            j,
            bits: code.bits().to_vec(),
            frozen: (0..=j).map(|k| code.frozen_len(k)).collect(),
            data_init: code.data_init_basis(),
        })
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// Full `b_1..b_n` of the underlying code.
    pub fn code_bits(&self) -> &[u8] {
        &self.bits
    }

    /// `b_{i+1}..b_j`.
    pub fn level_bits(&self) -> &[u8] {
        &self.bits[self.i..self.j]
    }

    pub fn level_basis(&self, k: usize) -> PairBasis {
        PairBasis::from_bit(self.bits[k - 1])
    }

    /// `i(k)` for `k <= j`.
    pub fn frozen_len(&self, k: usize) -> usize {
        self.frozen[k]
    }

    pub fn includes_data_init(&self) -> bool {
        self.i == 0
    }

    pub fn data_init_basis(&self) -> Basis {
        self.data_init
    }

    pub fn data_count(&self) -> usize {
        1 << self.j
    }

    pub fn input_count(&self) -> usize {
        1 << (self.j - self.i)
    }

    pub fn input_len(&self) -> usize {
        1 << self.i
    }

    pub fn ancilla_count(&self) -> usize {
        1 << (self.j - 1)
    }

    /// `T_{i->j}`, the number of pair measurements.
    pub fn measurement_count(&self) -> usize {
        (self.j - self.i) * self.ancilla_count()
    }

    pub fn component_count(&self) -> usize {
        let data = if self.includes_data_init() {
            self.data_count()
        } else {
            0
        };
        data + 4 * self.measurement_count()
    }

    fn level_base(&self, k: usize) -> usize {
        let data = if self.includes_data_init() {
            self.data_count()
        } else {
            0
        };
        data + 4 * (k - self.i - 1) * self.ancilla_count()
    }

    fn component_index(&self, k: usize, step: usize, a: usize) -> usize {
        self.level_base(k) + (step - 1) * self.ancilla_count() + a
    }

    /// Data qubits measured by ancilla `a` at level `k`.
    pub fn pair(&self, k: usize, a: usize) -> (usize, usize) {
        let m = 1usize << (k - 1);
        let q1 = (a / m) * 2 * m + a % m;
        (q1, q1 + m)
    }

    pub fn component_kind(&self, c: usize) -> ComponentKind {
        let data = if self.includes_data_init() {
            self.data_count()
        } else {
            0
        };
        if c < data {
            return ComponentKind::init(self.data_init);
        }
        let a_count = self.ancilla_count();
        let rel = c - data;
        let k = self.i + 1 + rel / (4 * a_count);
        let step = 1 + (rel % (4 * a_count)) / a_count;
        let b = match self.level_basis(k) {
            PairBasis::ZZ => Basis::Z,
            PairBasis::XX => Basis::X,
        };
        match step {
            1 => ComponentKind::init(b),
            4 => ComponentKind::meas(b),
            _ => ComponentKind::Cnot,
        }
    }

    /// Kind and location of component `c` (data qubits and the ancilla are
    /// listed as data indices followed by `data_count + a`).
    pub fn component(&self, c: usize) -> Component {
        assert!(c < self.component_count());
        let kind = self.component_kind(c);
        let data = if self.includes_data_init() {
            self.data_count()
        } else {
            0
        };
        if c < data {
            return Component {
                kind,
                location: Location {
                    level: 0,
                    step: 0,
                    qubits: vec![c],
                },
            };
        }
        let a_count = self.ancilla_count();
        let rel = c - data;
        let k = self.i + 1 + rel / (4 * a_count);
        let step = 1 + (rel % (4 * a_count)) / a_count;
        let a = rel % a_count;
        let (q1, q2) = self.pair(k, a);
        let anc = self.data_count() + a;
        let qubits = match (step, self.level_basis(k)) {
            (2, PairBasis::ZZ) => vec![q1, anc],
            (3, PairBasis::ZZ) => vec![q2, anc],
            (2, PairBasis::XX) => vec![anc, q1],
            (3, PairBasis::XX) => vec![anc, q2],
            _ => vec![anc],
        };
        Component {
            kind,
            location: Location {
                level: k,
                step,
                qubits,
            },
        }
    }

    /// All faults a single component can suffer.
    pub fn possible_faults(&self, c: usize) -> Vec<FaultPauli> {
        match self.component_kind(c) {
            ComponentKind::Cnot => Pauli2::non_identity().map(FaultPauli::Two).collect(),
            ComponentKind::InitZ | ComponentKind::MeasZ => vec![FaultPauli::One(Pauli::X)],
            ComponentKind::InitX | ComponentKind::MeasX => vec![FaultPauli::One(Pauli::Z)],
        }
    }
}

/// Supplies the fault (if any) of each component, queried in enumeration
/// order.
pub trait FaultSource {
    fn init(&mut self, c: usize, basis: Basis) -> Option<Pauli>;
    fn cnot(&mut self, c: usize) -> Option<Pauli2>;
    fn meas(&mut self, c: usize) -> bool;
    /// True when no component will fail.
    fn is_quiet(&self) -> bool {
        false
    }
}

pub struct NoFaults;

impl FaultSource for NoFaults {
    fn init(&mut self, _: usize, _: Basis) -> Option<Pauli> {
        None
    }
    fn cnot(&mut self, _: usize) -> Option<Pauli2> {
        None
    }
    fn meas(&mut self, _: usize) -> bool {
        false
    }
    fn is_quiet(&self) -> bool {
        true
    }
}

/// Draws every component independently at query time.
pub struct DenseSampler<'a, R: Rng + ?Sized> {
    pub rng: &'a mut R,
    pub params: NoiseParams,
}

impl<R: Rng + ?Sized> FaultSource for DenseSampler<'_, R> {
    fn init(&mut self, _: usize, basis: Basis) -> Option<Pauli> {
        sample_init_fault(self.rng, &self.params, basis)
    }
    fn cnot(&mut self, _: usize) -> Option<Pauli2> {
        sample_cnot_fault(self.rng, &self.params)
    }
    fn meas(&mut self, _: usize) -> bool {
        sample_meas_fault(self.rng, &self.params)
    }
}

/// Explicit list of faulty components, sorted by component index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultPlan {
    faults: Vec<(usize, FaultPauli)>,
    cursor: usize,
}

impl FaultPlan {
    pub fn new(mut faults: Vec<(usize, FaultPauli)>) -> Self {
        faults.sort_by_key(|f| f.0);
        FaultPlan { faults, cursor: 0 }
    }

    pub fn single(c: usize, fault: FaultPauli) -> Self {
        FaultPlan::new(vec![(c, fault)])
    }

    /// Sparse draw over the whole block: positions by geometric skipping,
    /// then a uniform Pauli for each failing CNOT.
    pub fn sample<R: Rng + ?Sized>(spec: &BlockSpec, rng: &mut R, params: &NoiseParams) -> Self {
        let mut positions = Vec::new();
        sample_fault_positions(rng, params, spec.component_count(), &mut positions);
        let faults = positions
            .into_iter()
            .map(|c| {
                let f = match spec.component_kind(c) {
                    ComponentKind::Cnot => {
                        FaultPauli::Two(Pauli2::from_index(rng.random_range(1..16)))
                    }
                    ComponentKind::InitZ | ComponentKind::MeasZ => FaultPauli::One(Pauli::X),
                    ComponentKind::InitX | ComponentKind::MeasX => FaultPauli::One(Pauli::Z),
                };
                (c, f)
            })
            .collect();
        FaultPlan { faults, cursor: 0 }
    }

    pub fn faults(&self) -> &[(usize, FaultPauli)] {
        &self.faults
    }

    pub fn len(&self) -> usize {
        self.faults.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    fn take(&mut self, c: usize) -> Option<FaultPauli> {
        while self.cursor < self.faults.len() && self.faults[self.cursor].0 < c {
            self.cursor += 1;
        }
        if self.cursor < self.faults.len() && self.faults[self.cursor].0 == c {
            self.cursor += 1;
            Some(self.faults[self.cursor - 1].1)
        } else {
            None
        }
    }
}

impl FaultSource for FaultPlan {
    fn init(&mut self, c: usize, _: Basis) -> Option<Pauli> {
        match self.take(c) {
            Some(FaultPauli::One(p)) => Some(p),
            _ => None,
        }
    }
    fn cnot(&mut self, c: usize) -> Option<Pauli2> {
        match self.take(c) {
            Some(FaultPauli::Two(p)) => Some(p),
            _ => None,
        }
    }
    fn meas(&mut self, c: usize) -> bool {
        self.take(c).is_some()
    }
    fn is_quiet(&self) -> bool {
        self.cursor >= self.faults.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Abort at the first level whose check fires.
    pub detect: bool,
    /// Absorb measured stabilizers onto the first qubit of each pair.
    pub canonicalize: bool,
    pub trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            detect: true,
            canonicalize: true,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockResult {
    Success(PauliFrame),
    Detected { level: usize },
}

impl BlockResult {
    pub fn is_success(&self) -> bool {
        matches!(self, BlockResult::Success(_))
    }

    pub fn frame(&self) -> Option<&PauliFrame> {
        match self {
            BlockResult::Success(f) => Some(f),
            BlockResult::Detected { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockOutcome {
    pub result: BlockResult,
    /// Lowest level at which some ancilla outcome was flipped.
    pub first_flip_level: Option<usize>,
    pub trace: Vec<String>,
}

#[derive(Default)]
struct Ancilla {
    x: u8,
    z: u8,
}

fn fmt_qubits(spec_data: usize, qubits: &[usize]) -> String {
    qubits
        .iter()
        .map(|&q| {
            if q >= spec_data {
                format!("a{}", q - spec_data + 1)
            } else {
                format!("{}", q + 1)
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn init_ancilla(anc: &mut Ancilla, basis: PairBasis, fault: Option<Pauli>) {
    *anc = Ancilla::default();
    if let Some(p) = fault {
        // |0> picks up X, |+> picks up Z
        match basis {
            PairBasis::ZZ => anc.x ^= p.x(),
            PairBasis::XX => anc.z ^= p.z(),
        }
    }
}

fn cnot_with_ancilla(
    frame: &mut PauliFrame,
    anc: &mut Ancilla,
    q: usize,
    basis: PairBasis,
    fault: Option<Pauli2>,
) {
    match basis {
        PairBasis::ZZ => {
            anc.x ^= frame.x[q];
            frame.z[q] ^= anc.z;
            if let Some(Pauli2(c, t)) = fault {
                frame.apply(q, c);
                anc.x ^= t.x();
                anc.z ^= t.z();
            }
        }
        PairBasis::XX => {
            frame.x[q] ^= anc.x;
            anc.z ^= frame.z[q];
            if let Some(Pauli2(c, t)) = fault {
                anc.x ^= c.x();
                anc.z ^= c.z();
                frame.apply(q, t);
            }
        }
    }
}

fn read_ancilla(anc: &mut Ancilla, basis: PairBasis, fault: bool) -> u8 {
    match basis {
        PairBasis::ZZ => {
            anc.x ^= fault as u8;
            anc.x
        }
        PairBasis::XX => {
            anc.z ^= fault as u8;
            anc.z
        }
    }
}

fn canonicalize_pair(frame: &mut PauliFrame, q1: usize, q2: usize, basis: PairBasis) {
    match basis {
        PairBasis::ZZ => {
            frame.z[q1] ^= frame.z[q2];
            frame.z[q2] = 0;
        }
        PairBasis::XX => {
            frame.x[q1] ^= frame.x[q2];
            frame.x[q2] = 0;
        }
    }
}

fn correct_flip(frame: &mut PauliFrame, q1: usize, basis: PairBasis) {
    match basis {
        PairBasis::ZZ => frame.x[q1] ^= 1,
        PairBasis::XX => frame.z[q1] ^= 1,
    }
}

/// Measures `Z_{q1} Z_{q2}` or `X_{q1} X_{q2}` through a fresh ancilla,
/// drawing faults for the four components (init, two CNOTs, readout) in that
/// order. Returns whether the outcome was flipped. Stabilizer
/// canonicalization is applied; the frozen-value correction is not, since it
/// depends on the level check.
pub fn run_pair_measurement<S: FaultSource + ?Sized>(
    frame: &mut PauliFrame,
    q1: usize,
    q2: usize,
    basis: PairBasis,
    source: &mut S,
    canonicalize: bool,
) -> Result<u8> {
    let len = frame.len();
    if q1 == q2 || q1 >= len || q2 >= len {
        return invalid(format!("pair ({q1}, {q2}) on {len} qubits"));
    }
    let b = match basis {
        PairBasis::ZZ => Basis::Z,
        PairBasis::XX => Basis::X,
    };
    let mut anc = Ancilla::default();
    init_ancilla(&mut anc, basis, source.init(0, b));
    cnot_with_ancilla(frame, &mut anc, q1, basis, source.cnot(1));
    cnot_with_ancilla(frame, &mut anc, q2, basis, source.cnot(2));
    let flip = read_ancilla(&mut anc, basis, source.meas(3));
    if canonicalize {
        canonicalize_pair(frame, q1, q2, basis);
    }
    Ok(flip)
}

/// Runs `B_{i->j}` with faults drawn sparsely from `rng`.
pub fn run_block<R: Rng + ?Sized>(
    spec: &BlockSpec,
    inputs: &[PauliFrame],
    rng: &mut R,
    params: &NoiseParams,
) -> Result<BlockResult> {
    let mut plan = FaultPlan::sample(spec, rng, params);
    Ok(run_block_with(spec, inputs, &mut plan, &SimOptions::default())?.result)
}

/// Runs `B_{i->j}` on `inputs` (ignored when `i = 0`) with faults from
/// `source`.
pub fn run_block_with<S: FaultSource + ?Sized>(
    spec: &BlockSpec,
    inputs: &[PauliFrame],
    source: &mut S,
    opts: &SimOptions,
) -> Result<BlockOutcome> {
    let d = spec.data_count();
    let mut frame = if spec.includes_data_init() {
        PauliFrame::zeros(d)
    } else {
        if inputs.len() != spec.input_count()
            || inputs.iter().any(|f| f.len() != spec.input_len())
        {
            return invalid(format!(
                "block {}->{} expects {} inputs of length {}",
                spec.i,
                spec.j,
                spec.input_count(),
                spec.input_len()
            ));
        }
        PauliFrame::concat(inputs)
    };

    if source.is_quiet() && !opts.trace && frame.is_clean() {
        return Ok(BlockOutcome {
            result: BlockResult::Success(frame),
            first_flip_level: None,
            trace: Vec::new(),
        });
    }

    let mut trace = Vec::new();
    if spec.includes_data_init() {
        let basis = spec.data_init_basis();
        for q in 0..d {
            let fault = source.init(q, basis);
            if let Some(p) = fault {
                frame.apply(q, p);
            }
            if opts.trace {
                trace.push(format!(
                    "L0 t0 {} q={} fault={} flip=-",
                    ComponentKind::init(basis).label(),
                    q + 1,
                    fault.map_or("-".to_string(), |p| p.to_string())
                ));
            }
        }
    }

    let a_count = spec.ancilla_count();
    let mut anc: Vec<Ancilla> = (0..a_count).map(|_| Ancilla::default()).collect();
    let mut flips = vec![0u8; a_count];
    let mut scratch = vec![0u8; a_count];
    let mut first_flip_level = None;

    for k in spec.i + 1..=spec.j {
        let basis = spec.level_basis(k);
        let b = match basis {
            PairBasis::ZZ => Basis::Z,
            PairBasis::XX => Basis::X,
        };
        for step in 1..=4 {
            for a in 0..a_count {
                let c = spec.component_index(k, step, a);
                let (q1, q2) = spec.pair(k, a);
                let (label, fault_txt) = match step {
                    1 => {
                        let f = source.init(c, b);
                        init_ancilla(&mut anc[a], basis, f);
                        (f.map(|p| p.to_string()), None)
                    }
                    2 | 3 => {
                        let q = if step == 2 { q1 } else { q2 };
                        let f = source.cnot(c);
                        cnot_with_ancilla(&mut frame, &mut anc[a], q, basis, f);
                        (f.map(|p| p.to_string()), None)
                    }
                    _ => {
                        let f = source.meas(c);
                        flips[a] = read_ancilla(&mut anc[a], basis, f);
                        if opts.canonicalize {
                            canonicalize_pair(&mut frame, q1, q2, basis);
                        }
                        let p = readout_flip(basis);
                        (f.then(|| p.to_string()), Some(flips[a]))
                    }
                };
                if opts.trace {
                    let comp = spec.component(c);
                    trace.push(format!(
                        "L{} t{} {} q={} fault={} flip={}",
                        k,
                        step,
                        comp.kind.label(),
                        fmt_qubits(d, &comp.location.qubits),
                        label.unwrap_or_else(|| "-".to_string()),
                        fault_txt.map_or("-".to_string(), |f| f.to_string())
                    ));
                }
            }
        }

        if first_flip_level.is_none() && flips.iter().any(|&f| f != 0) {
            first_flip_level = Some(k);
        }

        if opts.detect {
            let m = 1usize << (k - 1);
            let i_prev = spec.frozen_len(k - 1);
            for s in 0..a_count / m {
                let sub = &flips[s * m..(s + 1) * m];
                if sub.iter().all(|&f| f == 0) {
                    continue;
                }
                scratch[..m].copy_from_slice(sub);
                if syndrome_nonzero(basis, &mut scratch[..m], i_prev) {
                    if opts.trace {
                        trace.push(format!("L{k} detected sub-block={}", s + 1));
                    }
                    return Ok(BlockOutcome {
                        result: BlockResult::Detected { level: k },
                        first_flip_level,
                        trace,
                    });
                }
            }
        }

        // halves that were Z-basis product states make every Z_{q1} Z_{q2}
        // a stabilizer after an X⊗X level
        let z_pairs = opts.canonicalize
            && basis == PairBasis::XX
            && spec.frozen_len(k - 1) == 1 << (k - 1);
        for (a, &flip) in flips.iter().enumerate() {
            let (q1, q2) = spec.pair(k, a);
            if flip != 0 {
                correct_flip(&mut frame, q1, basis);
            }
            if z_pairs {
                canonicalize_pair(&mut frame, q1, q2, PairBasis::ZZ);
            }
        }
    }

    Ok(BlockOutcome {
        result: BlockResult::Success(frame),
        first_flip_level,
        trace,
    })
}

fn readout_flip(basis: PairBasis) -> Pauli {
    match basis {
        PairBasis::ZZ => Pauli::X,
        PairBasis::XX => Pauli::Z,
    }
}

/// Result of running a block with exactly one faulty component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleFaultRun {
    pub component: usize,
    pub fault: FaultPauli,
    pub outcome: BlockOutcome,
}

/// Every single-component fault of `B_{i->j}` on clean inputs.
pub fn enumerate_single_faults(spec: &BlockSpec, opts: &SimOptions) -> Vec<SingleFaultRun> {
    let inputs: Vec<PauliFrame> = if spec.includes_data_init() {
        Vec::new()
    } else {
        vec![PauliFrame::zeros(spec.input_len()); spec.input_count()]
    };
    let mut runs = Vec::new();
    for c in 0..spec.component_count() {
        for fault in spec.possible_faults(c) {
            let mut plan = FaultPlan::single(c, fault);
            let outcome = run_block_with(spec, &inputs, &mut plan, opts)
                .expect("inputs sized from spec");
            runs.push(SingleFaultRun {
                component: c,
                fault,
                outcome,
            });
        }
    }
    runs
}
