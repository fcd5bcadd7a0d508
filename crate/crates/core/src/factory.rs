//! Factory scheduling across recursion levels and Monte-Carlo estimation of
//! preparation rate and residual error.
//!
//! A factory of size `T` starts `T N / 2^{i_1}` copies of `B_{0->i_1}`.
//! Survivors of each scheduling level are grouped in index order and fed to
//! the next block; leftovers that do not fill a group are dropped. If fewer
//! survivors remain than are needed for a single output the whole run fails.

use crate::error::{invalid, Result};
use crate::noise_model::{stream_rng, NoiseParams};
use crate::polar_core::Q1Code;
use crate::prep_sim::{
    residual_weights, run_block_with, BlockResult, BlockSpec, FaultPlan, PauliFrame, SimOptions,
};
use rand::Rng;
use rayon::prelude::*;

/// Levels `i_1 < ... < i_m = n` at which survivors are regrouped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulingSet {
    levels: Vec<usize>,
}

impl SchedulingSet {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return invalid("scheduling set is empty");
        }
        if levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
            return invalid(format!("scheduling levels {levels:?} must increase from 1"));
        }
        Ok(SchedulingSet { levels })
    }

    /// The single-block schedule `{n}`.
    pub fn single(n: usize) -> Self {
        SchedulingSet { levels: vec![n] }
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if *self.levels.last().unwrap() != n {
            return invalid(format!(
                "scheduling set {:?} must end at n = {n}",
                self.levels
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoryOutcome {
    pub successes: usize,
    /// Survivor count `T_{i_k}` after each scheduling level reached.
    pub survivors_per_level: Vec<usize>,
    pub residual_frames: Vec<PauliFrame>,
    pub aborted: bool,
}

/// Decides the faults of each block a factory runs.
pub trait BlockFaults {
    fn plan(&mut self, stage: usize, block: usize, spec: &BlockSpec) -> FaultPlan;
}

/// Independent depolarizing faults drawn from one stream.
pub struct SampledFaults<'a, R: Rng + ?Sized> {
    pub rng: &'a mut R,
    pub params: NoiseParams,
}

impl<R: Rng + ?Sized> BlockFaults for SampledFaults<'_, R> {
    fn plan(&mut self, _: usize, _: usize, spec: &BlockSpec) -> FaultPlan {
        FaultPlan::sample(spec, self.rng, &self.params)
    }
}

pub fn run_factory<R: Rng + ?Sized>(
    code: &Q1Code,
    t: usize,
    sched: &SchedulingSet,
    params: &NoiseParams,
    rng: &mut R,
) -> Result<FactoryOutcome> {
    let mut faults = SampledFaults {
        rng,
        params: *params,
    };
    run_factory_with(code, t, sched, &mut faults, &SimOptions::default())
}

pub fn run_factory_with<F: BlockFaults + ?Sized>(
    code: &Q1Code,
    t: usize,
    sched: &SchedulingSet,
    faults: &mut F,
    opts: &SimOptions,
) -> Result<FactoryOutcome> {
    if t == 0 {
        return invalid("factory size must be at least 1");
    }
    sched.validate(code.n())?;
    let n = code.n();
    let opts = SimOptions {
        detect: true,
        trace: false,
        ..*opts
    };
    let mut survivors_per_level = Vec::with_capacity(sched.levels().len());
    let mut survivors: Vec<PauliFrame> = Vec::new();
    let mut prev = 0;

    for (stage, &level) in sched.levels().iter().enumerate() {
        let spec = BlockSpec::new(code, prev, level)?;
        let group = spec.input_count();
        let blocks = if stage == 0 {
            t * (code.len() >> level)
        } else {
            survivors.len() / group
        };
        let mut next = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let inputs: &[PauliFrame] = if stage == 0 {
                &[]
            } else {
                &survivors[b * group..(b + 1) * group]
            };
            let mut plan = faults.plan(stage, b, &spec);
            if let BlockResult::Success(frame) =
                run_block_with(&spec, inputs, &mut plan, &opts)?.result
            {
                next.push(frame);
            }
        }
        if stage > 0 {
            debug_assert_eq!(blocks * group + survivors.len() % group, survivors.len());
        }
        survivors = next;
        survivors_per_level.push(survivors.len());
        if level < n && survivors.len() < 1 << (n - level) {
            return Ok(FactoryOutcome {
                successes: 0,
                survivors_per_level,
                residual_frames: Vec::new(),
                aborted: true,
            });
        }
        prev = level;
    }

    Ok(FactoryOutcome {
        successes: survivors.len(),
        survivors_per_level,
        residual_frames: survivors,
        aborted: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub rate: f64,
    pub trials: usize,
    pub factory_size: usize,
    pub successes: u64,
    /// Per-copy Bernoulli approximation, ignoring correlation inside a
    /// factory.
    pub stderr: f64,
}

impl RateEstimate {
    fn from_counts(successes: u64, trials: usize, t: usize) -> Self {
        let copies = (trials * t) as f64;
        let rate = successes as f64 / copies;
        RateEstimate {
            rate,
            trials,
            factory_size: t,
            successes,
            stderr: (rate * (1.0 - rate) / copies).sqrt(),
        }
    }
}

/// Runs `trials` independent factories; trial `r` uses stream `r` of `seed`.
pub fn estimate_rate_mc(
    code: &Q1Code,
    t: usize,
    sched: &SchedulingSet,
    params: &NoiseParams,
    trials: usize,
    seed: u64,
) -> Result<RateEstimate> {
    if trials == 0 {
        return invalid("need at least one trial");
    }
    sched.validate(code.n())?;
    let successes = (0..trials)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            run_factory(code, t, sched, params, &mut rng).map(|o| o.successes as u64)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(RateEstimate::from_counts(successes, trials, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorEstimate {
    /// No copy survived, so nothing was measured.
    NoSample,
    Estimate {
        p_x: f64,
        p_z: f64,
        stderr_x: f64,
        stderr_z: f64,
        successes: u64,
    },
}

#[derive(Default)]
struct WeightSums {
    count: u64,
    sx: f64,
    sxx: f64,
    sz: f64,
    szz: f64,
}

impl WeightSums {
    fn merge(mut self, o: WeightSums) -> WeightSums {
        self.count += o.count;
        self.sx += o.sx;
        self.sxx += o.sxx;
        self.sz += o.sz;
        self.szz += o.szz;
        self
    }
}

/// Average residual X and Z weight per qubit over all prepared copies.
/// `canonicalize = false` reports weights of the raw frames.
pub fn estimate_error_probs_mc(
    code: &Q1Code,
    t: usize,
    sched: &SchedulingSet,
    params: &NoiseParams,
    trials: usize,
    seed: u64,
    canonicalize: bool,
) -> Result<ErrorEstimate> {
    if trials == 0 {
        return invalid("need at least one trial");
    }
    sched.validate(code.n())?;
    let len = code.len() as f64;
    let opts = SimOptions {
        canonicalize,
        ..SimOptions::default()
    };
    // per-trial partial sums are combined in trial order for bit-stable output
    let parts = (0..trials)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut faults = SampledFaults {
                rng: &mut rng,
                params: *params,
            };
            let out = run_factory_with(code, t, sched, &mut faults, &opts)?;
            let mut s = WeightSums::default();
            for f in &out.residual_frames {
                let (wx, wz) = residual_weights(f);
                let (fx, fz) = (wx as f64 / len, wz as f64 / len);
                s.count += 1;
                s.sx += fx;
                s.sxx += fx * fx;
                s.sz += fz;
                s.szz += fz * fz;
            }
            Ok(s)
        })
        .collect::<Result<Vec<WeightSums>>>()?;
    let s = parts
        .into_iter()
        .fold(WeightSums::default(), WeightSums::merge);
    if s.count == 0 {
        return Ok(ErrorEstimate::NoSample);
    }
    let c = s.count as f64;
    let (mx, mz) = (s.sx / c, s.sz / c);
    let se = |sq: f64, m: f64| {
        if s.count < 2 {
            0.0
        } else {
            ((sq / c - m * m).max(0.0) * c / (c - 1.0) / c).sqrt()
        }
    };
    Ok(ErrorEstimate::Estimate {
        p_x: mx,
        p_z: mz,
        stderr_x: se(s.sxx, mx),
        stderr_z: se(s.szz, mz),
        successes: s.count,
    })
}
