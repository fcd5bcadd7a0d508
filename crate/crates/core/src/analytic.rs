//! Closed-form estimates of block success probability, factory rate and
//! residual error channel.
//!
//! Rough-error coefficients are kept as numerators over 15 so tests can
//! compare them exactly against enumerated fault classifications.

use crate::error::{invalid, Result};
use crate::factory::SchedulingSet;
use crate::noise_model::NoiseParams;
use crate::polar_core::{k_min, Basis, Q1Code};
use crate::prep_sim::BlockSpec;

/// Per-qubit Pauli channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelProbs {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticComponent {
    DataInit,
    AncillaInitOrMeas,
    Cnot { level: usize },
}

/// Probability that a component of `block` produces a rough error, as a
/// numerator over 15 of `p`.
pub fn rough_coefficient(kind: AnalyticComponent, block: &BlockSpec) -> Result<u32> {
    match kind {
        AnalyticComponent::DataInit => {
            if !block.includes_data_init() {
                return invalid("data initialisation only belongs to blocks starting at level 0");
            }
            if block.data_init_basis() == Basis::X {
                // |+> inputs: Z flips the first X⊗X check, which sees everything
                return Ok(15);
            }
            let any_zz = block.code_bits()[..block.j()].contains(&1);
            Ok(if any_zz { 15 } else { 0 })
        }
        AnalyticComponent::AncillaInitOrMeas => Ok(15),
        AnalyticComponent::Cnot { level } => {
            let (i, j) = (block.i(), block.j());
            if level <= i || level > j {
                return invalid(format!("level {level} outside block {i}->{j}"));
            }
            if level == j {
                return Ok(8);
            }
            match k_min(i, j, block.code_bits())? {
                Some(km) if level >= km => Ok(12),
                _ => Ok(14),
            }
        }
    }
}

pub fn rough_prob_component(
    kind: AnalyticComponent,
    block: &BlockSpec,
    params: &NoiseParams,
) -> Result<f64> {
    Ok(rough_coefficient(kind, block)? as f64 / 15.0 * params.p())
}

/// Accumulated smooth channel on each output qubit of `B_{0->i}`.
pub fn smooth_channel_accumulated(
    i: usize,
    code: &Q1Code,
    params: &NoiseParams,
) -> Result<ChannelProbs> {
    if i > code.n() {
        return invalid(format!("level {i} beyond n = {}", code.n()));
    }
    let p = params.p();
    let a = 2.0 * p / 15.0;
    let x_init = code.data_init_basis() == Basis::Z;
    if i == 0 {
        return Ok(if x_init {
            ChannelProbs { p_x: p, p_y: 0.0, p_z: 0.0 }
        } else {
            ChannelProbs { p_x: 0.0, p_y: 0.0, p_z: p }
        });
    }
    let bits = code.bits();
    let km = k_min(0, i, bits)?.unwrap_or(i);
    let e = (i - km + 1) as i32;
    let acc = |m: i32| 1.0 - (1.0 - a).powi(m);
    let all_xx = bits[..i].iter().all(|&b| b == 0);
    let last_zz = bits[i - 1] == 1;
    let p_x = if all_xx && x_init {
        1.0 - (1.0 - p) * (1.0 - a).powi(i as i32)
    } else if !last_zz {
        acc(e)
    } else {
        a
    };
    let p_z = if last_zz { acc(e) } else { a };
    Ok(ChannelProbs { p_x, p_y: a, p_z })
}

fn combine_pre(ch: ChannelProbs, ones: usize, len: usize) -> f64 {
    if ones == 0 {
        ch.p_y + ch.p_z
    } else if ones == len {
        ch.p_x + ch.p_y
    } else {
        ch.p_x + ch.p_y + ch.p_z
    }
}

/// Probability that errors already present at the input of `B_{i->j}` are
/// rough with respect to it.
pub fn p_pre(i: usize, j: usize, code: &Q1Code, params: &NoiseParams) -> Result<f64> {
    if i >= j || j > code.n() {
        return invalid(format!("block {i}->{j} for n = {}", code.n()));
    }
    if i == 0 {
        return Ok(0.0);
    }
    let ch = smooth_channel_accumulated(i, code, params)?;
    let ones: usize = code.bits()[i..j].iter().map(|&b| b as usize).sum();
    // the summed first-order terms can pass 1 at large p
    Ok(combine_pre(ch, ones, j - i).min(1.0))
}

/// Coefficients of `p` in the accumulated channel.
fn channel_slope(i: usize, code: &Q1Code) -> Result<ChannelProbs> {
    let x_init = code.data_init_basis() == Basis::Z;
    if i == 0 {
        return Ok(if x_init {
            ChannelProbs { p_x: 1.0, p_y: 0.0, p_z: 0.0 }
        } else {
            ChannelProbs { p_x: 0.0, p_y: 0.0, p_z: 1.0 }
        });
    }
    let a = 2.0 / 15.0;
    let bits = code.bits();
    let e = (i - k_min(0, i, bits)?.unwrap_or(i) + 1) as f64;
    let all_xx = bits[..i].iter().all(|&b| b == 0);
    let last_zz = bits[i - 1] == 1;
    let p_x = if all_xx && x_init {
        1.0 + i as f64 * a
    } else if !last_zz {
        e * a
    } else {
        a
    };
    let p_z = if last_zz { e * a } else { a };
    Ok(ChannelProbs { p_x, p_y: a, p_z })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub p_pre: f64,
    pub p1: f64,
    pub p2: f64,
    pub p_success: f64,
    /// Expected number of rough component failures, split as
    /// (data init, ancilla init and measurement, CNOT).
    pub rough_mass: (f64, f64, f64),
}

/// Success probability of `B_{i->j}`: input errors and fresh component
/// failures must both stay smooth.
pub fn block_success_prob(
    i: usize,
    j: usize,
    code: &Q1Code,
    params: &NoiseParams,
) -> Result<AnalyticReport> {
    let block = BlockSpec::new(code, i, j)?;
    let pp = p_pre(i, j, code, params)?;
    let data = block.data_count() as f64;
    let p1 = (data * (-pp).ln_1p()).exp();
    let p = params.p();

    let mut log_p2 = 0.0;
    let mut mass = (0.0, 0.0, 0.0);
    if block.includes_data_init() {
        let c = rough_prob_component(AnalyticComponent::DataInit, &block, params)?;
        log_p2 += data * (-c).ln_1p();
        mass.0 += data * c;
    }
    let a_count = block.ancilla_count() as f64;
    for k in i + 1..=j {
        log_p2 += 2.0 * a_count * (-p).ln_1p();
        mass.1 += 2.0 * a_count * p;
        let c = rough_prob_component(AnalyticComponent::Cnot { level: k }, &block, params)?;
        log_p2 += 2.0 * a_count * (-c).ln_1p();
        mass.2 += 2.0 * a_count * c;
    }
    let p2 = log_p2.exp();
    Ok(AnalyticReport {
        p_pre: pp,
        p1,
        p2,
        p_success: p1 * p2,
        rough_mass: mass,
    })
}

/// Derivative of `block_success_prob` at `p = 0`.
pub fn block_success_slope(i: usize, j: usize, code: &Q1Code) -> Result<f64> {
    let block = BlockSpec::new(code, i, j)?;
    let data = block.data_count() as f64;
    let mut slope = 0.0;
    if block.includes_data_init() {
        slope -= data * rough_coefficient(AnalyticComponent::DataInit, &block)? as f64 / 15.0;
    } else {
        let ones: usize = code.bits()[i..j].iter().map(|&b| b as usize).sum();
        slope -= data * combine_pre(channel_slope(i, code)?, ones, j - i);
    }
    let a_count = block.ancilla_count() as f64;
    for k in i + 1..=j {
        let c = rough_coefficient(AnalyticComponent::Cnot { level: k }, &block)? as f64 / 15.0;
        slope -= 2.0 * a_count * (1.0 + c);
    }
    Ok(slope)
}

/// Product of block success probabilities along the scheduling chain.
pub fn factory_rate_analytic(
    code: &Q1Code,
    sched: &SchedulingSet,
    params: &NoiseParams,
) -> Result<f64> {
    sched.validate(code.n())?;
    let mut rate = 1.0;
    let mut prev = 0;
    for &lvl in sched.levels() {
        rate *= block_success_prob(prev, lvl, code, params)?.p_success;
        prev = lvl;
    }
    Ok(rate)
}

/// Whether each residual error estimate is exact to first order or only an
/// upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Exact,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepErrorProbs {
    pub p_x: f64,
    pub p_z: f64,
    pub p_x_bound: Bound,
    pub p_z_bound: Bound,
}

/// Per-qubit X and Z error probabilities of a prepared state.
pub fn prep_error_probs_analytic(code: &Q1Code, params: &NoiseParams) -> Result<PrepErrorProbs> {
    let n = code.n();
    let ch = smooth_channel_accumulated(n, code, params)?;
    let last_zz = n > 0 && code.bits()[n - 1] == 1;
    Ok(PrepErrorProbs {
        p_x: ch.p_x + ch.p_y,
        p_z: ch.p_y + ch.p_z,
        p_x_bound: if last_zz { Bound::Exact } else { Bound::Upper },
        p_z_bound: if last_zz { Bound::Upper } else { Bound::Exact },
    })
}
