//! Batch experiments: TOML configs in, CSV tables out.
//!
//! Grid points run in order; trials inside a point run on the current rayon
//! pool. Every row ends with the config hash and the crate version, and
//! numbers are written in shortest round-trip scientific notation, so the
//! output is byte-identical for a given config whatever the thread count.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{factory_rate_analytic, prep_error_probs_analytic, Bound, PrepErrorProbs};
use crate::error::{Error, Result};
use crate::factory::{estimate_error_probs_mc, estimate_rate_mc, ErrorEstimate, SchedulingSet};
use crate::logical_rate::{logical_error_rate, steane_input_probs, Mapping};
use crate::noise_model::NoiseParams;
use crate::polar_core::{Basis, Q1Code};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    McRate,
    McErrors,
    Analytic,
    Logical,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    #[serde(rename = "N")]
    pub len: usize,
    pub i: usize,
    #[serde(default = "default_basis")]
    pub basis: Basis,
}

fn default_basis() -> Basis {
    Basis::Z
}

fn default_trials() -> usize {
    1000
}

fn default_t_grid() -> Vec<usize> {
    vec![1]
}

fn default_de_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: CodeSpec,
    pub p_grid: Vec<f64>,
    #[serde(rename = "T_grid", default = "default_t_grid")]
    pub t_grid: Vec<usize>,
    /// Scheduling levels; defaults to the single level n.
    #[serde(default)]
    pub sched: Option<Vec<usize>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub mapping: Mapping,
    /// Monte-Carlo samples per density-evolution run.
    #[serde(default = "default_de_samples")]
    pub de_samples: usize,
    /// Report residual weights of raw rather than canonical frames.
    #[serde(default)]
    pub raw_frames: bool,
    #[serde(default)]
    pub output: Option<String>,
}

impl Serialize for Mapping {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Mapping {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.code.len.is_power_of_two() || self.code.len < 2 {
            return config_err(format!("N = {} is not a power of two ≥ 2", self.code.len));
        }
        self.code()?;
        if self.p_grid.is_empty() || self.t_grid.is_empty() {
            return config_err("p_grid and T_grid must be non-empty");
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return config_err(format!("p = {p} outside [0, 1]"));
        }
        if self.t_grid.contains(&0) {
            return config_err("factory sizes must be positive");
        }
        if self.trials == 0 {
            return config_err("trials must be positive");
        }
        self.sched()?;
        Ok(())
    }

    pub fn code(&self) -> Result<Q1Code> {
        let n = self.code.len.trailing_zeros() as usize;
        Q1Code::new(n, self.code.i, self.code.basis).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sched(&self) -> Result<SchedulingSet> {
        let n = self.code.len.trailing_zeros() as usize;
        let s = match &self.sched {
            Some(levels) => SchedulingSet::new(levels.clone()),
            None => Ok(SchedulingSet::single(n)),
        }
        .and_then(|s| s.validate(n).map(|_| s));
        s.map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex prefix of the SHA-256 of the canonical config text, ignoring the
    /// output path.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output = None;
        let text = toml::to_string(&canon).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Rate,
    Errors,
    Analytic,
    Logical,
    Compare,
}

impl Command {
    pub fn mode(&self) -> Mode {
        match self {
            Command::Rate => Mode::McRate,
            Command::Errors => Mode::McErrors,
            Command::Analytic => Mode::Analytic,
            Command::Logical => Mode::Logical,
            Command::Compare => Mode::Compare,
        }
    }
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        let mut header = header.to_vec();
        header.extend(["config_hash", "version"]);
        Table { header, rows: Vec::new() }
    }

    fn push(&mut self, mut row: Vec<String>, hash: &str) {
        row.push(hash.to_string());
        row.push(VERSION.to_string());
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn bound(b: Bound) -> String {
    match b {
        Bound::Exact => "exact",
        Bound::Upper => "upper",
    }
    .to_string()
}

/// Seed of grid point `k`, so that points draw independent streams.
fn point_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn params(p: f64) -> Result<NoiseParams> {
    NoiseParams::new(p).map_err(|e| Error::Config(e.to_string()))
}

/// Runs `cmd` on `cfg`. A `mode` in the config must agree with the command.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    if let Some(m) = cfg.mode {
        if m != cmd.mode() {
            return config_err(format!("config mode {m:?} does not match command {cmd:?}"));
        }
    }
    match cmd {
        Command::Rate => cmd_rate(cfg),
        Command::Errors => cmd_errors(cfg),
        Command::Analytic => cmd_analytic(cfg),
        Command::Logical => cmd_logical(cfg),
        Command::Compare => cmd_compare(cfg),
    }
}

fn grid(cfg: &ExperimentConfig) -> impl Iterator<Item = (usize, f64, usize)> + '_ {
    cfg.p_grid
        .iter()
        .flat_map(move |&p| cfg.t_grid.iter().map(move |&t| (p, t)))
        .enumerate()
        .map(|(k, (p, t))| (k, p, t))
}

pub fn cmd_rate(cfg: &ExperimentConfig) -> Result<Table> {
    let (code, sched, hash) = (cfg.code()?, cfg.sched()?, cfg.hash());
    let mut table = Table::new(&["p", "T", "rate_mc", "stderr", "rate_analytic"]);
    for (k, p, t) in grid(cfg) {
        let pr = params(p)?;
        let mc = estimate_rate_mc(&code, t, &sched, &pr, cfg.trials, point_seed(cfg.seed, k))?;
        let an = factory_rate_analytic(&code, &sched, &pr)?;
        table.push(vec![num(p), t.to_string(), num(mc.rate), num(mc.stderr), num(an)], &hash);
    }
    Ok(table)
}

fn error_cells(e: &ErrorEstimate) -> [String; 5] {
    match *e {
        ErrorEstimate::NoSample => [0.to_string(), String::new(), String::new(), String::new(), String::new()],
        ErrorEstimate::Estimate { p_x, p_z, stderr_x, stderr_z, successes } => {
            [successes.to_string(), num(p_x), num(stderr_x), num(p_z), num(stderr_z)]
        }
    }
}

fn prep_cells(a: &PrepErrorProbs) -> [String; 4] {
    [num(a.p_x), bound(a.p_x_bound), num(a.p_z), bound(a.p_z_bound)]
}

pub fn cmd_errors(cfg: &ExperimentConfig) -> Result<Table> {
    let (code, sched, hash) = (cfg.code()?, cfg.sched()?, cfg.hash());
    let frames = if cfg.raw_frames { "raw" } else { "canonical" };
    let mut table = Table::new(&[
        "p",
        "T",
        "successes",
        "p_x_mc",
        "stderr_x",
        "p_z_mc",
        "stderr_z",
        "p_x_analytic",
        "p_x_bound",
        "p_z_analytic",
        "p_z_bound",
        "frames",
    ]);
    for (k, p, t) in grid(cfg) {
        let pr = params(p)?;
        let seed = point_seed(cfg.seed, k);
        let mc = estimate_error_probs_mc(&code, t, &sched, &pr, cfg.trials, seed, !cfg.raw_frames)?;
        let an = prep_error_probs_analytic(&code, &pr)?;
        let mut row = vec![num(p), t.to_string()];
        row.extend(error_cells(&mc));
        row.extend(prep_cells(&an));
        row.push(frames.to_string());
        table.push(row, &hash);
    }
    Ok(table)
}

pub fn cmd_analytic(cfg: &ExperimentConfig) -> Result<Table> {
    let (code, sched, hash) = (cfg.code()?, cfg.sched()?, cfg.hash());
    let single = SchedulingSet::single(code.n());
    let mut table = Table::new(&[
        "p",
        "rate_analytic",
        "rate_single_shot",
        "p_x_analytic",
        "p_x_bound",
        "p_z_analytic",
        "p_z_bound",
    ]);
    for &p in &cfg.p_grid {
        let pr = params(p)?;
        let mut row = vec![
            num(p),
            num(factory_rate_analytic(&code, &sched, &pr)?),
            num(factory_rate_analytic(&code, &single, &pr)?),
        ];
        row.extend(prep_cells(&prep_error_probs_analytic(&code, &pr)?));
        table.push(row, &hash);
    }
    Ok(table)
}

pub fn cmd_logical(cfg: &ExperimentConfig) -> Result<Table> {
    let (code, sched, hash) = (cfg.code()?, cfg.sched()?, cfg.hash());
    let mut table = Table::new(&[
        "p",
        "rate_analytic",
        "p_X_prep",
        "p_Z_prep",
        "q_x",
        "q_z",
        "P_X_L",
        "P_Z_L",
        "P_e_L",
        "P_e_L_lower",
        "P_e_L_upper",
        "mapping",
        "method",
    ]);
    for (k, &p) in cfg.p_grid.iter().enumerate() {
        let pr = params(p)?;
        let prep = prep_error_probs_analytic(&code, &pr)?;
        let input = steane_input_probs(&pr, prep.p_x.min(0.5), prep.p_z.min(0.5), cfg.mapping)?;
        let r = logical_error_rate(&code, &input, cfg.de_samples, point_seed(cfg.seed, k))?;
        table.push(
            vec![
                num(p),
                num(factory_rate_analytic(&code, &sched, &pr)?),
                num(prep.p_x),
                num(prep.p_z),
                num(input.q_x),
                num(input.q_z),
                num(r.p_x),
                num(r.p_z),
                num(r.p_e),
                num(r.p_e_bracket.lower),
                num(r.p_e_bracket.upper),
                cfg.mapping.name().to_string(),
                r.method.label().to_string(),
            ],
            &hash,
        );
    }
    Ok(table)
}

/// Monte-Carlo against analytic rate and residual errors; both MC columns
/// come from the same factory runs.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Table> {
    let (code, sched, hash) = (cfg.code()?, cfg.sched()?, cfg.hash());
    let mut table = Table::new(&[
        "p",
        "T",
        "rate_mc",
        "stderr",
        "rate_analytic",
        "rate_rel_dev",
        "p_x_mc",
        "stderr_x",
        "p_x_analytic",
        "p_z_mc",
        "stderr_z",
        "p_z_analytic",
    ]);
    for (k, p, t) in grid(cfg) {
        let pr = params(p)?;
        let seed = point_seed(cfg.seed, k);
        let mc = estimate_error_probs_mc(&code, t, &sched, &pr, cfg.trials, seed, !cfg.raw_frames)?;
        let copies = (cfg.trials * t) as f64;
        let successes = match mc {
            ErrorEstimate::NoSample => 0,
            ErrorEstimate::Estimate { successes, .. } => successes,
        };
        let rate = successes as f64 / copies;
        let an = factory_rate_analytic(&code, &sched, &pr)?;
        let prep = prep_error_probs_analytic(&code, &pr)?;
        let rel = (rate > 0.0).then(|| (rate - an).abs() / rate);
        let (px, sx, pz, sz) = match mc {
            ErrorEstimate::NoSample => (None, None, None, None),
            ErrorEstimate::Estimate { p_x, p_z, stderr_x, stderr_z, .. } => {
                (Some(p_x), Some(stderr_x), Some(p_z), Some(stderr_z))
            }
        };
        table.push(
            vec![
                num(p),
                t.to_string(),
                num(rate),
                num((rate * (1.0 - rate) / copies).sqrt()),
                num(an),
                opt(rel),
                opt(px),
                opt(sx),
                num(prep.p_x),
                opt(pz),
                opt(sz),
                num(prep.p_z),
            ],
            &hash,
        );
    }
    Ok(table)
}
