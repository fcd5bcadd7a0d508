//! `q1prep`: run preparation experiments from a TOML config and write CSV.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use q1prep::driver::{self, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "q1prep", version, about = "Q1 polar code state preparation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte-Carlo preparation rate next to the analytic estimate
    Rate(Opts),
    /// Monte-Carlo residual X/Z error probabilities of accepted states
    Errors(Opts),
    /// Closed-form rate and residual error probabilities only
    Analytic(Opts),
    /// Logical error rate of the prepared code under Steane error correction
    Logical(Opts),
    /// Monte-Carlo against analytic, with relative deviations
    Compare(Opts),
}

#[derive(Args)]
struct Opts {
    /// Experiment config (TOML)
    #[arg(short, long)]
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV path (default: config `output`, else stdout)
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Progress messages on stderr
    #[arg(short, long)]
    verbose: bool,
}

enum Failure {
    Config(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (err, code) = match self {
            Failure::Config(e) => (e, 2),
            Failure::Io(e) => (e, 3),
        };
        eprintln!("error: {err:#}");
        ExitCode::from(code)
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Io)?;
    ExperimentConfig::from_toml(&text)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::Config)
}

fn execute(command: Command, opts: Opts) -> Result<(), Failure> {
    let mut cfg = load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .context("building worker pool")
        .map_err(Failure::Config)?;
    if opts.verbose {
        eprintln!(
            "{command:?}: N={} i={} {} p points × {} T points, {} trials, seed {}, {} threads, config {}",
            cfg.code.len,
            cfg.code.i,
            cfg.p_grid.len(),
            cfg.t_grid.len(),
            cfg.trials,
            cfg.seed,
            pool.current_num_threads(),
            cfg.hash()
        );
    }
    let start = Instant::now();
    let table = pool
        .install(|| driver::run(command, &cfg))
        .map_err(|e| Failure::Config(e.into()))?;
    if opts.verbose {
        eprintln!("{} rows in {:.2?}", table.rows.len(), start.elapsed());
    }
    let csv = table.to_csv();
    match opts.out.or(cfg.output.map(PathBuf::from)) {
        Some(path) => std::fs::write(&path, csv)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Io),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(csv.as_bytes())
                .context("writing stdout")
                .map_err(Failure::Io)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Cmd::Rate(o) => (Command::Rate, o),
        Cmd::Errors(o) => (Command::Errors, o),
        Cmd::Analytic(o) => (Command::Analytic, o),
        Cmd::Logical(o) => (Command::Logical, o),
        Cmd::Compare(o) => (Command::Compare, o),
    };
    match execute(command, opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
