//! Command-line front end.
//!
//! ```text
//! lvsync [--config FILE] [--out DIR] [--format csv|json] [--seed N] [--workers N]
//!        <theta|steady|spectrum|verify|evolve|sweep> [run flags]
//! ```
//!
//! Settings come from built-in defaults, then the JSON config file, then
//! flags. The merged configuration is validated in full before any solve and
//! echoed to `<out>/config.json`. Exit codes: 0 success, 1 usage or solver
//! error, 2 subcritical growth (no positive steady state).

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{Outcome, EXIT_ERROR, EXIT_OK, EXIT_SUBCRITICAL};
pub use config::{GrowthSpec, RunConfig, SweepSpec};
pub use output::Format;

use crate::error::Result;
use config::{parse_axis, parse_real, PerturbationKind, SpectrumOperator, StateKind};

#[derive(Debug, Parser)]
#[command(
    name = "lvsync",
    version,
    about = "Synchronized predator-prey steady states and their stability"
)]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sweep worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Logistic steady state θ.
    Theta(RunArgs),
    /// Synchronized steady state (αθ, βθ).
    Steady(RunArgs),
    /// Eigenvalues of a scalar weighted operator or of the linearization.
    Spectrum(RunArgs),
    /// Compare the linearized spectrum with its scalar reduction.
    Verify(RunArgs),
    /// Integrate a perturbation of the synchronized state and fit its decay.
    Evolve(RunArgs),
    /// Run `verify` over a parameter product.
    Sweep(RunArgs),
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// interval:<x0>:<x1> or rect:<x0>:<x1>:<y0>:<y1> (accepts pi, 2pi, pi/2).
    #[arg(long)]
    pub domain: Option<String>,
    /// Interior nodes per axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Interior nodes along y (defaults to --n).
    #[arg(long)]
    pub ny: Option<usize>,
    /// Growth rate: a number, profile:const, profile:sin or file:<path>.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Eigenvalue count (the coupled problem uses 2k).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub operator: Option<SpectrumOperator>,
    #[arg(long, value_enum)]
    pub state: Option<StateKind>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long, value_enum)]
    pub perturbation: Option<PerturbationKind>,
    #[arg(long)]
    pub store_every: Option<usize>,
    /// Comma-separated times for field snapshots.
    #[arg(long)]
    pub snapshots: Option<String>,
    /// Starts for the multi-start uniqueness probe (theta only).
    #[arg(long)]
    pub probe_starts: Option<usize>,
    /// Sweep axis for a: list v1,v2,... or range start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub sweep_c: Option<String>,
    #[arg(long)]
    pub sweep_n: Option<String>,
}

impl Cli {
    pub fn run_args(&self) -> &RunArgs {
        match &self.command {
            Command::Theta(a)
            | Command::Steady(a)
            | Command::Spectrum(a)
            | Command::Verify(a)
            | Command::Evolve(a)
            | Command::Sweep(a) => a,
        }
    }

    /// Defaults, then the config file, then flags.
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        let r = self.run_args();
        if let Some(v) = &r.domain {
            cfg.domain = v.clone();
        }
        if let Some(v) = r.n {
            cfg.n = v;
        }
        if r.ny.is_some() {
            cfg.ny = r.ny;
        }
        if let Some(v) = &r.a {
            cfg.a = v.parse()?;
        }
        for (flag, slot) in [
            (&r.a0, &mut cfg.a0),
            (&r.a1, &mut cfg.a1),
            (&r.b, &mut cfg.b),
            (&r.c, &mut cfg.c),
        ] {
            if let Some(v) = flag {
                *slot = parse_real(v)?;
            }
        }
        if let Some(v) = r.tol {
            cfg.tol = v;
        }
        if let Some(v) = r.k {
            cfg.k = v;
        }
        if let Some(v) = r.operator {
            cfg.operator = v;
        }
        if let Some(v) = r.state {
            cfg.state = v;
        }
        if let Some(v) = r.dt {
            cfg.dt = v;
        }
        if let Some(v) = r.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = r.amplitude {
            cfg.amplitude = v;
        }
        if let Some(v) = r.perturbation {
            cfg.perturbation = v;
        }
        if let Some(v) = r.store_every {
            cfg.store_every = v;
        }
        if let Some(v) = &r.snapshots {
            cfg.snapshots = parse_axis(v)?;
        }
        if let Some(v) = r.probe_starts {
            cfg.probe_starts = v;
        }
        if let Some(v) = &r.sweep_a {
            cfg.sweep.a = Some(parse_axis(v)?);
        }
        if let Some(v) = &r.sweep_b {
            cfg.sweep.b = Some(parse_axis(v)?);
        }
        if let Some(v) = &r.sweep_c {
            cfg.sweep.c = Some(parse_axis(v)?);
        }
        if let Some(v) = &r.sweep_n {
            let values = parse_axis(v)?;
            let mut ns = Vec::with_capacity(values.len());
            for x in values {
                if x.fract() != 0.0 || x < 0.0 {
                    return Err(crate::Error::Config(format!("sweep n value {x} is not a count")));
                }
                ns.push(x as usize);
            }
            cfg.sweep.n = Some(ns);
        }
        Ok(cfg)
    }
}

/// Parses, validates and runs one command. Errors before or during the run
/// are returned; expected negative results come back as an [`Outcome`].
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let cfg = cli.effective_config()?;
    if let Command::Sweep(_) = cli.command {
        return commands::cmd_sweep(&cfg);
    }
    let plan = cfg.validate()?;
    match cli.command {
        Command::Theta(_) => commands::cmd_theta(&cfg, &plan),
        Command::Steady(_) => commands::cmd_steady(&cfg, &plan),
        Command::Spectrum(_) => commands::cmd_spectrum(&cfg, &plan),
        Command::Verify(_) => commands::cmd_verify(&cfg, &plan),
        Command::Evolve(_) => commands::cmd_evolve(&cfg, &plan),
        Command::Sweep(_) => unreachable!(),
    }
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if outcome.code == EXIT_OK {
                println!("{}", outcome.message);
            } else {
                eprintln!("{}", outcome.message);
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
