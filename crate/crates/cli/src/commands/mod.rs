//! Subcommands of `sbm`.
//!
//! Value-list flags take a number, a comma list, or `a:b:n` (n points from a to b
//! inclusive). Any flag may instead come from `--config FILE`; flags win.

mod dynamics;
mod theory;
mod validate;

use crate::config::{Direction, Format, Params, Values};
use crate::error::CliError;
use crate::output::{output_dir, Output};
use clap::{Args, Parser, Subcommand};
use sbm_core::{DataSpectrum, Hyper};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "sbm", version, about = "Spherical Boltzmann machine laboratory")]
pub struct Cli {
    /// TOML file with run parameters (kebab-case keys; flags override it).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [default: $SBM_OUTPUT_DIR, else ./sbm-out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium phase and order parameters over a (gamma, eta) grid.
    #[command(after_help = theory::PHASE_DIAGRAM_HELP)]
    PhaseDiagram(SweepArgs),
    /// Deterministic mean-field training dynamics.
    #[command(after_help = dynamics::DMFT_HELP)]
    Dmft(DynArgs),
    /// Finite-N Langevin simulation of weights and chain.
    #[command(after_help = dynamics::LANGEVIN_HELP)]
    Langevin(LangevinArgs),
    /// Teacher-student divergences over (omega*, gamma, eta).
    #[command(after_help = theory::KL_SWEEP_HELP)]
    KlSweep(KlArgs),
    /// Optimal-temperature classification of the tempered posterior.
    #[command(after_help = theory::TEMPERED_HELP)]
    Tempered(TemperedArgs),
    /// Typical reverse KL against gamma at several eta, with local minima marked.
    #[command(after_help = theory::DOUBLE_DESCENT_HELP)]
    DoubleDescent(SweepArgs),
    /// Reverse and forward KL along a mean-field training path.
    #[command(after_help = dynamics::DYNAMICS_KL_HELP)]
    DynamicsKl(DynArgs),
    /// Run the acceptance suite and print one line per criterion.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Default)]
pub struct SweepArgs {
    /// Number of data modes when --c is absent.
    #[arg(long)]
    pub k: Option<usize>,
    /// Data eigenvalues c_1 > c_2 > ... (list).
    #[arg(long)]
    pub c: Option<String>,
    /// Teacher strength omega* (list), for teacher-based commands.
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct DynArgs {
    #[arg(long)]
    pub c: Option<String>,
    /// Teacher strength omega*; for dynamics-kl the data are its two modes.
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Initial overlaps, one value or one per mode.
    #[arg(long)]
    pub s0: Option<String>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct LangevinArgs {
    #[command(flatten)]
    pub dynamics: DynArgs,
    /// System size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of independent seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Base seed; seed i uses base + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps between recorded samples.
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Steps between eigen-decompositions (multiple of --record-every).
    #[arg(long)]
    pub eig_every: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct KlArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Also tune the inverse temperature beta at each point.
    #[arg(long)]
    pub beta: bool,
}

#[derive(Debug, Args, Default)]
pub struct TemperedArgs {
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long, value_enum)]
    pub direction: Option<Direction>,
}

#[derive(Debug, Args, Default)]
pub struct ValidateArgs {
    /// Criterion ids to run (list), default all.
    #[arg(long)]
    pub only: Option<String>,
}

fn text(v: &Option<String>) -> Option<Values> {
    v.as_ref().map(|s| Values::Text(s.clone()))
}

impl SweepArgs {
    fn params(&self) -> Params {
        Params {
            k: self.k,
            c: text(&self.c),
            omega: text(&self.omega),
            gamma: text(&self.gamma),
            eta: text(&self.eta),
            ..Default::default()
        }
    }
}

impl DynArgs {
    fn params(&self) -> Params {
        Params {
            c: text(&self.c),
            omega: text(&self.omega),
            gamma: text(&self.gamma),
            eta: text(&self.eta),
            nu: self.nu,
            s0: text(&self.s0),
            t_max: self.t_max,
            dt: self.dt,
            ..Default::default()
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::Dmft(_) => "dmft",
            Command::Langevin(_) => "langevin",
            Command::KlSweep(_) => "kl-sweep",
            Command::Tempered(_) => "tempered",
            Command::DoubleDescent(_) => "double-descent",
            Command::DynamicsKl(_) => "dynamics-kl",
            Command::Validate(_) => "validate",
        }
    }

    fn flag_params(&self) -> Params {
        match self {
            Command::PhaseDiagram(a) | Command::DoubleDescent(a) => a.params(),
            Command::Dmft(a) | Command::DynamicsKl(a) => a.params(),
            Command::Langevin(a) => Params {
                n: a.n,
                seeds: a.seeds,
                seed: a.seed,
                record_every: a.record_every,
                eig_every: a.eig_every,
                ..a.dynamics.params()
            },
            Command::KlSweep(a) => Params { beta: a.beta.then_some(true), ..a.sweep.params() },
            Command::Tempered(a) => Params {
                omega: text(&a.omega),
                gamma: text(&a.gamma),
                direction: a.direction,
                ..Default::default()
            },
            Command::Validate(a) => Params { only: text(&a.only), ..Default::default() },
        }
    }
}

/// Resolved view of the merged parameters with per-command defaults.
pub(crate) struct Resolver<'a>(pub &'a Params);

impl Resolver<'_> {
    pub fn list(&self, v: &Option<Values>, default: &str) -> Result<Vec<f64>, CliError> {
        match v {
            Some(v) => v.resolve(),
            None => crate::range::parse_values(default),
        }
    }

    pub fn scalar(&self, name: &str, v: &Option<Values>, default: f64) -> Result<f64, CliError> {
        match v {
            None => Ok(default),
            Some(v) => match v.resolve()?[..] {
                [x] => Ok(x),
                _ => Err(CliError::Config(format!("{name} takes a single value"))),
            },
        }
    }

    /// `--c` if given, else `K` modes evenly spaced from 1.5 down to 0.5 (`[1]` for `K=1`).
    pub fn spectrum(&self, default_k: usize) -> Result<Vec<f64>, CliError> {
        if let Some(c) = &self.0.c {
            return c.resolve();
        }
        match self.0.k.unwrap_or(default_k) {
            0 => Err(CliError::Config("k must be positive".into())),
            1 => Ok(vec![1.0]),
            k => Ok((0..k).map(|i| 1.5 - i as f64 / (k - 1) as f64).collect()),
        }
    }

    /// One initial overlap per mode, broadcasting a single value.
    pub fn s0(&self, k: usize, default: f64) -> Result<Vec<f64>, CliError> {
        let v = self.list(&self.0.s0, &default.to_string())?;
        match v.len() {
            1 => Ok(vec![v[0]; k]),
            n if n == k => Ok(v),
            n => Err(CliError::Config(format!("s0 has {n} values for {k} modes"))),
        }
    }
}

pub(crate) fn data(c: &[f64]) -> Result<DataSpectrum, CliError> {
    Ok(DataSpectrum::new(c.to_vec())?)
}

pub(crate) fn hyper(gamma: f64, eta: f64, nu: f64) -> Result<Hyper, CliError> {
    Ok(Hyper::new(gamma, eta, nu)?)
}

/// Runs one command; returns the files written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let name = cli.command.name();
    let file = match &cli.config {
        Some(path) => Params::load(path)?,
        None => Params::default(),
    };
    if let Some(c) = &file.command {
        if c != name {
            return Err(CliError::Config(format!("config is for command {c:?}, not {name:?}")));
        }
    }
    let flags = Params { output_dir: cli.out.clone(), format: cli.format, ..cli.command.flag_params() };
    let params = file.overlay(flags);
    let r = Resolver(&params);
    let mut out = Output::create(output_dir(cli.out, params.output_dir.clone()), params.format.unwrap_or_default())?;
    let (resolved, seed) = match &cli.command {
        Command::PhaseDiagram(_) => (theory::phase_diagram(&r, &mut out)?, None),
        Command::KlSweep(_) => (theory::kl_sweep(&r, &mut out)?, None),
        Command::Tempered(_) => (theory::tempered(&r, &mut out)?, None),
        Command::DoubleDescent(_) => (theory::double_descent(&r, &mut out)?, None),
        Command::Dmft(_) => (dynamics::dmft(&r, &mut out)?, None),
        Command::DynamicsKl(_) => (dynamics::dynamics_kl(&r, &mut out)?, None),
        Command::Langevin(_) => {
            let seed = params.seed.unwrap_or(0);
            (dynamics::langevin(&r, seed, &mut out)?, Some(seed))
        }
        Command::Validate(_) => return validate::validate(&r, out),
    };
    out.finish(name, &resolved, seed)
}
