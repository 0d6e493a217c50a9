//! `lcf`: batch driver for solve, failure probability, shape sensitivity,
//! finite-difference validation and CMB calibration.
//!
//! Exit codes: 0 ok, 2 configuration or file error, 3 solver or numerical
//! error, 4 validation failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::LoadedConfig;

#[derive(Parser, Debug)]
#[command(name = "lcf", version, about = "LCF failure probability and shape gradients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (overrides `threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Also write the assembled stiffness, load and adjoint.
    #[arg(long, global = true)]
    debug_dump: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Solve for the displacement field.
    Solve,
    /// Objective J, Weibull scale and PoF(t) table.
    Pof,
    /// Shape gradient dJ/dX and dPoF/dX.
    Sensitivity,
    /// Finite-difference oracle suite.
    Validate,
    /// Median to unit-area probabilistic CMB constants.
    Calibrate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Pof => "pof",
            Command::Sensitivity => "sensitivity",
            Command::Validate => "validate",
            Command::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Validation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl From<lcf_shape::Error> for CliError {
    fn from(e: lcf_shape::Error) -> Self {
        use lcf_shape::Error as E;
        match e {
            E::SingularSystem { .. }
            | E::NoConvergence { .. }
            | E::DegenerateElement { .. }
            | E::DegenerateFace { .. }
            | E::NoBracket { .. }
            | E::NonConvergence { .. }
            | E::IsolatedNode { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut loaded = match &cli.config {
        Some(path) => LoadedConfig::read(path)?,
        None if cli.command == Command::Calibrate => LoadedConfig::defaults(),
        None => return Err(CliError::Config("--config is required".into())),
    };
    if let Some(t) = cli.threads {
        loaded.config.threads = Some(t);
    }
    if let Some(o) = &cli.output {
        loaded.config.output_dir = o.clone();
    }
    loaded.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = loaded.config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let started = std::time::Instant::now();
    let out = loaded.output_dir();
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    let (outputs, result) = pool.install(|| {
        let mut ctx = commands::Context::new(&loaded, &out, cli.debug_dump);
        let result = match cli.command {
            Command::Solve => commands::solve(&mut ctx),
            Command::Pof => commands::pof(&mut ctx),
            Command::Sensitivity => commands::sensitivity(&mut ctx),
            Command::Validate => commands::validate(&mut ctx),
            Command::Calibrate => commands::calibrate(&mut ctx),
        };
        (ctx.written, result)
    });
    let m = manifest::Manifest::new(
        cli.command.name(),
        &loaded.config,
        pool.current_num_threads(),
        started.elapsed(),
        outputs,
        result.as_ref().err().map(|e| e.to_string()),
    )?;
    m.write(&out)?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lcf {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
