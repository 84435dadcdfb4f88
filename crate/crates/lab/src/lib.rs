//! Command-line front end for `hj-core`: loads JSON model files, runs the
//! checks a subcommand asks for and writes a JSON report.
//!
//! Exit codes: 0 when every check passes, 1 when any check fails, 2 for
//! usage errors and malformed models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod model;
pub mod report;

use commands::{Ctx, FlowArgs};
use model::LoadedModel;
use report::RunReport;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Model(String),
    Io(String),
    Core(hj_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Model(m) => write!(f, "model: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hj_core::Error> for CliError {
    fn from(e: hj_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "hj-lab",
    version,
    about = "Sampled Hamilton-Jacobi checks on JSON model files"
)]
pub struct Cli {
    /// Sampling seed (overrides the model).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of samples per check (overrides the model).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Absolute tolerance for every check (overrides the model).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closedness of α and H ∘ α = E.
    CheckHj {
        model: PathBuf,
        /// Level value, overriding the model's `energy`.
        #[arg(long, allow_hyphen_values = true)]
        energy: Option<String>,
    },
    /// Second-order field equation and the two Lagrangian HJ conditions.
    Lagrangian { model: PathBuf },
    /// Principal symbol of a scalar operator.
    Symbol {
        model: PathBuf,
        /// Homogenise with an extra variable (default name `tau`).
        #[arg(long, num_args = 0..=1, default_missing_value = "tau")]
        homogenize: Option<String>,
        /// Report the signature of the second-order symbol.
        #[arg(long)]
        classify: bool,
    },
    /// Quantum HJ residual of an action; optionally the JWKB comparison.
    Quantum {
        model: PathBuf,
        #[arg(long)]
        jwkb: bool,
    },
    /// Necessary bracket condition and the joint HJ system.
    Joint { model: PathBuf },
    /// Integrate Hamilton's equations and optionally write a CSV trajectory.
    Flow {
        model: PathBuf,
        /// Initial state, comma separated, in chart order (q.., p..).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z0: Option<Vec<f64>>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// `rk4` or `implicit-midpoint`.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Structure constants, invariant geometry, realization and momentum map.
    Group { model: PathBuf },
}

impl Command {
    fn model(&self) -> &PathBuf {
        match self {
            Command::CheckHj { model, .. }
            | Command::Lagrangian { model }
            | Command::Symbol { model, .. }
            | Command::Quantum { model, .. }
            | Command::Joint { model }
            | Command::Flow { model, .. }
            | Command::Group { model } => model,
        }
    }
}

/// Run a parsed command line.
pub fn execute(cli: &Cli) -> Result<RunReport, CliError> {
    let model = LoadedModel::load(cli.command.model())?;
    let ctx = Ctx::new(model, cli.seed, cli.samples, cli.tol);
    match &cli.command {
        Command::CheckHj { energy, .. } => commands::check_hj(&ctx, energy.as_deref()),
        Command::Lagrangian { .. } => commands::lagrangian(&ctx),
        Command::Symbol {
            homogenize, classify, ..
        } => commands::symbol(&ctx, homogenize.as_deref(), *classify),
        Command::Quantum { jwkb, .. } => commands::quantum(&ctx, *jwkb),
        Command::Joint { .. } => commands::joint(&ctx),
        Command::Flow {
            z0,
            tmax,
            dt,
            method,
            csv,
            ..
        } => commands::flow(
            &ctx,
            &FlowArgs {
                z0: z0.clone(),
                tmax: *tmax,
                dt: *dt,
                method: method.clone(),
                csv: csv.clone(),
            },
        ),
        Command::Group { .. } => commands::group(&ctx),
    }
}

/// Entry point shared by the binary: parse, run, write, map to an exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let body = report.render();
    let written = match &cli.out {
        Some(path) => commands::write_file(path, &body).map(|()| {
            let _ = stdout.write_all(report.summary().as_bytes());
        }),
        None => {
            let _ = stderr.write_all(report.summary().as_bytes());
            stdout
                .write_all(body.as_bytes())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_ERROR;
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
