//! Front end for the `hnls` binary: argument parsing, run configuration,
//! dispatch to the solvers and result files.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Command, Format, RunConfig};

/// Exit status for a property violation reported by `verify`.
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{0}")]
    Violation(String),
    #[error("output failure: {0}")]
    Io(String),
}

impl CliError {
    /// Precondition failures map to config errors, everything else to
    /// solver failures.
    pub fn from_core(e: hnls_core::Error) -> Self {
        match e {
            hnls_core::Error::InvalidParameter { field, reason } => CliError::Config {
                field: field.to_string(),
                reason,
            },
            hnls_core::Error::Domain(reason) => CliError::Config {
                field: "domain".into(),
                reason,
            },
            hnls_core::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Violation(_) => EXIT_VIOLATION,
            CliError::Solver(_) | CliError::Io(_) => EXIT_SOLVER,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hnls",
    version,
    about = "Ground states, stability and dynamics of NLS on hyperbolic space"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Solve for one ground state (fixed lambda or fixed mass).
    Groundstate(Common),
    /// Solve along a lambda range and test the convexity of delta.
    Sweep(Common),
    /// Linearise about a ground state and report the spectrum.
    Spectrum(Common),
    /// Time-evolve a soliton or Gaussian.
    Evolve(Common),
    /// Perturb a soliton and track its distance to the orbit.
    Orbital(Common),
    /// Run the blow-up probe on a Gaussian over refined grids.
    Blowup(Common),
    /// Tabulate a heat kernel and check its radial monotonicity.
    Heatkernel(Common),
    /// Random rearrangement tests.
    Rearrange(Common),
    /// Run the property suite; nonzero exit on any violation.
    Verify(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any field, e.g. `--set solver.tol=1e-10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// A value, or `start:stop:step` for sweeps.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (relative to HNLS_OUTPUT_ROOT when set).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Groundstate(c) => (Command::Groundstate, c),
            Sub::Sweep(c) => (Command::Sweep, c),
            Sub::Spectrum(c) => (Command::Spectrum, c),
            Sub::Evolve(c) => (Command::Evolve, c),
            Sub::Orbital(c) => (Command::Orbital, c),
            Sub::Blowup(c) => (Command::Blowup, c),
            Sub::Heatkernel(c) => (Command::Heatkernel, c),
            Sub::Rearrange(c) => (Command::Rearrange, c),
            Sub::Verify(c) => (Command::Verify, c),
        }
    }
}

impl Common {
    /// Flag values as `key = value` overrides, applied after `--set`.
    fn overrides(&self, command: Command) -> Result<Vec<(String, String)>, CliError> {
        let mut out = Vec::new();
        for item in &self.set {
            let (k, v) = item.split_once('=').ok_or_else(|| CliError::Config {
                field: item.clone(),
                reason: "expected KEY=VALUE".into(),
            })?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        if let Some(d) = self.d {
            push("model.d", d.to_string());
        }
        if let Some(p) = self.p {
            push("model.p", toml_float(p));
        }
        if let Some(l) = &self.lambda {
            if l.contains(':') || command == Command::Sweep {
                let r: config::LambdaRange = if l.contains(':') {
                    l.parse().map_err(|reason| CliError::Config {
                        field: "sweep.lambda".into(),
                        reason,
                    })?
                } else {
                    let v: f64 = parse_flag("lambda", l)?;
                    config::LambdaRange {
                        start: v,
                        stop: v,
                        step: 1.0,
                    }
                };
                push("sweep.lambda.start", toml_float(r.start));
                push("sweep.lambda.stop", toml_float(r.stop));
                push("sweep.lambda.step", toml_float(r.step));
            } else {
                let v: f64 = parse_flag("lambda", l)?;
                push("model.lambda", toml_float(v));
            }
        }
        if let Some(m) = self.mass {
            push("model.mass", toml_float(m));
        }
        if let Some(r) = self.r_max {
            push("grid.r_max", toml_float(r));
        }
        if let Some(h) = self.h {
            push("grid.h", toml_float(h));
        }
        if let Some(n) = self.n {
            push("grid.n", n.to_string());
        }
        if let Some(s) = self.seed {
            push("seed", s.to_string());
        }
        if let Some(o) = &self.out {
            push(
                "output.dir",
                toml::Value::String(o.to_string_lossy().into_owned()).to_string(),
            );
        }
        if let Some(f) = self.format {
            let name = match f {
                Format::Csv => "\"csv\"",
                Format::Json => "\"json\"",
            };
            push("output.format", name.into());
        }
        Ok(out)
    }
}

fn parse_flag(field: &str, text: &str) -> Result<f64, CliError> {
    text.trim().parse().map_err(|e| CliError::Config {
        field: field.into(),
        reason: format!("`{text}`: {e}"),
    })
}

fn toml_float(v: f64) -> String {
    toml::Value::Float(v).to_string()
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let (command, common) = cli.command.split();
    let root = std::env::var_os("HNLS_OUTPUT_ROOT").map(PathBuf::from);
    let result = common
        .overrides(command)
        .and_then(|ov| RunConfig::load(common.config.as_deref(), &ov, command))
        .and_then(|cfg| {
            cfg.validate()?;
            commands::execute(&cfg, root.as_deref())
        });
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("hnls {}: {e}", command.name());
            e.exit_code()
        }
    }
}
