//! Run configuration: one TOML document per run, flag overrides applied on
//! top, validated before anything is computed.

use std::path::{Path, PathBuf};

use hnls_core::ground_state::{default_r_max, SolverOptions};
use hnls_core::stability::SpectralOptions;
use hnls_core::{ModelParams, NonlinearitySpec, RadialGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Groundstate,
    Sweep,
    Spectrum,
    Evolve,
    Orbital,
    Blowup,
    Heatkernel,
    Rearrange,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Groundstate => "groundstate",
            Command::Sweep => "sweep",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Orbital => "orbital",
            Command::Blowup => "blowup",
            Command::Heatkernel => "heatkernel",
            Command::Rearrange => "rearrange",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub model: ModelConfig,
    /// Plain power `|R|^p R` when absent.
    pub nonlinearity: Option<NonlinearitySpec>,
    pub grid: GridConfig,
    pub solver: SolverOptions,
    pub sweep: SweepConfig,
    pub spectrum: SpectralOptions,
    pub evolve: EvolveConfig,
    pub orbital: OrbitalConfig,
    pub blowup: BlowupConfig,
    pub heatkernel: HeatKernelConfig,
    pub rearrange: RearrangeConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Groundstate,
            seed: 0,
            model: ModelConfig::default(),
            nonlinearity: None,
            grid: GridConfig::default(),
            solver: SolverOptions::default(),
            sweep: SweepConfig::default(),
            spectrum: SpectralOptions::default(),
            evolve: EvolveConfig::default(),
            orbital: OrbitalConfig::default(),
            blowup: BlowupConfig::default(),
            heatkernel: HeatKernelConfig::default(),
            rearrange: RearrangeConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    /// Taken from the nonlinearity when absent, else 2.
    pub p: Option<f64>,
    /// Fixed-λ solve. Defaults to 1 when neither `lambda` nor `mass` is set.
    pub lambda: Option<f64>,
    /// Fixed-mass solve.
    pub mass: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 3,
            p: None,
            lambda: None,
            mass: None,
        }
    }
}

/// Box and resolution. Unset fields take per-command defaults; `h` and `n`
/// are alternatives.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub r_max: Option<f64>,
    pub h: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl std::str::FromStr for LambdaRange {
    type Err = String;

    /// `start:stop:step`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:stop:step, got `{s}`"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        Ok(LambdaRange {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda: LambdaRange,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lambda: LambdaRange {
                start: 0.5,
                stop: 2.0,
                step: 0.1,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Ground state at `model.lambda`, plus `epsilon` times a unit bump.
    #[default]
    Soliton,
    /// `amplitude · exp(-r²/width²)` in the hyperbolic variable.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub initial: InitialKind,
    pub amplitude: f64,
    pub width: f64,
    pub epsilon: f64,
    pub bump_width: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: f64,
    pub boundary_tol: f64,
    pub max_phase_step: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            initial: InitialKind::Soliton,
            amplitude: 1.0,
            width: 1.0,
            epsilon: 0.0,
            bump_width: 1.0,
            dt: 1e-3,
            t_end: 1.0,
            sample_every: 0.01,
            boundary_tol: 1e-8,
            max_phase_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitalConfig {
    pub epsilon: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: f64,
    pub bump_width: f64,
    pub boundary_tol: f64,
}

impl Default for OrbitalConfig {
    fn default() -> Self {
        OrbitalConfig {
            epsilon: vec![0.0, 1e-3, 1e-2],
            t_end: 10.0,
            dt: 2e-3,
            sample_every: 0.05,
            bump_width: 1.0,
            boundary_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupConfig {
    /// Gaussian `amplitude · exp(-r²/width²)` in the hyperbolic variable.
    pub amplitude: f64,
    pub width: f64,
    pub t_max: f64,
    /// Number of grids: the configured one and its successive halvings.
    pub levels: usize,
    /// `(d-1)²/16` when absent.
    pub c_d: Option<f64>,
    pub dt0: f64,
    pub growth_threshold: f64,
    pub min_dt: f64,
    pub max_phase_step: f64,
    pub max_steps: usize,
    pub record_every: usize,
    pub boundary_tol: f64,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        let o = hnls_core::evolution::BlowupOptions::default();
        BlowupConfig {
            amplitude: 4.0,
            width: 1.0,
            t_max: 1.0,
            levels: 2,
            c_d: o.c_d,
            dt0: o.dt0,
            growth_threshold: o.growth_threshold,
            min_dt: o.min_dt,
            max_phase_step: o.max_phase_step,
            max_steps: o.max_steps,
            record_every: o.record_every,
            boundary_tol: o.boundary_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatKernelConfig {
    pub t: f64,
    pub rho_max: f64,
    /// Distances `rho_max · k / (count - 1)`, `k = 0..count`.
    pub rho_count: usize,
}

impl Default for HeatKernelConfig {
    fn default() -> Self {
        HeatKernelConfig {
            t: 1.0,
            rho_max: 8.0,
            rho_count: 81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RearrangeConfig {
    pub trials: usize,
    /// Gaussian bumps per random profile.
    pub bumps: usize,
}

impl Default for RearrangeConfig {
    fn default() -> Self {
        RearrangeConfig { trials: 20, bumps: 4 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to `HNLS_OUTPUT_ROOT` (or the working
    /// directory). Defaults to the command name.
    pub dir: Option<PathBuf>,
    pub format: Format,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

fn bad(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(config_error)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Io(format!("cannot serialise manifest: {e}")))
    }

    /// Loads `path` (if any), applies `key.path = value` overrides in order
    /// and sets the command.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)], command: Command) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| bad("config", format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(config_error)?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            set_path(&mut table, key, parse_value(value))?;
        }
        table.insert("command".into(), toml::Value::String(command.name().into()));
        toml::Value::Table(table).try_into().map_err(config_error)
    }

    pub fn spec(&self) -> NonlinearitySpec {
        self.nonlinearity
            .unwrap_or_else(|| NonlinearitySpec::power(self.model.p.unwrap_or(2.0)))
    }

    pub fn lambda(&self) -> f64 {
        self.model.lambda.unwrap_or(1.0)
    }

    pub fn params_at(&self, lambda: f64) -> Result<ModelParams, CliError> {
        self.spec()
            .model_params(self.model.d, lambda)
            .map_err(CliError::from_core)
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        self.params_at(self.lambda())
    }

    /// Grid from the config, falling back to `r_max` and spacing `h`.
    pub fn grid_or(&self, r_max: f64, h: f64) -> Result<RadialGrid, CliError> {
        let r = self.grid.r_max.unwrap_or(r_max);
        let g = match (self.grid.n, self.grid.h) {
            (Some(n), _) => RadialGrid::new(r, n),
            (None, Some(h)) => RadialGrid::with_spacing(r, h),
            (None, None) => RadialGrid::with_spacing(r, h),
        };
        g.map_err(CliError::from_core)
    }

    /// Grid for a solve at `params`: the default box and `h = 0.01`.
    pub fn solve_grid(&self, params: &ModelParams) -> Result<RadialGrid, CliError> {
        self.grid_or(default_r_max(params), 0.01)
    }

    /// Checks every field the command reads.
    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        if m.d < 2 {
            return Err(bad("model.d", format!("dimension must be >= 2, got {}", m.d)));
        }
        let g = &self.grid;
        if g.n.is_some() && g.h.is_some() {
            return Err(bad("grid.n", "set either grid.n or grid.h, not both"));
        }
        positive_opt("grid.r_max", g.r_max)?;
        positive_opt("grid.h", g.h)?;
        if g.n == Some(0) {
            return Err(bad("grid.n", "must be positive"));
        }
        if let (Some(r), Some(h)) = (g.r_max, g.h) {
            if h >= r {
                return Err(bad("grid.h", format!("spacing {h} must be below r_max {r}")));
            }
        }
        // Heat kernels and rearrangements do not involve the NLS model.
        if !matches!(self.command, Command::Heatkernel | Command::Rearrange) {
            self.validate_model()?;
        }
        self.validate_command()
    }

    fn validate_model(&self) -> Result<(), CliError> {
        let m = &self.model;
        if let (Some(p), Some(spec)) = (m.p, self.nonlinearity) {
            if p != spec.model_power() {
                return Err(bad(
                    "model.p",
                    format!("{p} conflicts with the nonlinearity power {}", spec.model_power()),
                ));
            }
        }
        self.spec()
            .validate(m.d)
            .map_err(|e| prefixed("nonlinearity", CliError::from_core(e)))?;
        finite_opt("model.lambda", m.lambda)?;
        if let Some(q) = m.mass {
            if !(q > 0.0 && q.is_finite()) {
                return Err(bad("model.mass", format!("must be positive, got {q}")));
            }
            if m.lambda.is_some() {
                return Err(bad("model.mass", "set either model.lambda or model.mass, not both"));
            }
            if !matches!(self.command, Command::Groundstate) {
                return Err(bad(
                    "model.mass",
                    format!("only groundstate solves at fixed mass, not {}", self.command.name()),
                ));
            }
        }
        positive("solver.tol", self.solver.tol)?;
        positive_opt("solver.tau0", self.solver.tau0)?;
        positive("solver.tau_max", self.solver.tau_max)?;
        if self.solver.max_iters == 0 {
            return Err(bad("solver.max_iters", "must be positive"));
        }
        Ok(())
    }

    fn validate_command(&self) -> Result<(), CliError> {
        let m = &self.model;
        match self.command {
            Command::Groundstate | Command::Verify => {
                if m.mass.is_none() {
                    self.params().map_err(|e| prefixed("model", e))?;
                }
            }
            Command::Sweep => {
                if self.grid.n.is_some() {
                    return Err(bad("grid.n", "sweeps share one spacing; set grid.h instead"));
                }
                let r = &self.sweep.lambda;
                finite("sweep.lambda.start", r.start)?;
                finite("sweep.lambda.stop", r.stop)?;
                positive("sweep.lambda.step", r.step)?;
                if r.stop < r.start {
                    return Err(bad(
                        "sweep.lambda",
                        format!("stop {} is below start {}", r.stop, r.start),
                    ));
                }
                self.params_at(r.start).map_err(|e| prefixed("sweep.lambda.start", e))?;
            }
            Command::Spectrum => {
                self.params().map_err(|e| prefixed("model", e))?;
                if self.spectrum.k == 0 {
                    return Err(bad("spectrum.k", "need at least one eigenpair"));
                }
                if self.spectrum.hamiltonian_n < 8 {
                    return Err(bad("spectrum.hamiltonian_n", "need at least 8 nodes"));
                }
            }
            Command::Evolve => {
                self.params().map_err(|e| prefixed("model", e))?;
                let e = &self.evolve;
                positive("evolve.dt", e.dt)?;
                nonnegative("evolve.t_end", e.t_end)?;
                positive("evolve.sample_every", e.sample_every)?;
                positive("evolve.width", e.width)?;
                positive("evolve.bump_width", e.bump_width)?;
                positive("evolve.boundary_tol", e.boundary_tol)?;
                positive("evolve.max_phase_step", e.max_phase_step)?;
                finite("evolve.amplitude", e.amplitude)?;
                nonnegative("evolve.epsilon", e.epsilon)?;
            }
            Command::Orbital => {
                let params = self.params().map_err(|e| prefixed("model", e))?;
                if !params.is_mass_subcritical() {
                    return Err(bad(
                        "model.p",
                        format!("orbital runs need p < 4/d = {}, got {}", params.p_crit_mass, params.p),
                    ));
                }
                let o = &self.orbital;
                if o.epsilon.is_empty() {
                    return Err(bad("orbital.epsilon", "need at least one value"));
                }
                for &e in &o.epsilon {
                    nonnegative("orbital.epsilon", e)?;
                }
                positive("orbital.t_end", o.t_end)?;
                positive("orbital.dt", o.dt)?;
                positive("orbital.sample_every", o.sample_every)?;
                positive("orbital.bump_width", o.bump_width)?;
                positive("orbital.boundary_tol", o.boundary_tol)?;
            }
            Command::Blowup => {
                self.params_at(self.model.lambda.unwrap_or(0.0))
                    .map_err(|e| prefixed("model", e))?;
                let b = &self.blowup;
                finite("blowup.amplitude", b.amplitude)?;
                positive("blowup.width", b.width)?;
                positive("blowup.t_max", b.t_max)?;
                if b.levels == 0 {
                    return Err(bad("blowup.levels", "need at least one grid"));
                }
                positive_opt("blowup.c_d", b.c_d)?;
                positive("blowup.dt0", b.dt0)?;
                positive("blowup.min_dt", b.min_dt)?;
                positive("blowup.max_phase_step", b.max_phase_step)?;
                positive("blowup.boundary_tol", b.boundary_tol)?;
                if !(b.growth_threshold > 1.0) {
                    return Err(bad("blowup.growth_threshold", "must exceed 1"));
                }
                if b.max_steps == 0 {
                    return Err(bad("blowup.max_steps", "must be positive"));
                }
            }
            Command::Heatkernel => {
                if m.d > hnls_core::heat_kernel::D_MAX {
                    return Err(bad(
                        "model.d",
                        format!("heat kernels are built up to d = {}", hnls_core::heat_kernel::D_MAX),
                    ));
                }
                let h = &self.heatkernel;
                positive("heatkernel.t", h.t)?;
                positive("heatkernel.rho_max", h.rho_max)?;
                if h.rho_count < 2 {
                    return Err(bad("heatkernel.rho_count", "need at least two distances"));
                }
            }
            Command::Rearrange => {
                if self.rearrange.trials == 0 {
                    return Err(bad("rearrange.trials", "must be positive"));
                }
                if self.rearrange.bumps == 0 {
                    return Err(bad("rearrange.bumps", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Output directory after resolving against `root`.
    pub fn output_dir(&self, root: Option<&Path>) -> PathBuf {
        let dir = self
            .output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(self.command.name()));
        match root {
            Some(r) => r.join(dir),
            None => dir,
        }
    }
}

fn config_error(e: toml::de::Error) -> CliError {
    let msg = e.message().to_string();
    let field = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.contains("field"))
        .unwrap_or("config")
        .to_string();
    CliError::Config { field, reason: msg }
}

fn prefixed(prefix: &str, e: CliError) -> CliError {
    match e {
        CliError::Config { field, reason } => CliError::Config {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be finite, got {v}")))
    }
}

fn finite_opt(field: &str, v: Option<f64>) -> Result<(), CliError> {
    v.map_or(Ok(()), |v| finite(field, v))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

fn positive_opt(field: &str, v: Option<f64>) -> Result<(), CliError> {
    v.map_or(Ok(()), |v| positive(field, v))
}

fn nonnegative(field: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be nonnegative and finite, got {v}")))
    }
}

/// A TOML value if `text` parses as one, otherwise the bare string.
pub fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| bad(key, "empty key"))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| bad(key, format!("`{part}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
