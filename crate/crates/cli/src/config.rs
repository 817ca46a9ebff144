//! Run configuration: defaults, a TOML file and command-line flags, merged in that order
//! of increasing precedence.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use translab::evolution::{IntegratorConfig, Scheme};
use translab::grid::Grid2D;
use translab::lab::ExperimentSpec;
use translab::Equation;

pub const DEFAULT_DELTAS: [f64; 5] = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `grid.nx`.
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    NlsSpectrum,
    Evolve,
    Expand,
    Instability,
    Sweep,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::NlsSpectrum => "nls-spectrum",
            Command::Evolve => "evolve",
            Command::Expand => "expand",
            Command::Instability => "instability",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub x_half: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    pub sample_stride: usize,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Parent of the per-run directories.
    pub dir: PathBuf,
    pub verbosity: u8,
}

/// Fully resolved configuration; this is what a run writes to `config.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub equation: Equation,
    #[serde(rename = "L")]
    pub l: f64,
    pub delta: f64,
    pub deltas: Vec<f64>,
    #[serde(rename = "M")]
    pub order: usize,
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_threshold: Option<f64>,
    pub t_max: f64,
    pub track_remainder: bool,
    pub quick: bool,
    pub grid: GridConfig,
    pub integrator: IntegratorSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialGrid {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub x_half: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialIntegrator {
    pub dt: Option<f64>,
    pub scheme: Option<Scheme>,
    pub dealias: Option<bool>,
    pub sample_stride: Option<usize>,
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialOutput {
    pub dir: Option<PathBuf>,
    pub verbosity: Option<u8>,
}

/// One layer of settings (file or flags); unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<Command>,
    pub equation: Option<Equation>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub delta: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    #[serde(rename = "M")]
    pub order: Option<usize>,
    pub kappa: Option<f64>,
    pub eta_threshold: Option<f64>,
    pub t_max: Option<f64>,
    pub track_remainder: Option<bool>,
    pub quick: Option<bool>,
    #[serde(default)]
    pub grid: PartialGrid,
    #[serde(default)]
    pub integrator: PartialIntegrator,
    #[serde(default)]
    pub output: PartialOutput,
}

impl PartialConfig {
    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: PartialConfig) -> PartialConfig {
        PartialConfig {
            command: self.command.or(lower.command),
            equation: self.equation.or(lower.equation),
            l: self.l.or(lower.l),
            delta: self.delta.or(lower.delta),
            deltas: self.deltas.or(lower.deltas),
            order: self.order.or(lower.order),
            kappa: self.kappa.or(lower.kappa),
            eta_threshold: self.eta_threshold.or(lower.eta_threshold),
            t_max: self.t_max.or(lower.t_max),
            track_remainder: self.track_remainder.or(lower.track_remainder),
            quick: self.quick.or(lower.quick),
            grid: PartialGrid {
                nx: self.grid.nx.or(lower.grid.nx),
                ny: self.grid.ny.or(lower.grid.ny),
                x_half: self.grid.x_half.or(lower.grid.x_half),
            },
            integrator: PartialIntegrator {
                dt: self.integrator.dt.or(lower.integrator.dt),
                scheme: self.integrator.scheme.or(lower.integrator.scheme),
                dealias: self.integrator.dealias.or(lower.integrator.dealias),
                sample_stride: self.integrator.sample_stride.or(lower.integrator.sample_stride),
                snapshot_stride: self.integrator.snapshot_stride.or(lower.integrator.snapshot_stride),
            },
            output: PartialOutput {
                dir: self.output.dir.or(lower.output.dir),
                verbosity: self.output.verbosity.or(lower.output.verbosity),
            },
        }
    }
}

/// Parses a TOML layer; errors carry the path of the offending key.
pub fn parse_layer(text: &str) -> Result<PartialConfig, ConfigError> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| ConfigError::new("<file>", e.to_string().trim_end().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<file>".to_string() } else { path };
        ConfigError::new(field, e.into_inner().message().to_string())
    })
}

pub fn read_layer(path: &Path) -> Result<PartialConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_layer(&text)
}

/// Merges `flags` over `file` over the defaults for `command`, then validates.
pub fn parse_config(
    command: Command,
    flags: PartialConfig,
    file: Option<PartialConfig>,
) -> Result<RunConfig, ConfigError> {
    let p = flags.over(file.unwrap_or_default());
    resolve(command, p)
}

fn resolve(command: Command, p: PartialConfig) -> Result<RunConfig, ConfigError> {
    let equation = match (command, p.equation) {
        (Command::Spectrum, Some(Equation::Nls)) => {
            return Err(ConfigError::new("equation", "spectrum covers KP only; use nls-spectrum"))
        }
        (Command::NlsSpectrum, Some(Equation::Kp)) => {
            return Err(ConfigError::new("equation", "nls-spectrum covers NLS only; use spectrum"))
        }
        (Command::NlsSpectrum, _) => Equation::Nls,
        (_, Some(e)) => e,
        (_, None) => Equation::Kp,
    };
    let lab = ExperimentSpec::default_for(equation);
    let l = match (command, p.l) {
        (_, Some(l)) => l,
        (Command::Spectrum | Command::NlsSpectrum, None) => {
            return Err(ConfigError::new("L", "the transverse period L is required"))
        }
        (_, None) => lab.grid.l,
    };
    let (nx, x_half) = match command {
        Command::Spectrum => (512, 40.0),
        Command::NlsSpectrum => (256, 20.0),
        _ => (lab.grid.nx, lab.grid.x_half),
    };
    let t_max = match command {
        Command::Evolve => 20.0,
        Command::Expand => 15.0,
        _ => lab.t_max,
    };
    let integ = lab.integrator;
    let config = RunConfig {
        command,
        equation,
        l,
        delta: p.delta.unwrap_or(lab.delta),
        deltas: p.deltas.unwrap_or_else(|| DEFAULT_DELTAS.to_vec()),
        order: p.order.unwrap_or(lab.order),
        kappa: p.kappa.unwrap_or(lab.kappa),
        eta_threshold: p.eta_threshold,
        t_max: p.t_max.unwrap_or(t_max),
        track_remainder: p.track_remainder.unwrap_or(false),
        quick: p.quick.unwrap_or(false),
        grid: GridConfig {
            nx: p.grid.nx.unwrap_or(nx),
            ny: p.grid.ny.unwrap_or(lab.grid.ny),
            x_half: p.grid.x_half.unwrap_or(x_half),
        },
        integrator: IntegratorSection {
            dt: p.integrator.dt.unwrap_or(integ.dt),
            scheme: p.integrator.scheme.unwrap_or(integ.scheme),
            dealias: p.integrator.dealias.unwrap_or(integ.dealias),
            sample_stride: p.integrator.sample_stride.unwrap_or(integ.sample_stride),
            snapshot_stride: p.integrator.snapshot_stride.unwrap_or(integ.snapshot_stride),
        },
        output: OutputConfig {
            dir: p.output.dir.unwrap_or_else(|| PathBuf::from("runs")),
            verbosity: p.output.verbosity.unwrap_or(0),
        },
    };
    config.validate()?;
    Ok(config)
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("{v} must be positive and finite")))
    }
}

impl RunConfig {
    pub fn grid2d(&self) -> Grid2D {
        Grid2D { nx: self.grid.nx, ny: self.grid.ny, x_half: self.grid.x_half, l: self.l }
    }

    /// Integrator running over `[0, t_max]`.
    pub fn integrator_config(&self) -> IntegratorConfig {
        let s = self.integrator;
        IntegratorConfig {
            dt: s.dt,
            scheme: s.scheme,
            t_end: self.t_max,
            dealias: s.dealias,
            sample_stride: s.sample_stride,
            snapshot_stride: s.snapshot_stride,
        }
    }

    pub fn experiment(&self) -> ExperimentSpec {
        ExperimentSpec {
            equation: self.equation,
            grid: self.grid2d(),
            delta: self.delta,
            order: self.order,
            kappa: self.kappa,
            eta_threshold: self.eta_threshold,
            t_max: self.t_max,
            integrator: self.integrator_config(),
            track_remainder: self.track_remainder,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("L", self.l)?;
        positive("grid.x_half", self.grid.x_half)?;
        Grid2D::new(self.grid.nx, self.grid.ny, self.grid.x_half, self.l).map_err(|e| {
            let field = if self.grid.ny == 0 || !self.grid.ny.is_power_of_two() { "grid.ny" } else { "grid.nx" };
            ConfigError::new(field, e.to_string())
        })?;
        positive("kappa", self.kappa)?;
        if !(self.delta >= 0.0 && self.delta <= self.kappa) {
            return Err(ConfigError::new("delta", format!("{} must lie in [0, kappa={}]", self.delta, self.kappa)));
        }
        for (i, &d) in self.deltas.iter().enumerate() {
            positive(&format!("deltas[{i}]"), d)?;
            if d > self.kappa {
                return Err(ConfigError::new(format!("deltas[{i}]"), format!("{d} exceeds kappa={}", self.kappa)));
            }
        }
        if self.command == Command::Sweep && self.deltas.len() < 2 {
            return Err(ConfigError::new("deltas", "a sweep needs at least two amplitudes"));
        }
        if let Some(eta) = self.eta_threshold {
            positive("eta_threshold", eta)?;
        }
        positive("t_max", self.t_max)?;
        positive("integrator.dt", self.integrator.dt)?;
        if self.integrator.sample_stride == 0 {
            return Err(ConfigError::new("integrator.sample_stride", "must be at least 1"));
        }
        self.integrator_config().steps().map_err(|e| ConfigError::new("t_max", e.to_string()))?;
        let needs_hierarchy =
            self.command == Command::Expand || (self.track_remainder && self.command != Command::Verify);
        if needs_hierarchy && self.integrator.scheme != Scheme::ExponentialRk4 {
            return Err(ConfigError::new("integrator.scheme", "the expansion hierarchy needs exponential-rk4"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
