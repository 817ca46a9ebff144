use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;
use translab::evolution::Scheme;
use translab::Equation;
use translab_cli::commands::{self, ChecksFailed};
use translab_cli::config::{
    self, read_layer, Command, ConfigError, PartialConfig, PartialGrid, PartialIntegrator, PartialOutput,
};
use translab_cli::output::RunDir;

/// Transverse instability laboratory for line solitons of KP-I and NLS.
#[derive(Debug, Parser)]
#[command(name = "translab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// KP-I unstable transverse modes and resolvent sweep for period L.
    Spectrum,
    /// NLS transverse modes, growth curve and bifurcation check for period L.
    NlsSpectrum,
    /// Evolve Q + delta u0 and record diagnostics.
    Evolve,
    /// Build the expansion iterates u0..uM.
    Expand,
    /// Single escape-time experiment.
    Instability,
    /// Escape-time scaling over several amplitudes.
    Sweep,
    /// Run the acceptance checks and print a pass/fail table.
    Verify {
        /// Only the checks that finish in seconds.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Args)]
struct Flags {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_equation)]
    equation: Option<Equation>,
    /// Transverse period.
    #[arg(long = "L", global = true)]
    l: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Comma-separated amplitudes for `sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Expansion order.
    #[arg(long = "M", global = true)]
    order: Option<usize>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    eta_threshold: Option<f64>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    track_remainder: bool,
    #[arg(long, global = true)]
    nx: Option<usize>,
    #[arg(long, global = true)]
    ny: Option<usize>,
    #[arg(long, global = true)]
    x_half: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    #[arg(long, global = true)]
    no_dealias: bool,
    #[arg(long, global = true)]
    sample_stride: Option<usize>,
    #[arg(long, global = true)]
    snapshot_stride: Option<usize>,
    /// Parent directory for run outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn parse_equation(s: &str) -> std::result::Result<Equation, String> {
    match s {
        "kp" => Ok(Equation::Kp),
        "nls" => Ok(Equation::Nls),
        _ => Err(format!("unknown equation `{s}` (kp, nls)")),
    }
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    match s {
        "exponential-rk4" => Ok(Scheme::ExponentialRk4),
        "strang-split" => Ok(Scheme::StrangSplit),
        _ => Err(format!("unknown scheme `{s}` (exponential-rk4, strang-split)")),
    }
}

impl Flags {
    fn layer(&self, quick: Option<bool>) -> PartialConfig {
        PartialConfig {
            command: None,
            equation: self.equation,
            l: self.l,
            delta: self.delta,
            deltas: self.deltas.clone(),
            order: self.order,
            kappa: self.kappa,
            eta_threshold: self.eta_threshold,
            t_max: self.t_max,
            track_remainder: self.track_remainder.then_some(true),
            quick,
            grid: PartialGrid { nx: self.nx, ny: self.ny, x_half: self.x_half },
            integrator: PartialIntegrator {
                dt: self.dt,
                scheme: self.scheme,
                dealias: self.no_dealias.then_some(false),
                sample_stride: self.sample_stride,
                snapshot_stride: self.snapshot_stride,
            },
            output: PartialOutput { dir: self.out.clone(), verbosity: (self.verbose > 0).then_some(self.verbose) },
        }
    }
}

fn configure_workers() -> std::result::Result<(), ConfigError> {
    let Ok(v) = std::env::var("TRANSLAB_WORKERS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::new("TRANSLAB_WORKERS", format!("`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::new("TRANSLAB_WORKERS", e.to_string()))
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if e.downcast_ref::<ConfigError>().is_some() {
        "ConfigError"
    } else if e.downcast_ref::<ChecksFailed>().is_some() {
        "ChecksFailed"
    } else if let Some(t) = e.downcast_ref::<translab::Error>() {
        t.kind()
    } else if e.downcast_ref::<std::io::Error>().is_some() {
        "Io"
    } else {
        "Internal"
    }
}

fn error_record(command: Command, e: &anyhow::Error) -> serde_json::Value {
    let field = e.downcast_ref::<ConfigError>().map(|c| c.field.clone());
    json!({
        "status": "error",
        "command": command.name(),
        "kind": error_kind(e),
        "field": field,
        "message": format!("{e:#}"),
    })
}

fn execute(command: Command, flags: PartialConfig, file: Option<PathBuf>) -> (Option<RunDir>, Result<()>) {
    let config = match file.as_deref().map(read_layer).transpose().and_then(|f| config::parse_config(command, flags, f))
    {
        Ok(c) => c,
        Err(e) => return (None, Err(e.into())),
    };
    if let Err(e) = configure_workers() {
        return (None, Err(e.into()));
    }
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S").to_string();
    let dir = match RunDir::create(&config.output.dir, &stamp, command.name()) {
        Ok(d) => d,
        Err(e) => return (None, Err(e)),
    };
    let result = (|| -> Result<()> {
        dir.write_text("config.toml", &config.to_toml())?;
        if config.output.verbosity > 0 {
            eprintln!("run directory {}", dir.root.display());
        }
        let outcome = commands::run(&config)?;
        for t in &outcome.tables {
            dir.write_table(t)?;
        }
        for (name, f) in &outcome.fields {
            dir.write_field(name, f)?;
        }
        dir.write_json(
            "report.json",
            &json!({ "command": command.name(), "status": "ok", "results": outcome.report }),
        )?;
        print!("{}", outcome.summary);
        match outcome.failure {
            Some(msg) => Err(ChecksFailed(msg).into()),
            None => Ok(()),
        }
    })();
    (Some(dir), result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, quick) = match cli.command {
        Cmd::Spectrum => (Command::Spectrum, None),
        Cmd::NlsSpectrum => (Command::NlsSpectrum, None),
        Cmd::Evolve => (Command::Evolve, None),
        Cmd::Expand => (Command::Expand, None),
        Cmd::Instability => (Command::Instability, None),
        Cmd::Sweep => (Command::Sweep, None),
        Cmd::Verify { quick } => (Command::Verify, quick.then_some(true)),
    };
    let flags = cli.flags.layer(quick);
    let (dir, result) = execute(command, flags, cli.flags.config.clone());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = error_record(command, &e);
            if let Some(d) = &dir {
                // The record still goes to stderr if it cannot be written.
                let _ = d.write_json("error.json", &record);
            }
            eprintln!("{record}");
            ExitCode::from(if record["kind"] == "ConfigError" { 2 } else { 1 })
        }
    }
}
