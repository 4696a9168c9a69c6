//! Command-line driver: config resolution, subcommand dispatch and
//! CSV/JSON artifacts.

pub mod config;
mod output;
mod run;

use clap::{Args, Parser, ValueEnum};

pub use config::{parse_config, parse_config_str, AuditEntry, Provenance, Resolved, RunConfig};
pub use run::{execute, Artifacts};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config parse error: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("config error in `{field}`: {reason}")]
    Field { field: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{module}: {source}")]
    Model {
        module: &'static str,
        #[source]
        source: ybcav_core::Error,
    },

    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub(crate) fn field(field: &str, reason: impl Into<String>) -> Self {
        CliError::Field {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// 2 for bad configuration, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Field { .. } | CliError::Config(_) => 2,
            CliError::Model { source, .. } if source.is_input_error() => 2,
            CliError::Model { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<ybcav_core::Error> for CliError {
    fn from(source: ybcav_core::Error) -> Self {
        CliError::Model { module: "config", source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Lifetime,
    PumpProbe,
    Rabi,
    Ramsey,
    Echo,
    G2,
    Ple,
    Lifetimes,
    Purcell,
    Reflection,
    Bragg,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lifetime => "lifetime",
            Command::PumpProbe => "pump-probe",
            Command::Rabi => "rabi",
            Command::Ramsey => "ramsey",
            Command::Echo => "echo",
            Command::G2 => "g2",
            Command::Ple => "ple",
            Command::Lifetimes => "lifetimes",
            Command::Purcell => "purcell",
            Command::Reflection => "reflection",
            Command::Bragg => "bragg",
            Command::Calibrate => "calibrate",
        }
    }

    /// Model layer a numerical failure is reported against.
    pub fn module(self) -> &'static str {
        match self {
            Command::Lifetime | Command::PumpProbe | Command::Rabi | Command::Ramsey | Command::Echo => {
                "protocols"
            }
            Command::Calibrate => "protocols/calibrate",
            Command::G2 => "photon-stats",
            Command::Ple | Command::Lifetimes => "ensemble",
            Command::Purcell | Command::Reflection | Command::Bragg => "cavity-model",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, conflicts_with = "paper_scale")]
    pub shots: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Use the experiment's shot count per point.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Parser)]
#[command(name = "ybcav", version, about = "Cavity-coupled Yb ion simulator")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn mark_user(resolved: &mut Resolved, field: &str) {
    if let Some(a) = resolved.audit.iter_mut().find(|a| a.field == field) {
        a.source = Provenance::User;
    }
}

/// Load the config (or defaults) and apply command-line overrides.
pub fn resolve(overrides: &Overrides) -> Result<Resolved, CliError> {
    let mut resolved = match &overrides.config {
        Some(path) => parse_config(path)?,
        None => parse_config_str("{}")?,
    };
    if let Some(seed) = overrides.seed {
        resolved.config.master_seed = seed;
        mark_user(&mut resolved, "master_seed");
    }
    let shots = overrides
        .shots
        .or(overrides.paper_scale.then_some(ybcav_core::defaults::PAPER_SCALE_SHOTS));
    if let Some(shots) = shots {
        resolved.config.protocol.shots = shots;
        mark_user(&mut resolved, "protocol.shots");
    }
    if let Some(out) = &overrides.out {
        resolved.config.output = out.clone();
        mark_user(&mut resolved, "output");
    }
    resolved.config.validate()?;
    Ok(resolved)
}

/// Parse, run and report; returns the process exit code.
pub fn run_cli(cli: &Cli) -> i32 {
    let outcome = resolve(&cli.overrides).and_then(|r| execute(cli.command, &r));
    match outcome {
        Ok(artifacts) => {
            for f in &artifacts.files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
