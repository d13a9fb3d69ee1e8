mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use crate::config::{parse_override, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] icann_core::Error),
    #[error("{0} of {1} properties failed")]
    Properties(usize, usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Model(e) if e.is_numerical() => 2,
            CliError::Model(_) => 1,
            CliError::Properties(..) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "icann", version, about = "Invariant-based elastoplastic network models: data, training, simulation")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed` in the file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory of the run.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a configuration key, e.g. `--set train.optimizer.max_epochs=200`. Applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one stress-history CSV per load case.
    Generate(GenerateArgs),
    /// Pretrain and train a weight set on dataset CSVs.
    Train(TrainArgs),
    /// Drive a model along a load path and write its stress history.
    Simulate(ModelArgs),
    /// Trace a yield surface in a principal stress plane or as a 3D cloud.
    Trace(TraceArgs),
    /// Run the seeded property suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// vm_af, vm_perfect, tschoegl or network.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated load cases: UT, UC, EB, UT-unl, Cyclic.
    #[arg(long, value_delimiter = ',')]
    cases: Vec<String>,
    /// Weight file when the model is `network`.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training dataset CSVs.
    #[arg(long = "data", value_delimiter = ',')]
    datasets: Vec<PathBuf>,
    /// Held-out dataset CSVs.
    #[arg(long, value_delimiter = ',')]
    test: Vec<PathBuf>,
    /// Resume from these weights; skips pretraining.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Load case of the path.
    #[arg(long)]
    case: Option<String>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Principal plane: 11-22, 11-33 or 22-33.
    #[arg(long)]
    plane: Option<String>,
    /// Trace a 3D point cloud instead of a plane section.
    #[arg(long = "3d")]
    cloud: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Random cases per property.
    #[arg(long)]
    samples: Option<usize>,
}

fn string(s: &str) -> Value {
    Value::String(s.to_string())
}

fn path_value(p: &std::path::Path) -> Value {
    string(&p.to_string_lossy())
}

/// Subcommand flags as configuration overrides, ahead of `--set`.
fn flag_overrides(cmd: &Command) -> Result<Vec<(String, Value)>, CliError> {
    let mut out = Vec::new();
    let mut model = |section: &str, model: &Option<String>, weights: &Option<PathBuf>| {
        if let Some(m) = model {
            out.push((format!("{section}.model"), string(m)));
        }
        if let Some(w) = weights {
            out.push((format!("{section}.weights"), path_value(w)));
        }
    };
    match cmd {
        Command::Generate(a) => {
            model("generate", &a.model, &a.weights);
            if !a.cases.is_empty() {
                let kinds = a
                    .cases
                    .iter()
                    .map(|c| c.parse::<icann_core::refmodels::PathKind>().map(|k| string(k.label())))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::Config(e.to_string()))?;
                out.push(("generate.cases".into(), Value::Array(kinds)));
            }
        }
        Command::Train(a) => {
            if let Some(w) = &a.weights {
                out.push(("train.weights".into(), path_value(w)));
            }
            if !a.datasets.is_empty() {
                out.push(("train.datasets".into(), Value::Array(a.datasets.iter().map(|p| path_value(p)).collect())));
            }
            if !a.test.is_empty() {
                out.push(("train.test".into(), Value::Array(a.test.iter().map(|p| path_value(p)).collect())));
            }
        }
        Command::Simulate(a) => {
            model("simulate", &a.model, &a.weights);
            if let Some(c) = &a.case {
                let k: icann_core::refmodels::PathKind = c.parse().map_err(|e: icann_core::Error| CliError::Config(e.to_string()))?;
                out.push(("simulate.case".into(), string(k.label())));
            }
        }
        Command::Trace(a) => {
            model("trace", &a.model, &a.weights);
            if let Some(p) = &a.plane {
                out.push(("trace.plane".into(), string(p)));
            }
            if a.cloud {
                out.push(("trace.mode".into(), string("cloud")));
            }
        }
        Command::Verify(a) => {
            if let Some(n) = a.samples {
                out.push(("verify.samples".into(), Value::Integer(n as i64)));
            }
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut overrides = flag_overrides(&cli.command)?;
    if let Some(s) = cli.seed {
        let s = i64::try_from(s).map_err(|_| CliError::Config(format!("seed {s} does not fit the configuration format")))?;
        overrides.push(("seed".into(), Value::Integer(s)));
    }
    for s in &cli.sets {
        overrides.push(parse_override(s)?);
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let run = commands::Run::create(&cli.out, &cfg)?;
    match cli.command {
        Command::Generate(_) => commands::generate(&cfg, run),
        Command::Train(_) => commands::train(&cfg, run),
        Command::Simulate(_) => commands::simulate(&cfg, run),
        Command::Trace(_) => commands::trace(&cfg, run),
        Command::Verify(_) => commands::verify(&cfg, run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
