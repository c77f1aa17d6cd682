//! `bilateral`: run episodes, sweeps, oracle curves, the indistinguishability
//! check and the adversarial construction from a TOML config.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 configuration or
//! parameter error, 3 feedback-contract violation.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_override, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(bilateral_core::Error),
    Io(String),
    /// A self-test found a mismatch.
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_contract() => 3,
            CliError::Core(bilateral_core::Error::Parameter { .. })
            | CliError::Core(bilateral_core::Error::Validation { .. }) => 2,
            CliError::Core(_) | CliError::Io(_) | CliError::Check(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Check(m) => write!(f, "self-test failed: {m}"),
        }
    }
}

impl From<bilateral_core::Error> for CliError {
    fn from(e: bilateral_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "bilateral", version, about = "Posted-price learning for bilateral trade")]
struct Cli {
    /// TOML experiment config.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set instance.epsilon=0.3`.
    #[arg(long = "set", global = true, value_parser = parse_override, value_name = "KEY=VALUE")]
    overrides: Vec<(String, String)>,

    /// Output directory (default: `$BILATERAL_OUT_DIR`, then `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for replications and probes.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One episode: trajectory CSV and regret report.
    Run {
        #[arg(long)]
        horizon: Option<usize>,
        /// Instance name (parameters via `--set instance.<key>=...`).
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        learner: Option<String>,
    },
    /// Regret over horizons and replications, with a rate fit.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        learner: Option<String>,
        /// Fit the synthetic table R(T) = T^0.5 instead of running episodes.
        #[arg(long)]
        selftest: bool,
    },
    /// Expected gain from trade on a grid plus the instance's breakpoints.
    Oracle {
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Compare the feedback laws of the two linear-lower-bound densities.
    Indist {
        #[arg(long)]
        grid: Option<usize>,
        /// Shift one square of `f` by 1/16 first.
        #[arg(long)]
        perturb: bool,
    },
    /// Run the nested-interval adversary against a full-feedback learner.
    Adversary {
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        learner: Option<String>,
    },
    /// Quick end-to-end checks against known values.
    Selftest,
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

fn flag_overrides(cli: &Cli) -> Vec<(String, String)> {
    let mut o = cli.overrides.clone();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            o.push((k.to_string(), v));
        }
    };
    push("seed", cli.seed.map(|s| s.to_string()));
    push("jobs", cli.jobs.map(|j| j.to_string()));
    push("output.dir", cli.out_dir.as_ref().map(|d| toml_string(&d.display().to_string())));
    match &cli.command {
        Command::Run {
            horizon,
            instance,
            learner,
        } => {
            push("horizon", horizon.map(|h| h.to_string()));
            push("instance.name", instance.as_deref().map(toml_string));
            push("learner.name", learner.as_deref().map(toml_string));
        }
        Command::Sweep {
            horizons,
            replications,
            instance,
            learner,
            ..
        } => {
            if !horizons.is_empty() {
                let list: Vec<String> = horizons.iter().map(|h| h.to_string()).collect();
                push("horizons", Some(format!("[{}]", list.join(","))));
            }
            push("replications", replications.map(|r| r.to_string()));
            push("instance.name", instance.as_deref().map(toml_string));
            push("learner.name", learner.as_deref().map(toml_string));
        }
        Command::Oracle { instance, grid } => {
            push("instance.name", instance.as_deref().map(toml_string));
            push("oracle.grid", grid.map(|g| g.to_string()));
        }
        Command::Indist { grid, perturb } => {
            push("indist.grid", grid.map(|g| g.to_string()));
            if *perturb {
                push("indist.perturb", Some("true".into()));
            }
        }
        Command::Adversary {
            horizon,
            epsilon,
            replicas,
            learner,
        } => {
            push("horizon", horizon.map(|h| h.to_string()));
            push("adversary.epsilon", epsilon.map(|e| format!("{e:?}")));
            push("adversary.replicas", replicas.map(|r| r.to_string()));
            push("learner.name", learner.as_deref().map(toml_string));
        }
        Command::Selftest | Command::ShowConfig => {}
    }
    o
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &flag_overrides(cli))?;
    if let Some(jobs) = cfg.jobs {
        if jobs == 0 {
            return Err(CliError::Config("`jobs` must be at least 1".into()));
        }
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Run { .. } => commands::run(&cfg),
        Command::Sweep { selftest, .. } => commands::sweep(&cfg, *selftest),
        Command::Oracle { .. } => commands::oracle(&cfg),
        Command::Indist { .. } => commands::indist(&cfg),
        Command::Adversary { .. } => commands::adversary(&cfg),
        Command::Selftest => commands::selftest(&cfg),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bilateral: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
