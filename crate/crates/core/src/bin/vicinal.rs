use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vicinal::acceptance::run_suite;
use vicinal::harness::{
    load_config, parse_config, run_experiment, ExperimentConfig, ExperimentKind, OutputFormat,
    RunArtifacts,
};
use vicinal::Error;

#[derive(Parser)]
#[command(
    name = "vicinal",
    version,
    about = "Step-flow and continuum slope experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run the acceptance suite.
    Check {
        /// Only the inexpensive criteria.
        #[arg(long)]
        quick: bool,
    },
    /// Run an epsilon sweep; a `run` configuration is promoted to `eps_sweep`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

const EXIT_VERDICT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            })
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Run {
            config,
            out_dir,
            format,
        } => {
            let cfg = configure(load_config(config)?, out_dir, format);
            report(&run_experiment(&cfg)?)
        }
        Command::Sweep {
            config,
            out_dir,
            format,
        } => {
            let cfg = configure(load_sweep_config(&config)?, out_dir, format);
            report(&run_experiment(&cfg)?)
        }
        Command::Check { quick } => {
            let outcomes = run_suite(quick);
            for o in &outcomes {
                println!("{}", o.summary_line());
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!(
                "{} of {} criteria passed",
                outcomes.len() - failed,
                outcomes.len()
            );
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERDICT)
            })
        }
    }
}

fn load_sweep_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("run") => value["kind"] = "eps_sweep".into(),
        Some("eps_sweep") => {}
        k => {
            return Err(Error::Config(format!(
                "sweep expects a run or eps_sweep configuration, got {k:?}"
            )))
        }
    }
    let cfg = parse_config(&value.to_string())?;
    debug_assert_eq!(cfg.kind, ExperimentKind::EpsSweep);
    Ok(cfg)
}

fn configure(
    mut cfg: ExperimentConfig,
    out_dir: Option<PathBuf>,
    format: Option<Format>,
) -> ExperimentConfig {
    if let Some(d) = out_dir {
        cfg.out_dir = d;
    }
    if let Some(f) = format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    cfg
}

fn report(art: &RunArtifacts) -> Result<ExitCode, Error> {
    for v in &art.verdicts {
        let mark = if v.satisfied { "ok  " } else { "FAIL" };
        println!("{mark} {}: {:.6e} <= {:.6e}", v.name, v.lhs, v.rhs);
    }
    println!(
        "artifacts in {} ({:.2}s)",
        art.out_dir.display(),
        art.wall_time
    );
    Ok(if art.all_satisfied() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERDICT)
    })
}
