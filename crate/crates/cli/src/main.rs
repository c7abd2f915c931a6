//! `permlab` — config-driven front end for communication-metered distributed
//! optimization experiments.
//!
//! Subcommands:
//! - `generate`  build the task artifact and print its constants report
//! - `run`       run every (method, stepsize, seed) cell; write CSV traces
//! - `compare`   rank finished traces at a shared bit budget
//! - `constants` print constants and predicted budgets without writing
//!
//! Exit codes: 0 success; 2 config/usage error; 3 at least one run diverged
//! (everything else succeeded); 4 I/O error.

mod cells;
mod compare;
mod config;
mod task_setup;
mod trace_csv;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use permlab_core::analysis::Objective;

/// Error taxonomy mirroring the exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 4,
        }
    }
}

const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "permlab",
    version,
    about = "Communication-metered distributed optimization lab"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ReportFlags {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Target stationarity / gap accuracy for predicted budgets.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Objective for predicted budgets (overrides `run.objective`).
    #[arg(long, value_parser = parse_objective)]
    objective: Option<Objective>,
}

fn parse_objective(text: &str) -> Result<Objective, String> {
    match text {
        "nonconvex" => Ok(Objective::Nonconvex),
        "pl" => Ok(Objective::Pl),
        other => Err(format!("unknown objective `{other}` (nonconvex|pl)")),
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the task artifact on disk and print its constants report.
    Generate {
        #[command(flatten)]
        flags: ReportFlags,
        /// Where to write the artifact (overrides `task.artifact`).
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Run every configured (method, stepsize, seed) cell.
    Run {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Override `run.rounds`.
        #[arg(long)]
        rounds: Option<u64>,
        /// Override `run.seeds` (repeat the flag for several).
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Override `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank finished traces at a shared cumulative-bit budget.
    Compare {
        /// Bit budget per node.
        #[arg(long)]
        budget: u64,
        /// Trace CSV files to rank.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Directory for the .dat files (default: next to each trace).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print constants and predicted budgets without writing anything.
    Constants {
        #[command(flatten)]
        flags: ReportFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Generate { flags, artifact } => cmd_generate(flags, artifact),
        Cmd::Run {
            config,
            rounds,
            seeds,
            out,
        } => cmd_run(config, rounds, seeds, out),
        Cmd::Compare {
            budget,
            traces,
            out_dir,
        } => cmd_compare(budget, traces, out_dir),
        Cmd::Constants { flags } => cmd_constants(flags),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn report_inputs(flags: &ReportFlags, cfg: &config::ExperimentConfig) -> task_setup::ReportInputs {
    task_setup::ReportInputs {
        eps: flags.eps,
        objective: flags.objective.unwrap_or(cfg.run.objective),
    }
}

fn cmd_generate(flags: ReportFlags, artifact_flag: Option<PathBuf>) -> Result<u8, CliError> {
    let cfg = config::load_config(&flags.config)?;
    let artifact = task_setup::generate_task(&cfg.task)?;
    let path = artifact_flag
        .or_else(|| cfg.task.artifact_path().map(PathBuf::from))
        .unwrap_or_else(|| {
            cfg.output
                .directory
                .join(format!("task-{}.bin", artifact.fingerprint()))
        });
    task_setup::save_artifact(&artifact, &path)?;
    println!("wrote {}", path.display());
    print!("{}", task_setup::constants_report(&artifact, &report_inputs(&flags, &cfg))?);
    Ok(0)
}

fn cmd_constants(flags: ReportFlags) -> Result<u8, CliError> {
    let cfg = config::load_config(&flags.config)?;
    let artifact = task_setup::build_task(&cfg.task)?;
    print!("{}", task_setup::constants_report(&artifact, &report_inputs(&flags, &cfg))?);
    Ok(0)
}

fn cmd_run(
    config_path: PathBuf,
    rounds: Option<u64>,
    seeds: Vec<u64>,
    out: Option<PathBuf>,
) -> Result<u8, CliError> {
    let mut cfg = config::load_config(&config_path)?;
    // Flag overrides participate in the fingerprint: they change what is run.
    if rounds.is_some() || !seeds.is_empty() {
        if let Some(rounds) = rounds {
            if rounds == 0 {
                return Err(CliError::config("--rounds: need at least one round"));
            }
            cfg.run.rounds = rounds;
        }
        if !seeds.is_empty() {
            cfg.run.seeds = seeds;
        }
        cfg.fingerprint =
            permlab_core::problems::fingerprint_bytes(config::canonical_form(&cfg).as_bytes());
    }
    if let Some(out) = out {
        cfg.output.directory = out;
    }

    let artifact = task_setup::build_task(&cfg.task)?;
    let cells = cells::expand_cells(&cfg, &artifact)?;
    let out_dir = cfg.output.directory.clone();
    let outcomes = cells::run_all(&cells, &artifact, &cfg, &out_dir)?;
    cells::write_summary(&out_dir.join("summary.csv"), &outcomes, cfg.run.objective)?;

    let diverged = outcomes.iter().filter(|o| o.diverged).count();
    for o in &outcomes {
        let status = if o.diverged {
            format!("DIVERGED at round {}", o.completed_rounds)
        } else {
            format!("grad_norm_sq {:.6e}", o.final_grad_norm_sq)
        };
        println!("{}  {}", o.cell.run_id, status);
    }
    println!(
        "{} run(s), {} diverged; traces in {}",
        outcomes.len(),
        diverged,
        out_dir.display()
    );
    Ok(if diverged > 0 { EXIT_DIVERGED } else { 0 })
}

fn cmd_compare(
    budget: u64,
    traces: Vec<PathBuf>,
    out_dir: Option<PathBuf>,
) -> Result<u8, CliError> {
    let outcome = compare::compare(&traces, budget, out_dir.as_deref())?;
    print!("{}", outcome.table);
    for path in &outcome.dat_paths {
        println!("wrote {}", path.display());
    }
    Ok(0)
}
