mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use swarmfoam::config::{Overrides, RunnerKind};

#[derive(Parser, Debug)]
#[command(name = "swarmfoam", version, about = "Multi-agent OpenFOAM case generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and run one simulation from a requirement file.
    Run(RunArgs),
    /// Run every case of a manifest and write a metrics report.
    Eval(EvalArgs),
    /// Build the portable retrieval index from a corpus directory.
    Index(IndexArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Runner {
    Subprocess,
    Faux,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Backend {
    Live,
    Mock,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Ablation {
    NoObservePicture,
    NoReviewer,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory for run artifacts.
    #[arg(long, value_name = "DIR")]
    case_dir: Option<PathBuf>,
    /// Correction-round budget.
    #[arg(long)]
    max_iters: Option<u32>,
    #[arg(long, value_enum)]
    runner: Option<Runner>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Mock scenario name or path.
    #[arg(long)]
    scenario: Option<String>,
    /// Hand images straight to the writer instead of pre-parsing them.
    #[arg(long)]
    no_observe_picture: bool,
    /// Run without the reviewer's correction loop.
    #[arg(long)]
    no_reviewer: bool,
    #[arg(long, value_enum)]
    ablation: Vec<Ablation>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            case_root: self.case_dir.clone(),
            k_max: self.max_iters,
            runner: self.runner.map(|r| match r {
                Runner::Subprocess => RunnerKind::Subprocess,
                Runner::Faux => RunnerKind::Faux,
            }),
            live_backend: self.backend.map(|b| matches!(b, Backend::Live)),
            scenario: self.scenario.clone(),
            no_observe_picture: self.no_observe_picture || self.ablation.contains(&Ablation::NoObservePicture),
            no_reviewer: self.no_reviewer || self.ablation.contains(&Ablation::NoReviewer),
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Text file holding the natural-language requirement.
    #[arg(long)]
    requirement: PathBuf,
    /// Optional sketch accompanying the requirement.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Identifier used in the run directory name; defaults to the requirement file stem.
    #[arg(long)]
    case_id: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Report destination; defaults to `<case-dir>/<timestamp>-report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct IndexArgs {
    /// Corpus directory; defaults to the configured or shipped corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Index(a) => commands::index(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::CONFIG_ERROR)
        }
    }
}
