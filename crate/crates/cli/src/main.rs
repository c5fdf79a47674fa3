//! `gdm`: train, evaluate and inspect growing dual-memory models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gdm_core::harness::{ScenarioKind, TcMode};
use gdm_core::GdmError;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gdm",
    version,
    about = "Growing dual-memory continual learning"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train models and write snapshots, metrics and the resolved config.
    Train(RunArgs),
    /// Score a saved model on a dataset's test split.
    Eval(EvalArgs),
    /// Write a synthetic feature dataset.
    Synth(SynthArgs),
    /// Paired runs with and without replay on identical seeds and schedules.
    ReplayAblation(RunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scenario {
    Batch,
    IncrementalCategory,
    Ni,
    Nc,
    Nic,
}

impl From<Scenario> for ScenarioKind {
    fn from(s: Scenario) -> Self {
        match s {
            Scenario::Batch => ScenarioKind::Batch,
            Scenario::IncrementalCategory => ScenarioKind::IncrementalCategory,
            Scenario::Ni => ScenarioKind::Ni,
            Scenario::Nc => ScenarioKind::Nc,
            Scenario::Nic => ScenarioKind::Nic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tc {
    /// Temporal context in training and test.
    Full,
    /// No temporal context anywhere (K = 0 in both memories).
    None,
    /// Temporal context in training only.
    TestNone,
}

impl From<Tc> for TcMode {
    fn from(t: Tc) -> Self {
        match t {
            Tc::Full => TcMode::Full,
            Tc::None => TcMode::None,
            Tc::TestNone => TcMode::TestNone,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature file (GDMF, or .csv/.txt text). Default: synthetic data.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Output directory [default: ./gdm-out].
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Learning scenario [default: batch; incremental-category for replay-ablation].
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Epochs per mini-batch [default: 35 for batch, 1 otherwise].
    #[arg(long)]
    epochs: Option<usize>,
    /// Number of trials; seeds default to 1..=trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated trial seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Replay after every epoch.
    #[arg(long, overrides_with = "no_replay")]
    replay: bool,
    /// Never replay.
    #[arg(long, overrides_with = "replay")]
    no_replay: bool,
    /// Temporal-context mode [default: full].
    #[arg(long, value_enum)]
    tc: Option<Tc>,
    /// Comma-separated test sessions [default: 3,7,10].
    #[arg(long, value_delimiter = ',')]
    test_sessions: Option<Vec<u32>>,
    /// Trials run in parallel [default: 1].
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model snapshot written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Run configuration supplying the dataset and test sessions.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature file to score on.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated test sessions [default: 3,7,10].
    #[arg(long, value_delimiter = ',')]
    test_sessions: Option<Vec<u32>>,
    /// Score every sequence instead of the test sessions.
    #[arg(long, conflicts_with = "test_sessions")]
    all_sessions: bool,
    /// `none` and `test-none` classify without temporal context.
    #[arg(long, value_enum)]
    tc: Option<Tc>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Destination (.csv/.txt for text, otherwise GDMF).
    #[arg(long, short)]
    output: PathBuf,
    /// TOML generator spec; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of categories.
    #[arg(long)]
    categories: Option<usize>,
    /// Instances per category.
    #[arg(long)]
    instances: Option<usize>,
    /// Sequences per instance (one per session).
    #[arg(long)]
    sequences: Option<usize>,
    /// Frames per sequence.
    #[arg(long)]
    frames: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Std of instance centres around their category.
    #[arg(long)]
    instance_spread: Option<f64>,
    /// Std of category centres.
    #[arg(long)]
    category_spread: Option<f64>,
    /// Step size of the AR(1) drift.
    #[arg(long)]
    drift: Option<f64>,
    /// Memory of the AR(1) drift.
    #[arg(long)]
    persistence: Option<f64>,
    /// Std of per-frame observation noise.
    #[arg(long)]
    noise: Option<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<GdmError>()) {
        Some(GdmError::Invariant(_)) => EXIT_INVARIANT,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
        Command::ReplayAblation(a) => commands::replay_ablation(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
