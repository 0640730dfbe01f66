//! `promptopt`: optimize, evaluate, suffix-tune and inspect task prompts.

mod commands;
mod failure;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use promptopt_core::ast::DEFAULT_SEED_SUFFIX;
use promptopt_core::metrics::MetricSpec;
use promptopt_core::templates::TaskKind;

#[derive(Parser, Debug)]
#[command(name = "promptopt", version, about = "Critique-guided prompt optimization")]
pub struct Cli {
    /// Print machine-readable JSON instead of text tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Optimize a seed prompt on a dataset.
    Optimize(OptimizeArgs),
    /// Score one prompt on a dataset split.
    Evaluate(EvaluateArgs),
    /// Tune a suffix after a frozen prompt across several metrics.
    Ast(AstArgs),
    /// Summarize a run directory: trajectory and prompt diversity.
    Report(ReportArgs),
    /// Turn the transcripts of a run into a replay file.
    ReplayRecord(ReplayRecordArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ProviderArgs {
    /// Provider configuration (JSON) for live calls.
    #[arg(long)]
    pub providers: Option<PathBuf>,
    /// Serve every model call from a replay file instead of the network.
    #[arg(long, conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Append every live call to this replay file.
    #[arg(long, requires = "providers")]
    pub record: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Directory holding train.jsonl, dev.jsonl and optionally test.jsonl.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub dev_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    /// Keep only the first N context passages per record.
    #[arg(long)]
    pub max_contexts: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    NoCritique,
    NoCot,
    NoFlexible,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Optimization config (JSON); omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// File holding the seed prompt.
    #[arg(long, required_unless_present = "resume")]
    pub seed_prompt: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Continue the run in --out with its stored config.
    #[arg(long, conflicts_with_all = ["config", "seed_prompt", "opro", "ablate"])]
    pub resume: bool,
    /// Disable critiques, step-by-step drafting and flexible templates.
    #[arg(long)]
    pub opro: bool,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub ablate: Vec<Ablation>,
    #[command(flatten)]
    pub providers: ProviderArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskArg {
    Summarization,
    Qa,
}

impl From<TaskArg> for TaskKind {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Summarization => TaskKind::Summarization,
            TaskArg::Qa => TaskKind::Qa,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub prompt_file: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
    #[arg(long, value_enum, default_value = "summarization")]
    pub task: TaskArg,
    /// Comma-separated metrics; ROUGE-1/2/L for summarization and exact
    /// match for QA when omitted.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<MetricSpec>,
    /// Few-shot examples retrieved from train for an examples block.
    #[arg(long, default_value_t = 0)]
    pub icl_shots: usize,
    #[arg(long, default_value_t = 1.0)]
    pub max_flagged_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub providers: ProviderArgs,
}

#[derive(Args, Debug)]
pub struct AstArgs {
    /// File holding the tuned prompt to freeze.
    #[arg(long)]
    pub main_prompt: PathBuf,
    #[arg(long, default_value = DEFAULT_SEED_SUFFIX)]
    pub seed_suffix: String,
    /// At least two comma-separated metrics to rank across.
    #[arg(long, value_delimiter = ',', required = true)]
    pub metrics: Vec<MetricSpec>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Baseline: let the optimizer rewrite the main prompt too.
    #[arg(long)]
    pub full_tune: bool,
    #[command(flatten)]
    pub providers: ProviderArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayRecordArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    /// Replay file to write; replaced if present.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Optimize(a) => commands::optimize(a, cli.json),
        Command::Evaluate(a) => commands::evaluate(a, cli.json),
        Command::Ast(a) => commands::ast(a, cli.json),
        Command::Report(a) => commands::report(a, cli.json),
        Command::ReplayRecord(a) => commands::replay_record(a, cli.json),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
