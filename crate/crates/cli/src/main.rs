//! `fragpredict` command-line tool.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use fragpredict::config::RunConfig;
use fragpredict::fragmenter::AdjacencyMode;

#[derive(Parser)]
#[command(name = "fragpredict", version, about = "Fragment-level molecular representation learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose every molecule into rings, paths and articulation points.
    Fragment(FragmentArgs),
    /// Histogram fragment sizes and counts over a dataset.
    Stats(StatsArgs),
    /// Compare two graphs with node-level and fragment-level WL refinement.
    Wl(WlArgs),
    /// Pretrain an encoder by masked embedding prediction.
    Pretrain(PretrainArgs),
    /// Fine-tune an encoder on a labelled dataset with a scaffold split.
    Finetune(FinetuneArgs),
    /// Linear probes on frozen graph embeddings for fragment counts.
    Probe(ProbeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Literal,
    Routed,
}

impl From<Mode> for AdjacencyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Literal => AdjacencyMode::Literal,
            Mode::Routed => AdjacencyMode::ArticulationRouted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Classification,
    Regression,
}

#[derive(Args)]
struct InputArgs {
    /// Skip unparsable lines with a warning instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct FragmentArgs {
    /// SMILES file, one molecule per line.
    #[arg(long)]
    input: PathBuf,
    /// Fragment-graph adjacency rule.
    #[arg(long, value_enum, default_value = "routed")]
    mode: Mode,
    /// Output CSV: index,m,fragments,edges,connectors.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    input_opts: InputArgs,
}

#[derive(Args)]
struct StatsArgs {
    /// SMILES file, one molecule per line.
    #[arg(long)]
    input: PathBuf,
    /// Fragment-graph adjacency rule.
    #[arg(long, value_enum, default_value = "routed")]
    mode: Mode,
    /// Output CSV: statistic,bucket,count.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    input_opts: InputArgs,
}

#[derive(Args)]
struct WlArgs {
    /// First graph: a graph file ("n m" then one "i j" edge per line) or smiles:STRING.
    #[arg(long)]
    g1: String,
    /// Second graph, same forms as --g1.
    #[arg(long)]
    g2: String,
    /// Also compare the fragment graphs.
    #[arg(long)]
    fragment: bool,
    /// Fragment-graph adjacency rule for --fragment.
    #[arg(long, value_enum, default_value = "routed")]
    mode: Mode,
    /// Write per-iteration colour histograms (graph,iteration,color,count) here.
    #[arg(long)]
    histograms: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// key=value config file with '#' comments; the keys are listed below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set hidden=64 (repeatable, applied after --config).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Seed for every random choice [default: the config's seed key, 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PretrainArgs {
    /// SMILES file with the pretraining molecules.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-step metrics CSV: step,epoch,loss,tau,target_var.
    #[arg(long)]
    metrics: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    input_opts: InputArgs,
}

#[derive(Args)]
struct FinetuneArgs {
    /// Labelled SMILES file: SMILES then tab-separated labels, empty for missing.
    #[arg(long)]
    data: PathBuf,
    /// Pretrained checkpoint; without it the encoder starts from random weights.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Prediction task type.
    #[arg(long, value_enum, default_value = "classification")]
    task: Task,
    /// Metrics CSV: task,split,metric,value.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    input_opts: InputArgs,
}

#[derive(Args)]
struct ProbeArgs {
    /// SMILES file with the probe molecules.
    #[arg(long)]
    data: PathBuf,
    /// Pretrained checkpoint; without it the encoder starts from random weights.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comma-separated fragment types to probe, e.g. ring6,ring5,path2,articulation.
    #[arg(long, default_value = "ring6")]
    queries: String,
    /// Probe CSV: query,accuracy,n_pos.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    input_opts: InputArgs,
}

fn config_keys_help() -> String {
    let mut out = String::from("Config keys and defaults (for --config files and --set):\n");
    for (k, v) in RunConfig::default().entries() {
        out.push_str(&format!("  {k:<26} {v}\n"));
    }
    out
}

fn main() -> ExitCode {
    let keys = config_keys_help();
    let command = ["pretrain", "finetune", "probe"]
        .into_iter()
        .fold(Cli::command(), |c, name| c.mut_subcommand(name, |s| s.after_help(keys.clone())));
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => io::EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fragment(a) => commands::fragment(a),
        Command::Stats(a) => commands::stats(a),
        Command::Wl(a) => commands::wl(a),
        Command::Pretrain(a) => commands::pretrain(a),
        Command::Finetune(a) => commands::finetune(a),
        Command::Probe(a) => commands::probe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
