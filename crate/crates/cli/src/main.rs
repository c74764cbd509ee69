use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod bundle;
mod commands;
mod config;

/// Modality-preference analysis toolkit.
#[derive(Parser)]
#[command(name = "omnipref", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic hidden-state dumps, an asset pool and yes/no records.
    Synth(SynthArgs),
    /// Build a conflict benchmark manifest from an asset pool.
    BuildBench(BuildBenchArgs),
    /// Compute modality selection rates from a response log.
    Msr(MsrArgs),
    /// Train one probe per layer of a hidden-state dump.
    Train(TrainArgs),
    /// Decompose a layer-accuracy curve into emergence phases.
    Phases(PhasesArgs),
    /// Decompose probe weights and project hidden states.
    Svd(SvdArgs),
    /// Evaluate probe-based hallucination diagnosis.
    Diagnose(DiagnoseArgs),
    /// Run the synthetic pipeline end to end.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub n_layers: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub onset_layer: Option<usize>,
    #[arg(long)]
    pub sharpness: Option<f64>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub label_smoothing: Option<f64>,
    /// Role definition used for the yes/no dump.
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub n_correct: Option<usize>,
    #[arg(long)]
    pub n_halluc: Option<usize>,
    #[arg(long)]
    pub effect: Option<f64>,
}

#[derive(Args)]
pub struct BuildBenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Asset pool JSONL.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Comma-separated modality set, e.g. `text,image`.
    #[arg(long)]
    pub modalities: Option<String>,
    /// Comma-separated category names.
    #[arg(long, value_delimiter = ',')]
    pub categories: Option<Vec<String>>,
    /// Also write a simulated response log drawn from these text,image,audio probabilities.
    #[arg(long, value_delimiter = ',')]
    pub simulate: Option<Vec<f64>>,
}

#[derive(Args)]
pub struct MsrArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub hsd: PathBuf,
    /// Worker threads for per-layer training; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Args)]
pub struct PhasesArgs {
    #[command(flatten)]
    pub common: Common,
    /// Layer curve CSV from `train`.
    #[arg(long)]
    pub curve: PathBuf,
}

#[derive(Args)]
pub struct SvdArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub probes: PathBuf,
    /// Comma-separated 1-based layers; defaults to the best validation layer.
    #[arg(long, value_delimiter = ',')]
    pub layer: Vec<usize>,
    /// Hidden-state dump to project.
    #[arg(long)]
    pub hsd: Option<PathBuf>,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub probes: PathBuf,
    #[arg(long)]
    pub hsd: PathBuf,
    /// Yes/no records JSONL.
    #[arg(long)]
    pub records: PathBuf,
    /// Role definitions (TOML with `[[roles]]` tables); defaults to the shipped four.
    #[arg(long)]
    pub roles: Option<PathBuf>,
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Fixed 1-based probe layer instead of best-layer selection.
    #[arg(long)]
    pub layer: Option<usize>,
    /// Split whose accuracy selects the layer: validation or test.
    #[arg(long)]
    pub select: Option<String>,
    #[arg(long)]
    pub early_layer: Option<usize>,
}

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated stages out of synth,train,phases,svd,diagnose; empty for none.
    #[arg(long, default_value = "synth,train,phases,svd,diagnose")]
    pub stages: String,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::BuildBench(a) => commands::build_bench(a),
        Command::Msr(a) => commands::msr(a),
        Command::Train(a) => commands::train(a),
        Command::Phases(a) => commands::phases(a),
        Command::Svd(a) => commands::svd(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("omnipref: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
