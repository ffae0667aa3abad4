//! `camtrap`: every pipeline stage and experiment protocol from the command
//! line. Exit status is 0 on success, 1 on a usage error and 2 on a data
//! error.

mod commands;

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use camtrap::corpus::{Species, StratifyBy};
use camtrap::experiments::Protocol;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

/// Output directory used when neither `--out` nor the environment sets one.
pub const DEFAULT_OUT: &str = "camtrap-out";
pub const OUT_ENV: &str = "CAMTRAP_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "camtrap",
    version,
    about = "Camera-trap detection, recognition and segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (manifest.csv, boxes.csv, synth.toml, images/).
    Synth(SynthArgs),
    /// Split a manifest into train and validation ids (split.toml).
    Split(SplitArgs),
    /// Train the animal-vs-empty detector and score the validation images.
    TrainDetect(DetectArgs),
    /// Train the region-scoring species head and rank the validation images.
    TrainSpecies(SpeciesArgs),
    /// Train the region-scoring head over individual identities.
    TrainIndividual(IndividualArgs),
    /// Fit the patch detector and write one foreground mask per image.
    Segment(SegmentArgs),
    /// Compare a prediction file with a truth file and print per-class metrics.
    Eval(EvalArgs),
    /// Run an experiment protocol and write its report.
    Experiment(ExperimentArgs),
}

/// Flags shared by every command that trains or samples.
#[derive(Debug, Args)]
struct RunArgs {
    /// Seed for every random choice the command makes [default: the config's seed, else 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: camtrap-out, or the config's output_dir].
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this; 1 is the reference.
    #[arg(long, default_value = "1")]
    jobs: NonZeroUsize,
}

/// Where the images come from and how they are split.
#[derive(Debug, Args)]
struct DataArgs {
    /// Experiment config (TOML); keys it omits keep their defaults and flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest CSV; defaults to the config's corpus.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Existing split.toml; otherwise the manifest is split with --fraction and --seed.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Training fraction when splitting, strictly between 0 and 1.
    #[arg(long, value_parser = open_unit)]
    fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Experiment config whose synthetic corpus section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Protocol whose default corpus is generated when the config gives none.
    #[arg(long, default_value = "species")]
    protocol: Protocol,
    /// Number of empty (unclassified) images.
    #[arg(long)]
    negatives: Option<usize>,
    /// Fraction of images rendered at night, in [0, 1].
    #[arg(long, value_parser = closed_unit)]
    night_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Manifest CSV to split.
    #[arg(long)]
    manifest: PathBuf,
    /// Training fraction, strictly between 0 and 1.
    #[arg(long, value_parser = open_unit, default_value = "0.7")]
    fraction: f64,
    /// Strata: presence, species or individual.
    #[arg(long, default_value = "presence")]
    stratify: StratifyBy,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Regularisation strength.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct HeadArgs {
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Gradient step size.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Regions averaged per class when ranking.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Debug, Args)]
struct SpeciesArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    head: HeadArgs,
}

#[derive(Debug, Args)]
struct IndividualArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    head: HeadArgs,
    /// Species whose individuals are recognised, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "tiger,leopard")]
    species: Vec<Species>,
    /// Keep only individuals seen in more than this many images.
    #[arg(long)]
    min_images: Option<usize>,
    /// Downsample training images to the smallest individual.
    #[arg(long)]
    balance: bool,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Experiment config (TOML); its segmentation and detector sections are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest CSV with a boxes.csv beside it; defaults to the config's corpus.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Boxed images, spaced evenly through the manifest, used to fit the patch detector.
    #[arg(long, default_value_t = 40)]
    train_images: usize,
    /// Patch side in pixels.
    #[arg(long)]
    patch_size: Option<usize>,
    /// Pairwise coupling weight; 0 keeps the detector's probabilities.
    #[arg(long)]
    weight: Option<f64>,
    /// Foreground probability threshold.
    #[arg(long, value_parser = open_unit)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predictions: id,label[,label1..labelK].
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth: id,label.
    #[arg(long)]
    truth: PathBuf,
    /// Also write metrics.csv, confusion.csv and topk.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// volume, proportion, split, illumination, species, individual or joint.
    protocol: Protocol,
    /// Experiment config (TOML); keys it omits keep the protocol's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of the first trial; trial i uses seed + i [default: config's base_seed].
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded trials.
    #[arg(long)]
    seeds: Option<usize>,
    /// Run on this manifest instead of the configured corpus.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory [default: camtrap-out, or the config's output_dir].
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this; 1 is the reference.
    #[arg(long, default_value = "1")]
    jobs: NonZeroUsize,
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn closed_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

/// Why a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(camtrap::Error),
}

impl From<camtrap::Error> for Failure {
    fn from(e: camtrap::Error) -> Self {
        Failure::Data(e)
    }
}

/// Usage line of the subcommand named in `args`, or of the whole program.
fn synopsis(args: &[String]) -> String {
    let mut cli = Cli::command();
    cli.build();
    let usage = match args.get(1).and_then(|name| cli.find_subcommand_mut(name)) {
        Some(sub) => sub.render_usage(),
        None => cli.render_usage(),
    };
    usage.to_string()
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => ExitCode::from(1),
                _ => {
                    if !e.to_string().contains("Usage:") {
                        eprintln!("\n{}", synopsis(&args));
                    }
                    ExitCode::from(1)
                }
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", synopsis(&args));
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
