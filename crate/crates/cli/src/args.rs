use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Album storytelling: caption, draft, refine and score stories for photo albums.
///
/// Exit codes: 0 success, 1 I/O or other error, 2 validation failure,
/// 3 backend failure, 4 unparseable model output, 64 usage error.
#[derive(Debug, Parser)]
#[command(name = "albumstory", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration (backends, decoding, thresholds, prompt overrides)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for every file a command writes
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out_dir: PathBuf,
    /// Seed for all mock backends; overrides the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Albums processed in parallel
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
    /// Backend mode; overrides the config
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Maximum refinement rounds; overrides the config
    #[arg(long, global = true)]
    pub u_max: Option<u32>,
    /// Edit-ratio convergence threshold; overrides the config
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CostModeArg {
    Dissimilarity,
    RawSimilarity,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a frames tree into a manifest, optionally extracting key frames first
    Ingest(IngestArgs),
    /// Generate stories for albums of a manifest
    Run(RunArgs),
    /// Score traces with EMD and the judge metrics
    Eval(EvalArgs),
    /// Build noisy-story training triplets from detailed captions
    SynthDataset(SynthArgs),
    /// Aggregate evaluation reports into a per-stage table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Root of the `<category>/<album_id>/<frame>` tree
    #[arg(long, value_name = "DIR")]
    pub frames_root: PathBuf,
    /// Require exactly ten frames per album and a standard category
    #[arg(long)]
    pub strict: bool,
    /// Videos laid out as `<category>/<album_id>.<ext>`, extracted into the frames root first
    #[arg(long, value_name = "DIR")]
    pub videos: Option<PathBuf>,
    /// Frame extractor executable
    #[arg(long, default_value = "ffmpeg")]
    pub extractor: String,
    /// Scene-change threshold passed to the extractor
    #[arg(long, default_value_t = 0.4)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Manifest written by `ingest`
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Album id, or `all`
    #[arg(long, default_value = "all")]
    pub album: String,
    /// Root the manifest's frame paths are relative to
    #[arg(long, value_name = "DIR")]
    pub frames_root: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// A trace file, or a directory searched for trace files
    #[arg(long, value_name = "PATH")]
    pub trace: PathBuf,
    /// Comma-separated subset of emd,detail,coverage,coherence
    #[arg(long, default_value = "emd,detail,coverage,coherence")]
    pub metrics: String,
    /// Skip the judge metrics
    #[arg(long)]
    pub offline: bool,
    /// Root the traces' photo paths are relative to
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub frames_root: PathBuf,
    /// How cosine similarity becomes transport cost
    #[arg(long, value_enum, default_value = "dissimilarity")]
    pub cost_mode: CostModeArg,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Detailed captions as a JSON array or JSON lines of {image_ref, detailed_caption}
    #[arg(long, value_name = "FILE")]
    pub paragraphs: PathBuf,
    /// Records processed concurrently
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub in_flight: u32,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched for eval_<stage>.json files
    #[arg(long, value_name = "DIR")]
    pub eval_dir: PathBuf,
    /// Albums per stage needed before trends are checked
    #[arg(long, default_value_t = 3)]
    pub min_albums: usize,
}
