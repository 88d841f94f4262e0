use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "btss", version, about = "Segment, label and simulate keystroke/gaze translation sessions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate session files, writing canonical copies
    Ingest(IoArgs),
    /// Derive KBI/PUB thresholds and apply the exclusion filter
    Thresholds(IoArgs),
    /// Build the AU/KB/PU hierarchy and write segments.json
    Segment(SegmentArgs),
    /// Segment, then add HOF states and translation phases
    Label(SegmentArgs),
    /// Per-session relative ICV feature vectors
    Features(IoArgs),
    /// Cluster translators into styles from a feature table
    Cluster(ClusterArgs),
    /// Corpus tables: AU types, threshold summary, cross-tabs, lognormal fits
    Analyze(IoArgs),
    /// Progression graph of one session as SVG and JSON
    Render(RenderArgs),
    /// Generate synthetic sessions from generator parameters
    Simulate(SimulateArgs),
    /// Run every stage and write a manifest
    Pipeline(IoArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sessions processed in parallel; output does not depend on it
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Keep sessions whose thresholds exceed the filter limits
    #[arg(long)]
    pub no_filter: bool,
    /// Clustering seed; falls back to the config file, then BTSS_SEED
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct IoArgs {
    /// Session file or directory of session files
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Use this KBI threshold instead of deriving one (needs --pub)
    #[arg(long, requires = "pub_ms")]
    pub kbi: Option<f64>,
    /// Use this PUB threshold instead of deriving one (needs --kbi)
    #[arg(long = "pub", requires = "kbi")]
    pub pub_ms: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ClusterArgs {
    /// Feature table written by `features`
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct RenderArgs {
    #[command(flatten)]
    pub seg: SegmentArgs,
    /// Window start in ms (defaults to session start)
    #[arg(long)]
    pub from: Option<i64>,
    /// Window end in ms (defaults to session end)
    #[arg(long)]
    pub to: Option<i64>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Generator parameters as JSON; calibrated defaults when absent
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// HOF steps per session
    #[arg(long)]
    pub steps: usize,
    /// Seed; falls back to BTSS_SEED, then the parameter file
    #[arg(long)]
    pub seed: Option<u64>,
    /// Session file, or a directory with --sessions
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the generation trace as JSON
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Generate a corpus of this many sessions with correlated thresholds
    #[arg(long)]
    pub sessions: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub translators: usize,
    /// KBI threshold for calibrated defaults
    #[arg(long, default_value_t = 374.0)]
    pub kbi: f64,
    /// PUB threshold for calibrated defaults
    #[arg(long = "pub", default_value_t = 891.0)]
    pub pub_ms: f64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}
