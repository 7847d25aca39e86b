use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mvanet",
    version,
    about = "Jujube grading networks: inspect, synthesize, train, evaluate, benchmark"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (falls back to MVANET_THREADS, then 1).
    #[arg(long, global = true, env = "MVANET_THREADS")]
    pub threads: Option<usize>,

    /// Flat key=value file whose entries act as flags of the subcommand;
    /// flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the channel plan and parameter breakdown of an architecture.
    Arch(ArchArgs),
    /// Generate the synthetic jujube dataset.
    Synth(SynthArgs),
    /// Train a model on DIR/train.csv.
    Train(TrainArgs),
    /// Per-class precision and recall on a split.
    Eval(EvalArgs),
    /// Per-jujube verdicts from batches of five frames.
    Grade(GradeArgs),
    /// Time batch inference.
    Bench(BenchArgs),
    /// Run the self-check suites.
    Verify(VerifyArgs),
    /// Write per-stage mean activation maps of one image as PGM files.
    Dump(DumpArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ArchSpec {
    /// Preset: tiny, mv1, mv2 or mv3.
    #[arg(long, default_value = "tiny")]
    pub arch: String,
    /// Square input resolution.
    #[arg(long, default_value_t = 32)]
    pub input_size: usize,
    /// Remove the attention gates.
    #[arg(long)]
    pub no_attention: bool,
    /// Hyper-parameter override such as k3=32 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ArchArgs {
    #[command(flatten)]
    pub spec: ArchSpec,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Training jujubes (five images each).
    #[arg(long, default_value_t = 400)]
    pub train: usize,
    /// Test jujubes (five images each).
    #[arg(long, default_value_t = 80)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side of the generated square images.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding train.csv.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub spec: ArchSpec,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_augment: bool,
    /// Final weights; the best-validation snapshot goes next to it as *.best.mvan.
    #[arg(long, default_value = "weights.mvan")]
    pub out: PathBuf,
    /// Epoch log CSV (default: next to the weights as *.log.csv).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Manifest name inside the directory (SPLIT.csv).
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub weights: PathBuf,
    /// Expected preset; must match the weights header.
    #[arg(long)]
    pub arch: Option<String>,
    /// Also write machine-readable CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    /// Sum of softmax vectors.
    Sum,
    /// Most frequent frame prediction.
    Majority,
}

#[derive(Debug, Args)]
pub struct GradeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Rule::Sum)]
    pub rule: Rule,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Preset to time (default tiny); must match --weights when both are given.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long, default_value_t = 32)]
    pub input_size: usize,
    #[arg(long)]
    pub no_attention: bool,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Time this trained model instead of a freshly initialized one.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub batch: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    /// Append the CSV report row here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Gradcheck,
    Plan,
    Params,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// PNG or PPM image.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
