use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use dialect_lab::augment::Range;
use dialect_lab::eval::Averaging;
use dialect_lab::features::FeatureKind;
use dialect_lab::models::Architecture;
use dialect_lab::nn::CellKind;

pub const SEED_ENV: &str = "DIALECT_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "dialect-lab", version, about = "Arabic dialect recognition from MFCC or wavelet features with CNN/RNN classifiers")]
pub struct Cli {
    /// key=value file supplying any subcommand flag; explicit flags win (tool default: none)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic three-dialect corpus with a manifest
    SynthCorpus(SynthArgs),
    /// Canonicalise clips: resample, denoise, trim silence, normalise, segment
    Prepare(PrepareArgs),
    /// Write augmented copies of every clip next to the originals
    Augment(AugmentArgs),
    /// Extract MFCC or wavelet feature caches
    Extract(ExtractArgs),
    /// Train one model and keep the best-validation-loss checkpoint
    Train(TrainArgs),
    /// Evaluate checkpoints; several are averaged into one report
    Evaluate(EvaluateArgs),
    /// Render evaluation reports as the model comparison table
    Report(ReportArgs),
    /// Train and evaluate all four feature/model combinations over several seeds
    Sweep(SweepArgs),
    /// Re-run the command recorded in a run manifest
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SeedArg {
    /// Global seed; falls back to $DIALECT_LAB_SEED (tool default)
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Clips per dialect (tool default)
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    /// Output directory (tool default)
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PrepareArgs {
    /// Corpus directory holding manifest.tsv and the audio it references
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Manifest path, if not `<in>/manifest.tsv` (tool default)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Target sample rate in Hz (paper)
    #[arg(long, default_value_t = 16_000)]
    pub sample_rate: u32,
    /// Silence gate in dB below the loudest 20 ms window (tool default)
    #[arg(long, default_value_t = 30.0)]
    pub trim_db: f64,
    /// Longest segment in seconds (tool default)
    #[arg(long, default_value_t = 10.0)]
    pub max_seconds: f64,
    /// Apply spectral-gating noise reduction (tool default: off)
    #[arg(long)]
    pub denoise: bool,
    /// Worker threads (tool default)
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AugmentArgs {
    /// Corpus directory holding manifest.tsv
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory; receives the originals and their copies
    #[arg(long)]
    pub out: PathBuf,
    /// Augmented copies per clip (tool default)
    #[arg(long, default_value_t = 2)]
    pub copies: usize,
    /// Pitch shift range in semitones, lo,hi (tool default)
    #[arg(long, default_value = "-2,2", allow_hyphen_values = true)]
    pub pitch: Range,
    /// Time-stretch rate range, lo,hi (tool default)
    #[arg(long, default_value = "0.9,1.1")]
    pub stretch: Range,
    /// Noise SNR range in dB, lo,hi (tool default)
    #[arg(long, default_value = "10,20", allow_hyphen_values = true)]
    pub snr: Range,
    /// Speed perturbation factor range, lo,hi (tool default)
    #[arg(long, default_value = "0.9,1.1")]
    pub speed: Range,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    /// Worker threads (tool default)
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    /// Feature family (paper: mfcc or wavelet)
    #[arg(long)]
    pub features: FeatureKind,
    /// Corpus directory holding manifest.tsv
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for `<clip_id>.afea` caches and manifest.tsv
    #[arg(long)]
    pub out: PathBuf,
    /// MFCC coefficients per frame (paper)
    #[arg(long, default_value_t = 13)]
    pub n_mfcc: usize,
    /// MFCC window length in ms (paper)
    #[arg(long, default_value_t = 25.0)]
    pub win_ms: f64,
    /// MFCC hop length in ms (paper)
    #[arg(long, default_value_t = 10.0)]
    pub hop_ms: f64,
    /// FFT size (tool default)
    #[arg(long, default_value_t = 512)]
    pub n_fft: usize,
    /// Mel filters (tool default)
    #[arg(long, default_value_t = 26)]
    pub n_mels: usize,
    /// db4 decomposition level (paper)
    #[arg(long, default_value_t = 3)]
    pub wavelet_level: usize,
    /// Worker threads (tool default)
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct TrainingArgs {
    /// Maximum epochs (paper)
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Mini-batch size (paper)
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Adam learning rate (paper)
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Early-stopping patience in epochs (paper)
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Fraction of clips held out for validation (paper)
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Recurrent cell for RNN models (paper: lstm)
    #[arg(long, default_value = "lstm")]
    pub cell: CellKind,
    /// Frames per input after pad/truncate; 300 for MFCC, 32 for wavelet (tool default)
    #[arg(long)]
    pub frames: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Feature family of the caches in --in (paper: mfcc or wavelet)
    #[arg(long)]
    pub features: FeatureKind,
    /// Classifier (paper: cnn or rnn)
    #[arg(long)]
    pub model: Architecture,
    /// Feature directory written by `extract`
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for checkpoint.bin, history.jsonl and report.json
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    /// The validation split the checkpoint was selected on
    Val,
    /// Every original clip
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Checkpoints to evaluate; their metrics are averaged
    #[arg(long, num_args = 1.., required = true)]
    pub checkpoint: Vec<PathBuf>,
    /// Feature directory written by `extract`
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Clips to score (tool default)
    #[arg(long, value_enum, default_value_t = EvalSplit::Val)]
    pub split: EvalSplit,
    /// Report path (JSON)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Evaluation reports; reports of the same model are averaged
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Precision/recall/F1 averaging (tool default)
    #[arg(long, default_value = "macro")]
    pub average: Averaging,
    /// Output format (tool default)
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// MFCC feature directory
    #[arg(long)]
    pub mfcc: PathBuf,
    /// Wavelet feature directory
    #[arg(long)]
    pub wavelet: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds, comma separated; one run per seed and model (paper: three runs)
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    /// Precision/recall/F1 averaging in the table (tool default)
    #[arg(long, default_value = "macro")]
    pub average: Averaging,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    /// run_manifest.json written by an earlier command
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Parses arguments with "last occurrence wins" for every flag, which is what
/// lets explicit flags override config-file values.
pub fn parse_cli<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true));
    let matches = cmd.clone().try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches).map_err(|e| e.format(&mut cmd.clone()))
}

/// Parses a `key=value` config file into `--key value` arguments. Blank lines
/// and `#` comments are skipped; `key=true` becomes a bare `--key` switch.
pub fn config_args(text: &str) -> anyhow::Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got `{line}`", i + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.starts_with('-') {
            bail!("line {}: bad key `{key}`", i + 1);
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Removes `--config FILE` from `argv` and splices the file's flags in right
/// after the subcommand name, so that flags given explicitly come later and
/// win. The returned vector is what the command actually ran with.
pub fn expand_config(argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = Some(PathBuf::from(it.next().context("--config needs a file")?));
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let extra = config_args(&text).with_context(|| path.display().to_string())?;
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(rest.len());
    rest.splice(sub..sub, extra);
    Ok(rest)
}
