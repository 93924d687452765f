//! `rootseg`: generate synthetic root MRI data, train the segmentation
//! network, predict, evaluate and render slices.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or input error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rootseg_core::metrics::{MetricsError, Structuring};
use rootseg_core::net::NetError;
use rootseg_core::root_model::RootModelError;
use rootseg_core::synth::SynthError;
use rootseg_core::trainer::TrainError;
use rootseg_core::volume::{Axis, VolumeError};

/// Error caused by the caller's input rather than by the program.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Parser)]
#[command(name = "rootseg", version, about = "Root segmentation in MRI volumes")]
pub struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory [default: $ROOTSEG_OUT/<command>].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for data generation and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate training and validation pairs from root models.
    Generate(GenerateArgs),
    /// Train the network on a generated dataset.
    Train(TrainArgs),
    /// Segment a volume with a trained checkpoint.
    Predict(PredictArgs),
    /// Compare a prediction with ground truth.
    Evaluate(EvaluateArgs),
    /// Write one slice of a volume as a PNG.
    Render(RenderArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Render(_) => "render",
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Root model files; replaces `models` from the config.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input `.vol3` volume.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f32,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted `.msk3` mask or `.vol3` confidence volume.
    #[arg(long)]
    pub prediction: PathBuf,
    /// Ground-truth `.msk3` mask.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Threshold applied to a confidence volume.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f32,
    /// Distance tolerance in voxels.
    #[arg(long, default_value_t = 0)]
    pub tolerance: u32,
    /// Also write the tolerance curve for d = 0..=D.
    #[arg(long, value_name = "D")]
    pub curve: Option<u32>,
    #[arg(long, default_value = "ball")]
    pub structuring: Structuring,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// `.vol3` volume or `.msk3` mask.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "z")]
    pub axis: Axis,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

fn is_input_error(e: &anyhow::Error) -> bool {
    fn io(e: &std::io::Error) -> bool {
        matches!(e.kind(), std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData)
    }
    fn volume(e: &VolumeError) -> bool {
        match e {
            VolumeError::Image(_) => false,
            VolumeError::Io(e) => io(e),
            _ => true,
        }
    }
    fn synth(e: &SynthError) -> bool {
        match e {
            SynthError::Volume(v) => volume(v),
            SynthError::File { source, .. } => io(source),
            SynthError::Manifest { .. }
            | SynthError::NoModels
            | SynthError::InvalidConfig(_)
            | SynthError::DimsMismatch(..) => true,
            _ => false,
        }
    }
    fn net(e: &NetError) -> bool {
        match e {
            NetError::Volume(v) => volume(v),
            NetError::DimsNotDivisible { .. } | NetError::InvalidConfig(_) => true,
            _ => false,
        }
    }
    e.chain().any(|c| {
        if c.is::<Usage>() || c.is::<RootModelError>() {
            return true;
        }
        if let Some(e) = c.downcast_ref::<TrainError>() {
            return match e {
                TrainError::ConfigMismatch { .. }
                | TrainError::Corrupt(_)
                | TrainError::EmptySplit(_)
                | TrainError::InvalidConfig(_)
                | TrainError::Shape(_) => true,
                TrainError::Io(e) => io(e),
                TrainError::Net(e) => net(e),
                TrainError::Synth(e) => synth(e),
                TrainError::Metrics(_) | TrainError::NonFiniteLoss { .. } => false,
            };
        }
        if let Some(e) = c.downcast_ref::<MetricsError>() {
            return matches!(e, MetricsError::DimsMismatch(..));
        }
        if let Some(e) = c.downcast_ref::<NetError>() {
            return net(e);
        }
        if let Some(e) = c.downcast_ref::<SynthError>() {
            return synth(e);
        }
        if let Some(e) = c.downcast_ref::<VolumeError>() {
            return volume(e);
        }
        false
    })
}

/// The error chain joined with ": ", dropping causes a parent already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain().map(|c| c.to_string()) {
        if !out.ends_with(&cause) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&cause);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(if is_input_error(&e) { 2 } else { 1 })
        }
    }
}
