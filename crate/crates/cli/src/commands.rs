use std::io::Read;
use std::path::Path;

use anyhow::{Context, Result};
use rootseg_core::metrics::{self, MetricReport};
use rootseg_core::net::{self, NetworkParams};
use rootseg_core::root_model::RootSystem;
use rootseg_core::synth::{self, DatasetManifest};
use rootseg_core::trainer::{self, EpochRecord};
use rootseg_core::volume::{self, BinaryMask3D, Volume3D};
use serde::Serialize;

use crate::config::Config;
use crate::output::{self, OutputDir, CONFIG_ECHO};
use crate::{Cli, Command, EvaluateArgs, GenerateArgs, PredictArgs, RenderArgs, TrainArgs, Usage};

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    match &cli.command {
        Command::Generate(a) => {
            if !a.models.is_empty() {
                cfg.models = a.models.clone();
            }
            cfg.generate.n_train = a.n_train.unwrap_or(cfg.generate.n_train);
            cfg.generate.n_val = a.n_val.unwrap_or(cfg.generate.n_val);
        }
        Command::Train(a) => cfg.train.epochs = a.epochs.unwrap_or(cfg.train.epochs),
        _ => {}
    }
    let out = OutputDir::acquire(output::resolve(cli.out.as_deref(), cli.command.name()))?;
    out.write(CONFIG_ECHO, cfg.to_toml()?)?;
    match &cli.command {
        Command::Generate(a) => generate(&cfg, a, &out),
        Command::Train(a) => train(&cfg, a, &out),
        Command::Predict(a) => {
            // the checkpoint is held to the config only when one was given
            let explicit = cli.config.is_some() || cli.overrides.iter().any(|o| o.trim_start().starts_with("net."));
            predict(explicit.then_some(&cfg), a, &out)
        }
        Command::Evaluate(a) => evaluate(a, &out),
        Command::Render(a) => render(a, &out),
    }
}

fn load_models(paths: &[std::path::PathBuf]) -> Result<Vec<RootSystem>> {
    if paths.is_empty() {
        return Err(Usage("no root model files given (use --model or `models` in the config)".into()).into());
    }
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Usage(format!("cannot read root model {}: {e}", p.display())))?;
            RootSystem::parse(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

fn generate(cfg: &Config, _args: &GenerateArgs, out: &OutputDir) -> Result<()> {
    let models = load_models(&cfg.models)?;
    let g = &cfg.generate;
    eprintln!(
        "generate: {} train + {} validation pairs, input {}, snr {:?}, seed {}",
        g.n_train, g.n_val, g.input_dims, g.snr_range, g.seed
    );
    let manifest = synth::generate_dataset(&models, g, out.path())?;
    println!("manifest {} sha256 {}", manifest.path().display(), manifest.hash());
    Ok(())
}

fn epoch_line(r: &EpochRecord) -> String {
    let mut line = format!("epoch {:>4}  train_loss {:.6}", r.epoch, r.train_loss);
    if let (Some(l), Some(f)) = (r.val_loss, r.val_f1) {
        line.push_str(&format!("  val_loss {l:.6}  val_f1 {f:.4}"));
    }
    line
}

fn train(cfg: &Config, args: &TrainArgs, out: &OutputDir) -> Result<()> {
    let manifest = DatasetManifest::load(&args.data)?;
    let t = &cfg.train;
    println!(
        "train: epochs={} lr={:e} clip={} batch_size={} optimizer={:?} seed={} samples={}",
        t.epochs,
        t.learning_rate,
        t.clip,
        t.batch_size,
        t.optimizer,
        t.seed,
        manifest.entries.len()
    );
    let (params, history) = trainer::train(&manifest, &cfg.net, t, |r| eprintln!("{}", epoch_line(r)))?;
    let ckpt = out.join("checkpoint.rsck");
    trainer::checkpoint_save(&params, &ckpt)?;
    out.write("history.csv", history.to_csv())?;
    println!("checkpoint {}", ckpt.display());
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "volume".into())
}

fn predict(expected: Option<&Config>, args: &PredictArgs, out: &OutputDir) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(Usage(format!("threshold {} outside [0, 1]", args.threshold)).into());
    }
    let params: NetworkParams = trainer::checkpoint_load(&args.checkpoint, expected.map(|c| &c.net))
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let input = volume::load_volume(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    let (input, _, _) = input.normalize_unit();
    let confidence = net::segment_volume(&input, &params)?;
    let mask = confidence.threshold(args.threshold)?;
    let name = stem(&args.input);
    let conf_path = out.join(format!("{name}_confidence.vol3"));
    let mask_path = out.join(format!("{name}_mask.msk3"));
    volume::save_volume(&confidence, &conf_path)?;
    volume::save_mask(&mask, &mask_path)?;
    println!("{} -> {} ({} root voxels)", input.dims(), confidence.dims(), mask.count());
    println!("confidence {}\nmask {}", conf_path.display(), mask_path.display());
    Ok(())
}

fn magic(path: &Path) -> Result<[u8; 4]> {
    let mut m = [0u8; 4];
    std::fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut m))
        .map_err(|e| Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(m)
}

/// Reads a `.msk3` mask, or thresholds a `.vol3` volume.
fn load_as_mask(path: &Path, threshold: f32) -> Result<BinaryMask3D> {
    let m = if &magic(path)? == b"MSK3" {
        volume::load_mask(path)
    } else {
        volume::load_volume(path).and_then(|v| v.threshold(threshold))
    };
    m.with_context(|| format!("loading {}", path.display()))
}

fn load_as_volume(path: &Path) -> Result<Volume3D> {
    let v = if &magic(path)? == b"MSK3" {
        volume::load_mask(path).map(|m| m.to_volume())
    } else {
        volume::load_volume(path)
    };
    v.with_context(|| format!("loading {}", path.display()))
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    prediction: String,
    ground_truth: String,
    structuring: metrics::Structuring,
    counts: metrics::ConfusionCounts,
    report: &'a MetricReport,
    curve: Option<&'a [MetricReport]>,
}

fn evaluate(args: &EvaluateArgs, out: &OutputDir) -> Result<()> {
    let pred = load_as_mask(&args.prediction, args.threshold)?;
    let gt = load_as_mask(&args.ground_truth, 0.5)?;
    let counts = metrics::confusion(&gt, &pred)?;
    let report = metrics::dt_prf(&gt, &pred, args.tolerance, args.structuring)?;
    let curve = args.curve.map(|d| metrics::dt_curve(&gt, &pred, d, args.structuring)).transpose()?;

    out.write("report.csv", format!("{}\n{}\n", MetricReport::CSV_HEADER, report.csv_row()))?;
    if let Some(c) = &curve {
        let rows: String = c.iter().map(|r| r.csv_row() + "\n").collect();
        out.write("curve.csv", format!("{}\n{rows}", MetricReport::CSV_HEADER))?;
    }
    let json = EvaluationReport {
        prediction: args.prediction.display().to_string(),
        ground_truth: args.ground_truth.display().to_string(),
        structuring: args.structuring,
        counts,
        report: &report,
        curve: curve.as_deref(),
    };
    out.write("report.json", serde_json::to_string_pretty(&json)? + "\n")?;

    println!(
        "d={} precision {:.4} recall {:.4} f1 {:.4}",
        report.tolerance, report.precision, report.recall, report.f1
    );
    if let Some(table) = curve.as_deref().and_then(|c| metrics::curve_table(c, "f1")) {
        print!("{table}");
    }
    Ok(())
}

fn render(args: &RenderArgs, out: &OutputDir) -> Result<()> {
    let v = load_as_volume(&args.input)?;
    let name = format!("{}_{:?}{}.png", stem(&args.input), args.axis, args.index).to_lowercase();
    let path = out.join(name);
    volume::render_slice(&v, args.axis, args.index, &path)?;
    println!("{}", path.display());
    Ok(())
}
