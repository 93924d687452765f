//! Supervised training of the segmentation network.

mod checkpoint;
mod gradcheck;

pub use checkpoint::{checkpoint_load, checkpoint_save, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, zero_input_gradient, GradCheckReport};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{snr_binned, BinnedSample, MetricsError, SnrBinnedReport};
use crate::net::{self, NetConfig, NetError, NetworkParams, Real, Tensor, WindowInput};
use crate::par;
use crate::synth::{DatasetManifest, SamplePair, Split, SynthError, SNR_BIN_LABELS};
use crate::volume::{BinaryMask3D, Volume3D};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no {0} samples")]
    EmptySplit(&'static str),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint config hash {found} does not match expected {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Per-voxel binary cross-entropy.
    #[default]
    Bce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Global L2 norm threshold for gradient clipping.
    pub clip: f64,
    /// Layer windows per parameter update.
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
    /// Weight on the root class in the loss; 1 is unweighted.
    pub positive_weight: f64,
    pub optimizer: OptimizerKind,
    /// Validate after every n-th epoch and after the last; 0 disables.
    pub validate_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 6e-4,
            clip: 0.01,
            batch_size: 4,
            seed: 0,
            loss: LossKind::Bce,
            positive_weight: 1.0,
            optimizer: OptimizerKind::Adam,
            validate_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return bad("clip must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.positive_weight > 0.0 && self.positive_weight.is_finite()) {
            return bad("positive_weight must be positive");
        }
        Ok(())
    }
}

/// A volume with its 2x ground truth, as used for training and validation.
#[derive(Debug, Clone)]
pub struct TrainPair {
    pub input: Volume3D,
    pub ground_truth: BinaryMask3D,
    /// Measured SNR; `None` for noise-free samples.
    pub snr: Option<f64>,
}

impl From<SamplePair> for TrainPair {
    fn from(p: SamplePair) -> Self {
        TrainPair { input: p.input, ground_truth: p.ground_truth, snr: p.meta.snr }
    }
}

impl TrainPair {
    pub fn load_split(manifest: &DatasetManifest, split: Split) -> Result<Vec<TrainPair>, TrainError> {
        manifest
            .split(split)
            .map(|e| {
                let (input, ground_truth) = manifest.load_pair(e)?;
                Ok(TrainPair { input, ground_truth, snr: e.meta.snr })
            })
            .collect()
    }

    fn check(&self) -> Result<(), TrainError> {
        if self.ground_truth.dims() != self.input.dims().doubled() {
            return Err(TrainError::Shape(format!(
                "ground truth {} is not twice the input {}",
                self.ground_truth.dims(),
                self.input.dims()
            )));
        }
        Ok(())
    }
}

/// Binary cross-entropy between confidence maps and a 0/1 target pair,
/// averaged over every voxel of both layers. Probabilities are clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(pred: &net::PredictionPair, target: &net::PredictionPair) -> Result<f64, TrainError> {
    if (pred.width, pred.height) != (target.width, target.height)
        || pred.lower.len() != target.lower.len()
        || pred.upper.len() != target.upper.len()
    {
        return Err(TrainError::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            pred.width, pred.height, target.width, target.height
        )));
    }
    const EPS: f64 = 1e-7;
    let p = pred.lower.iter().chain(&pred.upper);
    let t = target.lower.iter().chain(&target.upper);
    let n = pred.lower.len() + pred.upper.len();
    let sum: f64 = p
        .zip(t)
        .map(|(&p, &t)| {
            let p = (p as f64).clamp(EPS, 1.0 - EPS);
            let t = t as f64;
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / n as f64)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean weighted BCE on logits and its gradient with respect to them.
pub(crate) fn bce_with_logits<T: Real>(z: &Tensor<T>, target: &[T], positive_weight: f64) -> (f64, Tensor<T>) {
    let n = z.data.len() as f64;
    let mut loss = 0.0;
    let grad = z
        .data
        .iter()
        .zip(target)
        .map(|(&zi, &ti)| {
            let (z, t) = (zi.to_f64().unwrap(), ti.to_f64().unwrap());
            loss += positive_weight * t * softplus(-z) + (1.0 - t) * softplus(z);
            let s = 1.0 / (1.0 + (-z).exp());
            T::of((positive_weight * t * (s - 1.0) + (1.0 - t) * s) / n)
        })
        .collect();
    (loss / n, Tensor::from_vec(z.c, z.h, z.w, grad))
}

/// Scales `grads` so their global L2 norm is at most `c`; returns the norm
/// before clipping.
pub fn clip_gradients(grads: &mut [f32], c: f64) -> f64 {
    assert!(c > 0.0, "clip threshold must be positive");
    let norm = grads.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
    if norm > c {
        let s = c / norm;
        grads.iter_mut().for_each(|g| *g = (*g as f64 * s) as f32);
    }
    norm
}

enum Optimizer {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 },
        }
    }

    fn step(&mut self, params: &mut [f32], grads: &[f32], lr: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p = (*p as f64 - lr * g as f64) as f32;
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for i in 0..params.len() {
                    let g = grads[i] as f64;
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let update = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                    params[i] = (params[i] as f64 - update) as f32;
                }
            }
        }
    }
}

/// One layer window with its two target layers.
struct Sample {
    input: WindowInput<f32>,
    target: Vec<f32>,
}

fn window_samples(pairs: &[TrainPair], cfg: &NetConfig) -> Result<Vec<Sample>, TrainError> {
    let mut out = Vec::new();
    for p in pairs {
        p.check()?;
        let inputs = net::volume_inputs(&p.input, cfg.pca)?;
        for (z, input) in inputs.into_iter().enumerate() {
            let target = [2 * z, 2 * z + 1]
                .iter()
                .flat_map(|&l| p.ground_truth.layer(l).iter().map(|&b| if b { 1.0 } else { 0.0 }))
                .collect();
            out.push(Sample { input, target });
        }
    }
    Ok(out)
}

fn sample_gradient(params: &NetworkParams, s: &Sample, positive_weight: f64) -> (f64, Vec<f32>) {
    let (tape, out) = net::logits_graph(&params.arch, params.values(), &s.input);
    let (loss, seed) = bce_with_logits(tape.value(out), &s.target, positive_weight);
    let mut grads = vec![0.0f32; params.len()];
    tape.backward(out, seed, &mut grads);
    (loss, grads)
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_f1: Option<f64>,
    /// Pooled F1 for each reporting SNR bin; `None` where a bin is empty.
    pub val_bin_f1: Option<[Option<f64>; 4]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let bins: Vec<String> =
            SNR_BIN_LABELS.iter().map(|l| format!("f1_snr_{}", l.trim_matches(['[', ']', ')']).replace(',', "_"))).collect();
        let mut out = format!("epoch,train_loss,val_loss,val_f1,{}\n", bins.join(","));
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.records {
            let per_bin: Vec<String> = match r.val_bin_f1 {
                Some(b) => b.iter().map(|v| opt(*v)).collect(),
                None => vec![String::new(); 4],
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch,
                r.train_loss,
                opt(r.val_loss),
                opt(r.val_f1),
                per_bin.join(",")
            ));
        }
        out
    }
}

/// Anything that maps an input volume to a 2x confidence volume.
pub trait Segmenter: Sync {
    fn segment(&self, v: &Volume3D) -> Result<Volume3D, NetError>;
}

impl Segmenter for NetworkParams {
    fn segment(&self, v: &Volume3D) -> Result<Volume3D, NetError> {
        net::segment_volume(v, self)
    }
}

pub const VALIDATION_THRESHOLD: f32 = 0.5;

/// Segments every pair, thresholds at 0.5 and reports P/R/F1 per SNR bin.
pub fn validate<S: Segmenter + ?Sized>(seg: &S, pairs: &[TrainPair]) -> Result<SnrBinnedReport, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let samples = par::try_map_range(pairs.len(), |i| {
        let p = &pairs[i];
        let conf = seg.segment(&p.input)?;
        let prediction = conf.threshold(VALIDATION_THRESHOLD).map_err(NetError::from)?;
        Ok::<_, TrainError>(BinnedSample {
            ground_truth: p.ground_truth.clone(),
            prediction,
            snr: p.snr.unwrap_or(f64::INFINITY),
        })
    })?;
    Ok(snr_binned(&samples)?)
}

/// Mean loss over the windows of `pairs`, with the thresholded report.
fn evaluate(
    params: &NetworkParams,
    pairs: &[TrainPair],
    samples: &[Sample],
    positive_weight: f64,
) -> Result<(f64, SnrBinnedReport), TrainError> {
    let per_window = par::map_slice(samples, |s| {
        let (tape, out) = net::logits_graph(&params.arch, params.values(), &s.input);
        let z = tape.into_value(out);
        let (loss, _) = bce_with_logits(&z, &s.target, positive_weight);
        (loss, z)
    });
    let loss = per_window.iter().map(|(l, _)| l).sum::<f64>() / per_window.len() as f64;
    let mut windows = per_window.into_iter();
    let mut binned = Vec::with_capacity(pairs.len());
    for p in pairs {
        let d = p.input.dims();
        let mut bits = Vec::with_capacity(p.ground_truth.dims().len());
        for _ in 0..d.z {
            let (_, z) = windows.next().expect("one window per layer");
            bits.extend(z.data.iter().map(|&v| net::sigmoid(v) >= VALIDATION_THRESHOLD));
        }
        let prediction = BinaryMask3D::from_vec(p.ground_truth.dims(), bits).map_err(NetError::from)?;
        binned.push(BinnedSample {
            ground_truth: p.ground_truth.clone(),
            prediction,
            snr: p.snr.unwrap_or(f64::INFINITY),
        });
    }
    Ok((loss, snr_binned(&binned)?))
}

/// Trains from freshly initialized parameters. `on_epoch` sees each record
/// as soon as the epoch finishes.
pub fn train_pairs(
    train: &[TrainPair],
    val: &[TrainPair],
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(NetworkParams, TrainHistory), TrainError> {
    cfg.validate()?;
    net_cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySplit("training"));
    }
    for p in train.iter().chain(val) {
        net::check_input_dims(p.input.dims().x, p.input.dims().y)?;
    }
    let samples = window_samples(train, net_cfg)?;
    let val_samples = window_samples(val, net_cfg)?;

    let mut params = NetworkParams::init(net_cfg, cfg.seed)?;
    let mut opt = Optimizer::new(cfg.optimizer, params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = TrainHistory::default();
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let results = par::map_slice(batch, |&i| sample_gradient(&params, &samples[i], cfg.positive_weight));
            let mut grads = vec![0.0f32; params.len()];
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                grads.iter_mut().zip(g).for_each(|(a, b)| *a += *b);
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, step, loss: batch_loss });
            }
            loss_sum += batch_loss;
            let inv = 1.0 / batch.len() as f32;
            grads.iter_mut().for_each(|g| *g *= inv);
            clip_gradients(&mut grads, cfg.clip);
            opt.step(params.values_mut(), &grads, cfg.learning_rate);
        }

        let mut record = EpochRecord {
            epoch,
            train_loss: loss_sum / samples.len() as f64,
            val_loss: None,
            val_f1: None,
            val_bin_f1: None,
        };
        let due = cfg.validate_every > 0 && (epoch % cfg.validate_every == 0 || epoch == cfg.epochs);
        if due && !val.is_empty() {
            let (loss, report) = evaluate(&params, val, &val_samples, cfg.positive_weight)?;
            record.val_loss = Some(loss);
            record.val_f1 = Some(report.overall.f1);
            record.val_bin_f1 = Some(std::array::from_fn(|i| {
                report.bins.get(i).filter(|b| b.occupied()).map(|b| b.pooled.f1)
            }));
        }
        on_epoch(&record);
        history.records.push(record);
    }
    Ok((params, history))
}

/// Trains on the manifest's training split, validating on its validation split.
pub fn train(
    dataset: &DatasetManifest,
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(NetworkParams, TrainHistory), TrainError> {
    let train = TrainPair::load_split(dataset, Split::Train)?;
    let val = TrainPair::load_split(dataset, Split::Validation)?;
    train_pairs(&train, &val, net_cfg, cfg, on_epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::PredictionPair;
    use crate::volume::Dims;
    use rand::Rng;

    fn pair(w: usize, h: usize, lower: Vec<f32>, upper: Vec<f32>) -> PredictionPair {
        PredictionPair { width: w, height: h, lower, upper }
    }

    #[test]
    fn bce_examples() {
        let t = pair(2, 1, vec![1.0, 0.0], vec![0.0, 1.0]);
        assert!(bce_loss(&t, &t).unwrap() <= 1e-6);
        let half = pair(2, 1, vec![0.5; 2], vec![0.5; 2]);
        assert!((bce_loss(&half, &t).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);

        let p = pair(2, 1, vec![0.2, 0.9], vec![0.6, 0.3]);
        let flip = |x: &PredictionPair| {
            pair(2, 1, x.lower.iter().map(|v| 1.0 - v).collect(), x.upper.iter().map(|v| 1.0 - v).collect())
        };
        let a = bce_loss(&p, &t).unwrap();
        let b = bce_loss(&flip(&p), &flip(&t)).unwrap();
        assert!((a - b).abs() < 1e-6);
        assert!(bce_loss(&p, &pair(1, 2, vec![0.0; 2], vec![0.0; 2])).is_err());
    }

    #[test]
    fn logits_loss_matches_probability_loss() {
        let z = Tensor::from_vec(2, 1, 2, vec![-3.0f64, 0.0, 1.5, 4.0]);
        let t = [0.0, 1.0, 1.0, 0.0];
        let (l, g) = bce_with_logits(&z, &t, 1.0);
        let probs: Vec<f32> = z.data.iter().map(|&v| net::sigmoid(v as f32)).collect();
        let p = pair(2, 1, probs[..2].to_vec(), probs[2..].to_vec());
        let tp = pair(2, 1, vec![0.0, 1.0], vec![1.0, 0.0]);
        assert!((l - bce_loss(&p, &tp).unwrap()).abs() < 1e-6);
        for i in 0..4 {
            let h = 1e-6;
            let mut zp = z.clone();
            zp.data[i] += h;
            let mut zm = z.clone();
            zm.data[i] -= h;
            let fd = (bce_with_logits(&zp, &t, 1.0).0 - bce_with_logits(&zm, &t, 1.0).0) / (2.0 * h);
            assert!((fd - g.data[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0f32, 4.0];
        assert_eq!(clip_gradients(&mut g, 0.01), 5.0);
        let norm = (g[0] as f64).hypot(g[1] as f64);
        assert!((norm - 0.01).abs() < 1e-8);
        assert!((g[0] / g[1] - 0.75).abs() < 1e-6);

        let mut small = vec![0.003f32, 0.004];
        clip_gradients(&mut small, 0.01);
        assert_eq!(small, vec![0.003, 0.004]);
        let mut zero = vec![0.0f32; 3];
        clip_gradients(&mut zero, 0.01);
        assert_eq!(zero, vec![0.0; 3]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
            TrainConfig { clip: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    fn tiny_pairs(n: usize, seed: u64) -> Vec<TrainPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let d = Dims::new(32, 32, 2).unwrap();
                let cx = rng.random_range(8..24);
                let gt = BinaryMask3D::from_fn(d.doubled(), |x, y, _| (x as i64 - 2 * cx).abs() < 4 && y > 10).unwrap();
                let input = gt.to_volume().downsample2().unwrap();
                TrainPair { input, ground_truth: gt, snr: Some(rng.random_range(1.0..100.0)) }
            })
            .collect()
    }

    fn quick() -> (NetConfig, TrainConfig) {
        (NetConfig::tiny(2), TrainConfig { epochs: 1, batch_size: 2, ..Default::default() })
    }

    #[test]
    fn one_epoch_one_record() {
        let (net_cfg, cfg) = quick();
        let pairs = tiny_pairs(2, 0);
        let mut seen = 0;
        let (_, h) = train_pairs(&pairs, &pairs[..1], &net_cfg, &cfg, |_| seen += 1).unwrap();
        assert_eq!(h.records.len(), 1);
        assert_eq!(seen, 1);
        assert!(h.records[0].val_f1.is_some());
        assert_eq!(h.to_csv().lines().count(), 2);
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let (net_cfg, cfg) = quick();
        for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let cfg = TrainConfig { learning_rate: 0.0, optimizer, ..cfg.clone() };
            let (p, _) = train_pairs(&tiny_pairs(2, 1), &[], &net_cfg, &cfg, |_| {}).unwrap();
            assert_eq!(p, NetworkParams::init(&net_cfg, cfg.seed).unwrap());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (net_cfg, cfg) = quick();
        let pairs = tiny_pairs(2, 2);
        let a = train_pairs(&pairs, &[], &net_cfg, &cfg, |_| {}).unwrap();
        let b = train_pairs(&pairs, &[], &net_cfg, &cfg, |_| {}).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn empty_training_split_is_rejected() {
        let (net_cfg, cfg) = quick();
        assert!(matches!(train_pairs(&[], &[], &net_cfg, &cfg, |_| {}), Err(TrainError::EmptySplit(_))));
    }

    struct Oracle(Vec<(Volume3D, BinaryMask3D)>);

    impl Segmenter for Oracle {
        fn segment(&self, v: &Volume3D) -> Result<Volume3D, NetError> {
            let gt = &self.0.iter().find(|(i, _)| i == v).expect("known input").1;
            Ok(gt.to_volume())
        }
    }

    struct Zero;

    impl Segmenter for Zero {
        fn segment(&self, v: &Volume3D) -> Result<Volume3D, NetError> {
            Ok(Volume3D::zeros(v.dims().doubled())?)
        }
    }

    #[test]
    fn validate_with_stub_segmenters() {
        let pairs = tiny_pairs(4, 3);
        let oracle = Oracle(pairs.iter().map(|p| (p.input.clone(), p.ground_truth.clone())).collect());
        let r = validate(&oracle, &pairs).unwrap();
        for b in r.bins.iter().filter(|b| b.occupied()) {
            assert_eq!(b.pooled.f1, 1.0);
        }
        let labels: Vec<_> = r.bins.iter().map(|b| b.label.as_str()).collect();
        assert_eq!(labels, SNR_BIN_LABELS);

        let r = validate(&Zero, &pairs).unwrap();
        assert_eq!((r.overall.recall, r.overall.f1), (0.0, 0.0));
        assert!(matches!(validate(&Zero, &[]), Err(TrainError::EmptySplit(_))));
    }
}
