//! Finite-difference verification of the backward pass, in `f64`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{bce_with_logits, TrainError};
use crate::net::{self, NetConfig, NetworkParams, Tensor, WindowInput};

const STEP: f64 = 1e-5;
const MIN_CHECKED: usize = 100;
/// Floor on the denominator of the relative error. Rounding in the forward
/// pass leaves central differences at this step with absolute noise near
/// 1e-10, so smaller gradients are compared absolutely.
const REL_FLOOR: f64 = 1e-5;
const SIDE: usize = 32;
const BIAS_SPREAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Number of parameters compared.
    pub checked: usize,
    /// Candidates dropped because `theta +/- step` crossed a ReLU or
    /// max-pool switch, where the loss is not differentiable.
    pub skipped_kinks: usize,
    /// Every analytic gradient component is finite.
    pub finite: bool,
}

/// Loss with the digest of the activation pattern it was computed in.
fn loss(params: &NetworkParams, values: &[f64], input: &WindowInput<f64>, target: &[f64]) -> (f64, u64) {
    let (tape, out) = net::logits_graph(&params.arch, values, input);
    (bce_with_logits(tape.value(out), target, 1.0).0, tape.pattern_digest())
}

fn gradient(params: &NetworkParams, values: &[f64], input: &WindowInput<f64>, target: &[f64]) -> Vec<f64> {
    let (tape, out) = net::logits_graph(&params.arch, values, input);
    let (_, seed) = bce_with_logits(tape.value(out), target, 1.0);
    let mut g = vec![0.0; values.len()];
    tape.backward(out, seed, &mut g);
    g
}

/// Initial weights with random biases. Zero biases put many ReLU inputs
/// exactly on the kink, where central differences are one-sided.
fn generic_point(params: &NetworkParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut values: Vec<f64> = params.values().iter().map(|&v| v as f64).collect();
    for e in params.layout().entries.iter().filter(|e| e.shape.len() == 1) {
        for v in &mut values[e.offset..e.offset + e.len()] {
            *v = rng.random_range(-BIAS_SPREAD..BIAS_SPREAD);
        }
    }
    values
}

fn compare(params: &NetworkParams, input: &WindowInput<f64>, target: &[f64], seed: u64) -> GradCheckReport {
    let values = generic_point(params, seed);
    let analytic = gradient(params, &values, input, target);
    let (_, base) = loss(params, &values, input, target);

    // one parameter from every tensor first, then random extras
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut candidates: Vec<usize> =
        params.layout().entries.iter().map(|e| e.offset + rng.random_range(0..e.len())).collect();
    let wanted = MIN_CHECKED.max(candidates.len());
    candidates.extend(sample(&mut rng, values.len(), (4 * wanted).min(values.len())));

    let probe = |i: usize| {
        let mut v = values.clone();
        v[i] = values[i] + STEP;
        let (up, pu) = loss(params, &v, input, target);
        v[i] = values[i] - STEP;
        let (down, pd) = loss(params, &v, input, target);
        if pu != base || pd != base {
            return None;
        }
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[i];
        Some((a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR))
    };

    let mut seen = std::collections::HashSet::new();
    let mut errors = Vec::new();
    let mut skipped_kinks = 0;
    for chunk in candidates.chunks(16) {
        if errors.len() >= wanted {
            break;
        }
        let fresh: Vec<usize> = chunk.iter().copied().filter(|i| seen.insert(*i)).collect();
        for r in crate::par::map_slice(&fresh, |&i| probe(i)) {
            match r {
                Some(e) => errors.push(e),
                None => skipped_kinks += 1,
            }
        }
    }
    GradCheckReport {
        max_relative_error: errors.iter().copied().fold(0.0, f64::max),
        checked: errors.len(),
        skipped_kinks,
        finite: analytic.iter().all(|g| g.is_finite()),
    }
}

fn random_case(seed: u64) -> (WindowInput<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = SIDE * SIDE;
    let raw: Vec<f32> = (0..5 * n).map(|_| rng.random_range(0.0..1.0)).collect();
    let window = crate::volume::LayerWindow { width: SIDE, height: SIDE, center: 2, data: raw };
    let input = WindowInput::new(&window, &net::PcaFit::fit_window(&window)).cast();
    let target = (0..2 * 4 * n).map(|_| if rng.random_bool(0.2) { 1.0 } else { 0.0 }).collect();
    (input, target)
}

/// Compares analytic and central-difference gradients of the training loss
/// on a random 32x32 window, over at least 100 parameters.
pub fn grad_check(net_cfg: &NetConfig, seed: u64) -> Result<GradCheckReport, TrainError> {
    let params = NetworkParams::init(net_cfg, seed)?;
    let (input, target) = random_case(seed);
    Ok(compare(&params, &input, &target, seed))
}

/// Gradients for an all-zero window against an all-zero target.
pub fn zero_input_gradient(net_cfg: &NetConfig, seed: u64) -> Result<Vec<f64>, TrainError> {
    let params = NetworkParams::init(net_cfg, seed)?;
    let n = SIDE * SIDE;
    let input = WindowInput {
        rgb: Tensor::zeros(3, SIDE, SIDE),
        raw: Tensor::zeros(5, SIDE, SIDE),
    };
    let values: Vec<f64> = params.values().iter().map(|&v| v as f64).collect();
    Ok(gradient(&params, &values, &input, &vec![0.0; 8 * n]))
}
