//! Layer-wise super-resolution segmentation network.
//!
//! Each z index of an input volume is segmented from the five layers around
//! it. The window is compressed to three PCA channels for a five-stage
//! residual encoder (taps at 1/2 to 1/32 resolution). A cascade of seven
//! refinement blocks then fuses the taps coarse to fine:
//!
//! | block | lateral input              | output res. |
//! |-------|----------------------------|-------------|
//! | 1     | encoder 1/32               | 1/16        |
//! | 2-5   | encoder 1/16 .. 1/2        | 1/8 .. 1    |
//! | 6     | raw 5-layer window         | 2x          |
//! | 7     | raw window upsampled to 2x | 2x          |
//!
//! A 1x1 head emits two channels, read as output layers `2i` and `2i + 1`.

mod ops;
mod params;
mod pca;
mod tape;
mod tensor;

pub use params::{Layout, NetConfig, NetworkParams, PcaScope, TensorEntry, REFINE_BLOCKS};
pub use pca::{pca_compress, PcaFit, RgbEncoding};
pub use tensor::{Real, Tensor};

pub(crate) use tape::{Tape, Var};

use thiserror::Error;

use crate::par;
use crate::volume::{Dims, LayerWindow, Volume3D, VolumeError};
use params::{Arch, Block, Rcu};

/// In-plane dims must be divisible by this (five stride-2 stages).
pub const SPATIAL_MULTIPLE: usize = 32;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(
        "in-plane dims {x}x{y} must be multiples of {SPATIAL_MULTIPLE}; \
         nearest valid dims are {nearest_x}x{nearest_y} (pad or crop the input)"
    )]
    DimsNotDivisible { x: usize, y: usize, nearest_x: usize, nearest_y: usize },
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub fn check_input_dims(x: usize, y: usize) -> Result<(), NetError> {
    if x.is_multiple_of(SPATIAL_MULTIPLE) && y.is_multiple_of(SPATIAL_MULTIPLE) && x > 0 && y > 0 {
        return Ok(());
    }
    let nearest = |n: usize| ((n + SPATIAL_MULTIPLE / 2) / SPATIAL_MULTIPLE).max(1) * SPATIAL_MULTIPLE;
    Err(NetError::DimsNotDivisible { x, y, nearest_x: nearest(x), nearest_y: nearest(y) })
}

/// Encoder outputs, finest first (1/2, 1/4, 1/8, 1/16, 1/32).
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub levels: Vec<Tensor<f32>>,
}

/// Confidence maps for the two output layers produced from one window.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionPair {
    /// Output width and height (twice the input).
    pub width: usize,
    pub height: usize,
    /// Layer `2i`.
    pub lower: Vec<f32>,
    /// Layer `2i + 1`.
    pub upper: Vec<f32>,
}

/// Network inputs derived from one window.
#[derive(Debug, Clone)]
pub(crate) struct WindowInput<T> {
    pub rgb: Tensor<T>,
    pub raw: Tensor<T>,
}

impl WindowInput<f32> {
    pub fn new(w: &LayerWindow, fit: &PcaFit) -> Self {
        let rgb = fit.encode(w);
        WindowInput {
            rgb: Tensor::from_vec(3, w.height, w.width, rgb.data),
            raw: Tensor::from_vec(LayerWindow::LAYERS, w.height, w.width, w.data.clone()),
        }
    }
}

impl<T: Real> WindowInput<T> {
    pub fn cast<U: Real>(&self) -> WindowInput<U> {
        WindowInput { rgb: self.rgb.cast(), raw: self.raw.cast() }
    }
}

fn encoder<T: Real>(t: &mut Tape<'_, T>, arch: &Arch, rgb: Var) -> Vec<Var> {
    let mut x = rgb;
    let mut taps = Vec::with_capacity(arch.stages.len());
    for s in &arch.stages {
        let d = t.conv(x, &s.down);
        let d = t.relu(d);
        let b = t.conv(d, &s.c1);
        let b = t.relu(b);
        let b = t.conv(b, &s.c2);
        x = t.add(d, b);
        taps.push(x);
    }
    taps
}

/// Residual convolution unit: `x + conv(relu(conv(relu(x))))`.
fn rcu<T: Real>(t: &mut Tape<'_, T>, r: &Rcu, x: Var) -> Var {
    let a = t.relu(x);
    let a = t.conv(a, &r.c1);
    let a = t.relu(a);
    let a = t.conv(a, &r.c2);
    t.add(x, a)
}

fn refine<T: Real>(t: &mut Tape<'_, T>, b: &Block, coarser: Option<Var>, lateral: Var) -> Var {
    let l = t.conv(lateral, &b.adapt);
    let l = rcu(t, &b.rcu_lateral, l);
    let mut fused = t.conv(l, &b.fuse_lateral);
    if let (Some(p), Some((r, f))) = (coarser, &b.coarser) {
        let p = rcu(t, r, p);
        let p = t.conv(p, f);
        fused = t.add(fused, p);
    }
    // chained residual pooling, one stage
    let y = t.relu(fused);
    let m = t.maxpool5(y);
    let m = t.conv(m, &b.pool);
    let out = t.add(y, m);
    if b.upsample {
        t.upsample2(out)
    } else {
        out
    }
}

/// Records the full network on a fresh tape and returns the head logits.
pub(crate) fn logits_graph<'p, T: Real>(arch: &Arch, params: &'p [T], input: &WindowInput<T>) -> (Tape<'p, T>, Var) {
    let mut t = Tape::new(params);
    let rgb = t.leaf(input.rgb.clone());
    let raw = t.leaf(input.raw.clone());
    let raw_up = t.upsample2(raw);
    let taps = encoder(&mut t, arch, rgb);
    let laterals = [taps[4], taps[3], taps[2], taps[1], taps[0], raw, raw_up];
    let mut prev = None;
    for (b, lat) in arch.blocks.iter().zip(laterals) {
        prev = Some(refine(&mut t, b, prev, lat));
    }
    let logits = t.conv(prev.expect("seven blocks"), &arch.head);
    (t, logits)
}

pub(crate) fn sigmoid(z: f32) -> f32 {
    (1.0 / (1.0 + (-(z as f64)).exp())) as f32
}

fn to_pair(logits: &Tensor<f32>) -> PredictionPair {
    let conf = |c: usize| logits.channel(c).iter().map(|&z| sigmoid(z)).collect();
    PredictionPair { width: logits.w, height: logits.h, lower: conf(0), upper: conf(1) }
}

pub fn encoder_forward(rgb: &RgbEncoding, params: &NetworkParams) -> Result<FeaturePyramid, NetError> {
    check_input_dims(rgb.width, rgb.height)?;
    let mut t = Tape::new(params.values());
    let x = t.leaf(Tensor::from_vec(3, rgb.height, rgb.width, rgb.data.clone()));
    let taps = encoder(&mut t, &params.arch, x);
    Ok(FeaturePyramid { levels: taps.into_iter().map(|v| t.value(v).clone()).collect() })
}

/// Runs refinement block `index` (1-based) on its inputs. `coarser` is the
/// previous block's output and must match the lateral input's resolution.
pub fn refine_block(
    params: &NetworkParams,
    index: usize,
    coarser: Option<&Tensor<f32>>,
    lateral: &Tensor<f32>,
) -> Result<Tensor<f32>, NetError> {
    let b = index
        .checked_sub(1)
        .and_then(|i| params.arch.blocks.get(i))
        .ok_or_else(|| NetError::Shape(format!("refinement block {index} does not exist")))?;
    if lateral.c != b.adapt.shape.ci {
        return Err(NetError::Shape(format!(
            "block {index} expects {} lateral channels, got {}",
            b.adapt.shape.ci, lateral.c
        )));
    }
    if let Some(c) = coarser {
        if b.coarser.is_none() {
            return Err(NetError::Shape(format!("block {index} takes no coarser input")));
        }
        if (c.h, c.w) != (lateral.h, lateral.w) || c.c != params.config().refine_width {
            return Err(NetError::Shape(format!(
                "coarser input {}x{}x{} does not match lateral resolution {}x{} with {} channels",
                c.c,
                c.h,
                c.w,
                lateral.h,
                lateral.w,
                params.config().refine_width
            )));
        }
    }
    let mut t = Tape::new(params.values());
    let lat = t.leaf(lateral.clone());
    let co = coarser.map(|c| t.leaf(c.clone()));
    let out = refine(&mut t, b, co, lat);
    Ok(t.into_value(out))
}

fn window_fit(w: &LayerWindow, volume_fit: Option<&PcaFit>) -> PcaFit {
    volume_fit.cloned().unwrap_or_else(|| PcaFit::fit_window(w))
}

fn forward_with(window: &LayerWindow, fit: &PcaFit, params: &NetworkParams) -> PredictionPair {
    let input = WindowInput::new(window, fit);
    let (t, out) = logits_graph(&params.arch, params.values(), &input);
    to_pair(&t.into_value(out))
}

/// Segments one window; the PCA basis is fitted on the window itself.
pub fn forward(window: &LayerWindow, params: &NetworkParams) -> Result<PredictionPair, NetError> {
    check_input_dims(window.width, window.height)?;
    if window.data.len() != LayerWindow::LAYERS * window.pixels() {
        return Err(NetError::Shape("window must hold five layers".into()));
    }
    Ok(forward_with(window, &PcaFit::fit_window(window), params))
}

/// Confidence volume of dims `(2x, 2y, 2z)`, one window per input layer.
pub fn segment_volume(v: &Volume3D, params: &NetworkParams) -> Result<Volume3D, NetError> {
    let d = v.dims();
    check_input_dims(d.x, d.y)?;
    let volume_fit = match params.config().pca {
        PcaScope::Window => None,
        PcaScope::Volume => Some(PcaFit::fit_volume(v)?),
    };
    let pairs = par::try_map_range(d.z, |z| {
        let w = v.layer_window(z)?;
        let fit = window_fit(&w, volume_fit.as_ref());
        Ok::<_, NetError>(forward_with(&w, &fit, params))
    })?;
    let out = d.doubled();
    let mut voxels = Vec::with_capacity(out.len());
    for p in pairs {
        voxels.extend_from_slice(&p.lower);
        voxels.extend_from_slice(&p.upper);
    }
    Ok(Volume3D::from_vec(out, voxels)?)
}

/// PCA fit for every window of a volume, honouring the configured scope.
pub(crate) fn volume_inputs(v: &Volume3D, scope: PcaScope) -> Result<Vec<WindowInput<f32>>, NetError> {
    let volume_fit = match scope {
        PcaScope::Window => None,
        PcaScope::Volume => Some(PcaFit::fit_volume(v)?),
    };
    par::try_map_range(v.dims().z, |z| {
        let w = v.layer_window(z)?;
        Ok(WindowInput::new(&w, &window_fit(&w, volume_fit.as_ref())))
    })
}

/// `Dims` of the confidence volume produced for an input of dims `d`.
pub fn output_dims(d: Dims) -> Dims {
    d.doubled()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(x: usize, y: usize, z: usize, seed: u64) -> Volume3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Volume3D::from_fn(Dims::new(x, y, z).unwrap(), |_, _, _| rng.random_range(0.0..1.0)).unwrap()
    }

    fn tiny() -> NetworkParams {
        NetworkParams::init(&NetConfig::tiny(4), 7).unwrap()
    }

    #[test]
    fn encoder_halves_each_stage() {
        let p = tiny();
        let rgb = RgbEncoding { width: 64, height: 64, data: vec![0.5; 3 * 64 * 64] };
        let sizes: Vec<_> = encoder_forward(&rgb, &p).unwrap().levels.iter().map(|t| (t.h, t.w)).collect();
        assert_eq!(sizes, [(32, 32), (16, 16), (8, 8), (4, 4), (2, 2)]);

        let rgb = RgbEncoding { width: 96, height: 64, data: vec![0.5; 3 * 96 * 64] };
        let coarsest = encoder_forward(&rgb, &p).unwrap().levels[4].clone();
        assert_eq!((coarsest.w, coarsest.h), (3, 2));

        let zero = RgbEncoding { width: 32, height: 32, data: vec![0.0; 3 * 32 * 32] };
        for level in encoder_forward(&zero, &p).unwrap().levels {
            assert!(level.data.iter().all(|&v| v == 0.0));
        }
        let bad = RgbEncoding { width: 48, height: 32, data: vec![0.0; 3 * 48 * 32] };
        assert!(matches!(encoder_forward(&bad, &p), Err(NetError::DimsNotDivisible { nearest_x: 64, .. })));
    }

    #[test]
    fn refine_block_shapes() {
        let p = tiny();
        let lat = Tensor::from_vec(4, 2, 2, vec![0.3; 16]);
        let out = refine_block(&p, 1, None, &lat).unwrap();
        assert_eq!((out.c, out.h, out.w), (4, 4, 4));

        let coarser = Tensor::from_vec(4, 4, 4, vec![0.1; 64]);
        let lat = Tensor::from_vec(4, 4, 4, vec![0.2; 64]);
        let out = refine_block(&p, 2, Some(&coarser), &lat).unwrap();
        assert_eq!((out.h, out.w), (2 * coarser.h, 2 * coarser.w));

        let zeros = Tensor::zeros(4, 4, 4);
        let out = refine_block(&p, 3, Some(&zeros), &zeros).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));

        let small = Tensor::zeros(4, 2, 2);
        assert!(refine_block(&p, 2, Some(&small), &lat).is_err());
        assert!(refine_block(&p, 8, None, &lat).is_err());
    }

    #[test]
    fn forward_doubles_resolution() {
        let p = tiny();
        let v = random_volume(64, 64, 5, 1);
        let pair = forward(&v.layer_window(2).unwrap(), &p).unwrap();
        assert_eq!((pair.width, pair.height), (128, 128));
        assert!(pair.lower.iter().chain(&pair.upper).all(|&c| c > 0.0 && c < 1.0));

        let other = NetworkParams::init(&NetConfig::tiny(4), 8).unwrap();
        assert_ne!(forward(&v.layer_window(2).unwrap(), &other).unwrap(), pair);
    }

    #[test]
    fn segment_volume_shape_and_zero_head() {
        let v = random_volume(64, 64, 8, 2);
        let mut p = tiny();
        let out = segment_volume(&v, &p).unwrap();
        assert_eq!(out.dims(), Dims::new(128, 128, 16).unwrap());
        p.tensor_mut("head.weight").unwrap().fill(0.0);
        let out = segment_volume(&v, &p).unwrap();
        assert!(out.voxels().iter().all(|&c| c == 0.5));
        assert!(matches!(segment_volume(&random_volume(40, 32, 2, 0), &p), Err(NetError::DimsNotDivisible { .. })));
    }

    #[test]
    fn output_pair_depends_only_on_its_window() {
        let p = tiny();
        let v = random_volume(32, 32, 16, 3);
        let mut voxels = v.voxels().to_vec();
        for i in 0..32 * 32 {
            voxels[9 * 32 * 32 + i] += 0.5;
        }
        let w = Volume3D::from_vec(v.dims(), voxels).unwrap();
        let a = segment_volume(&v, &p).unwrap();
        let b = segment_volume(&w, &p).unwrap();
        let layer = 64 * 64;
        assert_eq!(a.voxels()[..14 * layer], b.voxels()[..14 * layer]);
        assert_ne!(a.voxels()[14 * layer..], b.voxels()[14 * layer..]);
    }

    #[test]
    fn volume_scope_runs() {
        let cfg = NetConfig { pca: PcaScope::Volume, ..NetConfig::tiny(2) };
        let p = NetworkParams::init(&cfg, 0).unwrap();
        let out = segment_volume(&random_volume(32, 32, 3, 4), &p).unwrap();
        assert!(out.voxels().iter().all(|c| c.is_finite()));
    }
}
