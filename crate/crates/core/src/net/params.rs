//! Network configuration, parameter layout and initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ops::ConvShape;
use super::tape::ConvParam;
use super::NetError;
use crate::volume::LayerWindow;

/// Where the PCA colour basis is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaScope {
    /// One basis per five-layer window.
    #[default]
    Window,
    /// One basis for all windows of a volume.
    Volume,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Output channels of the five encoder stages.
    pub encoder_widths: [usize; 5],
    /// Channel width inside the refinement cascade.
    pub refine_width: usize,
    pub input_layers: usize,
    /// In-plane and through-plane upscaling factor.
    pub scale: usize,
    pub pca: PcaScope,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            encoder_widths: [16, 32, 64, 128, 256],
            refine_width: 16,
            input_layers: LayerWindow::LAYERS,
            scale: 2,
            pca: PcaScope::Window,
        }
    }
}

impl NetConfig {
    /// Uniform small widths, for tests and quick experiments.
    pub fn tiny(width: usize) -> Self {
        NetConfig { encoder_widths: [width; 5], refine_width: width, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.encoder_widths.contains(&0) || self.refine_width == 0 {
            return Err(NetError::InvalidConfig("channel widths must be at least 1".into()));
        }
        if self.input_layers != LayerWindow::LAYERS {
            return Err(NetError::InvalidConfig(format!(
                "input_layers must be {}, got {}",
                LayerWindow::LAYERS,
                self.input_layers
            )));
        }
        if self.scale != 2 {
            return Err(NetError::InvalidConfig(format!("only scale 2 is supported, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        crate::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named tensors packed into one flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout {
    pub entries: Vec<TensorEntry>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, name: &str) -> Option<&TensorEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    fn push(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.len();
        self.entries.push(TensorEntry { name, shape, offset });
        offset
    }

    fn conv(&mut self, name: &str, co: usize, ci: usize, k: usize, stride: usize) -> ConvParam {
        let weight = self.push(format!("{name}.weight"), vec![co, ci, k, k]);
        let bias = self.push(format!("{name}.bias"), vec![co]);
        ConvParam { shape: ConvShape { co, ci, k, stride }, weight, bias }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Stage {
    pub down: ConvParam,
    pub c1: ConvParam,
    pub c2: ConvParam,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Rcu {
    pub c1: ConvParam,
    pub c2: ConvParam,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub adapt: ConvParam,
    pub rcu_lateral: Rcu,
    pub coarser: Option<(Rcu, ConvParam)>,
    pub fuse_lateral: ConvParam,
    pub pool: ConvParam,
    pub upsample: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Arch {
    pub stages: Vec<Stage>,
    pub blocks: Vec<Block>,
    pub head: ConvParam,
}

pub const REFINE_BLOCKS: usize = 7;

impl Arch {
    pub fn build(cfg: &NetConfig) -> (Arch, Layout) {
        let mut l = Layout::default();
        let mut stages = Vec::with_capacity(5);
        let mut cin = 3;
        for (s, &w) in cfg.encoder_widths.iter().enumerate() {
            let n = format!("encoder.{}", s + 1);
            stages.push(Stage {
                down: l.conv(&format!("{n}.down"), w, cin, 3, 2),
                c1: l.conv(&format!("{n}.conv1"), w, w, 3, 1),
                c2: l.conv(&format!("{n}.conv2"), w, w, 3, 1),
            });
            cin = w;
        }
        let c = cfg.refine_width;
        let lateral_channels = [
            cfg.encoder_widths[4],
            cfg.encoder_widths[3],
            cfg.encoder_widths[2],
            cfg.encoder_widths[1],
            cfg.encoder_widths[0],
            cfg.input_layers,
            cfg.input_layers,
        ];
        let rcu = |l: &mut Layout, n: &str| Rcu {
            c1: l.conv(&format!("{n}.conv1"), c, c, 3, 1),
            c2: l.conv(&format!("{n}.conv2"), c, c, 3, 1),
        };
        let blocks = lateral_channels
            .iter()
            .enumerate()
            .map(|(b, &cl)| {
                let n = format!("refine.{}", b + 1);
                let adapt = l.conv(&format!("{n}.adapt"), c, cl, 3, 1);
                let rcu_lateral = rcu(&mut l, &format!("{n}.rcu_lateral"));
                let coarser = (b > 0).then(|| {
                    let r = rcu(&mut l, &format!("{n}.rcu_coarser"));
                    let f = l.conv(&format!("{n}.fuse_coarser"), c, c, 3, 1);
                    (r, f)
                });
                let fuse_lateral = l.conv(&format!("{n}.fuse_lateral"), c, c, 3, 1);
                let pool = l.conv(&format!("{n}.pool"), c, c, 3, 1);
                Block { adapt, rcu_lateral, coarser, fuse_lateral, pool, upsample: b + 1 < REFINE_BLOCKS }
            })
            .collect();
        let head = l.conv("head", 2, c, 1, 1);
        (Arch { stages, blocks, head }, l)
    }

    /// Convolutions closing a residual branch; they start small so the
    /// identity path dominates at initialization.
    fn branch_ends(&self) -> Vec<&ConvParam> {
        let mut v: Vec<&ConvParam> = self.stages.iter().map(|s| &s.c2).collect();
        for b in &self.blocks {
            v.push(&b.rcu_lateral.c2);
            if let Some((r, _)) = &b.coarser {
                v.push(&r.c2);
            }
            v.push(&b.pool);
        }
        v
    }
}

const BRANCH_END_GAIN: f64 = 0.1;

/// Parameters of one network, with the layout they were created for.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    config: NetConfig,
    layout: Layout,
    pub(crate) arch: Arch,
    values: Vec<f32>,
}

impl NetworkParams {
    /// All tensors zero.
    pub fn zeros(config: &NetConfig) -> Result<Self, NetError> {
        config.validate()?;
        let (arch, layout) = Arch::build(config);
        let values = vec![0.0; layout.len()];
        Ok(NetworkParams { config: config.clone(), layout, arch, values })
    }

    /// He-normal weights, zero biases.
    pub fn init(config: &NetConfig, seed: u64) -> Result<Self, NetError> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ends: Vec<usize> = p.arch.branch_ends().iter().map(|c| c.weight).collect();
        for e in p.layout.entries.iter().filter(|e| e.shape.len() == 4) {
            let fan_in = e.shape[1] * e.shape[2] * e.shape[3];
            let gain = if ends.contains(&e.offset) { BRANCH_END_GAIN } else { 1.0 };
            let normal = Normal::new(0.0, gain * (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for v in &mut p.values[e.offset..e.offset + e.len()] {
                *v = normal.sample(&mut rng) as f32;
            }
        }
        Ok(p)
    }

    pub fn from_values(config: &NetConfig, values: Vec<f32>) -> Result<Self, NetError> {
        let mut p = Self::zeros(config)?;
        if values.len() != p.values.len() {
            return Err(NetError::Shape(format!("expected {} parameters, got {}", p.values.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NetError::Shape("non-finite parameter".into()));
        }
        p.values = values;
        Ok(p)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f32]> {
        self.layout.get(name).map(|e| &self.values[e.offset..e.offset + e.len()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f32]> {
        let e = self.layout.get(name)?.clone();
        Some(&mut self.values[e.offset..e.offset + e.len()])
    }
}
