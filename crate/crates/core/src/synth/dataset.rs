//! Sample-pair generation and on-disk datasets.
//!
//! Layout under the dataset root:
//!
//! ```text
//! manifest.jsonl
//! pairs/train/<seed>.vol3       low-resolution input
//! pairs/train/<seed>.msk3       2x ground truth
//! pairs/validation/<seed>.vol3
//! pairs/validation/<seed>.msk3
//! ```
//!
//! Every manifest line is one [`ManifestEntry`]; together with the config and
//! the root models it is enough to regenerate each pair bit for bit.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::{draw_noise_specs, gen_noise_sum, NoiseMix, NoiseSpec};
use super::snr::compose_sample;
use super::SynthError;
use crate::digest::sha256_hex;
use crate::par;
use crate::root_model::{voxelize_mask, voxelize_signal, Grid, RootSystem, Transform};
use crate::volume::{self, BinaryMask3D, Dims, Volume3D};

/// Offset between train and validation seed ranges.
pub const VALIDATION_SEED_OFFSET: u64 = 1 << 32;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Input (low-resolution) grid; ground truth is twice as fine.
    pub input_dims: Dims,
    /// Input voxel edge length in millimetres.
    pub voxel_size: f64,
    pub origin: [f64; 3],
    /// Sub-samples per axis per 2x voxel for the partial-volume signal.
    pub supersample: usize,
    /// Rotation range in degrees.
    pub rotation_deg: (f64, f64),
    /// Rotate about a random axis instead of z.
    pub tilt: bool,
    pub mirror_probability: f64,
    pub thickness: (f64, f64),
    /// Maximum translation per axis, millimetres.
    pub translation_mm: f64,
    /// Target SNR range, drawn log-uniformly.
    pub snr_range: (f64, f64),
    pub noise: NoiseMix,
    pub n_train: usize,
    pub n_val: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            input_dims: Dims { x: 32, y: 32, z: 16 },
            voxel_size: 1.0,
            origin: [0.0; 3],
            supersample: 2,
            rotation_deg: (0.0, 360.0),
            tilt: false,
            mirror_probability: 0.5,
            thickness: (0.8, 1.25),
            translation_mm: 1.0,
            snr_range: (1.0, 100.0),
            noise: NoiseMix::default(),
            n_train: 384,
            n_val: 384,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        self.input_dims.validate()?;
        if !(self.voxel_size > 0.0) {
            return bad("voxel_size must be positive");
        }
        if self.supersample == 0 {
            return bad("supersample must be >= 1");
        }
        if !(self.thickness.0 > 0.0 && self.thickness.0 <= self.thickness.1) {
            return bad("thickness range must be positive and ordered");
        }
        if !(self.snr_range.0 > 0.0 && self.snr_range.0 <= self.snr_range.1) {
            return bad("snr_range must be positive and ordered");
        }
        if self.rotation_deg.0 > self.rotation_deg.1 {
            return bad("rotation_deg must be ordered");
        }
        if !(0.0..=1.0).contains(&self.mirror_probability) {
            return bad("mirror_probability must lie in [0, 1]");
        }
        if !(self.translation_mm >= 0.0) || !(self.noise.amplitude >= 0.0) {
            return bad("translation_mm and noise.amplitude must be >= 0");
        }
        if !(self.noise.perlin_cell.0 >= 1.0 && self.noise.perlin_cell.0 <= self.noise.perlin_cell.1) {
            return bad("noise.perlin_cell must be >= 1 and ordered");
        }
        Ok(())
    }

    pub fn input_grid(&self) -> Grid {
        Grid { dims: self.input_dims, voxel_size: self.voxel_size, origin: self.origin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn dir_name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub transform: Transform,
    pub noise: Vec<NoiseSpec>,
    /// `None` when the sample is noise-free.
    pub target_snr: Option<f64>,
    pub snr: Option<f64>,
    pub noise_scale: f64,
    /// Input normalization: `stored = (raw - norm_offset) * norm_scale`.
    pub norm_offset: f64,
    pub norm_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub input: Volume3D,
    pub ground_truth: BinaryMask3D,
    pub meta: SampleMeta,
}

fn draw_transform(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Transform {
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..hi) };
    let rotation = uniform(rng, cfg.rotation_deg).to_radians();
    let axis = if cfg.tilt {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if v.iter().all(|c| *c == 0.0) { [0.0, 0.0, 1.0] } else { v }
    } else {
        [0.0, 0.0, 1.0]
    };
    let mut mirror = [false; 3];
    for m in mirror.iter_mut() {
        *m = cfg.mirror_probability > 0.0 && rng.random_bool(cfg.mirror_probability);
    }
    let t = cfg.translation_mm;
    let translation = if t > 0.0 {
        [rng.random_range(-t..t), rng.random_range(-t..t), rng.random_range(-t..t)]
    } else {
        [0.0; 3]
    };
    Transform { rotation, axis, mirror, translation, thickness_scale: uniform(rng, cfg.thickness) }
}

/// Draws one augmented, noisy pair; a pure function of `(rs, config, seed)`.
pub fn generate_pair(rs: &RootSystem, cfg: &GenConfig, seed: u64) -> Result<SamplePair, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transform = draw_transform(&mut rng, cfg);
    let placed = rs.apply_transform(&transform);

    let gt_grid = cfg.input_grid().doubled();
    let ground_truth = voxelize_mask(&placed, &gt_grid);
    let signal = voxelize_signal(&placed, &gt_grid, cfg.supersample).downsample2()?;

    let noise_specs = if cfg.noise.amplitude > 0.0 { draw_noise_specs(&mut rng, &cfg.noise) } else { Vec::new() };
    let (lo, hi) = cfg.snr_range;
    let target = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();

    if noise_specs.is_empty() {
        let (input, norm_offset, norm_scale) = signal.normalize_unit();
        return Ok(SamplePair {
            input,
            ground_truth,
            meta: SampleMeta {
                seed,
                transform,
                noise: noise_specs,
                target_snr: None,
                snr: None,
                noise_scale: 0.0,
                norm_offset,
                norm_scale,
            },
        });
    }

    let noise = gen_noise_sum(&noise_specs, cfg.input_dims)?;
    let mut roots = signal.threshold(0.5)?;
    if roots.count() == 0 {
        roots = ground_truth.pool_any2()?;
    }
    let composite = compose_sample(&signal, &noise, &roots, target)?;
    Ok(SamplePair {
        input: composite.volume,
        ground_truth,
        meta: SampleMeta {
            seed,
            transform,
            noise: noise_specs,
            target_snr: Some(target),
            snr: Some(composite.snr),
            noise_scale: composite.noise_scale,
            norm_offset: composite.offset,
            norm_scale: composite.scale,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub split: Split,
    /// Index into the model list used at generation time.
    pub model: usize,
    pub input: String,
    pub ground_truth: String,
    pub input_dims: Dims,
    pub config_hash: String,
    #[serde(flatten)]
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entries serialize"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the manifest text.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_jsonl().as_bytes())
    }

    pub fn config_hash(&self) -> Option<&str> {
        self.entries.first().map(|e| e.config_hash.as_str())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Reads `manifest.jsonl` from a dataset directory (or the file itself).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let (root, file) = if path.is_dir() {
            (path.to_path_buf(), path.join(MANIFEST_FILE))
        } else {
            (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
        };
        let text = fs::read_to_string(&file)
            .map_err(|source| SynthError::File { path: file.display().to_string(), source })?;
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line)
                .map_err(|e| SynthError::Manifest { line: i + 1, message: e.to_string() })?;
            for p in [&entry.input, &entry.ground_truth] {
                if !seen.insert(p.clone()) {
                    return Err(SynthError::Manifest { line: i + 1, message: format!("path {p} listed twice") });
                }
            }
            entries.push(entry);
        }
        Ok(DatasetManifest { root, entries })
    }

    pub fn load_pair(&self, entry: &ManifestEntry) -> Result<(Volume3D, BinaryMask3D), SynthError> {
        let input = volume::load_volume(self.root.join(&entry.input))?;
        let gt = volume::load_mask(self.root.join(&entry.ground_truth))?;
        if gt.dims() != input.dims().doubled() {
            return Err(SynthError::DimsMismatch(input.dims().doubled(), gt.dims()));
        }
        Ok((input, gt))
    }
}

/// Hash over the generation config and the model texts.
pub fn config_hash(models: &[RootSystem], cfg: &GenConfig) -> String {
    let mut bytes = serde_json::to_vec(cfg).expect("config serializes");
    for m in models {
        bytes.extend_from_slice(m.to_text().as_bytes());
    }
    sha256_hex(&bytes)
}

pub fn split_seed(cfg: &GenConfig, split: Split, index: usize) -> u64 {
    let base = match split {
        Split::Train => cfg.seed,
        Split::Validation => cfg.seed.wrapping_add(VALIDATION_SEED_OFFSET),
    };
    base.wrapping_add(index as u64)
}

/// Generates `n_train + n_val` pairs under `out_dir` and writes the manifest.
pub fn generate_dataset(
    models: &[RootSystem],
    cfg: &GenConfig,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest, SynthError> {
    if models.is_empty() {
        return Err(SynthError::NoModels);
    }
    cfg.validate()?;
    let root = out_dir.as_ref().to_path_buf();
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source| SynthError::File { path, source }
    };
    for split in [Split::Train, Split::Validation] {
        let dir = root.join("pairs").join(split.dir_name());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let hash = config_hash(models, cfg);
    let jobs: Vec<(Split, usize)> = (0..cfg.n_train)
        .map(|i| (Split::Train, i))
        .chain((0..cfg.n_val).map(|i| (Split::Validation, i)))
        .collect();

    let entries = par::try_map_range(jobs.len(), |j| {
        let (split, i) = jobs[j];
        let seed = split_seed(cfg, split, i);
        let model = i % models.len();
        let pair = generate_pair(&models[model], cfg, seed)?;
        let input = format!("pairs/{}/{seed}.vol3", split.dir_name());
        let ground_truth = format!("pairs/{}/{seed}.msk3", split.dir_name());
        volume::save_volume(&pair.input, root.join(&input))?;
        volume::save_mask(&pair.ground_truth, root.join(&ground_truth))?;
        Ok::<_, SynthError>(ManifestEntry {
            split,
            model,
            input,
            ground_truth,
            input_dims: cfg.input_dims,
            config_hash: hash.clone(),
            meta: pair.meta,
        })
    })?;

    let manifest = DatasetManifest { root: root.clone(), entries };
    let path = manifest.path();
    fs::write(&path, manifest.to_jsonl()).map_err(io_err(&path))?;
    Ok(manifest)
}
