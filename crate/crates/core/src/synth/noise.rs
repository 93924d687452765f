//! Soil-noise fields: multi-octave Perlin gradient noise plus white noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::par;
use crate::volume::{Dims, Volume3D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind {
    /// Gradient noise. Octave `k` uses cell size `cell_size / 2^k` and weight
    /// `octaves[k]`; an empty list means one octave of weight 1.
    Perlin { cell_size: f64, octaves: Vec<f64> },
    /// Independent values in `[0, amplitude]`.
    Uniform,
    /// Independent values with mean 0 and standard deviation `amplitude`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn perlin(amplitude: f64, cell_size: f64, octaves: Vec<f64>, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Perlin { cell_size, octaves }, amplitude, seed }
    }

    pub fn uniform(amplitude: f64, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Uniform, amplitude, seed }
    }

    pub fn gaussian(amplitude: f64, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Gaussian, amplitude, seed }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(SynthError::InvalidNoise(format!("amplitude {} must be >= 0", self.amplitude)));
        }
        if let NoiseKind::Perlin { cell_size, octaves } = &self.kind {
            if !(*cell_size >= 1.0) {
                return Err(SynthError::InvalidNoise(format!("cell size {cell_size} must be >= 1")));
            }
            if octaves.iter().any(|w| !w.is_finite()) {
                return Err(SynthError::InvalidNoise("non-finite octave weight".into()));
            }
        }
        Ok(())
    }
}

/// Classic improved-Perlin lattice with a seeded permutation table.
pub struct Perlin {
    perm: [u8; 512],
}

impl Perlin {
    pub fn new(seed: u64) -> Self {
        let mut table: Vec<u8> = (0..=255).collect();
        table.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = table[i & 255];
        }
        Perlin { perm }
    }

    #[inline]
    fn fade(t: f64) -> f64 {
        t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
    }

    #[inline]
    fn grad(hash: u8, x: f64, y: f64, z: f64) -> f64 {
        let h = hash & 15;
        let u = if h < 8 { x } else { y };
        let v = if h < 4 {
            y
        } else if h == 12 || h == 14 {
            x
        } else {
            z
        };
        (if h & 1 == 0 { u } else { -u }) + (if h & 2 == 0 { v } else { -v })
    }

    #[inline]
    fn lerp(t: f64, a: f64, b: f64) -> f64 {
        a + t * (b - a)
    }

    /// Noise value at a point in lattice units; zero at every lattice point.
    pub fn sample(&self, x: f64, y: f64, z: f64) -> f64 {
        let (fx, fy, fz) = (x.floor(), y.floor(), z.floor());
        let xi = (fx as i64 & 255) as usize;
        let yi = (fy as i64 & 255) as usize;
        let zi = (fz as i64 & 255) as usize;
        let (x, y, z) = (x - fx, y - fy, z - fz);
        let (u, v, w) = (Self::fade(x), Self::fade(y), Self::fade(z));
        let p = &self.perm;
        let a = p[xi] as usize + yi;
        let aa = p[a] as usize + zi;
        let ab = p[a + 1] as usize + zi;
        let b = p[xi + 1] as usize + yi;
        let ba = p[b] as usize + zi;
        let bb = p[b + 1] as usize + zi;
        Self::lerp(
            w,
            Self::lerp(
                v,
                Self::lerp(u, Self::grad(p[aa], x, y, z), Self::grad(p[ba], x - 1.0, y, z)),
                Self::lerp(u, Self::grad(p[ab], x, y - 1.0, z), Self::grad(p[bb], x - 1.0, y - 1.0, z)),
            ),
            Self::lerp(
                v,
                Self::lerp(u, Self::grad(p[aa + 1], x, y, z - 1.0), Self::grad(p[ba + 1], x - 1.0, y, z - 1.0)),
                Self::lerp(
                    u,
                    Self::grad(p[ab + 1], x, y - 1.0, z - 1.0),
                    Self::grad(p[bb + 1], x - 1.0, y - 1.0, z - 1.0),
                ),
            ),
        )
    }
}

/// Per-octave `(cell size, weight)` pairs for a Perlin spec.
pub fn octave_schedule(cell_size: f64, octaves: &[f64]) -> Vec<(f64, f64)> {
    if octaves.is_empty() {
        return vec![(cell_size, 1.0)];
    }
    octaves
        .iter()
        .enumerate()
        .map(|(k, &w)| ((cell_size / f64::powi(2.0, k as i32)).max(1.0), w))
        .collect()
}

fn octave_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Generates a noise field; deterministic for fixed `(spec, dims)`.
pub fn gen_noise(spec: &NoiseSpec, dims: Dims) -> Result<Volume3D, SynthError> {
    spec.validate()?;
    dims.validate()?;
    let amp = spec.amplitude;
    let voxels: Vec<f32> = match &spec.kind {
        NoiseKind::Perlin { cell_size, octaves } => {
            let schedule = octave_schedule(*cell_size, octaves);
            let lattices: Vec<Perlin> =
                (0..schedule.len()).map(|k| Perlin::new(octave_seed(spec.seed, k))).collect();
            let mut out = vec![0.0f32; dims.len()];
            par::for_each_chunk_mut(&mut out, dims.layer_len(), |z, layer| {
                for y in 0..dims.y {
                    for x in 0..dims.x {
                        let mut v = 0.0;
                        for ((cell, w), lattice) in schedule.iter().zip(&lattices) {
                            v += w * lattice.sample(x as f64 / cell, y as f64 / cell, z as f64 / cell);
                        }
                        layer[y * dims.x + x] = (amp * v) as f32;
                    }
                }
            });
            out
        }
        NoiseKind::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            if amp == 0.0 {
                vec![0.0; dims.len()]
            } else {
                let dist = Uniform::new_inclusive(0.0, amp).expect("amplitude is finite");
                (0..dims.len()).map(|_| dist.sample(&mut rng) as f32).collect()
            }
        }
        NoiseKind::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let dist = Normal::new(0.0, amp).expect("amplitude is finite and non-negative");
            (0..dims.len()).map(|_| dist.sample(&mut rng) as f32).collect()
        }
    };
    Ok(Volume3D::from_vec(dims, voxels)?)
}

/// Sums several noise fields voxelwise.
pub fn gen_noise_sum(specs: &[NoiseSpec], dims: Dims) -> Result<Volume3D, SynthError> {
    let mut acc = vec![0.0f32; dims.len()];
    for spec in specs {
        let field = gen_noise(spec, dims)?;
        for (a, v) in acc.iter_mut().zip(field.voxels()) {
            *a += v;
        }
    }
    Ok(Volume3D::from_vec(dims, acc)?)
}

/// Draws a random soil-noise mix: one Perlin component plus up to
/// `max_specs - 1` extra components, with relative amplitudes in (0, 1].
pub fn draw_noise_specs(rng: &mut impl Rng, cfg: &NoiseMix) -> Vec<NoiseSpec> {
    let count = rng.random_range(1..=cfg.max_specs.max(1));
    let mut specs = Vec::with_capacity(count);
    for k in 0..count {
        let amplitude = rng.random_range(0.2..=1.0) * cfg.amplitude;
        let seed = rng.random::<u64>();
        let spec = match (k, rng.random_range(0..3)) {
            (0, _) | (_, 0) => {
                let cell = rng.random_range(cfg.perlin_cell.0..=cfg.perlin_cell.1);
                NoiseSpec::perlin(amplitude, cell, cfg.perlin_octaves.clone(), seed)
            }
            (_, 1) => NoiseSpec::uniform(amplitude, seed),
            _ => NoiseSpec::gaussian(amplitude, seed),
        };
        specs.push(spec);
    }
    specs
}

/// Parameters for [`draw_noise_specs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseMix {
    /// Global amplitude multiplier; zero disables noise entirely.
    pub amplitude: f64,
    pub max_specs: usize,
    pub perlin_cell: (f64, f64),
    pub perlin_octaves: Vec<f64>,
}

impl Default for NoiseMix {
    fn default() -> Self {
        NoiseMix { amplitude: 1.0, max_specs: 3, perlin_cell: (4.0, 12.0), perlin_octaves: vec![1.0, 0.5, 0.25] }
    }
}
