//! Synthetic MRI-like training pairs with perfectly aligned ground truth.

pub mod dataset;
pub mod noise;
pub mod snr;

pub use dataset::{
    generate_dataset, generate_pair, DatasetManifest, GenConfig, ManifestEntry, SampleMeta, SamplePair, Split,
};
pub use noise::{gen_noise, gen_noise_sum, NoiseKind, NoiseMix, NoiseSpec, Perlin};
pub use snr::{compose_sample, measure_snr, snr_bin, Composite, SnrBin, SNR_BIN_LABELS, SNR_EDGES};

use thiserror::Error;

use crate::volume::{Dims, VolumeError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),
    #[error("invalid SNR {0}; must be positive and finite")]
    InvalidSnr(f64),
    #[error("no root voxels to measure signal on")]
    EmptyRoots,
    #[error("no background voxels to measure noise on")]
    EmptyBackground,
    #[error("noise RMS is zero")]
    ZeroNoise,
    #[error("dimension mismatch: {0} vs {1}")]
    DimsMismatch(Dims, Dims),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("no root models supplied")]
    NoModels,
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Volume(#[from] VolumeError),
}
