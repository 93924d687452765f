//! Dense voxel volumes and binary masks.
//!
//! Storage is z-major: the voxel at `(x, y, z)` lives at index
//! `(z * dims.y + y) * dims.x + x`, so a single z layer is a contiguous
//! `dims.x * dims.y` slice.

mod io;
mod render;

pub use io::{load_mask, load_volume, read_mask, read_volume, save_mask, save_volume, write_mask, write_volume};
pub use render::{render_slice, slice_to_image, Axis};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("dimensions must be strictly positive, got {0}")]
    ZeroDimension(Dims),
    #[error("dimensions {0} overflow the addressable size")]
    DimensionOverflow(String),
    #[error("expected {expected} voxels for {dims}, got {actual}")]
    VoxelCount { dims: Dims, expected: usize, actual: usize },
    #[error("non-finite voxel value at index {0}")]
    NonFinite(usize),
    #[error("dimension {axis} = {len} is odd; downsampling needs even dims")]
    OddDimension { axis: char, len: usize },
    #[error("index {index} out of range for axis of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f32),
    #[error("dimension mismatch: {0} vs {1}")]
    DimsMismatch(Dims, Dims),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(usize),
    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = VolumeError> = std::result::Result<T, E>;

/// Voxel counts along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

impl Dims {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self> {
        let d = Dims { x, y, z };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x == 0 || self.y == 0 || self.z == 0 {
            return Err(VolumeError::ZeroDimension(*self));
        }
        self.checked_len()
            .ok_or_else(|| VolumeError::DimensionOverflow(self.to_string()))?;
        Ok(())
    }

    pub fn checked_len(&self) -> Option<usize> {
        self.x.checked_mul(self.y)?.checked_mul(self.z)
    }

    pub fn len(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layer_len(&self) -> usize {
        self.x * self.y
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.y + y) * self.x + x
    }

    pub fn doubled(&self) -> Dims {
        Dims { x: self.x * 2, y: self.y * 2, z: self.z * 2 }
    }
}

/// Dense scalar field over an x×y×z grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    voxels: Vec<f32>,
}

impl Volume3D {
    pub fn from_vec(dims: Dims, voxels: Vec<f32>) -> Result<Self> {
        dims.validate()?;
        if voxels.len() != dims.len() {
            return Err(VolumeError::VoxelCount { dims, expected: dims.len(), actual: voxels.len() });
        }
        if let Some(i) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(VolumeError::NonFinite(i));
        }
        Ok(Self { dims, voxels })
    }

    pub fn filled(dims: Dims, value: f32) -> Result<Self> {
        dims.validate()?;
        Self::from_vec(dims, vec![value; dims.len()])
    }

    pub fn zeros(dims: Dims) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        dims.validate()?;
        let mut voxels = Vec::with_capacity(dims.len());
        for z in 0..dims.z {
            for y in 0..dims.y {
                for x in 0..dims.x {
                    voxels.push(f(x, y, z));
                }
            }
        }
        Self::from_vec(dims, voxels)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<f32> {
        self.voxels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.voxels[self.dims.index(x, y, z)]
    }

    pub fn layer(&self, z: usize) -> &[f32] {
        let n = self.dims.layer_len();
        &self.voxels[z * n..(z + 1) * n]
    }

    pub fn mean(&self) -> f64 {
        self.voxels.iter().map(|&v| v as f64).sum::<f64>() / self.voxels.len() as f64
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.voxels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Averages every 2×2×2 block.
    pub fn downsample2(&self) -> Result<Volume3D> {
        let d = self.dims;
        for (axis, len) in [('x', d.x), ('y', d.y), ('z', d.z)] {
            if len % 2 != 0 {
                return Err(VolumeError::OddDimension { axis, len });
            }
        }
        let out = Dims { x: d.x / 2, y: d.y / 2, z: d.z / 2 };
        Volume3D::from_fn(out, |x, y, z| {
            let mut sum = 0.0f64;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        sum += self.get(2 * x + dx, 2 * y + dy, 2 * z + dz) as f64;
                    }
                }
            }
            (sum / 8.0) as f32
        })
    }

    /// Replicates every voxel into a 2×2×2 block.
    pub fn upsample2_nearest(&self) -> Volume3D {
        let out = self.dims.doubled();
        Volume3D::from_fn(out, |x, y, z| self.get(x / 2, y / 2, z / 2))
            .expect("doubling a valid volume stays valid")
    }

    /// Five layers centred on `z_index`, with out-of-range layers clamped.
    pub fn layer_window(&self, z_index: usize) -> Result<LayerWindow> {
        if z_index >= self.dims.z {
            return Err(VolumeError::IndexOutOfRange { index: z_index, len: self.dims.z });
        }
        let mut data = Vec::with_capacity(5 * self.dims.layer_len());
        for z in LayerWindow::source_layers(z_index, self.dims.z) {
            data.extend_from_slice(self.layer(z));
        }
        Ok(LayerWindow { width: self.dims.x, height: self.dims.y, center: z_index, data })
    }

    /// Sets a bit wherever the confidence is at least `t`.
    pub fn threshold(&self, t: f32) -> Result<BinaryMask3D> {
        if !(0.0..=1.0).contains(&t) {
            return Err(VolumeError::BadThreshold(t));
        }
        let bits = self.voxels.iter().map(|&v| v >= t).collect();
        BinaryMask3D::from_vec(self.dims, bits)
    }

    /// Maps values affinely onto [0, 1]; returns `(offset, scale)` such that
    /// `normalized = (v - offset) * scale`. A constant volume maps to zero.
    pub fn normalize_unit(&self) -> (Volume3D, f64, f64) {
        let (lo, hi) = self.min_max();
        let range = hi as f64 - lo as f64;
        let scale = if range > 0.0 { 1.0 / range } else { 0.0 };
        let voxels = self
            .voxels
            .iter()
            .map(|&v| (((v as f64 - lo as f64) * scale) as f32).clamp(0.0, 1.0))
            .collect();
        (Volume3D { dims: self.dims, voxels }, lo as f64, scale)
    }
}

/// Boolean voxel grid, same ordering as [`Volume3D`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask3D {
    dims: Dims,
    bits: Vec<bool>,
}

impl BinaryMask3D {
    pub fn from_vec(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        dims.validate()?;
        if bits.len() != dims.len() {
            return Err(VolumeError::VoxelCount { dims, expected: dims.len(), actual: bits.len() });
        }
        Ok(Self { dims, bits })
    }

    pub fn empty(dims: Dims) -> Result<Self> {
        dims.validate()?;
        Ok(Self { dims, bits: vec![false; dims.len()] })
    }

    pub fn full(dims: Dims) -> Result<Self> {
        dims.validate()?;
        Ok(Self { dims, bits: vec![true; dims.len()] })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Result<Self> {
        dims.validate()?;
        let mut bits = Vec::with_capacity(dims.len());
        for z in 0..dims.z {
            for y in 0..dims.y {
                for x in 0..dims.x {
                    bits.push(f(x, y, z));
                }
            }
        }
        Ok(Self { dims, bits })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.dims.index(x, y, z);
        self.bits[i] = value;
    }

    pub fn layer(&self, z: usize) -> &[bool] {
        let n = self.dims.layer_len();
        &self.bits[z * n..(z + 1) * n]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask3D) -> bool {
        self.dims == other.dims && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Logical OR over every 2×2×2 block.
    pub fn pool_any2(&self) -> Result<BinaryMask3D> {
        let d = self.dims;
        for (axis, len) in [('x', d.x), ('y', d.y), ('z', d.z)] {
            if len % 2 != 0 {
                return Err(VolumeError::OddDimension { axis, len });
            }
        }
        BinaryMask3D::from_fn(Dims { x: d.x / 2, y: d.y / 2, z: d.z / 2 }, |x, y, z| {
            (0..8).any(|k| self.get(2 * x + (k & 1), 2 * y + ((k >> 1) & 1), 2 * z + (k >> 2)))
        })
    }

    pub fn to_volume(&self) -> Volume3D {
        let voxels = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Volume3D { dims: self.dims, voxels }
    }
}

/// Five consecutive z layers of a volume, centred on `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWindow {
    pub width: usize,
    pub height: usize,
    pub center: usize,
    /// Five `width * height` layers, concatenated in z order.
    pub data: Vec<f32>,
}

impl LayerWindow {
    pub const LAYERS: usize = 5;

    /// Source z indices for the window around `z_index` in a volume of depth `depth`.
    pub fn source_layers(z_index: usize, depth: usize) -> [usize; 5] {
        let last = depth as isize - 1;
        let mut out = [0usize; 5];
        for (k, slot) in out.iter_mut().enumerate() {
            let z = z_index as isize + k as isize - 2;
            *slot = z.clamp(0, last) as usize;
        }
        out
    }

    pub fn layer(&self, k: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}
