//! `.vol3` / `.msk3` containers.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic, `VOL3` or `MSK3`                 |
//! | 4      | 2    | format version (1)                      |
//! | 6      | 2    | value type: 1 = f32, 2 = u8             |
//! | 8      | 24   | dims x, y, z as u64                     |
//! | 32     | ...  | payload, z-major                        |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{BinaryMask3D, Dims, Result, Volume3D, VolumeError};

const VOLUME_MAGIC: &[u8; 4] = b"VOL3";
const MASK_MAGIC: &[u8; 4] = b"MSK3";
const VERSION: u16 = 1;
const TYPE_F32: u16 = 1;
const TYPE_U8: u16 = 2;
pub const HEADER_LEN: usize = 32;

fn header(magic: &[u8; 4], value_type: u16, dims: Dims) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(magic);
    h[4..6].copy_from_slice(&VERSION.to_le_bytes());
    h[6..8].copy_from_slice(&value_type.to_le_bytes());
    h[8..16].copy_from_slice(&(dims.x as u64).to_le_bytes());
    h[16..24].copy_from_slice(&(dims.y as u64).to_le_bytes());
    h[24..32].copy_from_slice(&(dims.z as u64).to_le_bytes());
    h
}

/// Parses a header and returns the dims plus the expected payload length.
fn parse_header(bytes: &[u8], magic: &[u8; 4], value_type: u16, elem: usize) -> Result<(Dims, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(VolumeError::MalformedHeader(format!(
            "need {HEADER_LEN} header bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != magic {
        return Err(VolumeError::MalformedHeader(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[0..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(VolumeError::MalformedHeader(format!("unsupported version {version}")));
    }
    let tag = u16::from_le_bytes([bytes[6], bytes[7]]);
    if tag != value_type {
        return Err(VolumeError::MalformedHeader(format!("value type {tag}, expected {value_type}")));
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (x, y, z) = (read_u64(8), read_u64(16), read_u64(24));
    let overflow = || VolumeError::DimensionOverflow(format!("{x}x{y}x{z}"));
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| overflow());
    let dims = Dims { x: to_usize(x)?, y: to_usize(y)?, z: to_usize(z)? };
    if dims.x == 0 || dims.y == 0 || dims.z == 0 {
        return Err(VolumeError::ZeroDimension(dims));
    }
    let payload = dims.checked_len().and_then(|n| n.checked_mul(elem)).ok_or_else(overflow)?;
    let available = bytes.len() - HEADER_LEN;
    if available < payload {
        return Err(VolumeError::TruncatedPayload { expected: payload, actual: available });
    }
    if available > payload {
        return Err(VolumeError::TrailingBytes(available - payload));
    }
    Ok((dims, payload))
}

pub fn write_volume(v: &Volume3D, mut w: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * v.voxels().len());
    buf.extend_from_slice(&header(VOLUME_MAGIC, TYPE_F32, v.dims()));
    for value in v.voxels() {
        buf.extend_from_slice(&value.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_volume(mut r: impl Read) -> Result<Volume3D> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let (dims, _) = parse_header(&bytes, VOLUME_MAGIC, TYPE_F32, 4)?;
    let voxels = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Volume3D::from_vec(dims, voxels)
}

pub fn write_mask(m: &BinaryMask3D, mut w: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + m.bits().len());
    buf.extend_from_slice(&header(MASK_MAGIC, TYPE_U8, m.dims()));
    buf.extend(m.bits().iter().map(|&b| b as u8));
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_mask(mut r: impl Read) -> Result<BinaryMask3D> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let (dims, _) = parse_header(&bytes, MASK_MAGIC, TYPE_U8, 1)?;
    let payload = &bytes[HEADER_LEN..];
    if let Some(bad) = payload.iter().position(|&b| b > 1) {
        return Err(VolumeError::MalformedHeader(format!(
            "mask byte {} at voxel {bad} is not 0 or 1",
            payload[bad]
        )));
    }
    BinaryMask3D::from_vec(dims, payload.iter().map(|&b| b == 1).collect())
}

pub fn save_volume(v: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_volume(v, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    read_volume(fs::File::open(path)?)
}

pub fn save_mask(m: &BinaryMask3D, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_mask(m, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask3D> {
    read_mask(fs::File::open(path)?)
}
