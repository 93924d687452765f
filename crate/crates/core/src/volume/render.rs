use std::path::Path;
use std::str::FromStr;

use image::GrayImage;

use super::{Result, Volume3D, VolumeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis '{other}', expected x, y or z")),
        }
    }
}

/// Extracts one slice as an 8-bit image, min-max normalized per slice.
///
/// A z slice is `dims.x` wide and `dims.y` tall; x and y slices put z on the
/// vertical axis. Constant slices render black.
pub fn slice_to_image(v: &Volume3D, axis: Axis, index: usize) -> Result<GrayImage> {
    let d = v.dims();
    let (len, width, height) = match axis {
        Axis::X => (d.x, d.y, d.z),
        Axis::Y => (d.y, d.x, d.z),
        Axis::Z => (d.z, d.x, d.y),
    };
    if index >= len {
        return Err(VolumeError::IndexOutOfRange { index, len });
    }
    let sample = |u: usize, w: usize| match axis {
        Axis::X => v.get(index, u, w),
        Axis::Y => v.get(u, index, w),
        Axis::Z => v.get(u, w, index),
    };
    let mut values = Vec::with_capacity(width * height);
    for w in 0..height {
        for u in 0..width {
            values.push(sample(u, w));
        }
    }
    let (lo, hi) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    let pixels = values
        .iter()
        .map(|&x| if range > 0.0 { ((x - lo) / range * 255.0).round() as u8 } else { 0 })
        .collect();
    Ok(GrayImage::from_raw(width as u32, height as u32, pixels).expect("buffer sized to image"))
}

/// Writes a slice as PNG.
pub fn render_slice(v: &Volume3D, axis: Axis, index: usize, path: impl AsRef<Path>) -> Result<()> {
    let img = slice_to_image(v, axis, index)?;
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    #[test]
    fn constant_slice_is_black() {
        let v = Volume3D::filled(Dims::new(3, 2, 2).unwrap(), 0.7).unwrap();
        let img = slice_to_image(&v, Axis::Z, 1).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert!(img.pixels().all(|p| p.0[0] == 0));
    }

    #[test]
    fn single_pixel() {
        let v = Volume3D::filled(Dims::new(1, 1, 1).unwrap(), 42.0).unwrap();
        let img = slice_to_image(&v, Axis::X, 0).unwrap();
        assert_eq!((img.width(), img.height()), (1, 1));
    }

    #[test]
    fn full_dynamic_range() {
        let v = Volume3D::from_fn(Dims::new(4, 4, 1).unwrap(), |x, y, _| (x + y) as f32 / 6.0).unwrap();
        let img = slice_to_image(&v, Axis::Z, 0).unwrap();
        let values: Vec<u8> = img.pixels().map(|p| p.0[0]).collect();
        assert_eq!(*values.iter().min().unwrap(), 0);
        assert_eq!(*values.iter().max().unwrap(), 255);
    }

    #[test]
    fn slice_orientation() {
        let v = Volume3D::from_fn(Dims::new(2, 3, 4).unwrap(), |x, y, z| (x + 10 * y + 100 * z) as f32)
            .unwrap();
        let img = slice_to_image(&v, Axis::Y, 1).unwrap();
        assert_eq!((img.width(), img.height()), (2, 4));
        let img = slice_to_image(&v, Axis::X, 0).unwrap();
        assert_eq!((img.width(), img.height()), (3, 4));
        assert!(matches!(slice_to_image(&v, Axis::Z, 4), Err(VolumeError::IndexOutOfRange { .. })));
    }

    #[test]
    fn axis_parse() {
        assert_eq!("Z".parse::<Axis>().unwrap(), Axis::Z);
        assert!("w".parse::<Axis>().is_err());
    }

    #[test]
    fn render_writes_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        let v = Volume3D::from_fn(Dims::new(4, 4, 2).unwrap(), |x, _, _| x as f32).unwrap();
        render_slice(&v, Axis::Z, 0, &path).unwrap();
        let back = image::open(&path).unwrap().to_luma8();
        assert_eq!(back, slice_to_image(&v, Axis::Z, 0).unwrap());
    }
}
