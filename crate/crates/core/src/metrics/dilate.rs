//! Binary dilation by a Euclidean ball or a Chebyshev cube.
//!
//! The ball variant thresholds an exact squared Euclidean distance transform
//! (lower envelope of parabolas, one pass per axis). The cube variant is
//! separable and uses per-line nearest-set-voxel distances.

use serde::{Deserialize, Serialize};

use crate::par;
use crate::volume::{BinaryMask3D, Dims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structuring {
    /// All voxels within Euclidean distance `d`.
    #[default]
    Ball,
    /// All voxels within Chebyshev distance `d`.
    Cube,
}

impl Structuring {
    #[inline]
    pub fn within(&self, dx: i64, dy: i64, dz: i64, d: u32) -> bool {
        let d = d as i64;
        match self {
            Structuring::Ball => dx * dx + dy * dy + dz * dz <= d * d,
            Structuring::Cube => dx.abs() <= d && dy.abs() <= d && dz.abs() <= d,
        }
    }
}

impl std::str::FromStr for Structuring {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ball" => Ok(Structuring::Ball),
            "cube" => Ok(Structuring::Cube),
            other => Err(format!("unknown structuring element '{other}', expected ball or cube")),
        }
    }
}

const FAR: f64 = 1e30;

/// 1D squared distance transform of a sampled function (Felzenszwalb–Huttenlocher).
fn edt_line(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let Some(first) = f.iter().position(|&x| x < FAR) else {
        out.iter_mut().for_each(|o| *o = FAR);
        return;
    };
    // v: parabola apexes of the lower envelope; z[i]..z[i+1] is where v[i] wins
    v.clear();
    z.clear();
    v.push(first);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    for q in first + 1..f.len() {
        if f[q] >= FAR {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        let mut s;
        loop {
            let p = *v.last().expect("envelope never empties");
            s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[v.len() - 1] {
                v.pop();
                z.pop();
                *z.last_mut().unwrap() = f64::INFINITY;
            } else {
                break;
            }
        }
        *z.last_mut().unwrap() = s;
        v.push(q);
        z.push(f64::INFINITY);
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared Euclidean distance from every voxel to the nearest set voxel.
pub fn squared_distance_transform(mask: &BinaryMask3D) -> Vec<f64> {
    let d = mask.dims();
    let mut buf: Vec<f64> = mask.bits().iter().map(|&b| if b { 0.0 } else { FAR }).collect();

    // x: contiguous rows
    par::for_each_chunk_mut(&mut buf, d.x, |_, row| {
        let f = row.to_vec();
        edt_line(&f, row, &mut Vec::new(), &mut Vec::new());
    });
    // y: columns within each layer
    par::for_each_chunk_mut(&mut buf, d.layer_len(), |_, layer| {
        let (mut f, mut out) = (vec![0.0; d.y], vec![0.0; d.y]);
        let (mut v, mut z) = (Vec::new(), Vec::new());
        for x in 0..d.x {
            for y in 0..d.y {
                f[y] = layer[y * d.x + x];
            }
            edt_line(&f, &mut out, &mut v, &mut z);
            for y in 0..d.y {
                layer[y * d.x + x] = out[y];
            }
        }
    });
    // z: gather columns, transform, scatter
    let columns = par::map_range(d.layer_len(), |i| {
        let f: Vec<f64> = (0..d.z).map(|z| buf[z * d.layer_len() + i]).collect();
        let mut out = vec![0.0; d.z];
        edt_line(&f, &mut out, &mut Vec::new(), &mut Vec::new());
        out
    });
    for (i, col) in columns.into_iter().enumerate() {
        for (z, value) in col.into_iter().enumerate() {
            buf[z * d.layer_len() + i] = value;
        }
    }
    buf
}

/// Distance along a line to the nearest set element, or `usize::MAX`.
fn line_nearest(bits: &[bool], out: &mut [usize]) {
    let n = bits.len();
    let mut last = None;
    for i in 0..n {
        if bits[i] {
            last = Some(i);
        }
        out[i] = last.map_or(usize::MAX, |l| i - l);
    }
    let mut next = None;
    for i in (0..n).rev() {
        if bits[i] {
            next = Some(i);
        }
        if let Some(nx) = next {
            out[i] = out[i].min(nx - i);
        }
    }
}

fn dilate_axis(bits: &[bool], dims: Dims, axis: usize, r: usize) -> Vec<bool> {
    let (len, stride, lines): (usize, usize, Vec<usize>) = match axis {
        0 => (dims.x, 1, (0..dims.y * dims.z).map(|l| l * dims.x).collect()),
        1 => (
            dims.y,
            dims.x,
            (0..dims.z).flat_map(|z| (0..dims.x).map(move |x| z * dims.layer_len() + x)).collect(),
        ),
        _ => (dims.z, dims.layer_len(), (0..dims.layer_len()).collect()),
    };
    let results = par::map_slice(&lines, |&start| {
        let line: Vec<bool> = (0..len).map(|k| bits[start + k * stride]).collect();
        let mut near = vec![0usize; len];
        line_nearest(&line, &mut near);
        near.into_iter().map(|n| n <= r).collect::<Vec<bool>>()
    });
    let mut out = vec![false; bits.len()];
    for (&start, line) in lines.iter().zip(results) {
        for (k, b) in line.into_iter().enumerate() {
            out[start + k * stride] = b;
        }
    }
    out
}

/// Morphological dilation by `d` voxels; `d = 0` is the identity.
pub fn dilate3(mask: &BinaryMask3D, d: u32, se: Structuring) -> BinaryMask3D {
    if d == 0 {
        return mask.clone();
    }
    let dims = mask.dims();
    let bits = match se {
        Structuring::Ball => {
            let limit = (d as f64) * (d as f64);
            squared_distance_transform(mask).into_iter().map(|v| v <= limit).collect()
        }
        Structuring::Cube => {
            let r = d as usize;
            let x = dilate_axis(mask.bits(), dims, 0, r);
            let y = dilate_axis(&x, dims, 1, r);
            dilate_axis(&y, dims, 2, r)
        }
    };
    BinaryMask3D::from_vec(dims, bits).expect("dims unchanged")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(n: usize, at: (usize, usize, usize)) -> BinaryMask3D {
        let mut m = BinaryMask3D::empty(Dims::new(n, n, n).unwrap()).unwrap();
        m.set(at.0, at.1, at.2, true);
        m
    }

    /// Counts lattice offsets admitted by the structuring element.
    fn enumerate(d: u32, se: Structuring) -> usize {
        let r = d as i64;
        let mut n = 0;
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    n += se.within(dx, dy, dz, d) as usize;
                }
            }
        }
        n
    }

    #[test]
    fn unit_ball_is_seven_voxels() {
        let m = dilate3(&single(5, (2, 2, 2)), 1, Structuring::Ball);
        assert_eq!(m.count(), 7);
        assert_eq!(enumerate(1, Structuring::Ball), 7);
        assert_eq!(dilate3(&single(5, (2, 2, 2)), 1, Structuring::Cube).count(), 27);
    }

    #[test]
    fn ball_sizes_match_enumeration() {
        for d in 0..=5 {
            let m = dilate3(&single(13, (6, 6, 6)), d, Structuring::Ball);
            assert_eq!(m.count(), enumerate(d, Structuring::Ball), "d={d}");
        }
    }

    #[test]
    fn identity_and_saturation() {
        let m = BinaryMask3D::from_fn(Dims::new(6, 5, 4).unwrap(), |x, y, z| (x * y + z) % 5 == 0).unwrap();
        for se in [Structuring::Ball, Structuring::Cube] {
            assert_eq!(dilate3(&m, 0, se), m);
            let full = BinaryMask3D::full(m.dims()).unwrap();
            assert_eq!(dilate3(&full, 3, se), full);
        }
    }

    #[test]
    fn empty_stays_empty() {
        let m = BinaryMask3D::empty(Dims::new(4, 4, 4).unwrap()).unwrap();
        assert_eq!(dilate3(&m, 2, Structuring::Ball).count(), 0);
        assert_eq!(dilate3(&m, 2, Structuring::Cube).count(), 0);
    }

    fn mirror_x(m: &BinaryMask3D) -> BinaryMask3D {
        let d = m.dims();
        BinaryMask3D::from_fn(d, |x, y, z| m.get(d.x - 1 - x, y, z)).unwrap()
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask3D> {
        (2usize..9, 2usize..9, 2usize..9, 0.02f64..0.3).prop_flat_map(|(x, y, z, p)| {
            proptest::collection::vec(proptest::bool::weighted(p), x * y * z)
                .prop_map(move |bits| BinaryMask3D::from_vec(Dims { x, y, z }, bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn extensive_increasing_and_mirror_equivariant(m in arb_mask(), d in 0u32..4, cube in any::<bool>()) {
            let se = if cube { Structuring::Cube } else { Structuring::Ball };
            let a = dilate3(&m, d, se);
            let b = dilate3(&m, d + 1, se);
            prop_assert!(m.is_subset_of(&a));
            prop_assert!(a.is_subset_of(&b));
            prop_assert_eq!(mirror_x(&a), dilate3(&mirror_x(&m), d, se));
        }
    }
}
