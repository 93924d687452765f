//! Root structural models: parsing, augmentation transforms and voxelization.
//!
//! A model is a tree of nodes (position and radius in millimetres) joined by
//! straight segments. Each segment is rasterized as a capsule whose radius
//! varies linearly between its endpoint radii.
//!
//! Text format, one record per line:
//!
//! ```text
//! # comment
//! N x y z r      node, indexed by order of appearance from 0
//! S i j          segment between nodes i and j
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::volume::{BinaryMask3D, Dims, Volume3D};

#[derive(Debug, Error, PartialEq)]
pub enum RootModelError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: radius {radius} must be positive")]
    NonPositiveRadius { line: usize, radius: f64 },
    #[error("line {line}: segment references node {index} but only {nodes} nodes exist")]
    DanglingSegment { line: usize, index: usize, nodes: usize },
    #[error("line {line}: segment connects node {index} to itself")]
    SelfLoop { line: usize, index: usize },
    #[error("line {line}: segment {a}-{b} closes a cycle")]
    Cycle { line: usize, a: usize, b: usize },
    #[error("model is disconnected: {components} components")]
    Disconnected { components: usize },
    #[error("model has no nodes")]
    Empty,
}

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootNode {
    pub position: Point3,
    pub radius: f64,
}

/// A connected acyclic root model; node 0 is the top of the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSystem {
    nodes: Vec<RootNode>,
    segments: Vec<(usize, usize)>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

impl RootSystem {
    /// Validates topology and geometry. Segment errors report their 1-based
    /// position in `segments` as the line number.
    pub fn new(nodes: Vec<RootNode>, segments: Vec<(usize, usize)>) -> Result<Self, RootModelError> {
        let lines: Vec<usize> = (1..=segments.len()).collect();
        for (i, n) in nodes.iter().enumerate() {
            if n.position.iter().any(|c| !c.is_finite()) {
                return Err(RootModelError::Syntax { line: i + 1, message: "non-finite coordinate".into() });
            }
            if !(n.radius > 0.0) || !n.radius.is_finite() {
                return Err(RootModelError::NonPositiveRadius { line: i + 1, radius: n.radius });
            }
        }
        Self::check_topology(nodes, segments, &lines)
    }

    fn check_topology(
        nodes: Vec<RootNode>,
        segments: Vec<(usize, usize)>,
        lines: &[usize],
    ) -> Result<Self, RootModelError> {
        if nodes.is_empty() {
            return Err(RootModelError::Empty);
        }
        let n = nodes.len();
        let mut uf = UnionFind::new(n);
        for (&(a, b), &line) in segments.iter().zip(lines) {
            for index in [a, b] {
                if index >= n {
                    return Err(RootModelError::DanglingSegment { line, index, nodes: n });
                }
            }
            if a == b {
                return Err(RootModelError::SelfLoop { line, index: a });
            }
            if !uf.union(a, b) {
                return Err(RootModelError::Cycle { line, a, b });
            }
        }
        let components = n - segments.len();
        if components != 1 {
            return Err(RootModelError::Disconnected { components });
        }
        Ok(RootSystem { nodes, segments })
    }

    pub fn parse(text: &str) -> Result<Self, RootModelError> {
        let mut nodes = Vec::new();
        let mut segments = Vec::new();
        let mut segment_lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut tokens = content.split_whitespace();
            let tag = tokens.next().unwrap();
            let fields: Vec<&str> = tokens.collect();
            let syntax = |message: String| RootModelError::Syntax { line, message };
            match tag {
                "N" => {
                    if fields.len() != 4 {
                        return Err(syntax(format!("node needs 4 values (x y z r), got {}", fields.len())));
                    }
                    let mut v = [0.0; 4];
                    for (slot, f) in v.iter_mut().zip(&fields) {
                        *slot = f.parse::<f64>().map_err(|e| syntax(format!("bad number '{f}': {e}")))?;
                        if !slot.is_finite() {
                            return Err(syntax(format!("non-finite value '{f}'")));
                        }
                    }
                    if v[3] <= 0.0 {
                        return Err(RootModelError::NonPositiveRadius { line, radius: v[3] });
                    }
                    nodes.push(RootNode { position: [v[0], v[1], v[2]], radius: v[3] });
                }
                "S" => {
                    if fields.len() != 2 {
                        return Err(syntax(format!("segment needs 2 indices, got {}", fields.len())));
                    }
                    let idx = |f: &str| f.parse::<usize>().map_err(|e| syntax(format!("bad index '{f}': {e}")));
                    segments.push((idx(fields[0])?, idx(fields[1])?));
                    segment_lines.push(line);
                }
                other => return Err(syntax(format!("unknown record type '{other}'"))),
            }
        }
        Self::check_topology(nodes, segments, &segment_lines)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# root model\n");
        for n in &self.nodes {
            let [x, y, z] = n.position;
            out.push_str(&format!("N {x} {y} {z} {}\n", n.radius));
        }
        for &(a, b) in &self.segments {
            out.push_str(&format!("S {a} {b}\n"));
        }
        out
    }

    pub fn nodes(&self) -> &[RootNode] {
        &self.nodes
    }

    pub fn segments(&self) -> &[(usize, usize)] {
        &self.segments
    }

    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for n in &self.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(n.position[k]);
                hi[k] = hi[k].max(n.position[k]);
            }
        }
        (lo, hi)
    }

    pub fn apply_transform(&self, t: &Transform) -> RootSystem {
        let (lo, hi) = self.bounding_box();
        let pivot = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
        let rot = t.rotation_matrix();
        let rigid_identity = t.rotation == 0.0 && t.mirror == [false; 3] && t.translation == [0.0; 3];
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                if rigid_identity {
                    return RootNode { position: n.position, radius: n.radius * t.thickness_scale };
                }
                let mut p = [0.0; 3];
                for k in 0..3 {
                    let d = n.position[k] - pivot[k];
                    p[k] = if t.mirror[k] { -d } else { d };
                }
                let mut q = [0.0; 3];
                for (r, row) in rot.iter().enumerate() {
                    q[r] = row[0] * p[0] + row[1] * p[1] + row[2] * p[2] + pivot[r] + t.translation[r];
                }
                RootNode { position: q, radius: n.radius * t.thickness_scale }
            })
            .collect();
        RootSystem { nodes, segments: self.segments.clone() }
    }

    /// Generates a plausible random root: a main root descending along +z
    /// with lateral branches, all inside `[0, extent]`.
    pub fn random(seed: u64, params: &RandomRootParams) -> RootSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ext = params.extent;
        let margin = params.main_radius.1 * 1.5;
        let inside = |p: Point3| -> Point3 {
            let mut q = p;
            for k in 0..3 {
                q[k] = q[k].clamp(margin, ext[k] - margin);
            }
            q
        };
        let mut nodes = Vec::new();
        let mut segments = Vec::new();
        let r0 = rng.random_range(params.main_radius.0..=params.main_radius.1);
        let mut p = inside([
            ext[0] * rng.random_range(0.35..0.65),
            ext[1] * rng.random_range(0.35..0.65),
            margin,
        ]);
        nodes.push(RootNode { position: p, radius: r0 });
        let steps = ((ext[2] - 2.0 * margin) / params.segment_length).floor().max(1.0) as usize;
        let mut main = vec![0usize];
        for s in 1..=steps {
            let wobble = params.segment_length * 0.3;
            p = inside([
                p[0] + rng.random_range(-wobble..wobble),
                p[1] + rng.random_range(-wobble..wobble),
                p[2] + params.segment_length,
            ]);
            let r = r0 * (1.0 - 0.4 * s as f64 / steps as f64);
            nodes.push(RootNode { position: p, radius: r });
            segments.push((nodes.len() - 2, nodes.len() - 1));
            main.push(nodes.len() - 1);
        }
        for _ in 0..params.laterals {
            let from = main[rng.random_range(1..main.len().max(2)).min(main.len() - 1)];
            let start = nodes[from];
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let dip = rng.random_range(0.1..0.6);
            let dir = [angle.cos(), angle.sin(), dip];
            let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            let r = (start.radius * rng.random_range(0.4..0.7)).max(params.min_radius);
            let n_seg = rng.random_range(2..=4);
            let mut prev = from;
            let mut q = start.position;
            for k in 0..n_seg {
                for c in 0..3 {
                    q[c] += dir[c] / norm * params.segment_length;
                }
                q = inside(q);
                let rk = (r * (1.0 - 0.15 * k as f64)).max(params.min_radius);
                nodes.push(RootNode { position: q, radius: rk });
                segments.push((prev, nodes.len() - 1));
                prev = nodes.len() - 1;
            }
        }
        RootSystem { nodes, segments }
    }
}

/// Parameters for [`RootSystem::random`]; lengths in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomRootParams {
    pub extent: Point3,
    pub main_radius: (f64, f64),
    pub min_radius: f64,
    pub segment_length: f64,
    pub laterals: usize,
}

impl Default for RandomRootParams {
    fn default() -> Self {
        RandomRootParams {
            extent: [32.0, 32.0, 16.0],
            main_radius: (1.5, 2.5),
            min_radius: 0.8,
            segment_length: 3.0,
            laterals: 4,
        }
    }
}

/// Geometric augmentation applied about the model's bounding-box centre:
/// mirror, then rotate, then translate. Radii are multiplied by `thickness_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    /// Rotation angle in radians.
    pub rotation: f64,
    /// Rotation axis; normalized on use. Defaults to z.
    pub axis: Point3,
    pub mirror: [bool; 3],
    pub translation: Point3,
    pub thickness_scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            rotation: 0.0,
            axis: [0.0, 0.0, 1.0],
            mirror: [false; 3],
            translation: [0.0; 3],
            thickness_scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == 0.0
            && self.mirror == [false; 3]
            && self.translation == [0.0; 3]
            && self.thickness_scale == 1.0
    }

    fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let n = (self.axis[0].powi(2) + self.axis[1].powi(2) + self.axis[2].powi(2)).sqrt();
        let [x, y, z] = if n > 0.0 { self.axis.map(|a| a / n) } else { [0.0, 0.0, 1.0] };
        let (s, c) = self.rotation.sin_cos();
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    }
}

/// A voxel grid placed in model space: voxel `(i, j, k)` has its centre at
/// `origin + (index + 0.5) * voxel_size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: Dims,
    pub voxel_size: f64,
    pub origin: Point3,
}

impl Grid {
    pub fn new(dims: Dims, voxel_size: f64) -> Self {
        Grid { dims, voxel_size, origin: [0.0; 3] }
    }

    /// Same physical extent at twice the resolution.
    pub fn doubled(&self) -> Grid {
        Grid { dims: self.dims.doubled(), voxel_size: self.voxel_size / 2.0, origin: self.origin }
    }

    /// Inclusive voxel index range whose cells intersect `[lo, hi]` on `axis`.
    fn cell_range(&self, lo: f64, hi: f64, axis: usize, len: usize) -> Option<(usize, usize)> {
        let a = ((lo - self.origin[axis]) / self.voxel_size).floor();
        let b = ((hi - self.origin[axis]) / self.voxel_size).floor();
        if b < 0.0 || a >= len as f64 {
            return None;
        }
        Some((a.max(0.0) as usize, (b as usize).min(len - 1)))
    }
}

#[derive(Debug, Clone, Copy)]
struct Capsule {
    a: Point3,
    ab: Point3,
    inv_len2: f64,
    ra: f64,
    dr: f64,
    lo: Point3,
    hi: Point3,
}

impl Capsule {
    fn new(a: RootNode, b: RootNode) -> Self {
        let ab = [
            b.position[0] - a.position[0],
            b.position[1] - a.position[1],
            b.position[2] - a.position[2],
        ];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
        let rmax = a.radius.max(b.radius);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..3 {
            lo[k] = a.position[k].min(b.position[k]) - rmax;
            hi[k] = a.position[k].max(b.position[k]) + rmax;
        }
        Capsule {
            a: a.position,
            ab,
            inv_len2: if len2 > 0.0 { 1.0 / len2 } else { 0.0 },
            ra: a.radius,
            dr: b.radius - a.radius,
            lo,
            hi,
        }
    }

    #[inline]
    fn contains(&self, p: Point3) -> bool {
        let ap = [p[0] - self.a[0], p[1] - self.a[1], p[2] - self.a[2]];
        let t = ((ap[0] * self.ab[0] + ap[1] * self.ab[1] + ap[2] * self.ab[2]) * self.inv_len2).clamp(0.0, 1.0);
        let d = [ap[0] - t * self.ab[0], ap[1] - t * self.ab[1], ap[2] - t * self.ab[2]];
        let r = self.ra + t * self.dr;
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r * r
    }

    fn overlaps(&self, lo: Point3, hi: Point3) -> bool {
        (0..3).all(|k| self.lo[k] <= hi[k] && self.hi[k] >= lo[k])
    }
}

fn capsules(rs: &RootSystem) -> Vec<Capsule> {
    let mut caps: Vec<Capsule> =
        rs.segments.iter().map(|&(a, b)| Capsule::new(rs.nodes[a], rs.nodes[b])).collect();
    if caps.is_empty() {
        // a lone node still occupies its ball
        caps.push(Capsule::new(rs.nodes[0], rs.nodes[0]));
    }
    caps
}

/// Rasterizes layer by layer: `f(cell_lo, caps)` fills each voxel whose cell
/// overlaps at least one capsule bounding box; other voxels keep `fill`.
fn rasterize_layers<T, F>(caps: &[Capsule], grid: &Grid, fill: T, f: F) -> Vec<T>
where
    T: Copy + Send + Sync,
    F: Fn(Point3, &[&Capsule]) -> T + Sync + Send,
{
    let d = grid.dims;
    let mut out = vec![fill; d.len()];
    let s = grid.voxel_size;
    par::for_each_chunk_mut(&mut out, d.layer_len(), |z, layer| {
        let z_lo = grid.origin[2] + z as f64 * s;
        let z_hi = z_lo + s;
        let active: Vec<&Capsule> = caps.iter().filter(|c| c.lo[2] <= z_hi && c.hi[2] >= z_lo).collect();
        if active.is_empty() {
            return;
        }
        let mut visited = vec![false; layer.len()];
        let mut local: Vec<&Capsule> = Vec::with_capacity(active.len());
        for c in &active {
            let (Some((x0, x1)), Some((y0, y1))) =
                (grid.cell_range(c.lo[0], c.hi[0], 0, d.x), grid.cell_range(c.lo[1], c.hi[1], 1, d.y))
            else {
                continue;
            };
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * d.x + x;
                    if std::mem::replace(&mut visited[i], true) {
                        continue;
                    }
                    let lo = [grid.origin[0] + x as f64 * s, grid.origin[1] + y as f64 * s, z_lo];
                    let hi = [lo[0] + s, lo[1] + s, z_hi];
                    local.clear();
                    local.extend(active.iter().copied().filter(|o| o.overlaps(lo, hi)));
                    layer[i] = f(lo, &local);
                }
            }
        }
    });
    out
}

/// Sets each voxel whose centre lies inside some segment capsule.
pub fn voxelize_mask(rs: &RootSystem, grid: &Grid) -> BinaryMask3D {
    let caps = capsules(rs);
    let half = grid.voxel_size / 2.0;
    let bits = rasterize_layers(&caps, grid, false, |lo, local| {
        let p = [lo[0] + half, lo[1] + half, lo[2] + half];
        local.iter().any(|c| c.contains(p))
    });
    BinaryMask3D::from_vec(grid.dims, bits).expect("grid dims are valid")
}

/// Partial-volume occupancy per voxel from `n³` stratified sub-samples.
pub fn voxelize_signal(rs: &RootSystem, grid: &Grid, supersample: usize) -> Volume3D {
    let n = supersample.max(1);
    let caps = capsules(rs);
    let step = grid.voxel_size / n as f64;
    let total = (n * n * n) as f32;
    let values = rasterize_layers(&caps, grid, 0.0f32, |lo, local| {
        let mut inside = 0usize;
        for k in 0..n {
            let pz = lo[2] + (k as f64 + 0.5) * step;
            for j in 0..n {
                let py = lo[1] + (j as f64 + 0.5) * step;
                for i in 0..n {
                    let p = [lo[0] + (i as f64 + 0.5) * step, py, pz];
                    if local.iter().any(|c| c.contains(p)) {
                        inside += 1;
                    }
                }
            }
        }
        inside as f32 / total
    });
    Volume3D::from_vec(grid.dims, values).expect("grid dims are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vertical(radius: f64, length: f64, at: Point3) -> RootSystem {
        RootSystem::new(
            vec![
                RootNode { position: at, radius },
                RootNode { position: [at[0], at[1], at[2] + length], radius },
            ],
            vec![(0, 1)],
        )
        .unwrap()
    }

    #[test]
    fn parse_minimal() {
        let rs = RootSystem::parse("# tap root\nN 0 0 0 1.0\nN 0 0 5 0.5  # tip\n\nS 0 1\n").unwrap();
        assert_eq!(rs.nodes().len(), 2);
        assert_eq!(rs.segments(), &[(0, 1)]);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            RootSystem::parse("N 0 0 0 1\nN 0 0 1 1\nS 0 99\n"),
            Err(RootModelError::DanglingSegment { line: 3, index: 99, nodes: 2 })
        );
        assert_eq!(
            RootSystem::parse("N 0 0 0 1\nN 0 0 1 0\n"),
            Err(RootModelError::NonPositiveRadius { line: 2, radius: 0.0 })
        );
        assert!(matches!(RootSystem::parse("N 0 0 x 1"), Err(RootModelError::Syntax { line: 1, .. })));
        assert!(matches!(RootSystem::parse("Q 1 2"), Err(RootModelError::Syntax { line: 1, .. })));
        assert_eq!(
            RootSystem::parse("N 0 0 0 1\nN 0 0 1 1\nN 0 0 2 1\nS 0 1\n"),
            Err(RootModelError::Disconnected { components: 2 })
        );
        assert_eq!(
            RootSystem::parse("N 0 0 0 1\nN 0 0 1 1\nS 0 1\nS 1 0\n"),
            Err(RootModelError::Cycle { line: 4, a: 1, b: 0 })
        );
        assert_eq!(RootSystem::parse("N 0 0 0 1\nS 0 0\n"), Err(RootModelError::SelfLoop { line: 2, index: 0 }));
        assert_eq!(RootSystem::parse("# nothing\n"), Err(RootModelError::Empty));
    }

    #[test]
    fn text_roundtrip() {
        let rs = RootSystem::random(3, &RandomRootParams::default());
        assert_eq!(RootSystem::parse(&rs.to_text()).unwrap(), rs);
    }

    #[test]
    fn random_models_are_valid() {
        for seed in 0..20 {
            let rs = RootSystem::random(seed, &RandomRootParams::default());
            let again = RootSystem::new(rs.nodes().to_vec(), rs.segments().to_vec()).unwrap();
            assert_eq!(again, rs);
        }
    }

    #[test]
    fn identity_and_full_turn() {
        let rs = RootSystem::random(1, &RandomRootParams::default());
        assert_eq!(rs.apply_transform(&Transform::identity()), rs);
        let turned = rs.apply_transform(&Transform { rotation: std::f64::consts::TAU, ..Transform::identity() });
        for (a, b) in rs.nodes().iter().zip(turned.nodes()) {
            for k in 0..3 {
                assert!((a.position[k] - b.position[k]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn thickness_doubles_radii() {
        let rs = RootSystem::random(2, &RandomRootParams::default());
        let thick = rs.apply_transform(&Transform { thickness_scale: 2.0, ..Transform::identity() });
        for (a, b) in rs.nodes().iter().zip(thick.nodes()) {
            assert_eq!(b.radius, a.radius * 2.0);
        }
        assert_eq!(thick.segments(), rs.segments());
    }

    #[test]
    fn mirror_twice_is_identity() {
        let rs = RootSystem::random(4, &RandomRootParams::default());
        for axis in 0..3 {
            let mut m = [false; 3];
            m[axis] = true;
            let t = Transform { mirror: m, ..Transform::identity() };
            let back = rs.apply_transform(&t).apply_transform(&t);
            for (a, b) in rs.nodes().iter().zip(back.nodes()) {
                for k in 0..3 {
                    assert!((a.position[k] - b.position[k]).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn tilted_rotation_moves_z() {
        let rs = vertical(1.0, 4.0, [5.0, 5.0, 2.0]);
        let t = Transform { rotation: std::f64::consts::FRAC_PI_2, axis: [1.0, 0.0, 0.0], ..Transform::identity() };
        let out = rs.apply_transform(&t);
        let dz = out.nodes()[1].position[2] - out.nodes()[0].position[2];
        let dy = out.nodes()[1].position[1] - out.nodes()[0].position[1];
        assert!(dz.abs() < 1e-9);
        assert!((dy.abs() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn capsule_volume_matches_analytic() {
        let (r, l, s) = (1.0, 10.0, 0.1);
        let rs = vertical(r, l, [1.2, 1.2, 1.0]);
        let grid = Grid::new(Dims::new(24, 24, 124).unwrap(), s);
        let count = voxelize_mask(&rs, &grid).count() as f64;
        let pi = std::f64::consts::PI;
        let analytic = (pi * r * r * l + 4.0 / 3.0 * pi * r.powi(3)) / s.powi(3);
        assert!((count - analytic).abs() / analytic < 0.03, "{count} vs {analytic}");
    }

    #[test]
    fn node_voxel_is_set_and_far_region_empty() {
        let rs = vertical(0.3, 2.0, [0.5, 0.5, 0.5]);
        let grid = Grid::new(Dims::new(8, 8, 8).unwrap(), 1.0);
        let m = voxelize_mask(&rs, &grid);
        assert!(m.get(0, 0, 0));
        for z in 0..8 {
            for y in 4..8 {
                for x in 4..8 {
                    assert!(!m.get(x, y, z));
                }
            }
        }
    }

    #[test]
    fn out_of_grid_is_clipped() {
        let rs = vertical(1.0, 5.0, [-50.0, -50.0, -50.0]);
        let grid = Grid::new(Dims::new(4, 4, 4).unwrap(), 1.0);
        assert_eq!(voxelize_mask(&rs, &grid).count(), 0);
        assert!(voxelize_signal(&rs, &grid, 2).voxels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn signal_full_empty_and_half() {
        let grid = Grid::new(Dims::new(4, 4, 4).unwrap(), 1.0);
        let thick = vertical(10.0, 4.0, [2.0, 2.0, 0.0]);
        let sig = voxelize_signal(&thick, &grid, 4);
        assert_eq!(sig.get(2, 2, 1), 1.0);
        let thin = vertical(0.2, 1.0, [0.5, 0.5, 0.0]);
        assert_eq!(voxelize_signal(&thin, &grid, 4).get(3, 3, 3), 0.0);

        // Surface of a huge ball passing through the centre of voxel (1,1,1).
        let big = 1.0e4;
        let ball = RootSystem::new(
            vec![RootNode { position: [1.5, 1.5, 1.5 - big], radius: big }],
            vec![],
        )
        .unwrap();
        let half = voxelize_signal(&ball, &grid, 4).get(1, 1, 1);
        let reference = voxelize_signal(&ball, &grid, 32).get(1, 1, 1);
        assert!((reference - 0.5).abs() < 0.01);
        assert!((half - reference).abs() <= 0.1, "{half} vs {reference}");
    }

    #[test]
    fn finer_mask_pools_to_superset() {
        for seed in 0..5 {
            let rs = RootSystem::random(seed, &RandomRootParams::default());
            let coarse = Grid::new(Dims::new(32, 32, 16).unwrap(), 1.0);
            let fine = coarse.doubled();
            let pooled = voxelize_mask(&rs, &fine).pool_any2().unwrap();
            assert!(voxelize_mask(&rs, &coarse).is_subset_of(&pooled), "seed {seed}");
        }
    }

    #[test]
    fn thresholded_signal_agrees_with_mask() {
        for seed in 0..5 {
            let rs = RootSystem::random(seed, &RandomRootParams::default());
            let grid = Grid::new(Dims::new(32, 32, 16).unwrap(), 1.0);
            let mask = voxelize_mask(&rs, &grid);
            let signal = voxelize_signal(&rs, &grid, 4);
            assert!(signal.voxels().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let agree = signal
                .threshold(0.5)
                .unwrap()
                .bits()
                .iter()
                .zip(mask.bits())
                .filter(|(a, b)| a == b)
                .count();
            assert!(agree as f64 / mask.bits().len() as f64 >= 0.95);
        }
    }
}
