//! Compression of a five-layer window into three colour channels.
//!
//! Each pixel's five layer values form one observation. The first principal
//! component drives green, the second red and the third blue, following the
//! order in which the channels contribute to perceived luminance.

use nalgebra::{SMatrix, SymmetricEigen};

use crate::volume::{LayerWindow, Volume3D, VolumeError};

const L: usize = LayerWindow::LAYERS;

/// Eigenvalues at or below this fraction of the total variance are treated
/// as zero and their channels left blank.
const DEGENERATE_FRACTION: f64 = 1e-10;

/// Principal axes of a set of five-layer pixel vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    mean: [f64; L],
    /// Unit eigenvectors, by decreasing eigenvalue.
    components: [[f64; L]; L],
    eigenvalues: [f64; L],
}

impl PcaFit {
    pub fn fit<I>(vectors: I) -> PcaFit
    where
        I: IntoIterator<Item = [f64; L]>,
        I::IntoIter: Clone,
    {
        let it = vectors.into_iter();
        let mut mean = [0.0; L];
        let mut n = 0usize;
        for v in it.clone() {
            for k in 0..L {
                mean[k] += v[k];
            }
            n += 1;
        }
        let n = n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);

        let mut cov = SMatrix::<f64, L, L>::zeros();
        for v in it {
            let d: [f64; L] = std::array::from_fn(|k| v[k] - mean[k]);
            for i in 0..L {
                for j in i..L {
                    cov[(i, j)] += d[i] * d[j];
                }
            }
        }
        for i in 0..L {
            for j in i..L {
                cov[(i, j)] /= n;
                cov[(j, i)] = cov[(i, j)];
            }
        }

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..L).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut components = [[0.0; L]; L];
        let mut eigenvalues = [0.0; L];
        for (slot, &src) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(src);
            let mut v: [f64; L] = std::array::from_fn(|k| col[k]);
            let pivot = (0..L).fold(0, |best, k| if v[k].abs() > v[best].abs() { k } else { best });
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components[slot] = v;
            eigenvalues[slot] = eig.eigenvalues[src].max(0.0);
        }
        PcaFit { mean, components, eigenvalues }
    }

    pub fn fit_window(w: &LayerWindow) -> PcaFit {
        Self::fit(window_vectors(w))
    }

    /// One basis over every window of the volume.
    pub fn fit_volume(v: &Volume3D) -> Result<PcaFit, VolumeError> {
        let windows = (0..v.dims().z).map(|z| v.layer_window(z)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::fit(windows.iter().flat_map(window_vectors)))
    }

    pub fn mean(&self) -> &[f64; L] {
        &self.mean
    }

    pub fn components(&self) -> &[[f64; L]; L] {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64; L] {
        &self.eigenvalues
    }

    pub fn explained_variance_ratio(&self) -> [f64; L] {
        let total: f64 = self.eigenvalues.iter().sum();
        std::array::from_fn(|k| if total > 0.0 { self.eigenvalues[k] / total } else { 0.0 })
    }

    fn active(&self, k: usize) -> bool {
        let total: f64 = self.eigenvalues.iter().sum();
        total > 0.0 && self.eigenvalues[k] > DEGENERATE_FRACTION * total
    }

    /// Coordinates on the top three components; degenerate ones are zero.
    pub fn project(&self, p: &[f64; L]) -> [f64; 3] {
        std::array::from_fn(|k| {
            if !self.active(k) {
                return 0.0;
            }
            (0..L).map(|i| (p[i] - self.mean[i]) * self.components[k][i]).sum()
        })
    }

    pub fn reconstruct(&self, c: &[f64; 3]) -> [f64; L] {
        std::array::from_fn(|i| self.mean[i] + (0..3).map(|k| c[k] * self.components[k][i]).sum::<f64>())
    }

    /// Projects a window and scales each channel to `[0, 1]`.
    pub fn encode(&self, w: &LayerWindow) -> RgbEncoding {
        let n = w.pixels();
        let mut planes = [vec![0.0f64; n], vec![0.0f64; n], vec![0.0f64; n]];
        for (i, v) in window_vectors(w).enumerate() {
            let c = self.project(&v);
            planes[0][i] = c[1];
            planes[1][i] = c[0];
            planes[2][i] = c[2];
        }
        let mut data = Vec::with_capacity(3 * n);
        for plane in &planes {
            let (lo, hi) = plane.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let span = hi - lo;
            data.extend(plane.iter().map(|&v| if span > 0.0 { ((v - lo) / span) as f32 } else { 0.0 }));
        }
        RgbEncoding { width: w.width, height: w.height, data }
    }
}

fn window_vectors(w: &LayerWindow) -> impl Iterator<Item = [f64; L]> + Clone + '_ {
    (0..w.pixels()).map(move |i| std::array::from_fn(|k| w.layer(k)[i] as f64))
}

/// Three `width * height` planes in (red, green, blue) order, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbEncoding {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl RgbEncoding {
    fn plane(&self, k: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn red(&self) -> &[f32] {
        self.plane(0)
    }

    pub fn green(&self) -> &[f32] {
        self.plane(1)
    }

    pub fn blue(&self) -> &[f32] {
        self.plane(2)
    }
}

pub fn pca_compress(w: &LayerWindow) -> RgbEncoding {
    PcaFit::fit_window(w).encode(w)
}
