//! Forward and backward kernels on [`Tensor`]s.

use super::tensor::{Real, Tensor};

/// Square convolution with zero padding `k / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub co: usize,
    pub ci: usize,
    pub k: usize,
    pub stride: usize,
}

impl ConvShape {
    pub fn pad(&self) -> usize {
        self.k / 2
    }

    pub fn out_len(&self, n: usize) -> usize {
        (n + 2 * self.pad() - self.k) / self.stride + 1
    }

    pub fn weight_len(&self) -> usize {
        self.co * self.ci * self.k * self.k
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.ci + i) * self.k + ky) * self.k + kx
    }

    /// Output positions whose tap `off` lands inside an input of length `n_in`.
    fn valid(&self, off: usize, n_in: usize, n_out: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.pad());
        let lo = if off >= p { 0 } else { (p - off).div_ceil(s) };
        let hi = (n_in + p - off).div_ceil(s).min(n_out);
        (lo, hi.max(lo))
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += *x * *y;
    }
    acc.iter().fold(tail, |s, v| s + *v)
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (d, s) in y.iter_mut().zip(x) {
        *d += alpha * *s;
    }
}

pub fn conv_forward<T: Real>(x: &Tensor<T>, g: &ConvShape, weight: &[T], bias: &[T]) -> Tensor<T> {
    assert_eq!(x.c, g.ci, "conv input channels");
    let (ho, wo) = (g.out_len(x.h), g.out_len(x.w));
    let (s, p) = (g.stride, g.pad());
    let mut out = Tensor::zeros(g.co, ho, wo);
    for (o, plane) in out.data.chunks_mut(ho * wo).enumerate() {
        plane.fill(bias[o]);
        for i in 0..g.ci {
            let src = x.channel(i);
            for ky in 0..g.k {
                let (y0, y1) = g.valid(ky, x.h, ho);
                for kx in 0..g.k {
                    let (x0, x1) = g.valid(kx, x.w, wo);
                    let wv = weight[g.widx(o, i, ky, kx)];
                    for yo in y0..y1 {
                        let row = &src[(s * yo + ky - p) * x.w..][..x.w];
                        let dst = &mut plane[yo * wo..][x0..x1];
                        if s == 1 {
                            axpy(wv, &row[x0 + kx - p..x1 + kx - p], dst);
                        } else {
                            for (xo, d) in (x0..x1).zip(dst) {
                                *d += wv * row[s * xo + kx - p];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients and, if `dx` is given, the input gradient.
pub fn conv_backward<T: Real>(
    x: &Tensor<T>,
    g: &ConvShape,
    weight: &[T],
    dy: &Tensor<T>,
    dweight: &mut [T],
    dbias: &mut [T],
    mut dx: Option<&mut Tensor<T>>,
) {
    let (ho, wo) = (dy.h, dy.w);
    let (s, p) = (g.stride, g.pad());
    for (o, db) in dbias.iter_mut().enumerate().take(g.co) {
        let gplane = dy.channel(o);
        *db += gplane.iter().copied().sum::<T>();
        for i in 0..g.ci {
            let src = x.channel(i);
            for ky in 0..g.k {
                let (y0, y1) = g.valid(ky, x.h, ho);
                for kx in 0..g.k {
                    let (x0, x1) = g.valid(kx, x.w, wo);
                    let wi = g.widx(o, i, ky, kx);
                    let mut acc = T::zero();
                    for yo in y0..y1 {
                        let yi = s * yo + ky - p;
                        let grow = &gplane[yo * wo..][x0..x1];
                        let row = &src[yi * x.w..][..x.w];
                        if s == 1 {
                            acc += dot(grow, &row[x0 + kx - p..x1 + kx - p]);
                        } else {
                            for (xo, gv) in (x0..x1).zip(grow) {
                                acc += *gv * row[s * xo + kx - p];
                            }
                        }
                    }
                    dweight[wi] += acc;
                    if let Some(dx) = dx.as_deref_mut() {
                        let wv = weight[wi];
                        let plane = x.h * x.w;
                        let dplane = &mut dx.data[i * plane..(i + 1) * plane];
                        for yo in y0..y1 {
                            let yi = s * yo + ky - p;
                            let grow = &gplane[yo * wo..][x0..x1];
                            let drow = &mut dplane[yi * x.w..][..x.w];
                            if s == 1 {
                                axpy(wv, grow, &mut drow[x0 + kx - p..x1 + kx - p]);
                            } else {
                                for (xo, gv) in (x0..x1).zip(grow) {
                                    drow[s * xo + kx - p] += wv * *gv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let data = x.data.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
    Tensor::from_vec(x.c, x.h, x.w, data)
}

pub fn relu_backward<T: Real>(out: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = out.data.iter().zip(&dy.data).map(|(&o, &g)| if o > T::zero() { g } else { T::zero() }).collect();
    Tensor::from_vec(out.c, out.h, out.w, data)
}

pub fn upsample2<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let (h2, w2) = (2 * x.h, 2 * x.w);
    let mut out = Tensor::zeros(x.c, h2, w2);
    for c in 0..x.c {
        let src = x.channel(c);
        let dst = &mut out.data[c * h2 * w2..(c + 1) * h2 * w2];
        for y in 0..h2 {
            let srow = &src[(y / 2) * x.w..][..x.w];
            for (xx, d) in dst[y * w2..(y + 1) * w2].iter_mut().enumerate() {
                *d = srow[xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Real>(dy: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (dy.h / 2, dy.w / 2);
    let mut dx = Tensor::zeros(dy.c, h, w);
    for c in 0..dy.c {
        let g = dy.channel(c);
        for y in 0..dy.h {
            for xx in 0..dy.w {
                dx.data[(c * h + y / 2) * w + xx / 2] += g[y * dy.w + xx];
            }
        }
    }
    dx
}

const POOL_RADIUS: usize = 2;

/// 5x5 max pooling, stride 1; out-of-bounds positions are ignored.
/// Returns the pooled map and, per output, the in-plane index of the winner.
pub fn maxpool5<T: Real>(x: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let (h, w) = (x.h, x.w);
    let mut out = Tensor::zeros(x.c, h, w);
    let mut arg = vec![0u32; x.data.len()];
    for c in 0..x.c {
        let src = x.channel(c);
        for y in 0..h {
            let (ya, yb) = (y.saturating_sub(POOL_RADIUS), (y + POOL_RADIUS + 1).min(h));
            for xx in 0..w {
                let (xa, xb) = (xx.saturating_sub(POOL_RADIUS), (xx + POOL_RADIUS + 1).min(w));
                let mut best = ya * w + xa;
                for yy in ya..yb {
                    for xi in xa..xb {
                        if src[yy * w + xi] > src[best] {
                            best = yy * w + xi;
                        }
                    }
                }
                let o = (c * h + y) * w + xx;
                out.data[o] = src[best];
                arg[o] = best as u32;
            }
        }
    }
    (out, arg)
}

pub fn maxpool5_backward<T: Real>(arg: &[u32], dy: &Tensor<T>) -> Tensor<T> {
    let plane = dy.plane();
    let mut dx = Tensor::zeros(dy.c, dy.h, dy.w);
    for (o, (&a, &g)) in arg.iter().zip(&dy.data).enumerate() {
        dx.data[(o / plane) * plane + a as usize] += g;
    }
    dx
}
