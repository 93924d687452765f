//! Reverse-mode differentiation over a fixed set of layer operations.

use super::ops::{self, ConvShape};
use super::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// A convolution bound to its weight and bias slices in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvParam {
    pub shape: ConvShape,
    pub weight: usize,
    pub bias: usize,
}

enum Op {
    Leaf,
    Conv(Var, ConvParam),
    Relu(Var),
    Add(Var, Var),
    Upsample2(Var),
    MaxPool5(Var, Vec<u32>),
}

pub struct Tape<'p, T> {
    params: &'p [T],
    values: Vec<Tensor<T>>,
    ops: Vec<Op>,
    needs_grad: Vec<bool>,
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p [T]) -> Self {
        Tape { params, values: Vec::new(), ops: Vec::new(), needs_grad: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op, needs_grad: bool) -> Var {
        self.values.push(value);
        self.ops.push(op);
        self.needs_grad.push(needs_grad);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.values[v.0]
    }

    /// Constant input; no gradient flows into it.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn conv(&mut self, x: Var, p: &ConvParam) -> Var {
        let s = &p.shape;
        let out = ops::conv_forward(
            &self.values[x.0],
            s,
            &self.params[p.weight..p.weight + s.weight_len()],
            &self.params[p.bias..p.bias + s.co],
        );
        self.push(out, Op::Conv(x, p.clone()), true)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::relu(&self.values[x.0]);
        let g = self.needs_grad[x.0];
        self.push(out, Op::Relu(x), g)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.values[a.0], &self.values[b.0]);
        assert!(ta.same_shape(tb), "add shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| *x + *y).collect();
        let out = Tensor::from_vec(ta.c, ta.h, ta.w, data);
        let g = self.needs_grad[a.0] || self.needs_grad[b.0];
        self.push(out, Op::Add(a, b), g)
    }

    pub fn upsample2(&mut self, x: Var) -> Var {
        let out = ops::upsample2(&self.values[x.0]);
        let g = self.needs_grad[x.0];
        self.push(out, Op::Upsample2(x), g)
    }

    pub fn maxpool5(&mut self, x: Var) -> Var {
        let (out, arg) = ops::maxpool5(&self.values[x.0]);
        let g = self.needs_grad[x.0];
        self.push(out, Op::MaxPool5(x, arg), g)
    }

    /// Digest of every ReLU sign pattern and max-pool selection. Two
    /// evaluations with equal digests lie in the same linear region.
    pub fn pattern_digest(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (op, value) in self.ops.iter().zip(&self.values) {
            match op {
                Op::Relu(_) => {
                    for chunk in value.data.chunks(64) {
                        let bits = chunk.iter().enumerate().fold(0u64, |b, (i, v)| b | ((*v > T::zero()) as u64) << i);
                        bits.hash(&mut h);
                    }
                }
                Op::MaxPool5(_, arg) => arg.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    pub fn into_value(mut self, v: Var) -> Tensor<T> {
        self.values.swap_remove(v.0)
    }

    /// Propagates `seed` (the gradient of the loss w.r.t. `out`) back through
    /// the tape, accumulating into `grads`, which has the parameter layout.
    pub fn backward(mut self, out: Var, seed: Tensor<T>, grads: &mut [T]) {
        assert!(self.values[out.0].same_shape(&seed), "seed shape");
        let n = self.values.len();
        let mut adj: Vec<Option<Tensor<T>>> = (0..n).map(|_| None).collect();
        adj[out.0] = Some(seed);

        fn accumulate<T: Real>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
            match slot {
                Some(acc) => acc.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += *b),
                None => *slot = Some(g),
            }
        }

        for idx in (0..=out.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let op = std::mem::replace(&mut self.ops[idx], Op::Leaf);
            match op {
                Op::Leaf => {}
                Op::Conv(x, p) => {
                    let s = p.shape;
                    let xv = &self.values[x.0];
                    let mut dx = self.needs_grad[x.0].then(|| Tensor::zeros(xv.c, xv.h, xv.w));
                    debug_assert_eq!(p.bias, p.weight + s.weight_len(), "bias follows its weight");
                    let (dw, db) = grads[p.weight..p.bias + s.co].split_at_mut(s.weight_len());
                    ops::conv_backward(
                        xv,
                        &s,
                        &self.params[p.weight..p.weight + s.weight_len()],
                        &g,
                        dw,
                        db,
                        dx.as_mut(),
                    );
                    if let Some(dx) = dx {
                        accumulate(&mut adj[x.0], dx);
                    }
                }
                Op::Relu(x) => {
                    if self.needs_grad[x.0] {
                        let dx = ops::relu_backward(&self.values[idx], &g);
                        accumulate(&mut adj[x.0], dx);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs_grad[b.0] {
                        accumulate(&mut adj[b.0], g.clone());
                    }
                    if self.needs_grad[a.0] {
                        accumulate(&mut adj[a.0], g);
                    }
                }
                Op::Upsample2(x) => {
                    if self.needs_grad[x.0] {
                        accumulate(&mut adj[x.0], ops::upsample2_backward(&g));
                    }
                }
                Op::MaxPool5(x, arg) => {
                    if self.needs_grad[x.0] {
                        accumulate(&mut adj[x.0], ops::maxpool5_backward(&arg, &g));
                    }
                }
            }
            // activations are no longer needed once their consumers are done
            self.values[idx] = Tensor { c: 0, h: 0, w: 0, data: Vec::new() };
        }
    }
}
