//! Reverse-mode automatic differentiation over a per-forward-pass tape.
//!
//! Each operation appends a node holding its output value and enough
//! information to push gradients back to its inputs. `backward` walks the
//! tape in reverse, accumulating gradients lazily so untouched subgraphs
//! cost nothing. A tape is single-threaded by design; parallelism happens
//! across independent tapes.
//!
//! Shape discipline: tape methods panic on shape misuse. They sit below the
//! model layer, which validates shapes and reports proper errors; a panic
//! here is a bug in the caller, not a user-input condition.

use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, softmax_in_place};
use super::{Real, Tensor};

/// Handle to a tape node.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    /// Elementwise product.
    Mul(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Ln(Var),
    /// x ↦ x^e for a constant exponent.
    PowConst(Var, T),
    /// x ↦ x·a + b elementwise, constants a and b.
    Affine(Var, T, T),
    /// Softmax over a vector's entries.
    Softmax(Var),
    /// Row means: r×c → r×1.
    RowMeans(Var),
    /// Column means: r×c → 1×c.
    ColMeans(Var),
    /// Sum of all entries → 1×1.
    Sum(Var),
    /// Concatenation of row vectors → one long row vector.
    Concat(Vec<Var>),
    /// Identity inside [lo, hi], clipped outside; gradient passes only
    /// strictly inside the interval.
    Clamp(Var, T, T),
    /// Elementwise maximum; ties route the gradient to the left operand.
    Max2(Var, Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    fn binary_same_shape(&self, op: &'static str, a: Var, b: Var) {
        let (ra, ca) = self.value(a).shape();
        let (rb, cb) = self.value(b).shape();
        assert!(
            ra == rb && ca == cb,
            "{op}: shape mismatch {ra}x{ca} vs {rb}x{cb}"
        );
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_same_shape("add", a, b);
        let (r, c) = self.value(a).shape();
        let data = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(&x, &y)| x + y)
            .collect();
        self.push(Tensor::new(r, c, data), Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_same_shape("sub", a, b);
        let (r, c) = self.value(a).shape();
        let data = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(&x, &y)| x - y)
            .collect();
        self.push(Tensor::new(r, c, data), Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_same_shape("mul", a, b);
        let (r, c) = self.value(a).shape();
        let data = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(&x, &y)| x * y)
            .collect();
        self.push(Tensor::new(r, c, data), Op::Mul(a, b))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.value(a).shape();
        let (kb, n) = self.value(b).shape();
        assert_eq!(k, kb, "matmul: inner dims {k} vs {kb}");
        let mut out = vec![T::zero(); m * n];
        matmul_acc(self.value(a).as_slice(), self.value(b).as_slice(), &mut out, m, k, n);
        self.push(Tensor::new(m, n, out), Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let t = self.value(a).transpose();
        self.push(t, Op::Transpose(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let one = T::one();
        let v = self.value(a).map(|x| one / (one + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    /// Natural log; caller must keep inputs positive (clamp first).
    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.ln());
        self.push(v, Op::Ln(a))
    }

    /// x^e with constant exponent e; inputs must stay positive so the
    /// derivative e·x^(e−1) is finite even for e < 1.
    pub fn pow_const(&mut self, a: Var, e: T) -> Var {
        let v = self.value(a).map(|x| x.powf(e));
        self.push(v, Op::PowConst(a, e))
    }

    /// x·mul + add, elementwise with constants.
    pub fn affine(&mut self, a: Var, mul: T, add: T) -> Var {
        let v = self.value(a).map(|x| x * mul + add);
        self.push(v, Op::Affine(a, mul, add))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        self.affine(a, s, T::zero())
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.affine(a, -T::one(), T::zero())
    }

    /// Softmax over the entries of a vector (1×n or n×1).
    pub fn softmax(&mut self, a: Var) -> Var {
        assert!(self.value(a).is_vector(), "softmax expects a vector");
        assert!(self.value(a).len() > 0);
        let (r, c) = self.value(a).shape();
        let mut data = self.value(a).as_slice().to_vec();
        softmax_in_place(&mut data);
        self.push(Tensor::new(r, c, data), Op::Softmax(a))
    }

    pub fn row_means(&mut self, a: Var) -> Var {
        let (r, c) = self.value(a).shape();
        let inv = T::one() / T::from(c).unwrap();
        let src = self.value(a).as_slice();
        let data: Vec<T> = (0..r)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..c {
                    acc = acc + src[i * c + j];
                }
                acc * inv
            })
            .collect();
        self.push(Tensor::new(r, 1, data), Op::RowMeans(a))
    }

    pub fn col_means(&mut self, a: Var) -> Var {
        let (r, c) = self.value(a).shape();
        let inv = T::one() / T::from(r).unwrap();
        let src = self.value(a).as_slice();
        let data: Vec<T> = (0..c)
            .map(|j| {
                let mut acc = T::zero();
                for i in 0..r {
                    acc = acc + src[i * c + j];
                }
                acc * inv
            })
            .collect();
        self.push(Tensor::new(1, c, data), Op::ColMeans(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let mut acc = T::zero();
        for &x in self.value(a).as_slice() {
            acc = acc + x;
        }
        self.push(Tensor::scalar(acc), Op::Sum(a))
    }

    /// Concatenates row vectors left to right into a single row vector.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of zero vectors");
        let mut data = Vec::new();
        for &p in parts {
            assert_eq!(self.value(p).rows(), 1, "concat_rows expects 1xN inputs");
            data.extend_from_slice(self.value(p).as_slice());
        }
        let n = data.len();
        self.push(Tensor::new(1, n, data), Op::Concat(parts.to_vec()))
    }

    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        assert!(lo < hi);
        let v = self.value(a).map(|x| if x < lo { lo } else if x > hi { hi } else { x });
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn max2(&mut self, a: Var, b: Var) -> Var {
        self.binary_same_shape("max2", a, b);
        let (r, c) = self.value(a).shape();
        let data = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(&x, &y)| if x >= y { x } else { y })
            .collect();
        self.push(Tensor::new(r, c, data), Op::Max2(a, b))
    }

    /// Mean of same-shape vars; sums left to right then rescales.
    pub fn mean_of(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "mean of zero vectors");
        let mut acc = parts[0];
        for &p in &parts[1..] {
            acc = self.add(acc, p);
        }
        self.scale(acc, T::one() / T::from(parts.len()).unwrap())
    }

    /// Runs reverse-mode accumulation from a scalar output. Inputs of a node
    /// always precede it on the tape, so one reverse sweep suffices.
    pub fn backward(&self, out: Var) -> Grads<T> {
        assert!(self.value(out).is_scalar(), "backward from non-scalar");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=out.0).rev() {
            // Take the finished gradient out so inputs (always at lower
            // indices) can be written; re-inserted below.
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a.0, g.as_slice(), self.shape_of(a));
                    accumulate(&mut grads, b.0, g.as_slice(), self.shape_of(b));
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a.0, g.as_slice(), self.shape_of(a));
                    let neg: Vec<T> = g.as_slice().iter().map(|&x| -x).collect();
                    accumulate(&mut grads, b.0, &neg, self.shape_of(b));
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[b.0].value.as_slice())
                        .map(|(&gx, &bv)| gx * bv)
                        .collect();
                    let db: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[a.0].value.as_slice())
                        .map(|(&gx, &av)| gx * av)
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                    accumulate(&mut grads, b.0, &db, self.shape_of(b));
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let (m, k) = self.shape_of(a);
                    let n = self.shape_of(b).1;
                    // dA += G·Bᵀ, dB += Aᵀ·G
                    let ga = grads[a.0].get_or_insert_with(|| Tensor::zeros(m, k));
                    matmul_nt_acc(g.as_slice(), self.nodes[b.0].value.as_slice(), ga.as_mut_slice(), m, n, k);
                    let gb = grads[b.0].get_or_insert_with(|| Tensor::zeros(k, n));
                    matmul_tn_acc(self.nodes[a.0].value.as_slice(), g.as_slice(), gb.as_mut_slice(), m, k, n);
                }
                Op::Transpose(a) => {
                    let a = *a;
                    let gt = g.transpose();
                    accumulate(&mut grads, a.0, gt.as_slice(), self.shape_of(a));
                }
                Op::Relu(a) => {
                    let a = *a;
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[a.0].value.as_slice())
                        .map(|(&gx, &x)| if x > T::zero() { gx } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                }
                Op::Tanh(a) => {
                    let a = *a;
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[idx].value.as_slice())
                        .map(|(&gx, &y)| gx * (T::one() - y * y))
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                }
                Op::Sigmoid(a) => {
                    let a = *a;
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[idx].value.as_slice())
                        .map(|(&gx, &y)| gx * y * (T::one() - y))
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                }
                Op::Ln(a) => {
                    let a = *a;
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[a.0].value.as_slice())
                        .map(|(&gx, &x)| gx / x)
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                }
                Op::PowConst(a, e) => {
                    let (a, e) = (*a, *e);
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[a.0].value.as_slice())
                        .map(|(&gx, &x)| gx * e * x.powf(e - T::one()))
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                }
                Op::Affine(a, mul, _) => {
                    let (a, mul) = (*a, *mul);
                    let da: Vec<T> = g.as_slice().iter().map(|&gx| gx * mul).collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                }
                Op::Softmax(a) => {
                    let a = *a;
                    let y = self.nodes[idx].value.as_slice();
                    let mut dot = T::zero();
                    for (&gx, &yx) in g.as_slice().iter().zip(y) {
                        dot = dot + gx * yx;
                    }
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(y)
                        .map(|(&gx, &yx)| yx * (gx - dot))
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                }
                Op::RowMeans(a) => {
                    let a = *a;
                    let (r, c) = self.shape_of(a);
                    let inv = T::one() / T::from(c).unwrap();
                    let mut da = vec![T::zero(); r * c];
                    for i in 0..r {
                        let gi = g.as_slice()[i] * inv;
                        for j in 0..c {
                            da[i * c + j] = gi;
                        }
                    }
                    accumulate(&mut grads, a.0, &da, (r, c));
                }
                Op::ColMeans(a) => {
                    let a = *a;
                    let (r, c) = self.shape_of(a);
                    let inv = T::one() / T::from(r).unwrap();
                    let mut da = vec![T::zero(); r * c];
                    for j in 0..c {
                        let gj = g.as_slice()[j] * inv;
                        for i in 0..r {
                            da[i * c + j] = gj;
                        }
                    }
                    accumulate(&mut grads, a.0, &da, (r, c));
                }
                Op::Sum(a) => {
                    let a = *a;
                    let (r, c) = self.shape_of(a);
                    let gs = g.item();
                    let da = vec![gs; r * c];
                    accumulate(&mut grads, a.0, &da, (r, c));
                }
                Op::Concat(parts) => {
                    let parts = parts.clone();
                    let mut offset = 0;
                    for p in parts {
                        let (r, c) = self.shape_of(p);
                        debug_assert_eq!(r, 1);
                        let slice = &g.as_slice()[offset..offset + c];
                        accumulate(&mut grads, p.0, slice, (r, c));
                        offset += c;
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    let (a, lo, hi) = (*a, *lo, *hi);
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(self.nodes[a.0].value.as_slice())
                        .map(|(&gx, &x)| if x > lo && x < hi { gx } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                }
                Op::Max2(a, b) => {
                    let (a, b) = (*a, *b);
                    let av = self.nodes[a.0].value.as_slice();
                    let bv = self.nodes[b.0].value.as_slice();
                    let da: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(av.iter().zip(bv))
                        .map(|(&gx, (&x, &y))| if x >= y { gx } else { T::zero() })
                        .collect();
                    let db: Vec<T> = g
                        .as_slice()
                        .iter()
                        .zip(av.iter().zip(bv))
                        .map(|(&gx, (&x, &y))| if x < y { gx } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, a.0, &da, self.shape_of(a));
                    accumulate(&mut grads, b.0, &db, self.shape_of(b));
                }
            }
            grads[idx] = Some(g);
        }
        Grads { grads }
    }

    fn shape_of(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], idx: usize, contrib: &[T], shape: (usize, usize)) {
    match &mut grads[idx] {
        Some(t) => {
            for (dst, &src) in t.as_mut_slice().iter_mut().zip(contrib) {
                *dst = *dst + src;
            }
        }
        None => {
            grads[idx] = Some(Tensor::new(shape.0, shape.1, contrib.to_vec()));
        }
    }
}

/// Gradient buffer produced by [`Tape::backward`].
pub struct Grads<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Grads<T> {
    /// Gradient of the backward output with respect to `v`, if `v`
    /// participated in the computation.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_mul_backward() {
        // f = sum((a + b) ∘ a), df/da = a + b + a·1, df/db = a
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::row(vec![1.0, 2.0]));
        let b = tape.leaf(Tensor::row(vec![3.0, 5.0]));
        let s = tape.add(a, b);
        let p = tape.mul(s, a);
        let out = tape.sum(p);
        assert_eq!(tape.value(out).item(), (1.0 + 3.0) * 1.0 + (2.0 + 5.0) * 2.0);
        let grads = tape.backward(out);
        let da = grads.get(a).unwrap();
        let db = grads.get(b).unwrap();
        // d/da_i [(a_i+b_i)·a_i] = 2a_i + b_i
        assert_eq!(da.as_slice(), &[2.0 + 3.0, 4.0 + 5.0]);
        assert_eq!(db.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn matmul_backward_matches_manual() {
        // f = sum(A·B); dA = 1·Bᵀ, dB = Aᵀ·1
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let b = tape.leaf(Tensor::new(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]));
        let c = tape.matmul(a, b);
        let out = tape.sum(c);
        let grads = tape.backward(out);
        let da = grads.get(a).unwrap();
        // row sums of B
        assert_eq!(da.as_slice(), &[15.0, 19.0, 23.0, 15.0, 19.0, 23.0]);
        let db = grads.get(b).unwrap();
        // column sums of A broadcast
        assert_eq!(db.as_slice(), &[5.0, 5.0, 7.0, 7.0, 9.0, 9.0]);
    }

    #[test]
    fn unused_leaf_has_no_grad() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::scalar(2.0));
        let b = tape.leaf(Tensor::scalar(3.0));
        let out = tape.mul(a, a);
        let grads = tape.backward(out);
        assert!(grads.get(b).is_none());
        assert_eq!(grads.get(a).unwrap().item(), 4.0);
    }

    #[test]
    fn softmax_forward_is_normalized() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::row(vec![0.3, -2.0, 5.0, 0.0]));
        let s = tape.softmax(a);
        let sum: f64 = tape.value(s).as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concat_splits_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::row(vec![1.0, 2.0]));
        let b = tape.leaf(Tensor::row(vec![3.0]));
        let c = tape.concat_rows(&[a, b]);
        let w = tape.leaf(Tensor::row(vec![10.0, 20.0, 30.0]));
        let p = tape.mul(c, w);
        let out = tape.sum(p);
        let grads = tape.backward(out);
        assert_eq!(grads.get(a).unwrap().as_slice(), &[10.0, 20.0]);
        assert_eq!(grads.get(b).unwrap().as_slice(), &[30.0]);
    }

    #[test]
    fn clamp_blocks_gradient_outside_range() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::row(vec![-0.5, 0.5, 1.5]));
        let c = tape.clamp(a, 0.0, 1.0);
        let out = tape.sum(c);
        let grads = tape.backward(out);
        assert_eq!(grads.get(a).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(tape.value(c).as_slice(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn fanout_accumulates() {
        // f = x·x + x => df/dx = 2x + 1
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let sq = tape.mul(x, x);
        let out = tape.add(sq, x);
        let grads = tape.backward(out);
        assert_eq!(grads.get(x).unwrap().item(), 7.0);
    }
}
