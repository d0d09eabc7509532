//! Reverse-mode automatic differentiation on a flat operation tape.
//!
//! Forward evaluation is eager: each primitive computes its value and is
//! recorded as a tape node referencing its inputs. `backward` walks the
//! tape in reverse, accumulating cotangents; leaf gradients persist on the
//! tape (and accumulate across repeated calls until [`Tape::zero_grad`]).
//!
//! The primitive set is deliberately small. Anything else (subtraction,
//! division by a positive scalar, clamping, cosine similarity,
//! log-sum-exp) is composed from it; see the `ops` free functions.

use crate::error::{Error, Result};
use crate::sparse::SparseSym;
use crate::tensor::{matmul, matmul_nt_acc, matmul_tn_acc, real, Real, Tensor};
use std::sync::Arc;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

#[derive(Debug, Clone)]
enum Op<F> {
    Leaf,
    /// a (m×k) · b (k×n)
    MatMul(usize, usize),
    /// S · h with a constant symmetric sparse operator.
    SpMM(Arc<SparseSym<F>>, usize),
    /// Elementwise add; also accepts a `[1,c]`/`[c]` bias broadcast over rows.
    Add(usize, usize),
    /// Elementwise mul; either side may be a scalar.
    Mul(usize, usize),
    /// Concatenate along `axis` (0 = rows, 1 = cols).
    Concat(Vec<usize>, usize),
    Relu(usize),
    Sigmoid(usize),
    Log(usize),
    Exp(usize),
    /// Sum of all elements, yielding a scalar.
    Sum(usize),
    /// Euclidean norm of all elements, yielding a scalar.
    L2Norm(usize),
    /// Multiply by a compile-time constant.
    Scale(usize, F),
}

struct Node<F> {
    op: Op<F>,
    value: Tensor<F>,
    traced: bool,
    grad: Option<Vec<F>>,
}

/// Ordered record of primitive operations.
pub struct Tape<F: Real> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<F>, value: Tensor<F>, traced: bool) -> ValueId {
        self.nodes.push(Node {
            op,
            value,
            traced,
            grad: None,
        });
        ValueId(self.nodes.len() - 1)
    }

    /// Trainable input: gradients are accumulated for it.
    pub fn leaf(&mut self, value: Tensor<F>) -> ValueId {
        self.push(Op::Leaf, value, true)
    }

    /// Untraced input: treated as a constant by `backward`.
    pub fn constant(&mut self, value: Tensor<F>) -> ValueId {
        self.push(Op::Leaf, value, false)
    }

    pub fn value(&self, id: ValueId) -> &Tensor<F> {
        &self.nodes[id.0].value
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self, id: ValueId) -> F {
        self.nodes[id.0].value.item()
    }

    /// Accumulated gradient of a traced leaf (after `backward`).
    pub fn grad(&self, id: ValueId) -> Option<&[F]> {
        self.nodes[id.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn traced(&self, id: ValueId) -> bool {
        self.nodes[id.0].traced
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.rows() {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", ta.shape(), tb.shape()),
            ));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![F::zero(); m * n];
        matmul(ta.data(), m, k, tb.data(), n, &mut out);
        let traced = self.traced(a) || self.traced(b);
        Ok(self.push(
            Op::MatMul(a.0, b.0),
            Tensor::matrix(m, n, out)?,
            traced,
        ))
    }

    /// Left-multiply by a constant symmetric sparse operator: `S · h`.
    pub fn spmm(&mut self, s: Arc<SparseSym<F>>, h: ValueId) -> Result<ValueId> {
        let th = self.value(h);
        if th.shape().len() != 2 || th.rows() != s.n() {
            return Err(Error::shape(
                "spmm",
                format!("operator {}x{} vs {:?}", s.n(), s.n(), th.shape()),
            ));
        }
        let d = th.cols();
        let mut out = vec![F::zero(); s.n() * d];
        s.spmm(th.data(), d, &mut out);
        let traced = self.traced(h);
        let n = s.n();
        Ok(self.push(Op::SpMM(s, h.0), Tensor::matrix(n, d, out)?, traced))
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let bias = is_bias_broadcast(ta, tb);
        if !bias && ta.shape() != tb.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} + {:?}", ta.shape(), tb.shape()),
            ));
        }
        let mut out = ta.data().to_vec();
        if bias {
            let c = tb.numel();
            for (i, o) in out.iter_mut().enumerate() {
                *o = *o + tb.data()[i % c];
            }
        } else {
            for (o, &v) in out.iter_mut().zip(tb.data()) {
                *o = *o + v;
            }
        }
        let value = Tensor::new(ta.shape().to_vec(), out)?;
        let traced = self.traced(a) || self.traced(b);
        Ok(self.push(Op::Add(a.0, b.0), value, traced))
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.is_scalar(), tb.is_scalar());
        if ta.shape() != tb.shape() && !sa && !sb {
            return Err(Error::shape(
                "mul",
                format!("{:?} * {:?}", ta.shape(), tb.shape()),
            ));
        }
        let value = if ta.shape() == tb.shape() {
            let mut out = ta.data().to_vec();
            for (o, &v) in out.iter_mut().zip(tb.data()) {
                *o = *o * v;
            }
            Tensor::new(ta.shape().to_vec(), out)?
        } else if sb {
            let s = tb.item();
            let mut out = ta.data().to_vec();
            for o in out.iter_mut() {
                *o = *o * s;
            }
            Tensor::new(ta.shape().to_vec(), out)?
        } else {
            let s = ta.item();
            let mut out = tb.data().to_vec();
            for o in out.iter_mut() {
                *o = *o * s;
            }
            Tensor::new(tb.shape().to_vec(), out)?
        };
        let traced = self.traced(a) || self.traced(b);
        Ok(self.push(Op::Mul(a.0, b.0), value, traced))
    }

    pub fn concat(&mut self, parts: &[ValueId], axis: usize) -> Result<ValueId> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let rank = self.value(parts[0]).shape().len();
        if axis >= rank.max(1) || rank > 2 {
            return Err(Error::shape(
                "concat",
                format!("axis {} on rank-{} tensors", axis, rank),
            ));
        }
        let value = if rank == 1 {
            let mut data = Vec::new();
            for &p in parts {
                let t = self.value(p);
                if t.shape().len() != 1 {
                    return Err(Error::shape("concat", "mixed ranks"));
                }
                data.extend_from_slice(t.data());
            }
            let n = data.len();
            Tensor::new(vec![n], data)?
        } else if axis == 0 {
            let cols = self.value(parts[0]).cols();
            let mut data = Vec::new();
            let mut rows = 0;
            for &p in parts {
                let t = self.value(p);
                if t.shape().len() != 2 || t.cols() != cols {
                    return Err(Error::shape(
                        "concat",
                        format!("row concat expects {} cols, got {:?}", cols, t.shape()),
                    ));
                }
                rows += t.rows();
                data.extend_from_slice(t.data());
            }
            Tensor::matrix(rows, cols, data)?
        } else {
            let rows = self.value(parts[0]).rows();
            let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
            for &p in parts {
                let t = self.value(p);
                if t.shape().len() != 2 || t.rows() != rows {
                    return Err(Error::shape(
                        "concat",
                        format!("col concat expects {} rows, got {:?}", rows, t.shape()),
                    ));
                }
            }
            let total: usize = widths.iter().sum();
            let mut data = vec![F::zero(); rows * total];
            for r in 0..rows {
                let mut off = 0;
                for (&p, &w) in parts.iter().zip(&widths) {
                    let t = self.value(p);
                    data[r * total + off..r * total + off + w]
                        .copy_from_slice(&t.row_slice(r)[..w]);
                    off += w;
                }
            }
            Tensor::matrix(rows, total, data)?
        };
        let traced = parts.iter().any(|&p| self.traced(p));
        Ok(self.push(
            Op::Concat(parts.iter().map(|p| p.0).collect(), axis),
            value,
            traced,
        ))
    }

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        let value = self.map_unary(a, |x| if x > F::zero() { x } else { F::zero() });
        let traced = self.traced(a);
        self.push(Op::Relu(a.0), value, traced)
    }

    pub fn sigmoid(&mut self, a: ValueId) -> ValueId {
        let value = self.map_unary(a, sigmoid_scalar);
        let traced = self.traced(a);
        self.push(Op::Sigmoid(a.0), value, traced)
    }

    pub fn log(&mut self, a: ValueId) -> ValueId {
        let value = self.map_unary(a, |x| x.ln());
        let traced = self.traced(a);
        self.push(Op::Log(a.0), value, traced)
    }

    pub fn exp(&mut self, a: ValueId) -> ValueId {
        let value = self.map_unary(a, |x| x.exp());
        let traced = self.traced(a);
        self.push(Op::Exp(a.0), value, traced)
    }

    pub fn sum(&mut self, a: ValueId) -> ValueId {
        let mut s = F::zero();
        for &v in self.value(a).data() {
            s = s + v;
        }
        let traced = self.traced(a);
        self.push(Op::Sum(a.0), Tensor::scalar(s), traced)
    }

    pub fn l2norm(&mut self, a: ValueId) -> ValueId {
        let mut s = F::zero();
        for &v in self.value(a).data() {
            s = s + v * v;
        }
        let traced = self.traced(a);
        self.push(Op::L2Norm(a.0), Tensor::scalar(s.sqrt()), traced)
    }

    pub fn scale(&mut self, a: ValueId, c: F) -> ValueId {
        let value = self.map_unary(a, |x| x * c);
        let traced = self.traced(a);
        self.push(Op::Scale(a.0, c), value, traced)
    }

    fn map_unary(&self, a: ValueId, f: impl Fn(F) -> F) -> Tensor<F> {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        Tensor::new(t.shape().to_vec(), data).expect("unary preserves shape")
    }

    /// Backpropagate from a scalar output, seeding its cotangent with 1.
    pub fn backward(&mut self, out: ValueId) -> Result<()> {
        if !self.value(out).is_scalar() {
            return Err(Error::shape(
                "backward",
                format!("output must be scalar, got {:?}", self.value(out).shape()),
            ));
        }
        self.backward_seeded(&[(out, vec![F::one()])])
    }

    /// Backpropagate from several outputs with explicit cotangents.
    pub fn backward_seeded(&mut self, seeds: &[(ValueId, Vec<F>)]) -> Result<()> {
        let n = self.nodes.len();
        let mut ct: Vec<Option<Vec<F>>> = (0..n).map(|_| None).collect();
        for (id, seed) in seeds {
            let v = self.value(*id);
            if seed.len() != v.numel() {
                return Err(Error::shape(
                    "backward",
                    format!("seed length {} vs value {:?}", seed.len(), v.shape()),
                ));
            }
            acc_into(&mut ct[id.0], seed);
        }
        for i in (0..n).rev() {
            let Some(g) = ct[i].take() else { continue };
            if !self.nodes[i].traced {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                let slot = self.nodes[i].grad.get_or_insert_with(|| vec![F::zero(); g.len()]);
                for (s, &gv) in slot.iter_mut().zip(&g) {
                    *s = *s + gv;
                }
                continue;
            }
            self.propagate(i, &g, &mut ct);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[F], ct: &mut [Option<Vec<F>>]) {
        // Clone the op descriptor (cheap: ids + Arc) to end the borrow on nodes.
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf => unreachable!("leaves handled by caller"),
            Op::MatMul(a, b) => {
                let ta = &self.nodes[a].value;
                let tb = &self.nodes[b].value;
                let (m, k, ncols) = (ta.rows(), ta.cols(), tb.cols());
                if self.nodes[a].traced {
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); ta.numel()]);
                    // dA = G · Bᵀ ; B is k×n so matmul_nt over rows of B
                    matmul_nt_acc(g, m, ncols, tb.data(), k, ga);
                }
                if self.nodes[b].traced {
                    let gb = ct[b].get_or_insert_with(|| vec![F::zero(); tb.numel()]);
                    // dB = Aᵀ · G
                    matmul_tn_acc(ta.data(), m, k, g, ncols, gb);
                }
            }
            Op::SpMM(s, h) => {
                if self.nodes[h].traced {
                    let th = &self.nodes[h].value;
                    let d = th.cols();
                    let gh = ct[h].get_or_insert_with(|| vec![F::zero(); th.numel()]);
                    // dH = Sᵀ · G = S · G (operator is symmetric)
                    let mut tmp = vec![F::zero(); th.numel()];
                    s.spmm(g, d, &mut tmp);
                    for (o, &v) in gh.iter_mut().zip(&tmp) {
                        *o = *o + v;
                    }
                }
            }
            Op::Add(a, b) => {
                let bias = is_bias_broadcast(&self.nodes[a].value, &self.nodes[b].value);
                if self.nodes[a].traced {
                    acc_into(&mut ct[a], g);
                }
                if self.nodes[b].traced {
                    if bias {
                        let c = self.nodes[b].value.numel();
                        let gb = ct[b].get_or_insert_with(|| vec![F::zero(); c]);
                        for (i, &gv) in g.iter().enumerate() {
                            gb[i % c] = gb[i % c] + gv;
                        }
                    } else {
                        acc_into(&mut ct[b], g);
                    }
                }
            }
            Op::Mul(a, b) => {
                let ta = &self.nodes[a].value;
                let tb = &self.nodes[b].value;
                if self.nodes[a].traced {
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); ta.numel()]);
                    if tb.is_scalar() && !ta.is_scalar() {
                        let s = tb.item();
                        for (o, &gv) in ga.iter_mut().zip(g) {
                            *o = *o + gv * s;
                        }
                    } else if ta.is_scalar() && !tb.is_scalar() {
                        let mut s = F::zero();
                        for (&gv, &bv) in g.iter().zip(tb.data()) {
                            s = s + gv * bv;
                        }
                        ga[0] = ga[0] + s;
                    } else {
                        for ((o, &gv), &bv) in ga.iter_mut().zip(g).zip(tb.data()) {
                            *o = *o + gv * bv;
                        }
                    }
                }
                if self.nodes[b].traced {
                    let gb = ct[b].get_or_insert_with(|| vec![F::zero(); tb.numel()]);
                    if ta.is_scalar() && !tb.is_scalar() {
                        let s = ta.item();
                        for (o, &gv) in gb.iter_mut().zip(g) {
                            *o = *o + gv * s;
                        }
                    } else if tb.is_scalar() && !ta.is_scalar() {
                        let mut s = F::zero();
                        for (&gv, &av) in g.iter().zip(ta.data()) {
                            s = s + gv * av;
                        }
                        gb[0] = gb[0] + s;
                    } else {
                        for ((o, &gv), &av) in gb.iter_mut().zip(g).zip(ta.data()) {
                            *o = *o + gv * av;
                        }
                    }
                }
            }
            Op::Concat(parts, axis) => {
                let rank = self.nodes[i].value.shape().len();
                if rank == 1 || axis == 0 {
                    let mut off = 0;
                    for &p in &parts {
                        let len = self.nodes[p].value.numel();
                        if self.nodes[p].traced {
                            acc_into(&mut ct[p], &g[off..off + len]);
                        }
                        off += len;
                    }
                } else {
                    let rows = self.nodes[i].value.rows();
                    let total = self.nodes[i].value.cols();
                    let mut off = 0;
                    for &p in &parts {
                        let w = self.nodes[p].value.cols();
                        if self.nodes[p].traced {
                            let gp =
                                ct[p].get_or_insert_with(|| vec![F::zero(); rows * w]);
                            for r in 0..rows {
                                for c in 0..w {
                                    gp[r * w + c] = gp[r * w + c] + g[r * total + off + c];
                                }
                            }
                        }
                        off += w;
                    }
                }
            }
            Op::Relu(a) => {
                if self.nodes[a].traced {
                    let ta = &self.nodes[a].value;
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); ta.numel()]);
                    for ((o, &gv), &x) in ga.iter_mut().zip(g).zip(ta.data()) {
                        if x > F::zero() {
                            *o = *o + gv;
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                if self.nodes[a].traced {
                    let y = &self.nodes[i].value;
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); y.numel()]);
                    for ((o, &gv), &yv) in ga.iter_mut().zip(g).zip(y.data()) {
                        *o = *o + gv * yv * (F::one() - yv);
                    }
                }
            }
            Op::Log(a) => {
                if self.nodes[a].traced {
                    let ta = &self.nodes[a].value;
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); ta.numel()]);
                    for ((o, &gv), &x) in ga.iter_mut().zip(g).zip(ta.data()) {
                        *o = *o + gv / x;
                    }
                }
            }
            Op::Exp(a) => {
                if self.nodes[a].traced {
                    let y = &self.nodes[i].value;
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); y.numel()]);
                    for ((o, &gv), &yv) in ga.iter_mut().zip(g).zip(y.data()) {
                        *o = *o + gv * yv;
                    }
                }
            }
            Op::Sum(a) => {
                if self.nodes[a].traced {
                    let ta = &self.nodes[a].value;
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); ta.numel()]);
                    let gv = g[0];
                    for o in ga.iter_mut() {
                        *o = *o + gv;
                    }
                }
            }
            Op::L2Norm(a) => {
                if self.nodes[a].traced {
                    let ta = &self.nodes[a].value;
                    let norm = self.nodes[i].value.item();
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); ta.numel()]);
                    if norm > real::<F>(0.0) {
                        let gv = g[0] / norm;
                        for (o, &x) in ga.iter_mut().zip(ta.data()) {
                            *o = *o + gv * x;
                        }
                    }
                }
            }
            Op::Scale(a, c) => {
                if self.nodes[a].traced {
                    let ta = &self.nodes[a].value;
                    let ga = ct[a].get_or_insert_with(|| vec![F::zero(); ta.numel()]);
                    for (o, &gv) in ga.iter_mut().zip(g) {
                        *o = *o + gv * c;
                    }
                }
            }
        }
    }
}

fn acc_into<F: Real>(slot: &mut Option<Vec<F>>, g: &[F]) {
    match slot {
        Some(v) => {
            for (o, &gv) in v.iter_mut().zip(g) {
                *o = *o + gv;
            }
        }
        None => *slot = Some(g.to_vec()),
    }
}

fn is_bias_broadcast<F: Real>(a: &Tensor<F>, b: &Tensor<F>) -> bool {
    a.shape().len() == 2
        && a.shape() != b.shape()
        && b.numel() == a.cols()
        && (b.shape().len() == 1 || b.rows() == 1)
}

#[inline]
fn sigmoid_scalar<F: Real>(x: F) -> F {
    // Split on sign so exp never overflows.
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Composite helpers built from the primitive set.
pub mod ops {
    use super::*;

    /// `a - b`
    pub fn sub<F: Real>(t: &mut Tape<F>, a: ValueId, b: ValueId) -> Result<ValueId> {
        let nb = t.scale(b, real::<F>(-1.0));
        t.add(a, nb)
    }

    /// Mean of all elements.
    pub fn mean<F: Real>(t: &mut Tape<F>, a: ValueId) -> ValueId {
        let n = t.value(a).numel();
        let s = t.sum(a);
        t.scale(s, real::<F>(1.0 / n as f64))
    }

    /// Dot product of two same-shape tensors.
    pub fn dot<F: Real>(t: &mut Tape<F>, a: ValueId, b: ValueId) -> Result<ValueId> {
        let p = t.mul(a, b)?;
        Ok(t.sum(p))
    }

    /// `a / b` for a strictly positive scalar `b`, via `a · exp(-log b)`.
    pub fn div_pos<F: Real>(t: &mut Tape<F>, a: ValueId, b: ValueId) -> Result<ValueId> {
        let lb = t.log(b);
        let nlb = t.scale(lb, real::<F>(-1.0));
        let inv = t.exp(nlb);
        t.mul(a, inv)
    }

    /// Elementwise clamp to `[lo, hi]`, composed from relu:
    /// `lo + relu(x - lo) - relu(x - hi)`.
    pub fn clamp<F: Real>(t: &mut Tape<F>, x: ValueId, lo: f64, hi: f64) -> Result<ValueId> {
        let shape = t.value(x).shape().to_vec();
        let clo = t.constant(Tensor::filled(shape.clone(), real::<F>(lo)));
        let chi = t.constant(Tensor::filled(shape, real::<F>(hi)));
        let above_lo = sub(t, x, clo)?;
        let above_lo = t.relu(above_lo);
        let above_hi = sub(t, x, chi)?;
        let above_hi = t.relu(above_hi);
        let kept = sub(t, above_lo, above_hi)?;
        t.add(kept, clo)
    }

    /// Cosine similarity of two vectors with a degenerate-norm guard:
    /// if either norm is below 1e-12 the result is the constant 0.
    pub fn cosine<F: Real>(t: &mut Tape<F>, a: ValueId, b: ValueId) -> Result<ValueId> {
        let na = t.l2norm(a);
        let nb = t.l2norm(b);
        let eps = real::<F>(1e-12);
        if t.item(na) < eps || t.item(nb) < eps {
            return Ok(t.constant(Tensor::scalar(F::zero())));
        }
        let d = dot(t, a, b)?;
        let denom = t.mul(na, nb)?;
        div_pos(t, d, denom)
    }

    /// Stabilized log-sum-exp of scalar tape values.
    pub fn logsumexp<F: Real>(t: &mut Tape<F>, xs: &[ValueId]) -> Result<ValueId> {
        debug_assert!(!xs.is_empty());
        let m = xs
            .iter()
            .map(|&x| t.item(x))
            .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
        // Shifting by the max as a constant keeps gradients exact: the
        // derivative of m + log Σ exp(x - m) w.r.t. x is the softmax.
        let row = t.concat(xs, 0)?;
        let shift = {
            let n = xs.len();
            t.constant(Tensor::new(vec![n], vec![-m; n]).expect("shape"))
        };
        let shifted = t.add(row, shift)?;
        let e = t.exp(shifted);
        let s = t.sum(e);
        let ls = t.log(s);
        let cm = t.constant(Tensor::scalar(m));
        t.add(ls, cm)
    }
}

/// Max relative error between an analytic gradient and central finite
/// differences of `loss` (error floor 1 in the denominator). Coordinates
/// are all checked up to `max_coords`, then deterministically sampled.
pub fn grad_check<F: Real>(
    mut loss: impl FnMut(&[F]) -> F,
    params: &[F],
    analytic: &[F],
    epsilon: f64,
) -> f64 {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    assert_eq!(params.len(), analytic.len());
    let max_coords = 512;
    let coords: Vec<usize> = if params.len() <= max_coords {
        (0..params.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        rand::seq::index::sample(&mut rng, params.len(), max_coords).into_vec()
    };
    let mut work = params.to_vec();
    let mut max_err = 0.0f64;
    for &i in &coords {
        let x0 = work[i].to_f64().unwrap();
        let h = epsilon * (1.0 + x0.abs());
        work[i] = real(x0 + h);
        let up = loss(&work).to_f64().unwrap();
        work[i] = real(x0 - h);
        let dn = loss(&work).to_f64().unwrap();
        work[i] = real(x0);
        let fd = (up - dn) / (2.0 * h);
        let an = analytic[i].to_f64().unwrap();
        let err = (an - fd).abs() / 1.0f64.max(an.abs()).max(fd.abs());
        if err > max_err {
            max_err = err;
        }
    }
    max_err
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn primitive_values() {
        let mut t: Tape<f64> = Tape::new();
        let x = t.constant(Tensor::scalar(0.0));
        let s = t.sigmoid(x);
        assert_eq!(t.item(s), 0.5);

        let neg = t.constant(Tensor::scalar(-2.0));
        let pos = t.constant(Tensor::scalar(3.0));
        let r_neg = t.relu(neg);
        assert_eq!(t.item(r_neg), 0.0);
        let r_pos = t.relu(pos);
        assert_eq!(t.item(r_pos), 3.0);

        let a = t.constant(Tensor::matrix(2, 3, vec![1.0; 6]).unwrap());
        let b = t.constant(Tensor::matrix(3, 1, vec![1.0; 3]).unwrap());
        let m = t.matmul(a, b).unwrap();
        assert_eq!(t.value(m).data(), &[3.0, 3.0]);
    }

    #[test]
    fn backward_sum_of_squares() {
        // f(x) = sum(x^2) at (1, 2) -> grad (2, 4)
        let mut t: Tape<f64> = Tape::new();
        let x = t.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let sq = t.mul(x, x).unwrap();
        let f = t.sum(sq);
        t.backward(f).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_sigmoid_at_zero() {
        let mut t: Tape<f64> = Tape::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let s = t.sigmoid(x);
        t.backward(s).unwrap();
        assert!((t.grad(x).unwrap()[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t: Tape<f64> = Tape::new();
        let x = t.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut t: Tape<f64> = Tape::new();
        let x = t.leaf(Tensor::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        t.backward(y).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[12.0]); // 2 * (2x)
        t.zero_grad();
        assert!(t.grad(x).is_none());
    }

    #[test]
    fn shape_mismatch_reports_op() {
        let mut t: Tape<f64> = Tape::new();
        let a = t.constant(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        let b = t.constant(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        let err = t.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matmul"), "{msg}");
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    /// Random chains of primitives match central finite differences.
    #[test]
    fn random_chains_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..100 {
            let n = rng.random_range(2..6usize);
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let pick = case % 5;
            let f = |t: &mut Tape<f64>, x: ValueId| -> ValueId {
                match pick {
                    0 => {
                        let r = t.relu(x);
                        let e = t.exp(r);
                        t.sum(e)
                    }
                    1 => {
                        let s = t.sigmoid(x);
                        let m = t.mul(s, s).unwrap();
                        t.sum(m)
                    }
                    2 => {
                        let e = t.exp(x);
                        let l = t.log(e);
                        let n2 = t.l2norm(l);
                        t.scale(n2, 1.5)
                    }
                    3 => {
                        let sq = t.mul(x, x).unwrap();
                        let e = t.exp(sq);
                        let s = t.sum(e);
                        t.log(s)
                    }
                    _ => {
                        let n2 = t.l2norm(x);
                        let sg = t.sigmoid(n2);
                        t.sum(sg)
                    }
                }
            };
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::new(vec![n], x0.clone()).unwrap());
            let y = f(&mut tape, x);
            tape.backward(y).unwrap();
            let analytic = tape.grad(x).unwrap().to_vec();
            let err = grad_check(
                |p| {
                    let mut t2 = Tape::new();
                    let xi = t2.leaf(Tensor::new(vec![n], p.to_vec()).unwrap());
                    let yi = f(&mut t2, xi);
                    t2.item(yi)
                },
                &x0,
                &analytic,
                1e-6,
            );
            assert!(err < 1e-4, "case {case}: fd error {err}");
        }
    }

    #[test]
    fn grad_check_on_quadratic_is_tight() {
        // f(x) = sum(x^2): analytic gradient 2x, fd error well under 1e-6
        let x = vec![0.3f64, -1.2, 2.5];
        let analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let err = grad_check(
            |p| p.iter().map(|v| v * v).sum::<f64>(),
            &x,
            &analytic,
            1e-6,
        );
        assert!(err < 1e-6, "quadratic fd error {err}");
    }

    /// grad is linear: grad(a·f + b·g) = a·grad f + b·grad g.
    #[test]
    fn backward_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x0: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (0.7, -1.3);

        let grads = |mode: u8| -> Vec<f64> {
            let mut t = Tape::new();
            let x = t.leaf(Tensor::new(vec![4], x0.clone()).unwrap());
            let f = {
                let s = t.sigmoid(x);
                t.sum(s)
            };
            let g = {
                let m = t.mul(x, x).unwrap();
                t.sum(m)
            };
            let y = match mode {
                0 => {
                    let fa = t.scale(f, a);
                    let gb = t.scale(g, b);
                    t.add(fa, gb).unwrap()
                }
                1 => f,
                _ => g,
            };
            t.backward(y).unwrap();
            t.grad(x).unwrap().to_vec()
        };

        let combo = grads(0);
        let gf = grads(1);
        let gg = grads(2);
        for i in 0..4 {
            assert!((combo[i] - (a * gf[i] + b * gg[i])).abs() <= 1e-8);
        }
    }

    #[test]
    fn composite_clamp_and_cosine() {
        let mut t: Tape<f64> = Tape::new();
        let x = t.leaf(Tensor::new(vec![3], vec![-0.5, 0.4, 2.0]).unwrap());
        let c = ops::clamp(&mut t, x, 0.0, 1.0).unwrap();
        assert_eq!(t.value(c).data(), &[0.0, 0.4, 1.0]);

        let a = t.constant(Tensor::row(&[1.0, 0.0]));
        let b = t.constant(Tensor::row(&[0.0, 1.0]));
        let cos = ops::cosine(&mut t, a, b).unwrap();
        assert!(t.item(cos).abs() < 1e-15);
        let cos_aa = ops::cosine(&mut t, a, a).unwrap();
        assert!((t.item(cos_aa) - 1.0).abs() < 1e-12);

        // guard: zero vector -> 0
        let z = t.constant(Tensor::row(&[0.0, 0.0]));
        let cz = ops::cosine(&mut t, a, z).unwrap();
        assert_eq!(t.item(cz), 0.0);
    }

    #[test]
    fn logsumexp_matches_naive() {
        let mut t: Tape<f64> = Tape::new();
        let xs: Vec<ValueId> = [100.0, 101.0, 99.5]
            .iter()
            .map(|&v| t.constant(Tensor::scalar(v)))
            .collect();
        let l = ops::logsumexp(&mut t, &xs).unwrap();
        let naive = (100.0f64 - 101.0).exp() + 1.0 + (99.5f64 - 101.0).exp();
        assert!((t.item(l) - (101.0 + naive.ln())).abs() < 1e-12);
    }
}
