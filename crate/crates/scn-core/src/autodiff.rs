//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A define-by-run tape: forward calls push nodes in topological order and
//! compute values eagerly; `backward` replays the tape in reverse, sending
//! vector-Jacobian products to each node's inputs. The op set is exactly what
//! SCN training needs, nothing more.

use crate::error::{Result, ScnError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub type NodeId = usize;

/// Norm guard for `cosine_sim_sq`, from the reference training loop.
pub const COS_EPS: f64 = 1e-6;

/// Spatial padding for conv2d. Explicit per-edge amounts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zero {
        top: usize,
        left: usize,
        bottom: usize,
        right: usize,
    },
    /// Wrap-around padding; makes conv + global pooling exactly invariant to
    /// circular shifts of the input.
    Circular {
        top: usize,
        left: usize,
        bottom: usize,
        right: usize,
    },
}

impl Padding {
    fn amounts(self) -> (usize, usize, usize, usize) {
        match self {
            Padding::Zero {
                top,
                left,
                bottom,
                right,
            }
            | Padding::Circular {
                top,
                left,
                bottom,
                right,
            } => (top, left, bottom, right),
        }
    }

    fn circular(self) -> bool {
        matches!(self, Padding::Circular { .. })
    }
}

/// Static description of one conv2d application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dMeta {
    pub in_ch: usize,
    pub out_ch: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: Padding,
    pub out_h: usize,
    pub out_w: usize,
}

impl Conv2dMeta {
    pub fn output_dims(h: usize, w: usize, kh: usize, kw: usize, stride: usize, pad: Padding) -> (usize, usize) {
        let (t, l, b, r) = pad.amounts();
        let oh = (h + t + b - kh) / stride + 1;
        let ow = (w + l + r - kw) / stride + 1;
        (oh, ow)
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(NodeId, NodeId),
    Relu(NodeId),
    AddBias(NodeId, NodeId),
    Mean(NodeId),
    Scale(NodeId, T),
    Add(NodeId, NodeId),
    Reshape(NodeId),
    Slice { src: NodeId, offset: usize },
    Softmax(NodeId),
    CrossEntropy { logits: NodeId, labels: Vec<usize> },
    EntropyOfLogits(NodeId),
    CosineSimSq(NodeId, NodeId),
    Conv2d {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        meta: Conv2dMeta,
    },
    GlobalMaxPool { input: NodeId, argmax: Vec<usize> },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients keyed by node id; same shape as the node's value.
#[derive(Debug)]
pub struct GradMap<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> GradMap<T> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    fn accumulate(&mut self, id: NodeId, shape: &[usize], update: impl FnOnce(&mut [T])) {
        let slot = &mut self.grads[id];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(shape.to_vec()));
        }
        update(&mut slot.as_mut().unwrap().data);
    }
}

/// Wengert tape. One tape per forward pass; confined to a single thread.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id].value
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// `[m x k] . [k x n] -> [m x n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        if av.shape.len() != 2 || bv.shape.len() != 2 || av.shape[1] != bv.shape[0] {
            return Err(ScnError::ShapeMismatch(format!(
                "matmul {:?} . {:?}",
                av.shape, bv.shape
            )));
        }
        let (m, k, n) = (av.shape[0], av.shape[1], bv.shape[1]);
        let mut out = vec![T::ZERO; m * n];
        for i in 0..m {
            let arow = &av.data[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (kk, &aik) in arow.iter().enumerate() {
                let brow = &bv.data[kk * n..(kk + 1) * n];
                for j in 0..n {
                    orow[j] += aik * brow[j];
                }
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = &self.nodes[x].value;
        let out = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&e| e.maxv(T::ZERO)).collect(),
        };
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg)
    }

    /// Adds a `[n]` bias to every row of a `[m x n]` matrix.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xv, bv) = (&self.nodes[x].value, &self.nodes[bias].value);
        if xv.shape.len() != 2 || bv.len() != xv.shape[1] {
            return Err(ScnError::ShapeMismatch(format!(
                "add_bias {:?} + {:?}",
                xv.shape, bv.shape
            )));
        }
        let (m, n) = (xv.shape[0], xv.shape[1]);
        let mut out = xv.data.clone();
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] += bv.data[j];
            }
        }
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::AddBias(x, bias), rg))
    }

    /// Mean over all elements -> scalar.
    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let v = &self.nodes[x].value;
        let n = T::from_f64(v.len() as f64);
        let s: T = v.data.iter().copied().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s / n), Op::Mean(x), rg)
    }

    pub fn scale(&mut self, x: NodeId, c: T) -> NodeId {
        let v = &self.nodes[x].value;
        let out = Tensor {
            shape: v.shape.clone(),
            data: v.data.iter().map(|&e| e * c).collect(),
        };
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, c), rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        if av.shape != bv.shape {
            return Err(ScnError::ShapeMismatch(format!(
                "add {:?} + {:?}",
                av.shape, bv.shape
            )));
        }
        let out = Tensor {
            shape: av.shape.clone(),
            data: av
                .data
                .iter()
                .zip(bv.data.iter())
                .map(|(&x, &y)| x + y)
                .collect(),
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let v = &self.nodes[x].value;
        let out = Tensor::new(shape, v.data.clone())?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    /// Contiguous view `src[offset .. offset+len]` reshaped to `shape`.
    pub fn slice(&mut self, src: NodeId, offset: usize, shape: Vec<usize>) -> Result<NodeId> {
        let v = &self.nodes[src].value;
        let len: usize = shape.iter().product();
        if offset + len > v.len() {
            return Err(ScnError::ShapeMismatch(format!(
                "slice [{offset}, {}) out of tensor of length {}",
                offset + len,
                v.len()
            )));
        }
        let out = Tensor::new(shape, v.data[offset..offset + len].to_vec())?;
        let rg = self.rg(src);
        Ok(self.push(out, Op::Slice { src, offset }, rg))
    }

    /// Row-wise stable softmax of `[b x C]` logits.
    pub fn softmax(&mut self, logits: NodeId) -> Result<NodeId> {
        let v = &self.nodes[logits].value;
        if v.shape.len() != 2 {
            return Err(ScnError::ShapeMismatch(format!(
                "softmax expects [b x C], got {:?}",
                v.shape
            )));
        }
        let (b, c) = (v.shape[0], v.shape[1]);
        let mut out = vec![T::ZERO; b * c];
        for i in 0..b {
            softmax_row(&v.data[i * c..(i + 1) * c], &mut out[i * c..(i + 1) * c]);
        }
        let rg = self.rg(logits);
        Ok(self.push(Tensor::new(vec![b, c], out)?, Op::Softmax(logits), rg))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let v = &self.nodes[logits].value;
        if v.shape.len() != 2 || v.shape[0] != labels.len() {
            return Err(ScnError::ShapeMismatch(format!(
                "cross_entropy logits {:?} vs {} labels",
                v.shape,
                labels.len()
            )));
        }
        let (b, c) = (v.shape[0], v.shape[1]);
        for &l in labels {
            if l >= c {
                return Err(ScnError::LabelOutOfRange { label: l, classes: c });
            }
        }
        let mut total = T::ZERO;
        for i in 0..b {
            let row = &v.data[i * c..(i + 1) * c];
            total += -log_softmax_at(row, labels[i]);
        }
        let loss = total / T::from_f64(b as f64);
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Sum over batch rows of the Shannon entropy of `softmax(logits)`.
    pub fn entropy_of_logits(&mut self, logits: NodeId) -> Result<NodeId> {
        let v = &self.nodes[logits].value;
        if v.shape.len() != 2 {
            return Err(ScnError::ShapeMismatch(format!(
                "entropy_of_logits expects [b x C], got {:?}",
                v.shape
            )));
        }
        let (b, c) = (v.shape[0], v.shape[1]);
        let mut total = T::ZERO;
        for i in 0..b {
            total += entropy_row(&v.data[i * c..(i + 1) * c]);
        }
        let rg = self.rg(logits);
        Ok(self.push(Tensor::scalar(total), Op::EntropyOfLogits(logits), rg))
    }

    /// `(u.v)^2 / (|u|^2 |v|^2)` with eps-guarded norms; 0 for zero input.
    pub fn cosine_sim_sq(&mut self, u: NodeId, v: NodeId) -> Result<NodeId> {
        let (uv, vv) = (&self.nodes[u].value, &self.nodes[v].value);
        if uv.len() != vv.len() {
            return Err(ScnError::ShapeMismatch(format!(
                "cosine_sim_sq {:?} vs {:?}",
                uv.shape, vv.shape
            )));
        }
        let val = cos_sq_value(&uv.data, &vv.data);
        let rg = self.rg(u) || self.rg(v);
        Ok(self.push(Tensor::scalar(val), Op::CosineSimSq(u, v), rg))
    }

    /// Direct conv2d. Input `[b, in_ch, h, w]`, weight `[out_ch, in_ch, kh, kw]`,
    /// bias `[out_ch]`.
    pub fn conv2d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        meta: Conv2dMeta,
    ) -> Result<NodeId> {
        let iv = &self.nodes[input].value;
        let wv = &self.nodes[weight].value;
        let bv = &self.nodes[bias].value;
        let batch = check_conv_shapes(iv, wv, bv, &meta)?;
        let out = conv2d_forward(&iv.data, &wv.data, &bv.data, batch, &meta);
        let rg = self.rg(input) || self.rg(weight) || self.rg(bias);
        Ok(self.push(
            Tensor::new(vec![batch, meta.out_ch, meta.out_h, meta.out_w], out)?,
            Op::Conv2d {
                input,
                weight,
                bias,
                meta,
            },
            rg,
        ))
    }

    /// `[b, c, h, w] -> [b, c]`, max over the spatial extent.
    pub fn global_max_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let v = &self.nodes[input].value;
        if v.shape.len() != 4 {
            return Err(ScnError::ShapeMismatch(format!(
                "global_max_pool expects [b,c,h,w], got {:?}",
                v.shape
            )));
        }
        let (b, c, h, w) = (v.shape[0], v.shape[1], v.shape[2], v.shape[3]);
        let hw = h * w;
        let mut out = vec![T::ZERO; b * c];
        let mut argmax = vec![0usize; b * c];
        for bc in 0..b * c {
            let plane = &v.data[bc * hw..(bc + 1) * hw];
            let mut best = plane[0];
            let mut besti = 0;
            for (i, &e) in plane.iter().enumerate().skip(1) {
                if e > best {
                    best = e;
                    besti = i;
                }
            }
            out[bc] = best;
            argmax[bc] = bc * hw + besti;
        }
        let rg = self.rg(input);
        Ok(self.push(
            Tensor::new(vec![b, c], out)?,
            Op::GlobalMaxPool { input, argmax },
            rg,
        ))
    }

    /// Gradients of a scalar `loss` w.r.t. every `requires_grad` leaf.
    /// Reverse topological sweep; each node is visited exactly once.
    pub fn backward(&self, loss: NodeId) -> Result<GradMap<T>> {
        let lv = &self.nodes[loss].value;
        if lv.data.len() != 1 {
            return Err(ScnError::Invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape
            )));
        }
        let mut map = GradMap {
            grads: vec![None; self.nodes.len()],
        };
        map.grads[loss] = Some(Tensor {
            shape: lv.shape.clone(),
            data: vec![T::ONE],
        });
        for id in (0..=loss).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(gout) = map.grads[id].take() else {
                continue;
            };
            self.vjp(id, &gout, &mut map);
            // keep gradients only for leaves
            if matches!(self.nodes[id].op, Op::Leaf) {
                map.grads[id] = Some(gout);
            }
        }
        // leaves with no influence on the loss get zero gradient
        for (id, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && map.grads[id].is_none() {
                map.grads[id] = Some(Tensor::zeros(node.value.shape.clone()));
            }
        }
        Ok(map)
    }

    fn vjp(&self, id: NodeId, gout: &Tensor<T>, map: &mut GradMap<T>) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = &self.nodes[*a].value;
                let bv = &self.nodes[*b].value;
                let (m, k, n) = (av.shape[0], av.shape[1], bv.shape[1]);
                if self.rg(*a) {
                    map.accumulate(*a, &av.shape, |ga| {
                        for i in 0..m {
                            let grow = &gout.data[i * n..(i + 1) * n];
                            for kk in 0..k {
                                let brow = &bv.data[kk * n..(kk + 1) * n];
                                let mut acc = T::ZERO;
                                for j in 0..n {
                                    acc += grow[j] * brow[j];
                                }
                                ga[i * k + kk] += acc;
                            }
                        }
                    });
                }
                if self.rg(*b) {
                    map.accumulate(*b, &bv.shape, |gb| {
                        for i in 0..m {
                            let grow = &gout.data[i * n..(i + 1) * n];
                            let arow = &av.data[i * k..(i + 1) * k];
                            for (kk, &aik) in arow.iter().enumerate() {
                                let gbrow = &mut gb[kk * n..(kk + 1) * n];
                                for j in 0..n {
                                    gbrow[j] += aik * grow[j];
                                }
                            }
                        }
                    });
                }
            }
            Op::Relu(x) => {
                let xv = &self.nodes[*x].value;
                map.accumulate(*x, &xv.shape, |gx| {
                    for (i, &e) in xv.data.iter().enumerate() {
                        if e > T::ZERO {
                            gx[i] += gout.data[i];
                        }
                    }
                });
            }
            Op::AddBias(x, bias) => {
                let xv = &self.nodes[*x].value;
                let (m, n) = (xv.shape[0], xv.shape[1]);
                if self.rg(*x) {
                    map.accumulate(*x, &xv.shape, |gx| {
                        for (g, go) in gx.iter_mut().zip(gout.data.iter()) {
                            *g += *go;
                        }
                    });
                }
                if self.rg(*bias) {
                    let bshape = self.nodes[*bias].value.shape.clone();
                    map.accumulate(*bias, &bshape, |gb| {
                        for i in 0..m {
                            for j in 0..n {
                                gb[j] += gout.data[i * n + j];
                            }
                        }
                    });
                }
            }
            Op::Mean(x) => {
                let xv = &self.nodes[*x].value;
                let inv = T::ONE / T::from_f64(xv.len() as f64);
                let g = gout.data[0] * inv;
                map.accumulate(*x, &xv.shape, |gx| {
                    for e in gx.iter_mut() {
                        *e += g;
                    }
                });
            }
            Op::Scale(x, c) => {
                let xv = &self.nodes[*x].value;
                let c = *c;
                map.accumulate(*x, &xv.shape, |gx| {
                    for (g, go) in gx.iter_mut().zip(gout.data.iter()) {
                        *g += *go * c;
                    }
                });
            }
            Op::Add(a, b) => {
                for &src in &[*a, *b] {
                    if self.rg(src) {
                        let shape = self.nodes[src].value.shape.clone();
                        map.accumulate(src, &shape, |gs| {
                            for (g, go) in gs.iter_mut().zip(gout.data.iter()) {
                                *g += *go;
                            }
                        });
                    }
                }
            }
            Op::Reshape(x) => {
                let shape = self.nodes[*x].value.shape.clone();
                map.accumulate(*x, &shape, |gx| {
                    for (g, go) in gx.iter_mut().zip(gout.data.iter()) {
                        *g += *go;
                    }
                });
            }
            Op::Slice { src, offset } => {
                let shape = self.nodes[*src].value.shape.clone();
                let off = *offset;
                map.accumulate(*src, &shape, |gs| {
                    for (i, go) in gout.data.iter().enumerate() {
                        gs[off + i] += *go;
                    }
                });
            }
            Op::Softmax(x) => {
                let y = &self.nodes[id].value;
                let (b, c) = (y.shape[0], y.shape[1]);
                let xshape = self.nodes[*x].value.shape.clone();
                map.accumulate(*x, &xshape, |gx| {
                    for i in 0..b {
                        let yr = &y.data[i * c..(i + 1) * c];
                        let gr = &gout.data[i * c..(i + 1) * c];
                        let mut dot = T::ZERO;
                        for j in 0..c {
                            dot += gr[j] * yr[j];
                        }
                        for j in 0..c {
                            gx[i * c + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::CrossEntropy { logits, labels } => {
                let lv = &self.nodes[*logits].value;
                let (b, c) = (lv.shape[0], lv.shape[1]);
                let gscale = gout.data[0] / T::from_f64(b as f64);
                let lshape = lv.shape.clone();
                map.accumulate(*logits, &lshape, |gl| {
                    let mut p = vec![T::ZERO; c];
                    for i in 0..b {
                        softmax_row(&lv.data[i * c..(i + 1) * c], &mut p);
                        for j in 0..c {
                            let onehot = if j == labels[i] { T::ONE } else { T::ZERO };
                            gl[i * c + j] += (p[j] - onehot) * gscale;
                        }
                    }
                });
            }
            Op::EntropyOfLogits(logits) => {
                let lv = &self.nodes[*logits].value;
                let (b, c) = (lv.shape[0], lv.shape[1]);
                let g = gout.data[0];
                let lshape = lv.shape.clone();
                map.accumulate(*logits, &lshape, |gl| {
                    let mut p = vec![T::ZERO; c];
                    for i in 0..b {
                        let row = &lv.data[i * c..(i + 1) * c];
                        softmax_row(row, &mut p);
                        let mut h = T::ZERO;
                        let mut logp = vec![T::ZERO; c];
                        for j in 0..c {
                            logp[j] = log_softmax_at(row, j);
                            h += -p[j] * logp[j];
                        }
                        for j in 0..c {
                            // dH/dz_j = -p_j (log p_j + H)
                            gl[i * c + j] += g * (-p[j] * (logp[j] + h));
                        }
                    }
                });
            }
            Op::CosineSimSq(u, v) => {
                let uv = &self.nodes[*u].value;
                let vv = &self.nodes[*v].value;
                let g = gout.data[0];
                let n = uv.len();
                let mut s = T::ZERO;
                let mut a = T::ZERO;
                let mut bb = T::ZERO;
                for i in 0..n {
                    s += uv.data[i] * vv.data[i];
                    a += uv.data[i] * uv.data[i];
                    bb += vv.data[i] * vv.data[i];
                }
                let eps2 = T::from_f64(COS_EPS * COS_EPS);
                if a.to_f64() < COS_EPS * COS_EPS || bb.to_f64() < COS_EPS * COS_EPS {
                    // eps-guarded zero output; treat as locally constant
                    let _ = eps2;
                    return;
                }
                let ab = a * bb;
                let two = T::from_f64(2.0);
                if self.rg(*u) {
                    let ushape = uv.shape.clone();
                    map.accumulate(*u, &ushape, |gu| {
                        let k = two * s / ab;
                        for i in 0..n {
                            gu[i] += g * k * (vv.data[i] - s / a * uv.data[i]);
                        }
                    });
                }
                if self.rg(*v) {
                    let vshape = vv.shape.clone();
                    map.accumulate(*v, &vshape, |gv| {
                        let k = two * s / ab;
                        for i in 0..n {
                            gv[i] += g * k * (uv.data[i] - s / bb * vv.data[i]);
                        }
                    });
                }
            }
            Op::Conv2d {
                input,
                weight,
                bias,
                meta,
            } => {
                let iv = &self.nodes[*input].value;
                let wv = &self.nodes[*weight].value;
                let batch = iv.shape[0];
                if self.rg(*input) {
                    let ishape = iv.shape.clone();
                    map.accumulate(*input, &ishape, |gi| {
                        conv2d_backward_input(gi, &gout.data, &wv.data, batch, meta);
                    });
                }
                if self.rg(*weight) {
                    let wshape = wv.shape.clone();
                    map.accumulate(*weight, &wshape, |gw| {
                        conv2d_backward_weight(gw, &gout.data, &iv.data, batch, meta);
                    });
                }
                if self.rg(*bias) {
                    let bshape = self.nodes[*bias].value.shape.clone();
                    let (oc, ohw) = (meta.out_ch, meta.out_h * meta.out_w);
                    map.accumulate(*bias, &bshape, |gb| {
                        for b in 0..batch {
                            for c in 0..oc {
                                let base = (b * oc + c) * ohw;
                                let mut acc = T::ZERO;
                                for i in 0..ohw {
                                    acc += gout.data[base + i];
                                }
                                gb[c] += acc;
                            }
                        }
                    });
                }
            }
            Op::GlobalMaxPool { input, argmax } => {
                let shape = self.nodes[*input].value.shape.clone();
                map.accumulate(*input, &shape, |gi| {
                    for (bc, &flat) in argmax.iter().enumerate() {
                        gi[flat] += gout.data[bc];
                    }
                });
            }
        }
    }
}

fn softmax_row<T: Scalar>(row: &[T], out: &mut [T]) {
    let mut mx = row[0];
    for &e in row.iter().skip(1) {
        mx = mx.maxv(e);
    }
    let mut sum = T::ZERO;
    for (o, &e) in out.iter_mut().zip(row.iter()) {
        let v = (e - mx).exp();
        *o = v;
        sum += v;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Stable `log softmax(row)[j]`, computed directly (not log of softmax).
fn log_softmax_at<T: Scalar>(row: &[T], j: usize) -> T {
    let mut mx = row[0];
    for &e in row.iter().skip(1) {
        mx = mx.maxv(e);
    }
    let mut sum = T::ZERO;
    for &e in row {
        sum += (e - mx).exp();
    }
    row[j] - mx - sum.ln()
}

fn entropy_row<T: Scalar>(row: &[T]) -> T {
    let mut h = T::ZERO;
    for j in 0..row.len() {
        let lp = log_softmax_at(row, j);
        h += -(lp.exp()) * lp;
    }
    h
}

fn cos_sq_value<T: Scalar>(u: &[T], v: &[T]) -> T {
    let mut s = T::ZERO;
    let mut a = T::ZERO;
    let mut b = T::ZERO;
    for i in 0..u.len() {
        s += u[i] * v[i];
        a += u[i] * u[i];
        b += v[i] * v[i];
    }
    let na = a.sqrt().to_f64().max(COS_EPS);
    let nb = b.sqrt().to_f64().max(COS_EPS);
    let c = s.to_f64() / (na * nb);
    T::from_f64(c * c)
}

fn check_conv_shapes<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    meta: &Conv2dMeta,
) -> Result<usize> {
    if input.shape.len() != 4
        || input.shape[1] != meta.in_ch
        || input.shape[2] != meta.h
        || input.shape[3] != meta.w
    {
        return Err(ScnError::ShapeMismatch(format!(
            "conv2d input {:?} vs meta {:?}",
            input.shape, meta
        )));
    }
    if weight.len() != meta.out_ch * meta.in_ch * meta.kh * meta.kw || bias.len() != meta.out_ch {
        return Err(ScnError::ShapeMismatch(format!(
            "conv2d weight {} / bias {} vs meta {:?}",
            weight.len(),
            bias.len(),
            meta
        )));
    }
    Ok(input.shape[0])
}

/// Source row/col for an output position and kernel tap, or None if the tap
/// falls in zero padding.
#[inline]
fn src_index(o: usize, k: usize, stride: usize, pad_before: usize, extent: usize, circular: bool) -> Option<usize> {
    let raw = (o * stride + k) as isize - pad_before as isize;
    if raw >= 0 && (raw as usize) < extent {
        Some(raw as usize)
    } else if circular {
        Some(raw.rem_euclid(extent as isize) as usize)
    } else {
        None
    }
}

/// Branch-free decomposition of one kernel tap along one axis: output
/// ranges whose source index is an affine `o*stride + shift`. At most
/// three segments (wrapped-left, interior, wrapped-right); padding never
/// exceeds the extent, so a single wrap suffices.
/// Each segment is (out_lo, out_hi, src_shift) with src = o*stride + shift.
#[inline]
fn tap_segments(
    k: usize,
    stride: usize,
    pad_before: usize,
    extent: usize,
    out_extent: usize,
    circular: bool,
) -> [(usize, usize, isize); 3] {
    let shift = k as isize - pad_before as isize;
    // interior: 0 <= o*stride + shift < extent
    let lo = if shift >= 0 { 0 } else { ((-shift) as usize + stride - 1) / stride };
    let hi_raw = extent as isize - 1 - shift;
    let hi = if hi_raw < 0 { 0 } else { ((hi_raw as usize) / stride + 1).min(out_extent) };
    let lo = lo.min(hi);
    if circular {
        [
            (0, lo, shift + extent as isize),
            (lo, hi, shift),
            (hi, out_extent, shift - extent as isize),
        ]
    } else {
        [(lo, hi, shift), (0, 0, 0), (0, 0, 0)]
    }
}

fn conv2d_forward<T: Scalar>(
    input: &[T],
    weight: &[T],
    bias: &[T],
    batch: usize,
    meta: &Conv2dMeta,
) -> Vec<T> {
    let (t, l, _, _) = meta.pad.amounts();
    let circ = meta.pad.circular();
    let (ic, oc, h, w) = (meta.in_ch, meta.out_ch, meta.h, meta.w);
    let (oh, ow, kh, kw, s) = (meta.out_h, meta.out_w, meta.kh, meta.kw, meta.stride);
    let mut out = vec![T::ZERO; batch * oc * oh * ow];
    for b in 0..batch {
        for co in 0..oc {
            let obase = (b * oc + co) * oh * ow;
            for i in 0..oh * ow {
                out[obase + i] = bias[co];
            }
            for ci in 0..ic {
                let ibase = (b * ic + ci) * h * w;
                let wbase = (co * ic + ci) * kh * kw;
                for oy in 0..oh {
                    for ky in 0..kh {
                        let Some(iy) = src_index(oy, ky, s, t, h, circ) else {
                            continue;
                        };
                        let irow = ibase + iy * w;
                        let orow = obase + oy * ow;
                        for kx in 0..kw {
                            let wv = weight[wbase + ky * kw + kx];
                            for (lo, hi, shift) in tap_segments(kx, s, l, w, ow, circ) {
                                if lo >= hi {
                                    continue;
                                }
                                if s == 1 {
                                    let src0 = irow + (lo as isize + shift) as usize;
                                    let src = &input[src0..src0 + hi - lo];
                                    let dst = &mut out[orow + lo..orow + hi];
                                    for (d, &x) in dst.iter_mut().zip(src) {
                                        *d += wv * x;
                                    }
                                } else {
                                    for ox in lo..hi {
                                        let ix = (ox * s) as isize + shift;
                                        out[orow + ox] += wv * input[irow + ix as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv2d_backward_input<T: Scalar>(
    ginput: &mut [T],
    gout: &[T],
    weight: &[T],
    batch: usize,
    meta: &Conv2dMeta,
) {
    let (t, l, _, _) = meta.pad.amounts();
    let circ = meta.pad.circular();
    let (ic, oc, h, w) = (meta.in_ch, meta.out_ch, meta.h, meta.w);
    let (oh, ow, kh, kw, s) = (meta.out_h, meta.out_w, meta.kh, meta.kw, meta.stride);
    for b in 0..batch {
        for co in 0..oc {
            let obase = (b * oc + co) * oh * ow;
            for ci in 0..ic {
                let ibase = (b * ic + ci) * h * w;
                let wbase = (co * ic + ci) * kh * kw;
                for oy in 0..oh {
                    for ky in 0..kh {
                        let Some(iy) = src_index(oy, ky, s, t, h, circ) else {
                            continue;
                        };
                        let irow = ibase + iy * w;
                        let orow = obase + oy * ow;
                        for kx in 0..kw {
                            let wv = weight[wbase + ky * kw + kx];
                            for (lo, hi, shift) in tap_segments(kx, s, l, w, ow, circ) {
                                if lo >= hi {
                                    continue;
                                }
                                if s == 1 {
                                    let src0 = irow + (lo as isize + shift) as usize;
                                    let dst = &mut ginput[src0..src0 + hi - lo];
                                    let src = &gout[orow + lo..orow + hi];
                                    for (d, &g) in dst.iter_mut().zip(src) {
                                        *d += wv * g;
                                    }
                                } else {
                                    for ox in lo..hi {
                                        let ix = (ox * s) as isize + shift;
                                        ginput[irow + ix as usize] += wv * gout[orow + ox];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn conv2d_backward_weight<T: Scalar>(
    gweight: &mut [T],
    gout: &[T],
    input: &[T],
    batch: usize,
    meta: &Conv2dMeta,
) {
    let (t, l, _, _) = meta.pad.amounts();
    let circ = meta.pad.circular();
    let (ic, oc, h, w) = (meta.in_ch, meta.out_ch, meta.h, meta.w);
    let (oh, ow, kh, kw, s) = (meta.out_h, meta.out_w, meta.kh, meta.kw, meta.stride);
    for b in 0..batch {
        for co in 0..oc {
            let obase = (b * oc + co) * oh * ow;
            for ci in 0..ic {
                let ibase = (b * ic + ci) * h * w;
                let wbase = (co * ic + ci) * kh * kw;
                for oy in 0..oh {
                    for ky in 0..kh {
                        let Some(iy) = src_index(oy, ky, s, t, h, circ) else {
                            continue;
                        };
                        let irow = ibase + iy * w;
                        let orow = obase + oy * ow;
                        for kx in 0..kw {
                            let mut acc = T::ZERO;
                            for (lo, hi, shift) in tap_segments(kx, s, l, w, ow, circ) {
                                if lo >= hi {
                                    continue;
                                }
                                if s == 1 {
                                    let src0 = irow + (lo as isize + shift) as usize;
                                    let a = &input[src0..src0 + hi - lo];
                                    let g = &gout[orow + lo..orow + hi];
                                    for (&x, &gv) in a.iter().zip(g) {
                                        acc += x * gv;
                                    }
                                } else {
                                    for ox in lo..hi {
                                        let ix = (ox * s) as isize + shift;
                                        acc += input[irow + ix as usize] * gout[orow + ox];
                                    }
                                }
                            }
                            gweight[wbase + ky * kw + kx] += acc;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t2(rows: usize, cols: usize, data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(vec![rows, cols], data).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let i2 = tape.leaf(t2(2, 2, vec![1.0, 0.0, 0.0, 1.0]), false);
        let m = tape.leaf(t2(2, 2, vec![1.0, 2.0, 3.0, 4.0]), false);
        let out = tape.matmul(i2, m).unwrap();
        assert_eq!(tape.value(out).data, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_projector() {
        let mut tape = Tape::new();
        let p = tape.leaf(t2(2, 2, vec![1.0, 0.0, 0.0, 0.0]), false);
        let m = tape.leaf(t2(2, 2, vec![5.0, 6.0, 7.0, 8.0]), false);
        let out = tape.matmul(p, m).unwrap();
        assert_eq!(tape.value(out).data, vec![5.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = crate::rng::SeedRng::new(11);
        let a: Vec<f64> = (0..12).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.uniform(-2.0, 2.0)).collect();
        // independent naive triple loop
        let mut expect = vec![0.0f64; 3 * 2];
        for i in 0..3 {
            for j in 0..2 {
                for k in 0..4 {
                    expect[i * 2 + j] += a[i * 4 + k] * b[k * 2 + j];
                }
            }
        }
        let mut tape = Tape::new();
        let an = tape.leaf(t2(3, 4, a), false);
        let bn = tape.leaf(t2(4, 2, b), false);
        let out = tape.matmul(an, bn).unwrap();
        for (got, want) in tape.value(out).data.iter().zip(expect.iter()) {
            assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0));
        }
    }

    #[test]
    fn matmul_shape_error() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(t2(2, 3, vec![0.0; 6]), false);
        let b = tape.leaf(t2(2, 2, vec![0.0; 4]), false);
        assert!(matches!(tape.matmul(a, b), Err(ScnError::ShapeMismatch(_))));
    }

    #[test]
    fn relu_and_bias_and_mean() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![-1.0, 0.0, 2.0]), false);
        let r = tape.relu(x);
        assert_eq!(tape.value(r).data, vec![0.0, 0.0, 2.0]);

        let zeros = tape.leaf(t2(3, 2, vec![0.0; 6]), false);
        let b = tape.leaf(Tensor::from_vec(vec![0.5, -0.5]), false);
        let ab = tape.add_bias(zeros, b).unwrap();
        assert_eq!(tape.value(ab).data, vec![0.5, -0.5, 0.5, -0.5, 0.5, -0.5]);

        let m = tape.leaf(Tensor::from_vec(vec![1.0, 2.0, 3.0, 6.0]), false);
        let mn = tape.mean(m);
        assert_eq!(tape.value(mn).scalar_value(), 3.0);
    }

    #[test]
    fn softmax_uniform_and_stabilized() {
        let mut tape = Tape::new();
        let z = tape.leaf(t2(1, 4, vec![0.0; 4]), false);
        let s = tape.softmax(z).unwrap();
        for &p in &tape.value(s).data {
            assert!((p - 0.25f64).abs() < 1e-12);
        }
        let big = tape.leaf(t2(1, 2, vec![1000.0, 0.0]), false);
        let s2 = tape.softmax(big).unwrap();
        let out = &tape.value(s2).data;
        assert!(out[0].is_finite() && out[1].is_finite());
        assert!((out[0] - 1.0).abs() < 1e-12 && out[1].abs() < 1e-12);
    }

    #[test]
    fn softmax_matches_naive_oracle() {
        let mut rng = crate::rng::SeedRng::new(5);
        let row: Vec<f64> = (0..7).map(|_| rng.uniform(-2.0, 2.0)).collect();
        // naive 64-bit exp/sum oracle
        let sum: f64 = row.iter().map(|&e| e.exp()).sum();
        let expect: Vec<f64> = row.iter().map(|&e| e.exp() / sum).collect();
        let mut tape = Tape::new();
        let z = tape.leaf(t2(1, 7, row), false);
        let s = tape.softmax(z).unwrap();
        for (got, want) in tape.value(s).data.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_entropy_cases() {
        let mut tape = Tape::new();
        let z = tape.leaf(t2(1, 10, vec![0.0; 10]), false);
        let ce = tape.cross_entropy(z, &[3]).unwrap();
        assert!((tape.value(ce).scalar_value() - (10.0f64).ln()).abs() < 1e-9);

        let mut hot = vec![0.0; 10];
        hot[2] = 30.0;
        let z2 = tape.leaf(t2(1, 10, hot), false);
        let ce2 = tape.cross_entropy(z2, &[2]).unwrap();
        assert!(tape.value(ce2).scalar_value() < 1e-9);
        assert!(tape.value(ce2).scalar_value() >= 0.0);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let mut tape = Tape::new();
        let z = tape.leaf(t2(1, 3, vec![0.0; 3]), false);
        assert!(matches!(
            tape.cross_entropy(z, &[3]),
            Err(ScnError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn cross_entropy_matches_direct_formula_oracle() {
        let mut rng = crate::rng::SeedRng::new(17);
        let b = 5;
        let c = 6;
        let z: Vec<f64> = (0..b * c).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let labels: Vec<usize> = (0..b).map(|_| rng.below(c)).collect();
        let mut expect = 0.0f64;
        for i in 0..b {
            let row = &z[i * c..(i + 1) * c];
            let sum: f64 = row.iter().map(|&e| e.exp()).sum();
            expect += -(row[labels[i]].exp() / sum).ln();
        }
        expect /= b as f64;
        let mut tape = Tape::new();
        let zn = tape.leaf(t2(b, c, z), false);
        let ce = tape.cross_entropy(zn, &labels).unwrap();
        let got = tape.value(ce).scalar_value();
        assert!((got - expect).abs() <= 1e-6 * expect.abs().max(1.0));
    }

    #[test]
    fn entropy_cases() {
        let mut tape = Tape::new();
        let z = tape.leaf(t2(1, 10, vec![0.0; 10]), false);
        let h = tape.entropy_of_logits(z).unwrap();
        assert!((tape.value(h).scalar_value() - (10.0f64).ln()).abs() < 1e-9);

        let mut hot = vec![0.0; 10];
        hot[0] = 40.0;
        let z2 = tape.leaf(t2(1, 10, hot), false);
        let h2 = tape.entropy_of_logits(z2).unwrap();
        assert!(tape.value(h2).scalar_value().abs() < 1e-9);
    }

    #[test]
    fn entropy_matches_direct_formula_oracle() {
        let mut rng = crate::rng::SeedRng::new(23);
        let (b, c) = (4, 5);
        let z: Vec<f64> = (0..b * c).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let mut expect = 0.0f64;
        for i in 0..b {
            let row = &z[i * c..(i + 1) * c];
            let sum: f64 = row.iter().map(|&e| e.exp()).sum();
            for &e in row {
                let p = e.exp() / sum;
                expect += p * (-p.ln());
            }
        }
        let mut tape = Tape::new();
        let zn = tape.leaf(t2(b, c, z), false);
        let h = tape.entropy_of_logits(zn).unwrap();
        assert!((tape.value(h).scalar_value() - expect).abs() < 1e-6);
    }

    #[test]
    fn cosine_sim_sq_cases() {
        let mut tape = Tape::new();
        let u = tape.leaf(Tensor::from_vec(vec![1.0, 2.0, -1.0]), false);
        let c = tape.cosine_sim_sq(u, u).unwrap();
        assert!((tape.value(c).scalar_value() - 1.0).abs() < 1e-12);

        let a = tape.leaf(Tensor::from_vec(vec![1.0, 0.0]), false);
        let b = tape.leaf(Tensor::from_vec(vec![0.0, 1.0]), false);
        let c2 = tape.cosine_sim_sq(a, b).unwrap();
        assert!(tape.value(c2).scalar_value().abs() < 1e-12);

        let d = tape.leaf(Tensor::from_vec(vec![1.0, 1.0]), false);
        let c3 = tape.cosine_sim_sq(a, d).unwrap();
        assert!((tape.value(c3).scalar_value() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_sim_sq_zero_input() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::from_vec(vec![0.0, 0.0]), true);
        let c = tape.cosine_sim_sq(z, z).unwrap();
        assert_eq!(tape.value(c).scalar_value(), 0.0);
        let g = tape.backward(c).unwrap();
        assert_eq!(g.get(z).unwrap().data, vec![0.0, 0.0]);
    }

    #[test]
    fn backward_square_and_unused_leaf() {
        // loss = x^2 via matmul of 1x1s; x = 3 -> grad 6
        let mut tape = Tape::new();
        let x = tape.leaf(t2(1, 1, vec![3.0]), true);
        let unused = tape.leaf(t2(1, 1, vec![9.0]), true);
        let sq = tape.matmul(x, x).unwrap();
        let loss = tape.mean(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data, vec![6.0]);
        assert_eq!(g.get(unused).unwrap().data, vec![0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(t2(1, 2, vec![1.0, 2.0]), true);
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn backward_is_linear() {
        // grads of a*L1 + b*L2 equal a*grad(L1) + b*grad(L2)
        let mut rng = crate::rng::SeedRng::new(4);
        let xs: Vec<f64> = (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let grad_of = |a: f64, b: f64, xs: &[f64]| -> Vec<f64> {
            let mut tape = Tape::new();
            let x = tape.leaf(t2(2, 3, xs.to_vec()), true);
            let r = tape.relu(x);
            let l1 = tape.mean(r);
            let sm = tape.softmax(x).unwrap();
            let l2 = tape.mean(sm);
            let l1s = tape.scale(l1, a);
            let l2s = tape.scale(l2, b);
            let loss = tape.add(l1s, l2s).unwrap();
            let g = tape.backward(loss).unwrap();
            g.get(x).unwrap().data.clone()
        };
        let g1 = grad_of(1.0, 0.0, &xs);
        let g2 = grad_of(0.0, 1.0, &xs);
        let gc = grad_of(0.7, -1.3, &xs);
        for i in 0..xs.len() {
            assert!((gc[i] - (0.7 * g1[i] - 1.3 * g2[i])).abs() < 1e-6);
        }
    }

    #[test]
    fn global_max_pool_routes_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(
            Tensor::new(vec![1, 1, 2, 2], vec![1.0, 5.0, 3.0, 2.0]).unwrap(),
            true,
        );
        let p = tape.global_max_pool(x).unwrap();
        assert_eq!(tape.value(p).data, vec![5.0]);
        let m = tape.mean(p);
        let g = tape.backward(m).unwrap();
        assert_eq!(g.get(x).unwrap().data, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn determinism_same_inputs_same_grads() {
        let run = || {
            let mut tape = Tape::<f32>::new();
            let x = tape.leaf(t2(2, 3, vec![0.3, -0.1, 0.7, 0.2, 0.9, -0.5]).cast(), true);
            let w = tape.leaf(t2(3, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6]).cast(), true);
            let y = tape.matmul(x, w).unwrap();
            let r = tape.relu(y);
            let loss = tape.mean(r);
            let g = tape.backward(loss).unwrap();
            (
                tape.value(loss).scalar_value().to_bits(),
                g.get(w)
                    .unwrap()
                    .data
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }
}
