//! Inference network architectures: flat parameter layout, init, counting,
//! and tape forward evaluation.
//!
//! Every architecture is described by an [`ArchSpec`] and realized as a flat
//! weight vector of length `param_count(arch)`. The layout maps contiguous
//! slices of that vector onto layer weights/biases, so base models and
//! composed models share one representation.

use crate::autodiff::{Conv2dMeta, NodeId, Padding, Tape};
use crate::error::{Result, ScnError};
use crate::rng::SeedRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    Mlp,
    ShallowCnn,
    /// Translation-invariant CNN: circular-padded convs + global max pool.
    TiCnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchSpec {
    pub kind: ArchKind,
    /// Hidden units (MLP) or channels (CNNs).
    pub width: usize,
    /// Hidden layers.
    pub depth: usize,
    /// Input side length and channel count.
    pub input: (usize, usize),
    pub classes: usize,
}

impl ArchSpec {
    pub fn mlp(width: usize, depth: usize, input: (usize, usize), classes: usize) -> Self {
        ArchSpec {
            kind: ArchKind::Mlp,
            width,
            depth,
            input,
            classes,
        }
    }

    pub fn shallow_cnn(width: usize, depth: usize, classes: usize) -> Self {
        ArchSpec {
            kind: ArchKind::ShallowCnn,
            width,
            depth,
            input: (32, 3),
            classes,
        }
    }

    pub fn ti_cnn(input: (usize, usize), classes: usize) -> Self {
        ArchSpec {
            kind: ArchKind::TiCnn,
            width: 16,
            depth: 2,
            input,
            classes,
        }
    }

    pub fn input_len(&self) -> usize {
        let (p, c) = self.input;
        p * p * c
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.depth < 1 || self.classes < 1 {
            return Err(ScnError::Invalid(format!("degenerate arch {self:?}")));
        }
        if self.kind == ArchKind::ShallowCnn && self.input != (32, 3) {
            return Err(ScnError::Unsupported(
                "ShallowCNN is defined for 32x32x3 input".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
}

/// One (layer, role) slice of the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutEntry {
    pub layer: usize,
    pub role: ParamRole,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Structural plan of one layer, with offsets into the flat vector.
#[derive(Debug, Clone)]
pub enum LayerPlan {
    Dense {
        in_dim: usize,
        out_dim: usize,
        w_off: usize,
        b_off: usize,
    },
    Conv {
        meta: Conv2dMeta,
        w_off: usize,
        b_off: usize,
    },
    GlobalMaxPool,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub entries: Vec<LayoutEntry>,
    pub layers: Vec<LayerPlan>,
    pub total: usize,
}

/// Flat weight vector plus the layout it follows.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatParams<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> FlatParams<T> {
    pub fn zeros(len: usize) -> Self {
        FlatParams {
            values: vec![T::ZERO; len],
        }
    }
}

pub fn layout(arch: &ArchSpec) -> Result<Layout> {
    arch.validate()?;
    let mut entries = Vec::new();
    let mut layers = Vec::new();
    let mut off = 0usize;
    let mut layer_no = 0usize;

    let push_dense = |entries: &mut Vec<LayoutEntry>,
                          layers: &mut Vec<LayerPlan>,
                          off: &mut usize,
                          layer_no: &mut usize,
                          in_dim: usize,
                          out_dim: usize| {
        let w_off = *off;
        entries.push(LayoutEntry {
            layer: *layer_no,
            role: ParamRole::Weight,
            offset: w_off,
            shape: vec![in_dim, out_dim],
        });
        *off += in_dim * out_dim;
        let b_off = *off;
        entries.push(LayoutEntry {
            layer: *layer_no,
            role: ParamRole::Bias,
            offset: b_off,
            shape: vec![out_dim],
        });
        *off += out_dim;
        layers.push(LayerPlan::Dense {
            in_dim,
            out_dim,
            w_off,
            b_off,
        });
        *layer_no += 1;
    };

    let push_conv = |entries: &mut Vec<LayoutEntry>,
                         layers: &mut Vec<LayerPlan>,
                         off: &mut usize,
                         layer_no: &mut usize,
                         meta: Conv2dMeta| {
        let w_off = *off;
        entries.push(LayoutEntry {
            layer: *layer_no,
            role: ParamRole::Weight,
            offset: w_off,
            shape: vec![meta.out_ch, meta.in_ch, meta.kh, meta.kw],
        });
        *off += meta.out_ch * meta.in_ch * meta.kh * meta.kw;
        let b_off = *off;
        entries.push(LayoutEntry {
            layer: *layer_no,
            role: ParamRole::Bias,
            offset: b_off,
            shape: vec![meta.out_ch],
        });
        *off += meta.out_ch;
        layers.push(LayerPlan::Conv { meta, w_off, b_off });
        *layer_no += 1;
    };

    match arch.kind {
        ArchKind::Mlp => {
            let mut in_dim = arch.input_len();
            for _ in 0..arch.depth {
                push_dense(&mut entries, &mut layers, &mut off, &mut layer_no, in_dim, arch.width);
                in_dim = arch.width;
            }
            push_dense(&mut entries, &mut layers, &mut off, &mut layer_no, in_dim, arch.classes);
        }
        ArchKind::ShallowCnn => {
            let (p, c) = arch.input;
            let w = arch.width;
            // 9x9 stride-2 first conv, padded to land on a 13x13 map
            let pad = Padding::Zero {
                top: 1,
                left: 1,
                bottom: 0,
                right: 0,
            };
            let (oh, ow) = Conv2dMeta::output_dims(p, p, 9, 9, 2, pad);
            debug_assert_eq!((oh, ow), (13, 13));
            push_conv(
                &mut entries,
                &mut layers,
                &mut off,
                &mut layer_no,
                Conv2dMeta {
                    in_ch: c,
                    out_ch: w,
                    h: p,
                    w: p,
                    kh: 9,
                    kw: 9,
                    stride: 2,
                    pad,
                    out_h: oh,
                    out_w: ow,
                },
            );
            // hidden 13x13 same-padded convs keep the 13x13 map
            for _ in 1..arch.depth {
                let pad = Padding::Zero {
                    top: 6,
                    left: 6,
                    bottom: 6,
                    right: 6,
                };
                push_conv(
                    &mut entries,
                    &mut layers,
                    &mut off,
                    &mut layer_no,
                    Conv2dMeta {
                        in_ch: w,
                        out_ch: w,
                        h: 13,
                        w: 13,
                        kh: 13,
                        kw: 13,
                        stride: 1,
                        pad,
                        out_h: 13,
                        out_w: 13,
                    },
                );
            }
            layers.push(LayerPlan::GlobalMaxPool);
            push_dense(&mut entries, &mut layers, &mut off, &mut layer_no, w, arch.classes);
        }
        ArchKind::TiCnn => {
            let (p, c) = arch.input;
            let ch = arch.width;
            // kernel 4 with stride 1: total circular pad of 3 keeps the map size
            let pad = Padding::Circular {
                top: 1,
                left: 1,
                bottom: 2,
                right: 2,
            };
            let mut in_ch = c;
            for _ in 0..arch.depth {
                push_conv(
                    &mut entries,
                    &mut layers,
                    &mut off,
                    &mut layer_no,
                    Conv2dMeta {
                        in_ch,
                        out_ch: ch,
                        h: p,
                        w: p,
                        kh: 4,
                        kw: 4,
                        stride: 1,
                        pad,
                        out_h: p,
                        out_w: p,
                    },
                );
                in_ch = ch;
            }
            layers.push(LayerPlan::GlobalMaxPool);
            push_dense(&mut entries, &mut layers, &mut off, &mut layer_no, ch, arch.classes);
        }
    }

    Ok(Layout {
        entries,
        layers,
        total: off,
    })
}

/// Exact trainable-parameter count, tallied layer by layer from the layout.
pub fn param_count(arch: &ArchSpec) -> Result<usize> {
    Ok(layout(arch)?.total)
}

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) per layer, weights and biases.
pub fn init_params<T: Scalar>(arch: &ArchSpec, seed: u64) -> Result<FlatParams<T>> {
    let lay = layout(arch)?;
    let mut rng = SeedRng::new(seed);
    let mut values = vec![T::ZERO; lay.total];
    for plan in &lay.layers {
        let (fan_in, w_off, w_len, b_off, b_len) = match plan {
            LayerPlan::Dense {
                in_dim,
                out_dim,
                w_off,
                b_off,
            } => (*in_dim, *w_off, in_dim * out_dim, *b_off, *out_dim),
            LayerPlan::Conv { meta, w_off, b_off } => (
                meta.in_ch * meta.kh * meta.kw,
                *w_off,
                meta.out_ch * meta.in_ch * meta.kh * meta.kw,
                *b_off,
                meta.out_ch,
            ),
            LayerPlan::GlobalMaxPool => continue,
        };
        let bound = libm::sqrt(1.0 / fan_in as f64);
        for v in values[w_off..w_off + w_len].iter_mut() {
            *v = T::from_f64(rng.uniform(-bound, bound));
        }
        for v in values[b_off..b_off + b_len].iter_mut() {
            *v = T::from_f64(rng.uniform(-bound, bound));
        }
    }
    Ok(FlatParams { values })
}

/// Forward pass on the tape. `theta` is a `[L]` node, `batch` a
/// `[b, C, P, P]` node. Returns `[b, classes]` logits; gradients flow into
/// `theta` when it requires grad.
pub fn forward<T: Scalar>(
    tape: &mut Tape<T>,
    arch: &ArchSpec,
    theta: NodeId,
    batch: NodeId,
) -> Result<NodeId> {
    let lay = layout(arch)?;
    let tlen = tape.value(theta).len();
    if tlen != lay.total {
        return Err(ScnError::ShapeMismatch(format!(
            "theta length {} != param_count {}",
            tlen, lay.total
        )));
    }
    let bshape = tape.value(batch).shape.clone();
    if bshape.len() != 4 || bshape[1] != arch.input.1 || bshape[2] != arch.input.0 || bshape[3] != arch.input.0
    {
        return Err(ScnError::ShapeMismatch(format!(
            "batch shape {:?} does not match arch input {:?}",
            bshape, arch.input
        )));
    }
    let b = bshape[0];

    let mut cur = batch;
    let mut flattened = false;
    let last_layer = lay.layers.len() - 1;
    for (idx, plan) in lay.layers.iter().enumerate() {
        match plan {
            LayerPlan::Dense {
                in_dim,
                out_dim,
                w_off,
                b_off,
            } => {
                if !flattened {
                    cur = tape.reshape(cur, vec![b, arch.input_len()])?;
                    flattened = true;
                }
                let w = tape.slice(theta, *w_off, vec![*in_dim, *out_dim])?;
                let bias = tape.slice(theta, *b_off, vec![*out_dim])?;
                let z = tape.matmul(cur, w)?;
                cur = tape.add_bias(z, bias)?;
                if idx != last_layer {
                    cur = tape.relu(cur);
                }
            }
            LayerPlan::Conv { meta, w_off, b_off } => {
                let w = tape.slice(
                    theta,
                    *w_off,
                    vec![meta.out_ch, meta.in_ch, meta.kh, meta.kw],
                )?;
                let bias = tape.slice(theta, *b_off, vec![meta.out_ch])?;
                let z = tape.conv2d(cur, w, bias, *meta)?;
                cur = if idx != last_layer { tape.relu(z) } else { z };
            }
            LayerPlan::GlobalMaxPool => {
                let pooled = tape.global_max_pool(cur)?;
                let c = tape.value(pooled).shape[1];
                cur = tape.reshape(pooled, vec![b, c])?;
                flattened = true;
            }
        }
    }
    Ok(cur)
}

/// Plain (non-recording) forward for evaluation loops.
pub fn forward_infer<T: Scalar>(
    arch: &ArchSpec,
    theta: &[T],
    batch: Tensor<T>,
) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let th = tape.leaf(Tensor::from_vec(theta.to_vec()), false);
    let bn = tape.leaf(batch, false);
    let logits = forward(&mut tape, arch, th, bn)?;
    Ok(tape.value(logits).clone())
}
