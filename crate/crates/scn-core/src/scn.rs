//! The SCN proper: configuration network, parameter bank, linear weight
//! composition, and the end-to-end forward pass.

use crate::autodiff::{NodeId, Tape};
use crate::error::{Result, ScnError};
use crate::netspec::{self, ArchSpec};
use crate::rng::{SeedRng, Stream};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::transforms::{encode_alpha, AlphaParam, TransformFamily};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub const CONFIG_HIDDEN: usize = 64;

/// dense(S' -> 64) + ReLU + dense(64 -> D) + softmax, stored flat as
/// [W1 | b1 | W2 | b2].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigNet<T> {
    pub input: usize,
    pub dims: usize,
    pub params: Vec<T>,
}

pub fn config_param_count(s_prime: usize, dims: usize) -> usize {
    CONFIG_HIDDEN * (s_prime + 1) + (CONFIG_HIDDEN + 1) * dims
}

impl<T: Scalar> ConfigNet<T> {
    pub fn init(s_prime: usize, dims: usize, seed: u64) -> Self {
        let mut rng = SeedRng::stream(seed, Stream::ConfigInit);
        let mut params = Vec::with_capacity(config_param_count(s_prime, dims));
        let b1 = libm::sqrt(1.0 / s_prime as f64);
        for _ in 0..CONFIG_HIDDEN * s_prime + CONFIG_HIDDEN {
            params.push(T::from_f64(rng.uniform(-b1, b1)));
        }
        let b2 = libm::sqrt(1.0 / CONFIG_HIDDEN as f64);
        for _ in 0..CONFIG_HIDDEN * dims + dims {
            params.push(T::from_f64(rng.uniform(-b2, b2)));
        }
        ConfigNet {
            input: s_prime,
            dims,
            params,
        }
    }

    pub fn param_count(&self) -> usize {
        config_param_count(self.input, self.dims)
    }
}

/// Tape forward of the configuration net. `params` is the flat leaf,
/// `enc` a `[1, S']` node; returns β as `[1, D]` on the simplex.
pub fn config_forward_tape<T: Scalar>(
    tape: &mut Tape<T>,
    input: usize,
    dims: usize,
    params: NodeId,
    enc: NodeId,
) -> Result<NodeId> {
    let got = tape.value(params).len();
    if got != config_param_count(input, dims) {
        return Err(ScnError::ShapeMismatch(format!(
            "confignet params {} != expected {}",
            got,
            config_param_count(input, dims)
        )));
    }
    if tape.value(enc).shape != vec![1, input] {
        return Err(ScnError::ShapeMismatch(format!(
            "encoding shape {:?}, expected [1, {input}]",
            tape.value(enc).shape
        )));
    }
    let mut off = 0;
    let w1 = tape.slice(params, off, vec![input, CONFIG_HIDDEN])?;
    off += input * CONFIG_HIDDEN;
    let b1 = tape.slice(params, off, vec![CONFIG_HIDDEN])?;
    off += CONFIG_HIDDEN;
    let w2 = tape.slice(params, off, vec![CONFIG_HIDDEN, dims])?;
    off += CONFIG_HIDDEN * dims;
    let b2 = tape.slice(params, off, vec![dims])?;

    let z1 = tape.matmul(enc, w1)?;
    let z1 = tape.add_bias(z1, b1)?;
    let h = tape.relu(z1);
    let z2 = tape.matmul(h, w2)?;
    let z2 = tape.add_bias(z2, b2)?;
    tape.softmax(z2)
}

/// β = h(enc) without recording a tape.
pub fn config_forward<T: Scalar>(net: &ConfigNet<T>, enc: &[T]) -> Result<Vec<T>> {
    let mut tape = Tape::new();
    let params = tape.leaf(Tensor::from_vec(net.params.clone()), false);
    let e = tape.leaf(Tensor::new(vec![1, enc.len()], enc.to_vec())?, false);
    let beta = config_forward_tape(&mut tape, net.input, net.dims, params, e)?;
    Ok(tape.value(beta).data.clone())
}

/// D flat base-model weight vectors of length L, stored row-major `[D, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBank<T> {
    pub dims: usize,
    pub len: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> ParameterBank<T> {
    /// D independent init draws with distinct derived seeds.
    pub fn init(arch: &ArchSpec, dims: usize, seed: u64) -> Result<Self> {
        let len = netspec::param_count(arch)?;
        let mut values = Vec::with_capacity(dims * len);
        for i in 0..dims {
            // distinct stream per base model, same root seed
            let mut rng = SeedRng::stream(seed, Stream::BankInit(i as u32));
            let sub = rng.next_u64();
            values.extend_from_slice(&netspec::init_params::<T>(arch, sub)?.values);
        }
        Ok(ParameterBank { dims, len, values })
    }

    pub fn base(&self, i: usize) -> &[T] {
        &self.values[i * self.len..(i + 1) * self.len]
    }
}

/// θ = Σᵢ βᵢ·θᵢ.
pub fn compose<T: Scalar>(bank: &ParameterBank<T>, beta: &[T]) -> Result<Vec<T>> {
    if beta.len() != bank.dims {
        return Err(ScnError::ShapeMismatch(format!(
            "beta has {} entries for a D={} bank",
            beta.len(),
            bank.dims
        )));
    }
    let mut theta = vec![T::ZERO; bank.len];
    for (i, &b) in beta.iter().enumerate() {
        for (t, &v) in theta.iter_mut().zip(bank.base(i)) {
            *t = *t + b * v;
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub seed: u64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub lambda_cos: f64,
    pub lambda_ent: f64,
    pub iscn: bool,
}

impl Default for TrainMeta {
    fn default() -> Self {
        TrainMeta {
            seed: 0,
            lr: 1e-3,
            batch: 64,
            epochs: 0,
            lambda_cos: 1.0,
            lambda_ent: 0.01,
            iscn: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SCNModel<T> {
    pub family: TransformFamily,
    pub arch: ArchSpec,
    pub config: ConfigNet<T>,
    pub bank: ParameterBank<T>,
    pub meta: TrainMeta,
}

impl<T: Scalar> SCNModel<T> {
    pub fn init(family: TransformFamily, arch: ArchSpec, dims: usize, seed: u64) -> Result<Self> {
        if dims < 1 {
            return Err(ScnError::Invalid("D must be >= 1".into()));
        }
        Ok(SCNModel {
            family,
            arch,
            config: ConfigNet::init(family.encoding_size(), dims, seed),
            bank: ParameterBank::init(&arch, dims, seed)?,
            meta: TrainMeta {
                seed,
                ..TrainMeta::default()
            },
        })
    }

    pub fn dims(&self) -> usize {
        self.bank.dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.config.input != self.family.encoding_size() {
            return Err(ScnError::ShapeMismatch(format!(
                "encoding size {} != confignet input {}",
                self.family.encoding_size(),
                self.config.input
            )));
        }
        if self.config.dims != self.bank.dims {
            return Err(ScnError::ShapeMismatch("confignet D != bank D".into()));
        }
        if self.bank.len != netspec::param_count(&self.arch)? {
            return Err(ScnError::ShapeMismatch("bank length != param_count".into()));
        }
        if self.config.params.len() != self.config.param_count() {
            return Err(ScnError::ShapeMismatch("confignet param length".into()));
        }
        Ok(())
    }

    /// β at a native α.
    pub fn beta(&self, alpha: &AlphaParam) -> Result<Vec<T>> {
        let enc: Vec<T> = encode_alpha(alpha)?.into_iter().map(T::from_f64).collect();
        config_forward(&self.config, &enc)
    }

    /// Composed θ at a native α.
    pub fn theta_at(&self, alpha: &AlphaParam) -> Result<Vec<T>> {
        compose(&self.bank, &self.beta(alpha)?)
    }

    /// One composition per (α, batch): logits of the already-transformed
    /// batch under the α-composed weights.
    pub fn forward(&self, alpha: &AlphaParam, batch: Tensor<T>) -> Result<Tensor<T>> {
        let theta = self.theta_at(alpha)?;
        netspec::forward_infer(&self.arch, &theta, batch)
    }
}

/// Everything scn_forward puts on a training tape, exposed so the training
/// loop can reuse β nodes for the regularizer.
pub struct ScnTapeNodes {
    pub config_leaf: NodeId,
    pub bank_leaf: NodeId,
    pub beta: NodeId,
    pub logits: NodeId,
}

/// Record the full SCN forward g(batch, f(h(enc α))) on a tape, with the
/// config params and the whole bank as trainable leaves.
pub fn scn_forward_tape<T: Scalar>(
    tape: &mut Tape<T>,
    model: &SCNModel<T>,
    alpha: &AlphaParam,
    batch: NodeId,
) -> Result<ScnTapeNodes> {
    let config_leaf = tape.leaf(Tensor::from_vec(model.config.params.clone()), true);
    let bank_leaf = tape.leaf(
        Tensor::new(
            vec![model.bank.dims, model.bank.len],
            model.bank.values.clone(),
        )?,
        true,
    );
    let (beta, logits) = scn_forward_on(tape, model, config_leaf, bank_leaf, alpha, batch)?;
    Ok(ScnTapeNodes {
        config_leaf,
        bank_leaf,
        beta,
        logits,
    })
}

/// Same, but with caller-owned config/bank leaves (so two α passes share
/// one set of trainable leaves).
pub fn scn_forward_on<T: Scalar>(
    tape: &mut Tape<T>,
    model: &SCNModel<T>,
    config_leaf: NodeId,
    bank_leaf: NodeId,
    alpha: &AlphaParam,
    batch: NodeId,
) -> Result<(NodeId, NodeId)> {
    let enc: Vec<T> = encode_alpha(alpha)?.into_iter().map(T::from_f64).collect();
    let enc_node = tape.leaf(Tensor::new(vec![1, enc.len()], enc)?, false);
    let beta = config_forward_tape(
        tape,
        model.config.input,
        model.config.dims,
        config_leaf,
        enc_node,
    )?;
    // composition as a 1xD by DxL matmul: the VJP is exactly
    // dbank = betaT g, dbeta = g bankT
    let theta_row = tape.matmul(beta, bank_leaf)?;
    let theta = tape.reshape(theta_row, vec![model.bank.len])?;
    let logits = netspec::forward(tape, &model.arch, theta, batch)?;
    Ok((beta, logits))
}

/// β to config-net node for a bare encoding (used by diagnostics probes).
pub fn beta_of_encoding<T: Scalar>(net: &ConfigNet<T>, enc: &[T]) -> Result<Vec<T>> {
    config_forward(net, enc)
}
