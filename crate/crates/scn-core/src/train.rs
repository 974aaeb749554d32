//! Adam, the cosine schedule, and the SCN / baseline training loops.

use crate::autodiff::Tape;
use crate::data::{LabeledCloudSet, LabeledImageSet};
use crate::error::{Result, ScnError};
use crate::netspec::{self, ArchSpec};
use crate::rng::{SeedRng, Stream};
use crate::scalar::Scalar;
use crate::scn::{scn_forward_on, SCNModel};
use crate::tensor::Tensor;
use crate::transforms::{
    apply_cloud, apply_image, encode_alpha, inverse, sample_alpha, AlphaParam, TransformFamily,
};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Cosine,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lambda_cos: f64,
    pub lambda_ent: f64,
    pub eta_min: f64,
    pub schedule: Schedule,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lr: 1e-3,
            batch: 64,
            epochs: 30,
            seed: 0,
            lambda_cos: 1.0,
            lambda_ent: 0.01,
            eta_min: 0.0,
            schedule: Schedule::Cosine,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || self.lambda_cos < 0.0 || self.batch == 0 {
            return Err(ScnError::Invalid(format!("bad hyper-params {self:?}")));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr,
            Schedule::Cosine => cosine_lr(epoch, self.epochs, self.lr, self.eta_min),
        }
    }
}

pub fn cosine_lr(epoch: usize, total: usize, lr0: f64, eta_min: f64) -> f64 {
    if total == 0 {
        return lr0;
    }
    eta_min + 0.5 * (lr0 - eta_min) * (1.0 + libm::cos(PI * epoch as f64 / total as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::ZERO; len],
            v: vec![T::ZERO; len],
            t: 0,
        }
    }
}

/// Standard Adam with bias correction.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(ScnError::ShapeMismatch(format!(
            "adam_step: {} params, {} grads, {} state",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let b1 = T::from_f64(ADAM_BETA1);
    let b2 = T::from_f64(ADAM_BETA2);
    let one = T::ONE;
    let eps = T::from_f64(ADAM_EPS);
    let c1 = T::from_f64(1.0 - libm::pow(ADAM_BETA1, state.t as f64));
    let c2 = T::from_f64(1.0 - libm::pow(ADAM_BETA2, state.t as f64));
    let lr = T::from_f64(lr);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (one - b1) * g;
        state.v[i] = b2 * state.v[i] + (one - b2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] = params[i] - lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub reg: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

/// A training/eval set of either modality.
#[derive(Debug, Clone, Copy)]
pub enum TrainData<'a> {
    Images(&'a LabeledImageSet),
    Clouds(&'a LabeledCloudSet),
}

impl<'a> TrainData<'a> {
    pub fn len(&self) -> usize {
        match self {
            TrainData::Images(s) => s.len(),
            TrainData::Clouds(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> usize {
        match self {
            TrainData::Images(s) => s.classes,
            TrainData::Clouds(s) => s.classes,
        }
    }

    pub fn label(&self, i: usize) -> usize {
        match self {
            TrainData::Images(s) => s.labels[i] as usize,
            TrainData::Clouds(s) => s.labels[i] as usize,
        }
    }

    /// (P, channels) of the transformed batches this set produces.
    pub fn input_spec(&self) -> (usize, usize) {
        match self {
            TrainData::Images(s) => (s.p, s.channels),
            TrainData::Clouds(_) => (32, 1),
        }
    }

    pub fn matches_family(&self, family: TransformFamily) -> bool {
        family.needs_cloud() == matches!(self, TrainData::Clouds(_))
    }
}

/// Transform the selected samples by one shared α and pack them as a
/// `[b, C, P, P]` tensor plus labels.
pub fn transform_batch<T: Scalar>(
    data: &TrainData,
    idx: &[usize],
    alpha: &AlphaParam,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let (p, c) = data.input_spec();
    let mut out = Vec::with_capacity(idx.len() * c * p * p);
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        let x = match data {
            TrainData::Images(s) => apply_image(alpha, s.image(i), c, p)?,
            TrainData::Clouds(s) => apply_cloud(alpha, s.cloud(i), p)?,
        };
        out.extend(x.into_iter().map(|v| T::from_f64(v as f64)));
        labels.push(data.label(i));
    }
    Ok((Tensor::new(vec![idx.len(), c, p, p], out)?, labels))
}

fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let c = logits.shape[1];
    logits
        .data
        .chunks_exact(c)
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn check_finite(value: f64, what: &str, epoch: usize, batch: usize) -> Result<()> {
    if !value.is_finite() {
        return Err(ScnError::NumericDivergence(format!(
            "{what} = {value} at epoch {epoch}, batch {batch}"
        )));
    }
    Ok(())
}

/// Train an SCN in place. One α per batch; loss = CE + λ_cos·cos²(β⁽¹⁾, β⁽²⁾),
/// plus the I-SCN entropy pair when `iscn` is set. When λ_cos = 0 and `iscn`
/// is off, the second α is never drawn, so the consumed random stream matches
/// a One4All run exactly.
pub fn train_scn<T: Scalar>(
    model: &mut SCNModel<T>,
    data: &TrainData,
    test: Option<&TrainData>,
    hp: &HyperParams,
    iscn: bool,
) -> Result<TrainHistory> {
    hp.validate()?;
    model.validate()?;
    if !data.matches_family(model.family) {
        return Err(ScnError::Invalid(format!(
            "{} model fed the wrong data modality",
            model.family.name()
        )));
    }
    model.meta.seed = hp.seed;
    model.meta.lr = hp.lr;
    model.meta.batch = hp.batch;
    model.meta.epochs = hp.epochs;
    model.meta.lambda_cos = hp.lambda_cos;
    model.meta.lambda_ent = hp.lambda_ent;
    model.meta.iscn = iscn;

    let needs_alpha2 = hp.lambda_cos > 0.0 || iscn;
    let mut shuffle_rng = SeedRng::stream(hp.seed, Stream::DataShuffle);
    let mut alpha_rng = SeedRng::stream(hp.seed, Stream::AlphaDraw);
    let mut adam_cfg = AdamState::<T>::new(model.config.params.len());
    let mut adam_bank = AdamState::<T>::new(model.bank.values.len());
    let mut history = TrainHistory::default();

    for epoch in 0..hp.epochs {
        let lr = hp.lr_at(epoch);
        let order = shuffle_rng.permutation(data.len());
        let mut loss_sum = 0.0f64;
        let mut reg_sum = 0.0f64;
        let mut batches = 0usize;
        let mut correct = 0usize;

        for (bi, idx) in order.chunks(hp.batch).enumerate() {
            let alpha1 = sample_alpha(model.family, &mut alpha_rng);
            let (xb, yb) = transform_batch::<T>(data, idx, &alpha1)?;

            let mut tape = Tape::new();
            let config_leaf = tape.leaf(Tensor::from_vec(model.config.params.clone()), true);
            let bank_leaf = tape.leaf(
                Tensor::new(
                    vec![model.bank.dims, model.bank.len],
                    model.bank.values.clone(),
                )?,
                true,
            );
            let batch_node = tape.leaf(xb, false);
            let (beta1, logits1) =
                scn_forward_on(&mut tape, model, config_leaf, bank_leaf, &alpha1, batch_node)?;
            correct += argmax_rows(tape.value(logits1))
                .iter()
                .zip(yb.iter())
                .filter(|(a, b)| a == b)
                .count();

            let mut loss = tape.cross_entropy(logits1, &yb)?;
            let mut reg_val = 0.0f64;
            if needs_alpha2 {
                let alpha2 = sample_alpha(model.family, &mut alpha_rng);
                let enc2: Vec<T> = encode_alpha(&alpha2)?.into_iter().map(T::from_f64).collect();
                let enc2_node = tape.leaf(Tensor::new(vec![1, enc2.len()], enc2)?, false);
                let beta2 = crate::scn::config_forward_tape(
                    &mut tape,
                    model.config.input,
                    model.config.dims,
                    config_leaf,
                    enc2_node,
                )?;
                if hp.lambda_cos > 0.0 {
                    let reg = tape.cosine_sim_sq(beta1, beta2)?;
                    reg_val = hp.lambda_cos * tape.value(reg).scalar_value().to_f64();
                    let scaled = tape.scale(reg, T::from_f64(hp.lambda_cos));
                    loss = tape.add(loss, scaled)?;
                }
                if iscn {
                    // minimize entropy under the matching composition,
                    // maximize it when the same batch is composed at the
                    // unrelated alpha2
                    let h1 = tape.entropy_of_logits(logits1)?;
                    let up = tape.scale(h1, T::from_f64(hp.lambda_ent));
                    loss = tape.add(loss, up)?;
                    let theta2_row = tape.matmul(beta2, bank_leaf)?;
                    let theta2 = tape.reshape(theta2_row, vec![model.bank.len])?;
                    let logits2 = netspec::forward(&mut tape, &model.arch, theta2, batch_node)?;
                    let h2 = tape.entropy_of_logits(logits2)?;
                    let down = tape.scale(h2, T::from_f64(-hp.lambda_ent));
                    loss = tape.add(loss, down)?;
                }
            }

            let loss_val = tape.value(loss).scalar_value().to_f64();
            check_finite(loss_val, "loss", epoch, bi)?;
            loss_sum += loss_val;
            reg_sum += reg_val;
            batches += 1;

            let grads = tape.backward(loss)?;
            let gc = grads
                .get(config_leaf)
                .ok_or_else(|| ScnError::Invalid("missing config grads".into()))?;
            let gb = grads
                .get(bank_leaf)
                .ok_or_else(|| ScnError::Invalid("missing bank grads".into()))?;
            adam_step(&mut model.config.params, &gc.data, &mut adam_cfg, lr)?;
            adam_step(&mut model.bank.values, &gb.data, &mut adam_bank, lr)?;
            for v in model.config.params.iter().chain(model.bank.values.iter()) {
                if !v.is_finite() {
                    return Err(ScnError::NumericDivergence(format!(
                        "non-finite parameter after epoch {epoch}, batch {bi}"
                    )));
                }
            }
        }

        let test_acc = match test {
            Some(t) => scn_random_alpha_accuracy(model, t, hp.batch, hp.seed, epoch)?,
            None => f64::NAN,
        };
        history.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            reg: reg_sum / batches as f64,
            train_acc: correct as f64 / data.len() as f64,
            test_acc,
            lr,
        });
    }
    Ok(history)
}

/// Accuracy with one fresh uniform α per test batch, composed per α.
fn scn_random_alpha_accuracy<T: Scalar>(
    model: &SCNModel<T>,
    test: &TrainData,
    batch: usize,
    seed: u64,
    epoch: usize,
) -> Result<f64> {
    let mut rng = SeedRng::stream(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15), Stream::Eval);
    let idx: Vec<usize> = (0..test.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(batch) {
        let alpha = sample_alpha(model.family, &mut rng);
        let (xb, yb) = transform_batch::<T>(test, chunk, &alpha)?;
        let logits = model.forward(&alpha, xb)?;
        correct += argmax_rows(&logits)
            .iter()
            .zip(yb.iter())
            .filter(|(a, b)| a == b)
            .count();
    }
    Ok(correct as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineKind {
    /// Random-α augmentation over the whole domain.
    One4All,
    /// Trained strictly at one fixed α, no augmentation.
    One4One(AlphaParam),
    /// Trained on T(inverse(α), T(α, x)) with random α.
    Inverse,
}

/// Train a plain model of `arch` under the given baseline regime, with the
/// same optimizer, schedule, and random streams as train_scn.
pub fn train_baseline<T: Scalar>(
    kind: &BaselineKind,
    arch: &ArchSpec,
    family: TransformFamily,
    data: &TrainData,
    test: Option<&TrainData>,
    hp: &HyperParams,
) -> Result<(Vec<T>, TrainHistory)> {
    hp.validate()?;
    if !data.matches_family(family) {
        return Err(ScnError::Invalid(format!(
            "{} baseline fed the wrong data modality",
            family.name()
        )));
    }
    if matches!(kind, BaselineKind::Inverse)
        && inverse(&AlphaParam::identity(family)).is_none()
    {
        return Err(ScnError::Unsupported(format!(
            "Inverse baseline undefined for {}: family not invertible",
            family.name()
        )));
    }

    let mut theta = netspec::init_params::<T>(arch, {
        let mut r = SeedRng::stream(hp.seed, Stream::BankInit(0));
        r.next_u64()
    })?
    .values;
    let mut shuffle_rng = SeedRng::stream(hp.seed, Stream::DataShuffle);
    let mut alpha_rng = SeedRng::stream(hp.seed, Stream::AlphaDraw);
    let mut adam = AdamState::<T>::new(theta.len());
    let mut history = TrainHistory::default();

    for epoch in 0..hp.epochs {
        let lr = hp.lr_at(epoch);
        let order = shuffle_rng.permutation(data.len());
        let mut loss_sum = 0.0f64;
        let mut batches = 0usize;
        let mut correct = 0usize;

        for (bi, idx) in order.chunks(hp.batch).enumerate() {
            let (xb, yb) = match kind {
                BaselineKind::One4All => {
                    let alpha = sample_alpha(family, &mut alpha_rng);
                    transform_batch::<T>(data, idx, &alpha)?
                }
                BaselineKind::One4One(alpha) => transform_batch::<T>(data, idx, alpha)?,
                BaselineKind::Inverse => {
                    let alpha = sample_alpha(family, &mut alpha_rng);
                    let inv = inverse(&alpha).ok_or_else(|| {
                        ScnError::Unsupported(format!("{} not invertible", family.name()))
                    })?;
                    let (p, c) = data.input_spec();
                    let mut out = Vec::with_capacity(idx.len() * c * p * p);
                    let mut labels = Vec::with_capacity(idx.len());
                    for &i in idx {
                        let x = match data {
                            TrainData::Images(s) => {
                                let fwd = apply_image(&alpha, s.image(i), c, p)?;
                                apply_image(&inv, &fwd, c, p)?
                            }
                            TrainData::Clouds(_) => {
                                return Err(ScnError::Unsupported(
                                    "Inverse baseline undefined for cloud data".into(),
                                ))
                            }
                        };
                        out.extend(x.into_iter().map(|v| T::from_f64(v as f64)));
                        labels.push(data.label(i));
                    }
                    (Tensor::new(vec![idx.len(), c, p, p], out)?, labels)
                }
            };

            let mut tape = Tape::new();
            let theta_leaf = tape.leaf(Tensor::from_vec(theta.clone()), true);
            let batch_node = tape.leaf(xb, false);
            let logits = netspec::forward(&mut tape, arch, theta_leaf, batch_node)?;
            correct += argmax_rows(tape.value(logits))
                .iter()
                .zip(yb.iter())
                .filter(|(a, b)| a == b)
                .count();
            let loss = tape.cross_entropy(logits, &yb)?;
            let loss_val = tape.value(loss).scalar_value().to_f64();
            check_finite(loss_val, "loss", epoch, bi)?;
            loss_sum += loss_val;
            batches += 1;

            let grads = tape.backward(loss)?;
            let g = grads
                .get(theta_leaf)
                .ok_or_else(|| ScnError::Invalid("missing grads".into()))?;
            adam_step(&mut theta, &g.data, &mut adam, lr)?;
        }

        let test_acc = match test {
            Some(t) => plain_eval_accuracy(arch, &theta, t, family, kind, hp.batch, hp.seed, epoch)?,
            None => f64::NAN,
        };
        history.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            reg: 0.0,
            train_acc: correct as f64 / data.len() as f64,
            test_acc,
            lr,
        });
    }
    Ok((theta, history))
}

#[allow(clippy::too_many_arguments)]
fn plain_eval_accuracy<T: Scalar>(
    arch: &ArchSpec,
    theta: &[T],
    test: &TrainData,
    family: TransformFamily,
    kind: &BaselineKind,
    batch: usize,
    seed: u64,
    epoch: usize,
) -> Result<f64> {
    let mut rng = SeedRng::stream(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15), Stream::Eval);
    let idx: Vec<usize> = (0..test.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(batch) {
        let alpha = match kind {
            BaselineKind::One4One(a) => a.clone(),
            _ => sample_alpha(family, &mut rng),
        };
        let (xb, yb) = transform_batch::<T>(test, chunk, &alpha)?;
        let logits = netspec::forward_infer(arch, theta, xb)?;
        correct += argmax_rows(&logits)
            .iter()
            .zip(yb.iter())
            .filter(|(a, b)| a == b)
            .count();
    }
    Ok(correct as f64 / test.len() as f64)
}

/// A frozen model to sweep over an α-grid.
pub enum EvalModel<'a, T> {
    Plain {
        arch: &'a ArchSpec,
        theta: &'a [T],
    },
    Scn(&'a SCNModel<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    pub rows: Vec<(AlphaParam, f64)>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Accuracy of one fixed weight vector on the α-transformed test set.
pub fn accuracy_at<T: Scalar>(
    arch: &ArchSpec,
    theta: &[T],
    data: &TrainData,
    alpha: &AlphaParam,
    batch: usize,
) -> Result<f64> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(batch) {
        let (xb, yb) = transform_batch::<T>(data, chunk, alpha)?;
        let logits = netspec::forward_infer(arch, theta, xb)?;
        correct += argmax_rows(&logits)
            .iter()
            .zip(yb.iter())
            .filter(|(a, b)| a == b)
            .count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// For each grid α: transform the test set, compose (for SCNs), report
/// accuracy; plus mean/min/max over the grid.
pub fn evaluate<T: Scalar>(
    model: &EvalModel<T>,
    data: &TrainData,
    grid: &[AlphaParam],
    batch: usize,
) -> Result<AccuracyTable> {
    if grid.is_empty() {
        return Err(ScnError::Invalid("empty evaluation grid".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for alpha in grid {
        let acc = match model {
            EvalModel::Plain { arch, theta } => accuracy_at(arch, theta, data, alpha, batch)?,
            EvalModel::Scn(scn) => {
                let theta = scn.theta_at(alpha)?;
                accuracy_at(&scn.arch, &theta, data, alpha, batch)?
            }
        };
        rows.push((alpha.clone(), acc));
    }
    let mean = rows.iter().map(|(_, a)| a).sum::<f64>() / rows.len() as f64;
    let min = rows.iter().map(|(_, a)| *a).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|(_, a)| *a).fold(f64::NEG_INFINITY, f64::max);
    Ok(AccuracyTable {
        rows,
        mean,
        min,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_shapes2d;

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0, 30, 1e-3, 0.0), 1e-3);
        assert!(cosine_lr(30, 30, 1e-3, 0.0).abs() < 1e-19);
        let mid = cosine_lr(15, 30, 1e-3, 2e-4);
        assert!((mid - (1e-3 + 2e-4) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn adam_zero_grad_is_identity() {
        let mut p = vec![0.5f64, -0.25];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, 1e-3).unwrap();
        assert_eq!(p, vec![0.5, -0.25]);
    }

    #[test]
    fn adam_single_step_oracle() {
        let mut p = vec![0.0f64];
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut st, 1e-3).unwrap();
        // mhat = 1, vhat = 1 -> p = -lr / (1 + eps)
        assert!((p[0] - (-0.000999999990)).abs() < 1e-12, "{}", p[0]);
    }

    #[test]
    fn adam_two_steps_match_reference_recurrence() {
        let g = 0.7f64;
        let mut p = vec![0.1f64];
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[g], &mut st, 1e-3).unwrap();
        adam_step(&mut p, &[g], &mut st, 1e-3).unwrap();

        // independent recurrence in plain f64
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 1e-3);
        let mut pr = 0.1f64;
        let mut m = 0.0;
        let mut v = 0.0;
        for t in 1..=2u32 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            pr -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((p[0] - pr).abs() <= 1e-9);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut p = vec![0.0f64];
        let mut st = AdamState::new(1);
        assert!(adam_step(&mut p, &[1.0, 2.0], &mut st, 1e-3).is_err());
    }

    fn tiny_setup() -> (LabeledImageSet, LabeledImageSet) {
        let set = gen_shapes2d(200, 1).unwrap();
        crate::data::split(&set, 0.8, 2).unwrap()
    }

    #[test]
    fn one4one_identity_feeds_untransformed_batches() {
        let (train, _) = tiny_setup();
        // identity alpha hands the network the raw image bits, so One4One
        // at the identity is plain training by construction
        let id = AlphaParam::identity(TransformFamily::Rotation2D);
        let idx: Vec<usize> = (0..8).collect();
        let (xb, yb) = transform_batch::<f32>(&TrainData::Images(&train), &idx, &id).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            let n = train.image_len();
            assert_eq!(&xb.data[k * n..(k + 1) * n], train.image(i));
            assert_eq!(yb[k], train.labels[i] as usize);
        }

        let arch = ArchSpec::mlp(8, 1, (32, 1), 10);
        let hp = HyperParams {
            epochs: 2,
            seed: 3,
            ..HyperParams::default()
        };
        let (t1, h1) = train_baseline::<f32>(
            &BaselineKind::One4One(id.clone()),
            &arch,
            TransformFamily::Rotation2D,
            &TrainData::Images(&train),
            None,
            &hp,
        )
        .unwrap();
        let (t2, h2) = train_baseline::<f32>(
            &BaselineKind::One4One(id),
            &arch,
            TransformFamily::Rotation2D,
            &TrainData::Images(&train),
            None,
            &hp,
        )
        .unwrap();
        assert_eq!(t1, t2);
        assert_eq!(h1.epochs.len(), 2);
        for (a, b) in h1.epochs.iter().zip(h2.epochs.iter()) {
            assert_eq!(a.loss, b.loss);
            assert_eq!(a.train_acc, b.train_acc);
        }
    }

    #[test]
    fn inverse_baseline_rejects_noninvertible_family() {
        let (train, _) = tiny_setup();
        let arch = ArchSpec::mlp(8, 1, (32, 1), 10);
        let hp = HyperParams {
            epochs: 1,
            ..HyperParams::default()
        };
        let err = train_baseline::<f32>(
            &BaselineKind::Inverse,
            &arch,
            TransformFamily::Sharpness,
            &TrainData::Images(&train),
            None,
            &hp,
        );
        assert!(err.is_err());
    }

    #[test]
    fn scn_training_runs_learns_and_is_deterministic() {
        let (train, test) = tiny_setup();
        let arch = ArchSpec::mlp(16, 1, (32, 1), 10);
        let hp = HyperParams {
            epochs: 3,
            seed: 5,
            ..HyperParams::default()
        };
        let mut scn = SCNModel::<f32>::init(TransformFamily::Rotation2D, arch, 2, hp.seed).unwrap();
        let before = scn.bank.values.clone();
        let hist = train_scn(
            &mut scn,
            &TrainData::Images(&train),
            Some(&TrainData::Images(&test)),
            &hp,
            false,
        )
        .unwrap();
        assert_eq!(hist.epochs.len(), 3);
        assert!(hist.epochs[2].loss < hist.epochs[0].loss, "{hist:?}");
        assert!(hist.epochs.iter().all(|e| e.reg >= 0.0 && e.reg <= hp.lambda_cos + 1e-9));
        // every base model moved at step 1 (softmax keeps all beta_i > 0)
        for i in 0..2 {
            let moved = scn.bank.base(i) != &before[i * scn.bank.len..(i + 1) * scn.bank.len];
            assert!(moved, "base model {i} never updated");
        }

        let mut scn2 = SCNModel::<f32>::init(TransformFamily::Rotation2D, arch, 2, hp.seed).unwrap();
        let hist2 = train_scn(
            &mut scn2,
            &TrainData::Images(&train),
            Some(&TrainData::Images(&test)),
            &hp,
            false,
        )
        .unwrap();
        assert_eq!(hist, hist2);
        assert_eq!(scn.bank.values, scn2.bank.values);
    }

    #[test]
    fn d1_scn_loss_trace_matches_one4all_bitwise() {
        let (train, _) = tiny_setup();
        let arch = ArchSpec::mlp(8, 1, (32, 1), 10);
        let hp = HyperParams {
            epochs: 2,
            seed: 7,
            lambda_cos: 0.0,
            ..HyperParams::default()
        };
        let mut scn = SCNModel::<f32>::init(TransformFamily::Rotation2D, arch, 1, hp.seed).unwrap();
        let h_scn = train_scn(&mut scn, &TrainData::Images(&train), None, &hp, false).unwrap();
        let (theta, h_base) = train_baseline::<f32>(
            &BaselineKind::One4All,
            &arch,
            TransformFamily::Rotation2D,
            &TrainData::Images(&train),
            None,
            &hp,
        )
        .unwrap();
        for (a, b) in h_scn.epochs.iter().zip(h_base.epochs.iter()) {
            assert_eq!(a.loss, b.loss, "loss traces diverged");
            assert_eq!(a.train_acc, b.train_acc);
        }
        assert_eq!(scn.bank.base(0), &theta[..]);
    }

    #[test]
    fn evaluate_grid_of_one_is_plain_accuracy() {
        let (_, test) = tiny_setup();
        let arch = ArchSpec::mlp(8, 1, (32, 1), 10);
        let theta = netspec::init_params::<f32>(&arch, 1).unwrap().values;
        let alpha = AlphaParam::rotation(0.7);
        let table = evaluate(
            &EvalModel::Plain {
                arch: &arch,
                theta: &theta,
            },
            &TrainData::Images(&test),
            core::slice::from_ref(&alpha),
            64,
        )
        .unwrap();
        let direct = accuracy_at(&arch, &theta, &TrainData::Images(&test), &alpha, 64).unwrap();
        assert_eq!(table.rows[0].1, direct);
        assert_eq!(table.mean, direct);
        assert_eq!((table.min, table.max), (direct, direct));
    }

    #[test]
    fn untrained_model_scores_near_chance() {
        let set = gen_shapes2d(1000, 21).unwrap();
        let arch = ArchSpec::mlp(8, 1, (32, 1), 10);
        // average several random nets so the chance check is stable
        let mut total = 0.0;
        for seed in 0..5 {
            let theta = netspec::init_params::<f32>(&arch, 100 + seed).unwrap().values;
            total += accuracy_at(
                &arch,
                &theta,
                &TrainData::Images(&set),
                &AlphaParam::rotation(0.0),
                128,
            )
            .unwrap();
        }
        let acc = total / 5.0;
        assert!((acc - 0.1).abs() < 0.05, "untrained accuracy {acc}");
    }
}
