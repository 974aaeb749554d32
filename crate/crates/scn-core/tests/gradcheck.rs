//! Central finite-difference oracles for the reverse-mode engine, in f64.
//!
//! Every op gets its own check, then the full SCN training loss is checked
//! end to end against coordinate-wise differences.

use scn_core::autodiff::{Conv2dMeta, Padding, Tape};
use scn_core::netspec::{self, ArchSpec};
use scn_core::rng::SeedRng;
use scn_core::scn::{scn_forward_on, SCNModel};
use scn_core::tensor::Tensor;
use scn_core::transforms::{encode_alpha, AlphaParam, TransformFamily};

const H: f64 = 1e-5;
const REL: f64 = 1e-4;
const ABS: f64 = 1e-7;

fn close(got: f64, want: f64) -> bool {
    let diff = (got - want).abs();
    diff <= ABS || diff <= REL * want.abs().max(got.abs())
}

/// Check d(loss)/d(x_i) for a leaf against central differences of a scalar
/// loss builder.
fn check_leaf_grads(
    build: impl Fn(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    what: &str,
) {
    assert_eq!(x.len(), analytic.len());
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        xp[i] += H;
        let fp = build(&xp);
        xp[i] = x[i] - H;
        let fm = build(&xp);
        let fd = (fp - fm) / (2.0 * H);
        assert!(
            close(analytic[i], fd),
            "{what}[{i}]: analytic {} vs finite-diff {fd}",
            analytic[i]
        );
    }
}

fn rand_vec(rng: &mut SeedRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}

#[test]
fn matmul_chain_gradcheck() {
    let mut rng = SeedRng::new(1);
    let a = rand_vec(&mut rng, 6, -1.0, 1.0);
    let b = rand_vec(&mut rng, 12, -1.0, 1.0);
    let f = |av: &[f64], bv: &[f64]| {
        let mut tape = Tape::<f64>::new();
        let an = tape.leaf(Tensor::new(vec![2, 3], av.to_vec()).unwrap(), true);
        let bn = tape.leaf(Tensor::new(vec![3, 4], bv.to_vec()).unwrap(), true);
        let c = tape.matmul(an, bn).unwrap();
        let m = tape.mean(c);
        (tape, an, bn, m)
    };
    let (tape, an, bn, m) = f(&a, &b);
    let grads = tape.backward(m).unwrap();
    let ga = grads.get(an).unwrap().data.clone();
    let gb = grads.get(bn).unwrap().data.clone();
    check_leaf_grads(|av| { let (t, _, _, m) = f(av, &b); t.value(m).scalar_value() }, &a, &ga, "matmul A");
    check_leaf_grads(|bv| { let (t, _, _, m) = f(&a, bv); t.value(m).scalar_value() }, &b, &gb, "matmul B");
}

#[test]
fn relu_softmax_ce_entropy_cos_gradcheck() {
    let mut rng = SeedRng::new(2);
    // keep relu inputs away from the kink
    let x: Vec<f64> = rand_vec(&mut rng, 8, 0.2, 1.5)
        .into_iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { v } else { -v })
        .collect();
    let labels = [1usize, 3];
    let build = |xv: &[f64]| {
        let mut tape = Tape::<f64>::new();
        let xn = tape.leaf(Tensor::new(vec![2, 4], xv.to_vec()).unwrap(), true);
        let r = tape.relu(xn);
        let sm = tape.softmax(r).unwrap();
        let ce = tape.cross_entropy(r, &labels).unwrap();
        let h = tape.entropy_of_logits(r).unwrap();
        let cs = tape.cosine_sim_sq(sm, xn).unwrap();
        let s1 = tape.add(ce, h).unwrap();
        let total = tape.add(s1, cs).unwrap();
        (tape, xn, total)
    };
    let (tape, xn, total) = build(&x);
    let grads = tape.backward(total).unwrap();
    let gx = grads.get(xn).unwrap().data.clone();
    check_leaf_grads(
        |xv| { let (t, _, l) = build(xv); t.value(l).scalar_value() },
        &x,
        &gx,
        "relu/softmax/ce/entropy/cos2 stack",
    );
}

#[test]
fn conv2d_zero_and_circular_gradcheck() {
    for pad in [
        Padding::Zero { top: 1, left: 1, bottom: 2, right: 2 },
        Padding::Circular { top: 1, left: 1, bottom: 2, right: 2 },
    ] {
        let (h, w, kh, kw, stride) = (5usize, 5usize, 4usize, 4usize, 1usize);
        let (oh, ow) = Conv2dMeta::output_dims(h, w, kh, kw, stride, pad);
        let meta = Conv2dMeta {
            in_ch: 2,
            out_ch: 3,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
            out_h: oh,
            out_w: ow,
        };
        let mut rng = SeedRng::new(3);
        let x = rand_vec(&mut rng, 2 * h * w, -1.0, 1.0);
        let wv = rand_vec(&mut rng, 3 * 2 * kh * kw, -0.5, 0.5);
        let bv = rand_vec(&mut rng, 3, -0.5, 0.5);
        let build = |xv: &[f64], wvv: &[f64], bvv: &[f64]| {
            let mut tape = Tape::<f64>::new();
            let xn = tape.leaf(Tensor::new(vec![1, 2, h, w], xv.to_vec()).unwrap(), true);
            let wn = tape.leaf(Tensor::new(vec![3, 2, kh, kw], wvv.to_vec()).unwrap(), true);
            let bn = tape.leaf(Tensor::new(vec![3], bvv.to_vec()).unwrap(), true);
            let c = tape.conv2d(xn, wn, bn, meta).unwrap();
            let m = tape.mean(c);
            (tape, xn, wn, bn, m)
        };
        let (tape, xn, wn, bn, m) = build(&x, &wv, &bv);
        let grads = tape.backward(m).unwrap();
        let gx = grads.get(xn).unwrap().data.clone();
        let gw = grads.get(wn).unwrap().data.clone();
        let gb = grads.get(bn).unwrap().data.clone();
        check_leaf_grads(|v| { let (t, .., m) = build(v, &wv, &bv); t.value(m).scalar_value() }, &x, &gx, "conv input");
        check_leaf_grads(|v| { let (t, .., m) = build(&x, v, &bv); t.value(m).scalar_value() }, &wv, &gw, "conv weight");
        check_leaf_grads(|v| { let (t, .., m) = build(&x, &wv, v); t.value(m).scalar_value() }, &bv, &gb, "conv bias");
    }
}

#[test]
fn global_max_pool_gradcheck() {
    // values spread apart so the +-h probes never flip the argmax
    let x = vec![0.1f64, 0.9, 0.3, 0.5, -0.8, -0.1, -0.4, -0.6];
    let build = |xv: &[f64]| {
        let mut tape = Tape::<f64>::new();
        let xn = tape.leaf(Tensor::new(vec![1, 2, 2, 2], xv.to_vec()).unwrap(), true);
        let pooled = tape.global_max_pool(xn).unwrap();
        let m = tape.mean(pooled);
        (tape, xn, m)
    };
    let (tape, xn, m) = build(&x);
    let grads = tape.backward(m).unwrap();
    let gx = grads.get(xn).unwrap().data.clone();
    check_leaf_grads(|v| { let (t, _, m) = build(v); t.value(m).scalar_value() }, &x, &gx, "gmp");
}

/// The acceptance-level check: full SCN training loss (CE + cos²
/// regularizer) on a tiny rotation SCN, every coordinate of both leaves.
#[test]
fn full_scn_training_loss_gradcheck() {
    let arch = ArchSpec::mlp(8, 1, (8, 1), 10);
    let scn = SCNModel::<f64>::init(TransformFamily::Rotation2D, arch, 3, 17).unwrap();
    let mut rng = SeedRng::new(18);
    let batch_data = rand_vec(&mut rng, 4 * 64, 0.0, 1.0);
    let labels = [0usize, 3, 7, 9];
    let alpha1 = AlphaParam::rotation(0.8);
    let alpha2 = AlphaParam::rotation(4.0);
    let lambda_cos = 1.0f64;

    let build = |cfg: &[f64], bank: &[f64]| {
        let mut model = scn.clone();
        model.config.params = cfg.to_vec();
        model.bank.values = bank.to_vec();
        let mut tape = Tape::<f64>::new();
        let cfg_leaf = tape.leaf(Tensor::from_vec(cfg.to_vec()), true);
        let bank_leaf = tape.leaf(
            Tensor::new(vec![model.bank.dims, model.bank.len], bank.to_vec()).unwrap(),
            true,
        );
        let batch = tape.leaf(Tensor::new(vec![4, 1, 8, 8], batch_data.clone()).unwrap(), false);
        let (beta1, logits) =
            scn_forward_on(&mut tape, &model, cfg_leaf, bank_leaf, &alpha1, batch).unwrap();
        let ce = tape.cross_entropy(logits, &labels).unwrap();
        let enc2: Vec<f64> = encode_alpha(&alpha2).unwrap();
        let enc2n = tape.leaf(Tensor::new(vec![1, 2], enc2).unwrap(), false);
        let beta2 = scn_core::scn::config_forward_tape(&mut tape, 2, 3, cfg_leaf, enc2n).unwrap();
        let reg = tape.cosine_sim_sq(beta1, beta2).unwrap();
        let scaled = tape.scale(reg, lambda_cos);
        let loss = tape.add(ce, scaled).unwrap();
        (tape, cfg_leaf, bank_leaf, loss)
    };

    let cfg0 = scn.config.params.clone();
    let bank0 = scn.bank.values.clone();
    let (tape, cfg_leaf, bank_leaf, loss) = build(&cfg0, &bank0);
    let grads = tape.backward(loss).unwrap();
    let gc = grads.get(cfg_leaf).unwrap().data.clone();
    let gb = grads.get(bank_leaf).unwrap().data.clone();

    check_leaf_grads(
        |v| { let (t, .., l) = build(v, &bank0); t.value(l).scalar_value() },
        &cfg0,
        &gc,
        "confignet",
    );
    check_leaf_grads(
        |v| { let (t, .., l) = build(&cfg0, v); t.value(l).scalar_value() },
        &bank0,
        &gb,
        "bank",
    );
}

/// Finite-difference spot check that a generic batch reaches every
/// parameter group through the conv architectures too.
#[test]
fn conv_arch_forward_gradcheck_spot() {
    let arch = ArchSpec::ti_cnn((8, 1), 4);
    let theta0 = netspec::init_params::<f64>(&arch, 5).unwrap().values;
    let mut rng = SeedRng::new(6);
    let batch_data = rand_vec(&mut rng, 2 * 64, 0.0, 1.0);
    let labels = [1usize, 2];
    let build = |theta: &[f64]| {
        let mut tape = Tape::<f64>::new();
        let tn = tape.leaf(Tensor::from_vec(theta.to_vec()), true);
        let bn = tape.leaf(Tensor::new(vec![2, 1, 8, 8], batch_data.clone()).unwrap(), false);
        let logits = netspec::forward(&mut tape, &arch, tn, bn).unwrap();
        let loss = tape.cross_entropy(logits, &labels).unwrap();
        (tape, tn, loss)
    };
    let (tape, tn, loss) = build(&theta0);
    let grads = tape.backward(loss).unwrap();
    let g = grads.get(tn).unwrap().data.clone();
    // spot-check a deterministic spread of coordinates
    let mut idx: Vec<usize> = (0..theta0.len()).step_by(17).collect();
    idx.push(theta0.len() - 1);
    for &i in &idx {
        let mut tp = theta0.clone();
        tp[i] += H;
        let fp = { let (t, _, l) = build(&tp); t.value(l).scalar_value() };
        tp[i] = theta0[i] - H;
        let fm = { let (t, _, l) = build(&tp); t.value(l).scalar_value() };
        let fd = (fp - fm) / (2.0 * H);
        assert!(close(g[i], fd), "theta[{i}]: {} vs {fd}", g[i]);
    }
}
