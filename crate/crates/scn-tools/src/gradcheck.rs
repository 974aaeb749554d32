//! 64-bit finite-difference check of the full SCN training loss
//! (cross-entropy + cos² regularizer), every coordinate of both trainable
//! leaves. Shared by the CLI subcommand and the acceptance suite.

use scn_core::autodiff::Tape;
use scn_core::netspec::ArchSpec;
use scn_core::rng::SeedRng;
use scn_core::scn::{config_forward_tape, scn_forward_on, SCNModel};
use scn_core::tensor::Tensor;
use scn_core::transforms::{encode_alpha, AlphaParam, TransformFamily};

pub const FD_H: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Default)]
pub struct GradcheckReport {
    pub checked: usize,
    pub failures: usize,
    pub worst_rel: f64,
    pub worst_abs: f64,
}

impl GradcheckReport {
    pub fn ok(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

/// Tiny rotation SCN: MLP 8 wide, 1 hidden layer, 8×8 inputs, D=3,
/// batch of 4.
pub fn run(seed: u64) -> GradcheckReport {
    let arch = ArchSpec::mlp(8, 1, (8, 1), 10);
    let scn = SCNModel::<f64>::init(TransformFamily::Rotation2D, arch, 3, seed).unwrap();
    let mut rng = SeedRng::new(seed ^ 0xabcd);
    let batch_data: Vec<f64> = (0..4 * 64).map(|_| rng.uniform(0.0, 1.0)).collect();
    let labels = [0usize, 3, 7, 9];
    let alpha1 = AlphaParam::rotation(0.8);
    let alpha2 = AlphaParam::rotation(4.0);

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
        let enc2 = encode_alpha(&alpha2).unwrap();
        let enc2n = tape.leaf(Tensor::new(vec![1, 2], enc2).unwrap(), false);
        let beta2 = config_forward_tape(&mut tape, 2, 3, cfg_leaf, enc2n).unwrap();
        let reg = tape.cosine_sim_sq(beta1, beta2).unwrap();
        let loss = tape.add(ce, reg).unwrap();
        (tape, cfg_leaf, bank_leaf, loss)
    };

    let cfg0 = scn.config.params.clone();
    let bank0 = scn.bank.values.clone();
    let (tape, cfg_leaf, bank_leaf, loss) = build(&cfg0, &bank0);
    let grads = tape.backward(loss).unwrap();
    let gc = grads.get(cfg_leaf).unwrap().data.clone();
    let gb = grads.get(bank_leaf).unwrap().data.clone();

    let mut report = GradcheckReport::default();
    let mut check = |x0: &[f64], analytic: &[f64], eval: &dyn Fn(&[f64]) -> f64| {
        for i in 0..x0.len() {
            let mut xp = x0.to_vec();
            xp[i] = x0[i] + FD_H;
            let fp = eval(&xp);
            xp[i] = x0[i] - FD_H;
            let fm = eval(&xp);
            let fd = (fp - fm) / (2.0 * FD_H);
            let abs = (analytic[i] - fd).abs();
            let rel = abs / fd.abs().max(analytic[i].abs()).max(1e-300);
            report.checked += 1;
            report.worst_abs = report.worst_abs.max(abs);
            if abs > ABS_TOL {
                report.worst_rel = report.worst_rel.max(rel);
                if rel > REL_TOL {
                    report.failures += 1;
                }
            }
        }
    };
    check(&cfg0, &gc, &|v| {
        let (t, .., l) = build(v, &bank0);
        t.value(l).scalar_value()
    });
    check(&bank0, &gb, &|v| {
        let (t, .., l) = build(&cfg0, v);
        t.value(l).scalar_value()
    });
    report
}
