use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use scn_core::data;
use scn_core::diag;
use scn_core::netspec::ArchSpec;
use scn_core::scn::SCNModel;
use scn_core::search::SearchConfig;
use scn_core::train::{
    train_baseline, train_scn, transform_batch, BaselineKind, EvalModel, HyperParams, TrainData,
};
use scn_core::transforms::{AlphaParam, TransformFamily};

use scn_tools::accept::{self, Profile};
use scn_tools::config::Config;
use scn_tools::error::{Result, ToolError};
use scn_tools::manifest::RunManifest;
use scn_tools::{checkpoint, container, gradcheck, history, idx, sweep};

#[derive(Parser)]
#[command(name = "scn", about = "Subspace-configurable network experiment driver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// SCND container to load.
    #[arg(long)]
    data: Option<PathBuf>,
    /// IDX image/label pair (images first).
    #[arg(long, num_args = 2)]
    idx: Option<Vec<PathBuf>>,
    /// Generate on the fly: shapes2d | clouds3d.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 14_000)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    data_seed: u64,
    /// Train fraction when splitting generated/loaded data.
    #[arg(long, default_value_t = 6.0 / 7.0)]
    train_frac: f64,
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// rotation2d | scaling | translation | brightness | contrast |
    /// saturation | sharpness | rotation3d
    #[arg(long)]
    family: String,
    /// mlp:WxL | shallow_cnn:WxL | ti_cnn
    #[arg(long, default_value = "mlp:32x1")]
    arch: String,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda_cos: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Optional key=value config file; CLI flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// key=value overrides applied after the config file.
    #[arg(long = "set")]
    sets: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset container.
    GenData {
        #[arg(long, default_value = "shapes2d")]
        synthetic: String,
        #[arg(long, default_value_t = 14_000)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train an SCN; writes an SCN1 checkpoint plus history.
    TrainScn {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 3)]
        dims: usize,
        /// Add the I-SCN entropy terms to the loss.
        #[arg(long)]
        iscn: bool,
    },
    /// Train a baseline: one4all | one4one | inverse.
    TrainBaseline {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        kind: String,
        /// Fixed α for one4one, comma-separated native components.
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Accuracy of a checkpoint at one α.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 512)]
        batch: usize,
    },
    /// Accuracy sweep over the family's default grid; writes CSV.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 512)]
        batch: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// β(α) over the family's default grid plus diagnostics; writes CSV+JSON.
    ExportBeta {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Entropy-minimizing α search on one transformed batch.
    SearchAlpha {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// True α applied to the batch, comma-separated.
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = 100)]
        restarts: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Finite-difference check of the full training-loss gradient.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Run the acceptance suite; nonzero exit on any failure.
    Accept {
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_family(name: &str) -> Result<TransformFamily> {
    TransformFamily::from_name(name)
        .ok_or_else(|| ToolError::Config(format!("unknown family {name:?}")))
}

fn parse_arch(spec: &str, input: (usize, usize), classes: usize) -> Result<ArchSpec> {
    let (kind, dims) = spec.split_once(':').unwrap_or((spec, "32x1"));
    let (w, l) = dims
        .split_once('x')
        .ok_or_else(|| ToolError::Config(format!("arch dims {dims:?}: want WxL")))?;
    let w: usize = w.parse().map_err(|_| ToolError::Config(format!("bad width {w:?}")))?;
    let l: usize = l.parse().map_err(|_| ToolError::Config(format!("bad depth {l:?}")))?;
    Ok(match kind {
        "mlp" => ArchSpec::mlp(w, l, input, classes),
        "shallow_cnn" => ArchSpec::shallow_cnn(w, l, classes),
        "ti_cnn" => ArchSpec::ti_cnn(input, classes),
        other => return Err(ToolError::Config(format!("unknown arch {other:?}"))),
    })
}

fn parse_alpha(family: TransformFamily, s: &str) -> Result<AlphaParam> {
    let raw: std::result::Result<Vec<f64>, _> = s.split(',').map(str::trim).map(str::parse).collect();
    let raw = raw.map_err(|_| ToolError::Config(format!("bad alpha {s:?}")))?;
    if raw.len() != family.arity() {
        return Err(ToolError::Config(format!(
            "alpha {s:?} has {} components, {} expects {}",
            raw.len(),
            family.name(),
            family.arity()
        )));
    }
    let alpha = AlphaParam { family, raw };
    if !alpha.in_domain() {
        return Err(ToolError::Config(format!("alpha {s:?} outside the {} domain", family.name())));
    }
    Ok(alpha)
}

fn default_grid(family: TransformFamily) -> Vec<AlphaParam> {
    match family {
        TransformFamily::Rotation2D => diag::rotation_grid_deg(1.0),
        TransformFamily::Scaling => diag::scaling_grid(0.05),
        TransformFamily::Translation => diag::translation_grid(),
        TransformFamily::Rotation3DProject => diag::euler_grid(None),
        f => {
            // factor families share the [0.2, 2.0] domain
            let mut g = Vec::new();
            let mut v: f64 = 0.2;
            while v <= 2.0 + 1e-9 {
                g.push(AlphaParam::factor(f, v.min(2.0)));
                v += 0.05;
            }
            g
        }
    }
}

enum Loaded {
    Images(data::LabeledImageSet),
    Clouds(data::LabeledCloudSet),
}

impl Loaded {
    fn train_data(&self) -> TrainData<'_> {
        match self {
            Loaded::Images(s) => TrainData::Images(s),
            Loaded::Clouds(s) => TrainData::Clouds(s),
        }
    }
}

fn load_data(args: &DataArgs) -> Result<(Loaded, Loaded)> {
    if let Some(path) = &args.data {
        return match container::load(path)? {
            container::Dataset::Images(s) => {
                let (tr, te) = data::split(&s, args.train_frac, args.data_seed)?;
                Ok((Loaded::Images(tr), Loaded::Images(te)))
            }
            container::Dataset::Clouds(s) => {
                let (tr, te) = data::split_clouds(&s, args.train_frac, args.data_seed)?;
                Ok((Loaded::Clouds(tr), Loaded::Clouds(te)))
            }
        };
    }
    if let Some(pair) = &args.idx {
        let s = idx::load_idx(&pair[0], &pair[1])?;
        let (tr, te) = data::split(&s, args.train_frac, args.data_seed)?;
        return Ok((Loaded::Images(tr), Loaded::Images(te)));
    }
    match args.synthetic.as_deref() {
        Some("shapes2d") => {
            let s = data::gen_shapes2d(args.n, args.data_seed)?;
            let (tr, te) = data::split(&s, args.train_frac, args.data_seed)?;
            Ok((Loaded::Images(tr), Loaded::Images(te)))
        }
        Some("clouds3d") => {
            let s = data::gen_clouds3d(args.n, args.data_seed)?;
            let (tr, te) = data::split_clouds(&s, args.train_frac, args.data_seed)?;
            Ok((Loaded::Clouds(tr), Loaded::Clouds(te)))
        }
        Some(other) => Err(ToolError::Config(format!("unknown synthetic source {other:?}"))),
        None => Err(ToolError::Config("no data source: pass --data, --idx or --synthetic".into())),
    }
}

/// Resolve train flags against an optional config file; flags act as
/// overrides and the effective set is echoed to the output dir.
fn resolve_train_config(t: &TrainArgs, extra: &[(&str, String)]) -> Result<Config> {
    let mut cfg = match &t.config {
        Some(path) => Config::from_file(path)?,
        None => Config::new(),
    };
    cfg.set("family", &t.family);
    cfg.set("arch", &t.arch);
    cfg.set("epochs", t.epochs);
    cfg.set("lr", t.lr);
    cfg.set("batch", t.batch);
    cfg.set("lambda_cos", t.lambda_cos);
    cfg.set("seed", t.seed);
    cfg.set("train_frac", t.data.train_frac);
    cfg.set("data_seed", t.data.data_seed);
    if let Some(s) = &t.data.synthetic {
        cfg.set("synthetic", s);
        cfg.set("n", t.data.n);
    }
    for (k, v) in extra {
        cfg.set(k, v);
    }
    cfg.apply_overrides(&t.sets)?;
    Ok(cfg)
}

fn hyper_from(cfg: &Config) -> Result<HyperParams> {
    Ok(HyperParams {
        lr: cfg.f64_or("lr", 1e-3)?,
        batch: cfg.usize_or("batch", 64)?,
        epochs: cfg.usize_or("epochs", 30)?,
        seed: cfg.u64_or("seed", 7)?,
        lambda_cos: cfg.f64_or("lambda_cos", 1.0)?,
        ..HyperParams::default()
    })
}

fn finish_run(out: &Path, cfg: &Config, mut manifest: RunManifest) -> Result<()> {
    std::fs::create_dir_all(out)?;
    cfg.write_resolved(&out.join("resolved.cfg"))?;
    manifest.artifact("resolved.cfg");
    manifest.write_atomic(&out.join("manifest.json"))?;
    println!("{}", cfg.render().trim_end());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenData { synthetic, n, seed, out } => {
            let started = Instant::now();
            std::fs::create_dir_all(&out)?;
            let mut cfg = Config::new();
            cfg.set("synthetic", &synthetic);
            cfg.set("n", n);
            cfg.set("seed", seed);
            let file = format!("{synthetic}.scnd");
            match synthetic.as_str() {
                "shapes2d" => container::save_images(&data::gen_shapes2d(n, seed)?, &out.join(&file))?,
                "clouds3d" => container::save_clouds(&data::gen_clouds3d(n, seed)?, &out.join(&file))?,
                other => return Err(ToolError::Config(format!("unknown synthetic source {other:?}"))),
            }
            let mut m = RunManifest::new(&cfg, started);
            m.artifact(&file);
            m.metric("count", n as f64);
            finish_run(&out, &cfg, m)
        }
        Cmd::TrainScn { train, dims, iscn } => {
            let started = Instant::now();
            let cfg = resolve_train_config(
                &train,
                &[("dims", dims.to_string()), ("iscn", iscn.to_string())],
            )?;
            let family = parse_family(cfg.require("family")?)?;
            let (tr, te) = load_data(&train.data)?;
            let (trd, ted) = (tr.train_data(), te.train_data());
            let arch = parse_arch(cfg.require("arch")?, trd.input_spec(), trd.classes())?;
            let hp = hyper_from(&cfg)?;
            let dims = cfg.usize_or("dims", dims)?;
            let iscn = cfg.bool_or("iscn", iscn)?;
            let mut model = SCNModel::<f32>::init(family, arch, dims, hp.seed)?;
            let hist = train_scn(&mut model, &trd, Some(&ted), &hp, iscn)?;
            std::fs::create_dir_all(&train.out)?;
            checkpoint::save(&model, &train.out.join("model.scn1"))?;
            history::write_history_jsonl(&hist, &train.out.join("history.jsonl"))?;
            history::write_history_csv(&hist, &train.out.join("history.csv"))?;
            let mut m = RunManifest::new(&cfg, started);
            for a in ["model.scn1", "history.jsonl", "history.csv"] {
                m.artifact(a);
            }
            if let Some(e) = hist.epochs.last() {
                m.metric("final_loss", e.loss);
                m.metric("final_test_acc", e.test_acc);
            }
            finish_run(&train.out, &cfg, m)
        }
        Cmd::TrainBaseline { train, kind, alpha } => {
            let started = Instant::now();
            let cfg = resolve_train_config(&train, &[("baseline", kind.clone())])?;
            let family = parse_family(cfg.require("family")?)?;
            let (tr, te) = load_data(&train.data)?;
            let (trd, ted) = (tr.train_data(), te.train_data());
            let arch = parse_arch(cfg.require("arch")?, trd.input_spec(), trd.classes())?;
            let hp = hyper_from(&cfg)?;
            let bk = match kind.as_str() {
                "one4all" => BaselineKind::One4All,
                "inverse" => BaselineKind::Inverse,
                "one4one" => {
                    let a = alpha
                        .ok_or_else(|| ToolError::Config("one4one needs --alpha".into()))?;
                    BaselineKind::One4One(parse_alpha(family, &a)?)
                }
                other => return Err(ToolError::Config(format!("unknown baseline {other:?}"))),
            };
            let (theta, hist) = train_baseline::<f32>(&bk, &arch, family, &trd, Some(&ted), &hp)?;
            // store baselines as degenerate D=1 checkpoints
            let mut model = SCNModel::<f32>::init(family, arch, 1, hp.seed)?;
            model.bank.values = theta;
            std::fs::create_dir_all(&train.out)?;
            checkpoint::save(&model, &train.out.join("model.scn1"))?;
            history::write_history_jsonl(&hist, &train.out.join("history.jsonl"))?;
            history::write_history_csv(&hist, &train.out.join("history.csv"))?;
            let mut m = RunManifest::new(&cfg, started);
            for a in ["model.scn1", "history.jsonl", "history.csv"] {
                m.artifact(a);
            }
            if let Some(e) = hist.epochs.last() {
                m.metric("final_loss", e.loss);
                m.metric("final_test_acc", e.test_acc);
            }
            finish_run(&train.out, &cfg, m)
        }
        Cmd::Eval { checkpoint: ck, data: dargs, alpha, batch } => {
            let model = checkpoint::load(&ck)?;
            let (_, te) = load_data(&dargs)?;
            let a = parse_alpha(model.family, &alpha)?;
            let table = scn_core::train::evaluate(
                &EvalModel::Scn(&model),
                &te.train_data(),
                core::slice::from_ref(&a),
                batch,
            )?;
            println!("accuracy at {:?}: {:.4}", a.raw, table.rows[0].1);
            Ok(())
        }
        Cmd::Sweep { checkpoint: ck, data: dargs, batch, out } => {
            let started = Instant::now();
            let model = checkpoint::load(&ck)?;
            let (_, te) = load_data(&dargs)?;
            let grid = default_grid(model.family);
            let table = sweep(&EvalModel::Scn(&model), &te.train_data(), &grid, batch)?;
            std::fs::create_dir_all(&out)?;
            history::write_sweep_csv(&table, &out.join("sweep.csv"))?;
            let mut cfg = Config::new();
            cfg.set("checkpoint", ck.display());
            cfg.set("batch", batch);
            let mut m = RunManifest::new(&cfg, started);
            m.artifact("sweep.csv");
            m.metric("mean_accuracy", table.mean);
            m.metric("min_accuracy", table.min);
            m.metric("max_accuracy", table.max);
            finish_run(&out, &cfg, m)
        }
        Cmd::ExportBeta { checkpoint: ck, out } => {
            let started = Instant::now();
            let model = checkpoint::load(&ck)?;
            let grid = default_grid(model.family);
            let curve = diag::export_beta_curve(&model, &grid)?;
            let report = diag::continuity_probe(&curve)?;
            let deg = diag::degeneracy_index(&curve)?;
            std::fs::create_dir_all(&out)?;
            history::write_beta_csv(&curve, &out.join("beta.csv"))?;
            history::write_report_json(&report, deg, &out.join("beta-report.json"))?;
            let mut cfg = Config::new();
            cfg.set("checkpoint", ck.display());
            let mut m = RunManifest::new(&cfg, started);
            m.artifact("beta.csv");
            m.artifact("beta-report.json");
            m.metric("degeneracy_index", deg);
            m.metric("max_step_inf", report.max_step_inf);
            finish_run(&out, &cfg, m)
        }
        Cmd::SearchAlpha { checkpoint: ck, data: dargs, alpha, batch_size, restarts, seed, out } => {
            let started = Instant::now();
            let model = checkpoint::load(&ck)?;
            let (_, te) = load_data(&dargs)?;
            let ted = te.train_data();
            let a = parse_alpha(model.family, &alpha)?;
            let idx: Vec<usize> = (0..batch_size.min(ted.len())).collect();
            let (batch, _) = transform_batch::<f32>(&ted, &idx, &a)?;
            let scfg = SearchConfig { restarts, seed, ..SearchConfig::default() };
            let res = scn_core::search::search_alpha(&model, &batch, &scfg)?;
            std::fs::create_dir_all(&out)?;
            history::write_search_csv(&res, &out.join("search.csv"))?;
            println!(
                "true α {:?}, found α {:?}, entropy {:.4} (restart {})",
                a.raw, res.alpha.raw, res.entropy, res.best_restart
            );
            let mut cfg = Config::new();
            cfg.set("checkpoint", ck.display());
            cfg.set("alpha", &alpha);
            cfg.set("restarts", restarts);
            cfg.set("seed", seed);
            let mut m = RunManifest::new(&cfg, started);
            m.artifact("search.csv");
            m.metric("entropy", res.entropy);
            finish_run(&out, &cfg, m)
        }
        Cmd::Gradcheck { seed } => {
            let rep = gradcheck::run(seed);
            println!(
                "gradcheck: {} coordinates, {} failures, worst abs {:.3e}",
                rep.checked, rep.failures, rep.worst_abs
            );
            if rep.ok() {
                Ok(())
            } else {
                Err(ToolError::Numeric(format!("{} gradient mismatches", rep.failures)))
            }
        }
        Cmd::Accept { profile, out } => {
            let p = Profile::by_name(&profile, out)?;
            let results = accept::run_all(&p, |r| println!("{}", r.line()));
            let failed: Vec<usize> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
            if failed.is_empty() {
                println!("acceptance: all {} criteria passed", results.len());
                Ok(())
            } else {
                Err(ToolError::Acceptance(format!("criteria failed: {failed:?}")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
