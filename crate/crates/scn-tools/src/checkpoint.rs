//! SCN1 model checkpoints.
//!
//! Layout: magic "SCN1" | u32 LE header length | JSON header |
//! f32 LE config-net params | f32 LE θ₁ … θ_D. Round-trips bit-exactly.

use std::fs;
use std::path::Path;

use scn_core::netspec::{self, ArchKind, ArchSpec};
use scn_core::scn::{config_param_count, ConfigNet, ParameterBank, SCNModel, TrainMeta};
use scn_core::transforms::TransformFamily;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ToolError};

const MAGIC: &[u8; 4] = b"SCN1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArchHeader {
    kind: String,
    width: usize,
    depth: usize,
    input: [usize; 2],
    classes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    family: String,
    /// How α is conditioned for the config net; fixed per family.
    encoding: String,
    /// Hidden activation of the config net.
    config_activation: String,
    arch: ArchHeader,
    dims: usize,
    /// Flat parameter count of one base model.
    len: usize,
    seed: u64,
    lr: f64,
    batch: usize,
    epochs: usize,
    lambda_cos: f64,
    lambda_ent: f64,
    iscn: bool,
}

fn encoding_name(family: TransformFamily) -> &'static str {
    match family {
        TransformFamily::Rotation2D => "cos-sin",
        TransformFamily::Rotation3DProject => "cos-sin-per-angle",
        TransformFamily::Translation => "minmax[-1,1]",
        _ => "minmax[-1,1]",
    }
}

fn arch_kind_name(kind: ArchKind) -> &'static str {
    match kind {
        ArchKind::Mlp => "mlp",
        ArchKind::ShallowCnn => "shallow_cnn",
        ArchKind::TiCnn => "ti_cnn",
    }
}

fn arch_kind_from(s: &str) -> Result<ArchKind> {
    Ok(match s {
        "mlp" => ArchKind::Mlp,
        "shallow_cnn" => ArchKind::ShallowCnn,
        "ti_cnn" => ArchKind::TiCnn,
        other => return Err(ToolError::Data(format!("unknown arch kind {other:?}"))),
    })
}

pub fn save(model: &SCNModel<f32>, path: &Path) -> Result<()> {
    let header = Header {
        family: model.family.name().into(),
        encoding: encoding_name(model.family).into(),
        config_activation: "relu".into(),
        arch: ArchHeader {
            kind: arch_kind_name(model.arch.kind).into(),
            width: model.arch.width,
            depth: model.arch.depth,
            input: [model.arch.input.0, model.arch.input.1],
            classes: model.arch.classes,
        },
        dims: model.bank.dims,
        len: model.bank.len,
        seed: model.meta.seed,
        lr: model.meta.lr,
        batch: model.meta.batch,
        epochs: model.meta.epochs,
        lambda_cos: model.meta.lambda_cos,
        lambda_ent: model.meta.lambda_ent,
        iscn: model.meta.iscn,
    };
    let hjson = serde_json::to_vec(&header)?;
    let mut buf =
        Vec::with_capacity(8 + hjson.len() + (model.config.params.len() + model.bank.values.len()) * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(hjson.len() as u32).to_le_bytes());
    buf.extend_from_slice(&hjson);
    for &v in &model.config.params {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &v in &model.bank.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<SCNModel<f32>> {
    let name = path.display().to_string();
    let buf = fs::read(path).map_err(|e| ToolError::Data(format!("{name}: {e}")))?;
    if buf.len() < 8 || &buf[..4] != MAGIC {
        return Err(ToolError::Data(format!("{name}: not an SCN1 checkpoint")));
    }
    let hlen = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let hend = 8 + hlen;
    let header: Header = serde_json::from_slice(
        buf.get(8..hend)
            .ok_or_else(|| ToolError::Data(format!("{name}: truncated header")))?,
    )?;

    let family = TransformFamily::from_name(&header.family)
        .ok_or_else(|| ToolError::Data(format!("{name}: unknown family {:?}", header.family)))?;
    let arch = ArchSpec {
        kind: arch_kind_from(&header.arch.kind)?,
        width: header.arch.width,
        depth: header.arch.depth,
        input: (header.arch.input[0], header.arch.input[1]),
        classes: header.arch.classes,
    };
    arch.validate().map_err(|e| ToolError::Data(format!("{e:?}")))?;
    let len = netspec::param_count(&arch).map_err(|e| ToolError::Data(format!("{e:?}")))?;
    if len != header.len {
        return Err(ToolError::Data(format!(
            "{name}: header says L={}, arch implies {len}",
            header.len
        )));
    }
    let s_prime = family.encoding_size();
    let n_cfg = config_param_count(s_prime, header.dims);
    let n_bank = header.dims * len;
    let expected = hend + (n_cfg + n_bank) * 4;
    if buf.len() < expected {
        return Err(ToolError::Data(format!(
            "{name}: truncated blobs, expected {expected} bytes, got {}",
            buf.len()
        )));
    }
    let mut floats = buf[hend..expected]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let config_params: Vec<f32> = floats.by_ref().take(n_cfg).collect();
    let bank_values: Vec<f32> = floats.collect();

    let model = SCNModel {
        family,
        arch,
        config: ConfigNet {
            input: s_prime,
            dims: header.dims,
            params: config_params,
        },
        bank: ParameterBank {
            dims: header.dims,
            len,
            values: bank_values,
        },
        meta: TrainMeta {
            seed: header.seed,
            lr: header.lr,
            batch: header.batch,
            epochs: header.epochs,
            lambda_cos: header.lambda_cos,
            lambda_ent: header.lambda_ent,
            iscn: header.iscn,
        },
    };
    model.validate().map_err(|e| ToolError::Data(format!("{e:?}")))?;
    Ok(model)
}
