//! IDX (MNIST/FMNIST) loader. Big-endian throughout, per the de-facto
//! format: magic, dims, raw u8 payload.

use std::fs;
use std::path::Path;

use scn_core::data::LabeledImageSet;

use crate::error::{Result, ToolError};

const MAGIC_IMAGES: u32 = 0x0000_0803;
const MAGIC_LABELS: u32 = 0x0000_0801;

fn be_u32(buf: &[u8], off: usize, what: &str) -> Result<u32> {
    let b: [u8; 4] = buf
        .get(off..off + 4)
        .ok_or_else(|| ToolError::Data(format!("{what}: truncated header at byte {off}")))?
        .try_into()
        .unwrap();
    Ok(u32::from_be_bytes(b))
}

struct IdxFile {
    dims: Vec<usize>,
    payload: Vec<u8>,
}

fn read_idx(path: &Path, expect_magic: u32) -> Result<IdxFile> {
    let name = path.display().to_string();
    let buf = fs::read(path).map_err(|e| ToolError::Data(format!("{name}: {e}")))?;
    let magic = be_u32(&buf, 0, &name)?;
    if magic != expect_magic {
        return Err(ToolError::Data(format!(
            "{name}: bad IDX magic {magic:#010x}, expected {expect_magic:#010x}"
        )));
    }
    let ndims = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(be_u32(&buf, 4 + 4 * d, &name)? as usize);
    }
    let data_off = 4 + 4 * ndims;
    let expected = data_off + dims.iter().product::<usize>();
    if buf.len() < expected {
        return Err(ToolError::Data(format!(
            "{name}: truncated payload, expected {expected} bytes, got {}",
            buf.len()
        )));
    }
    Ok(IdxFile {
        dims,
        payload: buf[data_off..expected].to_vec(),
    })
}

/// Load an image/label IDX pair into a grayscale set, pixels scaled to
/// [0, 1]. Counts must agree across the two files.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledImageSet> {
    let images = read_idx(images_path, MAGIC_IMAGES)?;
    let labels = read_idx(labels_path, MAGIC_LABELS)?;
    let [n, rows, cols] = images.dims[..] else {
        return Err(ToolError::Data(format!(
            "{}: expected 3 dims, got {:?}",
            images_path.display(),
            images.dims
        )));
    };
    if rows != cols {
        return Err(ToolError::Data(format!(
            "{}: non-square images {rows}x{cols}",
            images_path.display()
        )));
    }
    let ln = labels.dims.first().copied().unwrap_or(0);
    if ln != n {
        return Err(ToolError::Data(format!(
            "count mismatch: {n} images vs {ln} labels"
        )));
    }
    let classes = labels.payload.iter().copied().max().map_or(0, |m| m as usize + 1);
    let set = LabeledImageSet {
        p: rows,
        channels: 1,
        images: images.payload.iter().map(|&b| b as f32 / 255.0).collect(),
        labels: labels.payload,
        classes: classes.max(10),
        split: "idx".into(),
    };
    set.validate().map_err(|e| ToolError::Data(format!("{e:?}")))?;
    Ok(set)
}

/// Write a set back out as an IDX pair (round-trip and fixture helper).
pub fn write_idx(set: &LabeledImageSet, images_path: &Path, labels_path: &Path) -> Result<()> {
    if set.channels != 1 {
        return Err(ToolError::Config("IDX export is grayscale-only".into()));
    }
    let n = set.labels.len();
    let mut img = Vec::with_capacity(16 + n * set.p * set.p);
    img.extend_from_slice(&MAGIC_IMAGES.to_be_bytes());
    for d in [n, set.p, set.p] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    img.extend(set.images.iter().map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8));
    fs::write(images_path, img)?;

    let mut lab = Vec::with_capacity(8 + n);
    lab.extend_from_slice(&MAGIC_LABELS.to_be_bytes());
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    lab.extend_from_slice(&set.labels);
    fs::write(labels_path, lab)?;
    Ok(())
}
