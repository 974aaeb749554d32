//! SCND binary container for generated datasets.
//!
//! Layout: magic "SCND" | u32 LE header length | JSON header |
//! little-endian f32 payload | u8 labels.

use std::fs;
use std::path::Path;

use scn_core::data::{LabeledCloudSet, LabeledImageSet};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ToolError};

const MAGIC: &[u8; 4] = b"SCND";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: String,
    /// `[p, p, channels]` for images, `[n_points, 3]` for clouds.
    shape: Vec<usize>,
    count: usize,
    classes: usize,
    #[serde(default)]
    split: String,
}

/// Either modality, as stored on disk.
#[derive(Debug, Clone)]
pub enum Dataset {
    Images(LabeledImageSet),
    Clouds(LabeledCloudSet),
}

impl Dataset {
    pub fn as_images(&self) -> Result<&LabeledImageSet> {
        match self {
            Dataset::Images(s) => Ok(s),
            Dataset::Clouds(_) => Err(ToolError::Data("expected an image container".into())),
        }
    }

    pub fn as_clouds(&self) -> Result<&LabeledCloudSet> {
        match self {
            Dataset::Clouds(s) => Ok(s),
            Dataset::Images(_) => Err(ToolError::Data("expected a cloud container".into())),
        }
    }
}

fn write(path: &Path, header: &Header, floats: &[f32], labels: &[u8]) -> Result<()> {
    let hjson = serde_json::to_vec(header)?;
    let mut buf = Vec::with_capacity(8 + hjson.len() + floats.len() * 4 + labels.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(hjson.len() as u32).to_le_bytes());
    buf.extend_from_slice(&hjson);
    for &f in floats {
        buf.extend_from_slice(&f.to_le_bytes());
    }
    buf.extend_from_slice(labels);
    fs::write(path, buf)?;
    Ok(())
}

pub fn save_images(set: &LabeledImageSet, path: &Path) -> Result<()> {
    let header = Header {
        kind: "images".into(),
        shape: vec![set.p, set.p, set.channels],
        count: set.labels.len(),
        classes: set.classes,
        split: set.split.clone(),
    };
    write(path, &header, &set.images, &set.labels)
}

pub fn save_clouds(set: &LabeledCloudSet, path: &Path) -> Result<()> {
    let header = Header {
        kind: "clouds".into(),
        shape: vec![set.n_points, 3],
        count: set.labels.len(),
        classes: set.classes,
        split: String::new(),
    };
    write(path, &header, &set.clouds, &set.labels)
}

pub fn load(path: &Path) -> Result<Dataset> {
    let name = path.display().to_string();
    let buf = fs::read(path).map_err(|e| ToolError::Data(format!("{name}: {e}")))?;
    if buf.len() < 8 || &buf[..4] != MAGIC {
        return Err(ToolError::Data(format!("{name}: not an SCND container")));
    }
    let hlen = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let hend = 8 + hlen;
    let header: Header = serde_json::from_slice(
        buf.get(8..hend)
            .ok_or_else(|| ToolError::Data(format!("{name}: truncated header")))?,
    )?;
    let per: usize = header.shape.iter().product();
    let fbytes = header.count * per * 4;
    let expected = hend + fbytes + header.count;
    if buf.len() < expected {
        return Err(ToolError::Data(format!(
            "{name}: truncated payload, expected {expected} bytes, got {}",
            buf.len()
        )));
    }
    let floats: Vec<f32> = buf[hend..hend + fbytes]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = buf[hend + fbytes..expected].to_vec();
    match header.kind.as_str() {
        "images" => {
            let [p, p2, channels] = header.shape[..] else {
                return Err(ToolError::Data(format!("{name}: bad image shape")));
            };
            if p != p2 {
                return Err(ToolError::Data(format!("{name}: non-square images")));
            }
            let set = LabeledImageSet {
                p,
                channels,
                images: floats,
                labels,
                classes: header.classes,
                split: header.split,
            };
            set.validate().map_err(|e| ToolError::Data(format!("{e:?}")))?;
            Ok(Dataset::Images(set))
        }
        "clouds" => {
            let [n_points, three] = header.shape[..] else {
                return Err(ToolError::Data(format!("{name}: bad cloud shape")));
            };
            if three != 3 {
                return Err(ToolError::Data(format!("{name}: clouds must be Nx3")));
            }
            Ok(Dataset::Clouds(LabeledCloudSet {
                n_points,
                clouds: floats,
                labels,
                classes: header.classes,
            }))
        }
        other => Err(ToolError::Data(format!("{name}: unknown kind {other:?}"))),
    }
}
