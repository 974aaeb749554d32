//! Plain-text point clouds: one "x y z" float triple per line.

use std::fs;
use std::path::Path;

use crate::error::{Result, ToolError};

pub fn read_cloud(path: &Path) -> Result<Vec<[f32; 3]>> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| ToolError::Data(format!("{name}: {e}")))?;
    let mut pts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<f32>);
        let (x, y, z) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), Some(Ok(z)), None) => (x, y, z),
            _ => {
                return Err(ToolError::Data(format!(
                    "{name}:{}: expected three floats, got {line:?}",
                    lineno + 1
                )))
            }
        };
        pts.push([x, y, z]);
    }
    if pts.is_empty() {
        return Err(ToolError::Data(format!("{name}: empty point cloud")));
    }
    Ok(pts)
}

pub fn write_cloud(points: &[[f32; 3]], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(points.len() * 24);
    for p in points {
        out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    fs::write(path, out)?;
    Ok(())
}
