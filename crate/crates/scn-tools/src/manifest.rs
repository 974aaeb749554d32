//! Per-run manifest, written atomically at run end.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Resolved config, flattened.
    pub config: BTreeMap<String, String>,
    pub code_version: String,
    pub wall_clock_secs: f64,
    /// Every file this run produced, relative to the manifest's dir.
    pub artifacts: Vec<String>,
    pub final_metrics: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(config: &Config, started: Instant) -> Self {
        RunManifest {
            config: config.entries().clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_secs: started.elapsed().as_secs_f64(),
            artifacts: Vec::new(),
            final_metrics: BTreeMap::new(),
        }
    }

    pub fn artifact(&mut self, name: impl ToString) {
        self.artifacts.push(name.to_string());
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.final_metrics.insert(name.to_string(), value);
    }

    /// Write to a temp file in the target dir, then rename into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, json)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}
