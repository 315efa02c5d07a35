//! The `manifest.json` written into every output directory. It records
//! the inputs of the run and every file the run wrote, relative to the
//! directory.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tmholo::geometry::{Channel, SystemGeometry};

use crate::config::JobConfig;
use crate::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRun {
    pub channel: Channel,
    /// Per-frame optimizer seeds.
    pub seeds: Vec<u64>,
    pub holograms: Vec<String>,
    pub target_dir: String,
    pub loss_csv: String,
    pub final_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config: JobConfig,
    pub geometry: SystemGeometry,
    /// `(rows, cols)` of every target layer.
    pub target_shape: (usize, usize),
    pub channels: Vec<ChannelRun>,
    /// Every file written into the run directory, in write order.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Validation(format!("cannot read run manifest {}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| CliError::Validation(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner())))
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn channel(&self, channel: Channel) -> CliResult<&ChannelRun> {
        self.channels
            .iter()
            .find(|c| c.channel == channel)
            .ok_or_else(|| CliError::Validation(format!("run has no {channel} channel")))
    }

    /// Records `name` once, keeping first-write order.
    pub fn record(&mut self, name: impl Into<String>) {
        let name = name.into();
        if !self.outputs.contains(&name) {
            self.outputs.push(name);
        }
    }
}

/// Manifest of commands that do not start from a job config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputManifest {
    pub schema_version: u32,
    pub command: String,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
