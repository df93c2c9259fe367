use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const FORMAT: &str = "egoloc-manifest";

/// Record of one command run; enough to re-execute it.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Command-specific summary values.
    pub summary: Value,
    pub wall_time_s: f64,
}

pub struct Recorder {
    start: Instant,
    manifest: Manifest,
}

impl Recorder {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Recorder {
            start: Instant::now(),
            manifest: Manifest {
                format: FORMAT.into(),
                tool: "egoloc".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                args: std::env::args().skip(1).collect(),
                config: serde_json::to_value(config)?,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                seeds: BTreeMap::new(),
                summary: Value::Null,
                wall_time_s: 0.0,
            },
        })
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.manifest.inputs.insert(name.into(), path.display().to_string());
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.manifest.outputs.insert(name.into(), path.display().to_string());
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.into(), seed);
    }

    pub fn summary(&mut self, value: impl Serialize) -> Result<()> {
        self.manifest.summary = serde_json::to_value(value)?;
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.manifest.wall_time_s = self.start.elapsed().as_secs_f64();
        std::fs::write(path, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        Ok(())
    }
}
