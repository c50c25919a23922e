//! Artifact writing and the per-run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{render, RunConfig};
use crate::error::CliError;

pub const MANIFEST_SCHEMA: &str = "normsol.manifest/1";

pub struct Outputs {
    dir: PathBuf,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_digest: String,
    config: &'a crate::config::FlatConfig,
    rng_seed: u64,
    threads: usize,
    wall_time_s: f64,
    status: &'a str,
    error: Option<String>,
    exit_code: u8,
    artifacts: &'a [String],
}

pub fn config_digest(cfg_text: &str) -> String {
    hex::encode(Sha256::digest(cfg_text.as_bytes()))
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), data)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Writes `config.toml` and `manifest.json`; called once at the end of a run.
    pub fn finish(
        mut self,
        command: &str,
        cfg: &RunConfig,
        threads: usize,
        wall_time_s: f64,
        outcome: Result<(), &CliError>,
    ) -> Result<(), CliError> {
        let text = render(&cfg.raw);
        self.bytes("config.toml", text.as_bytes())?;
        // Where the artifacts go and how many workers ran do not change them.
        let mut computed = cfg.raw.clone();
        computed.remove("output.dir");
        computed.remove("threads");
        let (status, error, exit_code) = match outcome {
            Ok(()) => ("ok", None, 0),
            Err(e) => ("error", Some(e.to_string()), e.exit_code()),
        };
        let manifest = Manifest {
            schema: MANIFEST_SCHEMA,
            tool: "normsol",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_digest: config_digest(&render(&computed)),
            config: &cfg.raw,
            rng_seed: cfg.rng_seed,
            threads,
            wall_time_s,
            status,
            error,
            exit_code,
            artifacts: &self.artifacts,
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        fs::write(self.dir.join("manifest.json"), json)?;
        Ok(())
    }
}
