//! Output directory handling and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.toml";

pub struct Run {
    pub cfg: RunConfig,
    pub dir: PathBuf,
    pub hash: String,
    outputs: Vec<String>,
    failure: Option<CliError>,
}

#[derive(Serialize)]
struct ManifestHeader<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: &'a str,
    seed: u64,
    wall_time_s: f64,
    status: &'a str,
    outputs: &'a [String],
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest: ManifestHeader<'a>,
    config: &'a RunConfig,
}

impl Run {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let dir = PathBuf::from(&cfg.out_dir);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))?;
        let hash = cfg.sha256();
        Ok(Self { cfg, dir, hash, outputs: Vec::new(), failure: None })
    }

    /// First line of every CSV output (without the leading `# `).
    pub fn comment(&self) -> String {
        format!("config_sha256={} command={}", self.hash, self.cfg.command)
    }

    /// Creates `name` in the output directory and records it.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(BufWriter::new(f))
    }

    /// Creates a CSV file whose first line is the config comment.
    pub fn create_csv(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let mut w = self.create(name)?;
        writeln!(w, "# {}", self.comment())?;
        Ok(w)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::new("io", e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Marks the run as failed; outputs and manifest are still written.
    pub fn fail(&mut self, e: CliError) {
        self.failure = Some(e);
    }

    pub fn finish(mut self, wall_time_s: f64) -> Result<(), CliError> {
        let status = if self.failure.is_some() { "failed" } else { "ok" };
        let m = Manifest {
            manifest: ManifestHeader {
                command: &self.cfg.command,
                version: env!("CARGO_PKG_VERSION"),
                config_sha256: &self.hash,
                seed: self.cfg.master_seed,
                wall_time_s,
                status,
                outputs: &self.outputs,
            },
            config: &self.cfg,
        };
        let text = toml::to_string(&m).map_err(|e| CliError::new("io", e.to_string()))?;
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
        match self.failure.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}
