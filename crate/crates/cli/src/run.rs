//! Output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rfpulse::io::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_COPY: &str = "config.toml";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// sha256 of `config.toml` in the output directory.
    pub config_hash: String,
    pub rng_seeds: Vec<u64>,
    pub threads: usize,
    pub inputs: Vec<FileEntry>,
    /// Paths relative to the output directory, in write order.
    pub outputs: Vec<FileEntry>,
    pub timings: Vec<Timing>,
    pub versions: BTreeMap<String, String>,
    pub status: String,
    pub exit_code: i32,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Run {
    pub out: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    pub fn new(command: &str, out: &Path, config_toml: &str, seed: u64, threads: usize) -> Result<Run, CliError> {
        std::fs::create_dir_all(out)?;
        let versions = BTreeMap::from([
            ("rfpulse".to_string(), rfpulse::VERSION.to_string()),
            ("rfpulse-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        let mut run = Run {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config_hash: sha256_hex(config_toml.as_bytes()),
                rng_seeds: vec![seed],
                threads,
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
                versions,
                status: "running".into(),
                exit_code: 0,
                error: None,
                warnings: Vec::new(),
            },
            started: Instant::now(),
        };
        run.write(CONFIG_COPY, config_toml.as_bytes())?;
        Ok(run)
    }

    /// Records an input file and returns its bytes.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read input {}: {e}", path.display())))?;
        let entry = FileEntry { path: path.display().to_string(), sha256: sha256_hex(&bytes) };
        if !self.manifest.inputs.iter().any(|e| e.path == entry.path) {
            self.manifest.inputs.push(entry);
        }
        Ok(bytes)
    }

    /// Atomically writes `rel` under the output directory and lists it.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.out.join(rel), bytes)?;
        let entry = FileEntry { path: rel.to_string(), sha256: sha256_hex(bytes) };
        match self.manifest.outputs.iter_mut().find(|e| e.path == rel) {
            Some(e) => *e = entry,
            None => self.manifest.outputs.push(entry),
        }
        Ok(())
    }

    pub fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.manifest.warnings.push(msg);
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Run) -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let r = f(self);
        self.manifest.timings.push(Timing { stage: name.to_string(), seconds: t.elapsed().as_secs_f64() });
        r
    }

    /// Writes the manifest last and returns the exit code.
    pub fn finish(mut self, result: Result<(), CliError>) -> i32 {
        self.manifest.timings.push(Timing { stage: "total".into(), seconds: self.started.elapsed().as_secs_f64() });
        match &result {
            Ok(()) => self.manifest.status = "ok".into(),
            Err(e) => {
                self.manifest.status = "failed".into();
                self.manifest.exit_code = e.exit_code();
                self.manifest.error = Some(e.to_string());
            }
        }
        let code = self.manifest.exit_code;
        let bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        if let Err(e) = write_atomic(&self.out.join(MANIFEST), &bytes) {
            eprintln!("error: cannot write manifest: {e}");
            return if code == 0 { 1 } else { code };
        }
        code
    }
}
