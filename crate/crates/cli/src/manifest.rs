//! Run manifest: written when a run starts and rewritten when it ends.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinlens::table::Table;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const CONFIG_NAME: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Complete,
    /// Numerical failure; the listed outputs are partial.
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub code_version: String,
    /// SHA-256 of the resolved config text stored as `config.toml`.
    pub config_sha256: String,
    pub config_file: String,
    pub master_seed: u64,
    /// How per-realization seeds derive from the master seed.
    pub seed_scheme: String,
    pub threads: usize,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub derived: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Output directory bookkeeping for one run.
pub struct RunDir {
    dir: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl RunDir {
    /// Creates the directory, stores the resolved config and the initial manifest.
    pub fn create(
        dir: &Path,
        scenario: &str,
        resolved_config: &str,
        master_seed: u64,
        threads: usize,
    ) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_NAME), resolved_config)?;
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = RunManifest {
            scenario: scenario.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(resolved_config),
            config_file: CONFIG_NAME.to_string(),
            master_seed,
            seed_scheme: "realization r uses ChaCha8 seeded from master_seed, stream r".to_string(),
            threads,
            started_unix_s: started,
            wall_time_s: 0.0,
            status: Status::Running,
            error: None,
            derived: BTreeMap::new(),
            outputs: Vec::new(),
        };
        let run = RunDir {
            dir: dir.to_path_buf(),
            manifest,
            start: Instant::now(),
        };
        run.save()?;
        Ok(run)
    }

    fn save(&self) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(self.dir.join(MANIFEST_NAME), text + "\n")
    }

    pub fn derive(&mut self, key: impl Into<String>, value: f64) {
        self.manifest.derived.insert(key.into(), value);
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> spinlens::Result<()> {
        table.write_path(self.dir.join(name))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finalize(mut self, error: Option<String>) -> std::io::Result<RunManifest> {
        self.manifest.wall_time_s = self.start.elapsed().as_secs_f64();
        self.manifest.status = if error.is_some() {
            Status::Failed
        } else {
            Status::Complete
        };
        self.manifest.error = error;
        self.save()?;
        Ok(self.manifest)
    }
}
