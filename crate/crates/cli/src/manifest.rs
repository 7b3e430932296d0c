use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

impl OutputFile {
    pub fn digest(dir: &Path, name: &str) -> io::Result<Self> {
        let data = fs::read(dir.join(name))?;
        Ok(Self { name: name.to_string(), bytes: data.len() as u64, sha256: hex::encode(Sha256::digest(&data)) })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub argv: Vec<String>,
    /// The effective configuration in config-file syntax.
    pub config: String,
    pub master_seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// False when the run was interrupted; the listed outputs then hold partial results.
    pub complete: bool,
    pub outside_repulsive_phase: bool,
    /// Which starting states the reported distances range over.
    pub worst_case_scope: String,
    pub outputs: Vec<OutputFile>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    /// Write to a temporary file and rename over `manifest.json`, so a
    /// reader never sees a half-written manifest.
    pub fn write_atomic(&self, dir: &Path) -> io::Result<()> {
        let tmp = dir.join(format!(".{MANIFEST_NAME}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, self)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(tmp, dir.join(MANIFEST_NAME))
    }
}
