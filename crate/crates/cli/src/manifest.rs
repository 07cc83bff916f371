use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// JSON record written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    /// Merged configuration the command actually ran with.
    pub config: serde_json::Value,
    /// Input path → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub timings: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, threads: usize, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            command: command.to_string(),
            args: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timings: serde_json::Value::Null,
        })
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("cannot write manifest {}", path.display()))
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let mut f = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// `out.png` → `out.png.manifest.json`.
pub fn default_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
