use std::path::Path;

use anyhow::Context;
use qsr_core::dictionary::TrainConfig;
use qsr_core::sr::SrConfig;
use qsr_core::synthbench::SynthConfig;
use serde::{Deserialize, Serialize};

/// Contents of a `--config` TOML file. Every table is optional and any key
/// left out keeps its built-in default.
///
/// ```toml
/// seed = 7
/// [sr]
/// n_reads = 50
/// [sr.sampler]
/// kind = "tabu"
/// restarts = 4
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub train: TrainConfig,
    pub sr: SrConfig,
    pub synth: SynthConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Seed precedence: flag, then the file's top-level `seed`.
    pub fn apply_seed(&mut self, flag: Option<u64>) {
        if let Some(s) = flag.or(self.seed) {
            self.seed = Some(s);
            self.train.seed = s;
            self.sr.seed = s;
            self.synth.seed = s;
        }
    }
}
