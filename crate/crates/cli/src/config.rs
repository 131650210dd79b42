use std::path::{Path, PathBuf};

use anyhow::Context;
use inspect_core::baseline::SunSyncGains;
use inspect_core::dynamics::CwParams;
use inspect_core::env::EpisodeConfig;
use inspect_core::evaluation::EvalSettings;
use inspect_core::policy::TrainConfig;
use serde::{Deserialize, Serialize};

/// Environment variable that relocates every relative output directory.
pub const OUTPUT_ROOT_VAR: &str = "INSPECT_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory that relative `--out` paths are resolved against.
    pub root: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { root: "runs".into() }
    }
}

/// Every tunable of a run, as stored in the TOML config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dynamics: CwParams,
    pub episode: EpisodeConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub sun_sync: SunSyncGains,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.dynamics.validate().context("in [dynamics]")?;
        self.episode.validate()?;
        self.train.validate()?;
        if self.eval.trials == 0 {
            anyhow::bail!("invalid config `eval.trials`: must be at least 1");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Output root: the environment variable wins over the config file.
    pub fn output_root(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ROOT_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output.root.clone())
    }

    pub fn resolve_out(&self, out: &Path) -> PathBuf {
        if out.is_absolute() {
            out.to_path_buf()
        } else {
            self.output_root().join(out)
        }
    }
}
