use std::path::{Path, PathBuf};

use mrbanks_core::analytics::AnalysisConfig;
use mrbanks_core::session::AssignmentMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Deployment settings. Relative paths resolve against the working directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub manifest: PathBuf,
    pub log_path: PathBuf,
    /// Root of every per-session seed; fixed per deployment.
    pub seed: u64,
    /// Scenarios that may be started.
    pub scenarios: Vec<u8>,
    pub assignment: AssignmentMode,
    pub leaderboard_size: usize,
    pub analysis: AnalysisConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            manifest: PathBuf::from("data/manifest.json"),
            log_path: PathBuf::from("events.jsonl"),
            seed: 0,
            scenarios: vec![1, 2, 3, 4],
            assignment: AssignmentMode::Alternating,
            leaderboard_size: 10,
            analysis: AnalysisConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ServiceConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scenarios.is_empty() {
            return Err(ConfigError::Invalid("no scenario enabled".into()));
        }
        if let Some(s) = self.scenarios.iter().find(|s| !(1..=4).contains(*s)) {
            return Err(ConfigError::Invalid(format!("unknown scenario {s}")));
        }
        if self.leaderboard_size == 0 {
            return Err(ConfigError::Invalid("leaderboard_size must be positive".into()));
        }
        Ok(())
    }

    pub fn scenario_enabled(&self, id: u8) -> bool {
        self.scenarios.contains(&id)
    }
}
