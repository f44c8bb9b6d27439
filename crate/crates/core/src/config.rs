//! TOML run configuration: data location, search settings, advisor backend
//! and output directory. Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::SearchConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
}

/// Which advisor answers suggestion requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvisorKind {
    Off,
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub target: Option<String>,
    /// Columns kept categorical even when every cell parses as a number.
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdvisorSection {
    pub backend: AdvisorKind,
    /// Model name sent to a remote endpoint.
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    /// Experience pool loaded before and saved after the run.
    pub experience_pool: Option<PathBuf>,
}

impl Default for AdvisorSection {
    fn default() -> Self {
        AdvisorSection {
            backend: AdvisorKind::Mock,
            model: "default".into(),
            temperature: crate::advisor::RemoteConfig::DEFAULT_TEMPERATURE,
            timeout_secs: crate::advisor::RemoteConfig::DEFAULT_TIMEOUT.as_secs(),
            experience_pool: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub output: Option<PathBuf>,
    pub data: DataSection,
    pub advisor: AdvisorSection,
    pub search: SearchConfig,
}

impl RunConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }
}
