use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Settings from a TOML file, overridden by `KKMW_*` variables, then flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: PathBuf,
    pub port: u16,
    pub max_resolution: u32,
    pub default_tolerance: f64,
    pub log_level: String,
    /// Built UI bundle served under `/`, when present.
    pub ui_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("kkmw-data"),
            port: 8080,
            max_resolution: kkmw_core::engine::DEFAULT_MAX_RESOLUTION,
            default_tolerance: 1e-3,
            log_level: "info".into(),
            ui_dir: None,
        }
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Applies `KKMW_DATA_DIR`, `KKMW_PORT` and `KKMW_MAX_RESOLUTION`.
    pub fn with_env(mut self, get: impl Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        if let Some(v) = get("KKMW_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = get("KKMW_PORT") {
            self.port = v.parse().map_err(|_| CliError::Input(format!("KKMW_PORT: bad port {v:?}")))?;
        }
        if let Some(v) = get("KKMW_MAX_RESOLUTION") {
            self.max_resolution = v
                .parse()
                .map_err(|_| CliError::Input(format!("KKMW_MAX_RESOLUTION: bad value {v:?}")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.max_resolution == 0 {
            return Err(CliError::Input("max resolution must be positive".into()));
        }
        if !(self.default_tolerance > 0.0) {
            return Err(CliError::Input("default tolerance must be positive".into()));
        }
        Ok(())
    }
}
