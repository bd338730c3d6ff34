use std::path::{Path, PathBuf};

use gridpulse::model::Attribute;
use serde::{Deserialize, Serialize};

pub const DATA_ENV: &str = "GRIDPULSE_DATA";

/// Service settings, loadable from a TOML file. Command-line flags override
/// file values; `GRIDPULSE_DATA` is used when no data directory is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub data: Option<PathBuf>,
    pub host: String,
    pub port: u16,
    pub cache_entries: usize,
    pub default_window_s: u32,
    pub default_threshold_pct: f64,
    pub default_attribute: Attribute,
    pub kde_resolution: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data: None,
            host: "127.0.0.1".into(),
            port: 8080,
            cache_entries: 64,
            default_window_s: 10,
            default_threshold_pct: 90.0,
            default_attribute: Attribute::VPm,
            kde_resolution: gridpulse::localize::DEFAULT_RESOLUTION,
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// The configured data directory, else the environment fallback.
    pub fn data_dir(&self) -> Option<PathBuf> {
        self.data
            .clone()
            .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: ServiceConfig = toml::from_str("port = 9000\ndefault_attribute = \"IAm\"\n").unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.default_attribute, Attribute::IAm);
        assert_eq!(c.cache_entries, 64);
        assert!(toml::from_str::<ServiceConfig>("bogus = 1").is_err());
    }
}
