//! Optional TOML config. Flags override the file, the file overrides
//! built-in defaults.

use std::path::Path;

use serde::Deserialize;

use crate::commands::PolicyArg;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub shards: Option<usize>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub policy: Option<PolicyArg>,
    pub tau1: Option<u64>,
    pub tau2: Option<u64>,
    pub warmup: Option<f64>,
    pub epoch_lambda: Option<f64>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.to_string();
            CliError::Usage(format!(
                "{}: {}",
                path.display(),
                msg.lines().next().unwrap_or("invalid config")
            ))
        })
    }
}

/// First of flag, config value and default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
