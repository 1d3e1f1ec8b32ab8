//! Service configuration: a TOML file with environment overrides.
//!
//! ```toml
//! data_dir = "/var/lib/chai"
//! listen = "127.0.0.1:8080"
//! api_token = "shared-secret"
//!
//! [agent]
//! endpoint = "https://api.example.com/v1/chat/completions"
//! model = "gpt-4o"
//! temperature = 0.7
//! timeout_secs = 60
//! max_retries = 2
//!
//! [parser]
//! disclaimer_cues = ["note:", "these are just", "keep in mind", "please note"]
//! ```
//!
//! Environment variables win over the file: `CHAI_DATA_DIR`, `CHAI_LISTEN`,
//! `CHAI_API_TOKEN`, `CHAI_AGENT_ENDPOINT`, `CHAI_AGENT_MODEL`. The agent's
//! bearer token is only ever read from `CHAI_AGENT_TOKEN`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{RemoteProfile, DEFAULT_TEMPERATURE};
use crate::parser::{ResponseParser, DEFAULT_DISCLAIMER_CUES};

pub const CONFIG_ENV: &str = "CHAI_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserConfig {
    pub disclaimer_cues: Vec<String>,
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self {
            disclaimer_cues: DEFAULT_DISCLAIMER_CUES
                .iter()
                .map(|c| c.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub data_dir: PathBuf,
    pub listen: String,
    pub api_token: Option<String>,
    pub agent: Option<RemoteProfile>,
    pub parser: ParserConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("chai-data"),
            listen: "127.0.0.1:8080".into(),
            api_token: None,
            agent: None,
            parser: ParserConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads `path` (or `$CHAI_CONFIG`) if given, then applies the process
    /// environment. A missing config file is only an error when named
    /// explicitly.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let mut config = match path.map(Path::to_path_buf).or(env_path) {
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                Self::from_toml(&text, &path)?
            }
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        Ok(config)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        if let Some(dir) = get("CHAI_DATA_DIR") {
            self.data_dir = PathBuf::from(dir);
        }
        if let Some(listen) = get("CHAI_LISTEN") {
            self.listen = listen;
        }
        if let Some(token) = get("CHAI_API_TOKEN") {
            self.api_token = Some(token);
        }
        let endpoint = get("CHAI_AGENT_ENDPOINT");
        let model = get("CHAI_AGENT_MODEL");
        if endpoint.is_some() || model.is_some() {
            let agent = self.agent.get_or_insert_with(|| RemoteProfile {
                endpoint: String::new(),
                model: String::new(),
                temperature: DEFAULT_TEMPERATURE,
                timeout_secs: 60.0,
                max_retries: 2,
            });
            if let Some(endpoint) = endpoint {
                agent.endpoint = endpoint;
            }
            if let Some(model) = model {
                agent.model = model;
            }
        }
    }

    pub fn parser(&self) -> ResponseParser {
        ResponseParser::with_cues(&self.parser.disclaimer_cues)
    }
}
