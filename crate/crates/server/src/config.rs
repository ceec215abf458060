//! Service configuration: a TOML file overlaid with `CONTEXTVIS_*`
//! environment variables.
//!
//! ```toml
//! listen_address = "127.0.0.1:8080"
//! data_dir = "./data"
//! provider_mode = "mock"            # or "remote"
//! text_endpoint = "http://10.0.0.5:9000"
//! image_endpoint = "http://10.0.0.6:9000"
//! credentials_ref = "PROVIDER_TOKEN" # name of the env var holding a bearer token
//! max_attempts = 3
//! sticker_parallelism = 4
//! seed_override = 42
//! templates_dir = "./templates/v1"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

pub const ENV_PREFIX: &str = "CONTEXTVIS_";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("bad config: {0}")]
    BadConfig(String),
}

fn bad(detail: impl Into<String>) -> ConfigError {
    ConfigError::BadConfig(detail.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Mock,
    Remote,
}

impl FromStr for ProviderMode {
    type Err = ConfigError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(ProviderMode::Mock),
            "remote" => Ok(ProviderMode::Remote),
            other => Err(bad(format!("provider_mode must be mock or remote, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiConfig {
    pub listen_address: String,
    pub data_dir: PathBuf,
    pub provider_mode: ProviderMode,
    pub text_endpoint: Option<String>,
    pub image_endpoint: Option<String>,
    pub credentials_ref: Option<String>,
    pub max_attempts: u32,
    pub sticker_parallelism: usize,
    pub seed_override: Option<u64>,
    pub templates_dir: Option<PathBuf>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            listen_address: "127.0.0.1:8080".to_owned(),
            data_dir: PathBuf::from("./data"),
            provider_mode: ProviderMode::Mock,
            text_endpoint: None,
            image_endpoint: None,
            credentials_ref: None,
            max_attempts: 3,
            sticker_parallelism: 4,
            seed_override: None,
            templates_dir: None,
        }
    }
}

/// Every field optional, so a file may set any subset.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    listen_address: Option<String>,
    data_dir: Option<PathBuf>,
    provider_mode: Option<ProviderMode>,
    text_endpoint: Option<String>,
    image_endpoint: Option<String>,
    credentials_ref: Option<String>,
    max_attempts: Option<u32>,
    sticker_parallelism: Option<usize>,
    seed_override: Option<u64>,
    templates_dir: Option<PathBuf>,
}

fn parse_env<T: FromStr>(key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|err| bad(format!("{ENV_PREFIX}{key}: {err}")))
}

fn non_empty(raw: &str) -> Option<String> {
    let raw = raw.trim();
    (!raw.is_empty()).then(|| raw.to_owned())
}

impl ApiConfig {
    /// Reads the optional file, applies the process environment and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|err| bad(format!("{}: {err}", path.display())))?,
            None => String::new(),
        };
        Self::from_parts(&text, std::env::vars())
    }

    pub fn from_parts(
        toml_text: &str,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(toml_text).map_err(|err| bad(err.to_string()))?;
        let defaults = ApiConfig::default();
        let mut config = ApiConfig {
            listen_address: file.listen_address.unwrap_or(defaults.listen_address),
            data_dir: file.data_dir.unwrap_or(defaults.data_dir),
            provider_mode: file.provider_mode.unwrap_or(defaults.provider_mode),
            text_endpoint: file.text_endpoint,
            image_endpoint: file.image_endpoint,
            credentials_ref: file.credentials_ref,
            max_attempts: file.max_attempts.unwrap_or(defaults.max_attempts),
            sticker_parallelism: file.sticker_parallelism.unwrap_or(defaults.sticker_parallelism),
            seed_override: file.seed_override,
            templates_dir: file.templates_dir,
        };
        for (name, value) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match key {
                "LISTEN_ADDRESS" => config.listen_address = value.trim().to_owned(),
                "DATA_DIR" => config.data_dir = PathBuf::from(value.trim()),
                "PROVIDER_MODE" => config.provider_mode = value.parse()?,
                "TEXT_ENDPOINT" => config.text_endpoint = non_empty(&value),
                "IMAGE_ENDPOINT" => config.image_endpoint = non_empty(&value),
                "CREDENTIALS_REF" => config.credentials_ref = non_empty(&value),
                "MAX_ATTEMPTS" => config.max_attempts = parse_env(key, &value)?,
                "STICKER_PARALLELISM" => config.sticker_parallelism = parse_env(key, &value)?,
                "SEED_OVERRIDE" => {
                    config.seed_override = match non_empty(&value) {
                        Some(raw) => Some(parse_env(key, &raw)?),
                        None => None,
                    }
                }
                "TEMPLATES_DIR" => config.templates_dir = non_empty(&value).map(PathBuf::from),
                _ => {}
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_attempts == 0 {
            return Err(bad("max_attempts must be at least 1"));
        }
        if self.sticker_parallelism == 0 {
            return Err(bad("sticker_parallelism must be at least 1"));
        }
        if self.provider_mode == ProviderMode::Remote {
            if self.text_endpoint.is_none() {
                return Err(bad("remote provider mode requires text_endpoint"));
            }
            if self.image_endpoint.is_none() {
                return Err(bad("remote provider mode requires image_endpoint"));
            }
        }
        Ok(())
    }

    /// Resolves `credentials_ref` to the bearer token it names.
    pub fn bearer_token(&self) -> Result<Option<String>, ConfigError> {
        let Some(var) = &self.credentials_ref else {
            return Ok(None);
        };
        std::env::var(var)
            .map(Some)
            .map_err(|_| bad(format!("credentials_ref names unset variable {var}")))
    }
}
