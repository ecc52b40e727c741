use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const DEFAULT_U_MAX: u32 = 5;
pub const DEFAULT_EPSILON: f64 = 0.2;

/// Sampling parameters forwarded to the chat model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.0,
            max_tokens: Some(4096),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    /// Deterministic offline mocks seeded from `RunConfig::seed`.
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatEndpointConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key. The key itself is never stored.
    pub api_key_env: Option<String>,
}

impl Default for ChatEndpointConfig {
    fn default() -> Self {
        ChatEndpointConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderEndpointConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub dim: usize,
}

impl Default for EmbedderEndpointConfig {
    fn default() -> Self {
        EmbedderEndpointConfig {
            endpoint: "http://127.0.0.1:8090/embed".into(),
            model: "clip-vit-base-patch32".into(),
            api_key_env: None,
            dim: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptionerEndpointConfig {
    pub base_url: String,
}

impl Default for CaptionerEndpointConfig {
    fn default() -> Self {
        CaptionerEndpointConfig {
            base_url: "http://127.0.0.1:8080".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig {
            max_attempts: 5,
            initial_backoff_ms: 1000,
            multiplier: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BackendsConfig {
    pub mode: BackendMode,
    pub chat: ChatEndpointConfig,
    /// Judge model for the LLM metrics; falls back to `chat` when unset.
    pub judge: Option<ChatEndpointConfig>,
    pub embedder: EmbedderEndpointConfig,
    pub captioner: CaptionerEndpointConfig,
    pub retry: RetryConfig,
    /// Dimension of the offline mock embedder.
    pub mock_dim: Option<usize>,
}

/// Everything that shapes a pipeline run. A snapshot is stored in each trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub u_max: u32,
    pub epsilon: f64,
    pub seed: u64,
    pub backends: BackendsConfig,
    pub decoding: DecodingParams,
    /// Prompt template overrides keyed by template id (`p0`, `p_r`, ...), pointing at UTF-8 files.
    pub prompts: BTreeMap<String, PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            u_max: DEFAULT_U_MAX,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            backends: BackendsConfig::default(),
            decoding: DecodingParams::default(),
            prompts: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.u_max < 1 {
            return Err(ModelError::InvalidConfig("u_max must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(ModelError::InvalidConfig(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if self.backends.retry.max_attempts < 1 {
            return Err(ModelError::InvalidConfig("retry.max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}
