use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::{GenError, Result};

/// Environment variable holding the bearer token unless configured otherwise.
pub const DEFAULT_API_KEY_ENV: &str = "ACTIVE_EVAL_API_KEY";

/// Sampling configuration for the surrogate generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub k: usize,
    pub temperature: f64,
    pub top_p: f64,
    /// Sent as an extension field; not part of the standard schema.
    pub top_k: Option<u32>,
    pub presence_penalty: f64,
    /// Sent as an extension field; not part of the standard schema.
    pub repetition_penalty: Option<f64>,
    /// `None` leaves the limit to the server (model maximum).
    pub max_new_tokens: Option<u32>,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            k: 10,
            temperature: 0.7,
            top_p: 0.8,
            top_k: Some(20),
            presence_penalty: 1.5,
            repetition_penalty: Some(1.0),
            max_new_tokens: None,
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(GenError::Config(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        // Greedy decoding would make every generation identical.
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(GenError::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GenError::Config(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        Ok(())
    }
}

/// How the `k` completions for one prompt are requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestMode {
    /// One request with `n = k`.
    #[default]
    Batched,
    /// `k` requests with `n = 1`.
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Delay before the first retry; doubled on each further retry.
    pub backoff: Duration,
    pub mode: RequestMode,
    /// Maximum number of inputs in flight at once.
    pub concurrency: usize,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout: Duration::from_secs(120),
            max_retries: 5,
            backoff: Duration::from_millis(500),
            mode: RequestMode::default(),
            concurrency: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(GenError::Config("request timeout must be positive".into()));
        }
        if self.concurrency == 0 {
            return Err(GenError::Config("concurrency must be at least 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(GenError::Config(format!(
                "base URL must start with http:// or https://, got {:?}",
                self.base_url
            )));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}
