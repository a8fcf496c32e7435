use std::thread;

use log::{debug, warn};
use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use crate::config::{DecodingConfig, EndpointConfig, RequestMode};
use crate::{GenError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Wire form of a chat-completions request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub presence_penalty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetition_penalty: Option<f64>,
}

impl ChatRequest {
    pub fn new(model: &str, prompt: &str, decoding: &DecodingConfig, n: usize) -> Self {
        ChatRequest {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature: decoding.temperature,
            top_p: decoding.top_p,
            n,
            max_tokens: decoding.max_new_tokens,
            presence_penalty: decoding.presence_penalty,
            top_k: decoding.top_k,
            repetition_penalty: decoding.repetition_penalty,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    #[serde(default)]
    index: Option<usize>,
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GenClient {
    http: Client,
    endpoint: EndpointConfig,
    api_key: Option<String>,
}

impl GenClient {
    /// Builds a client, reading the bearer token from the configured
    /// environment variable if it is set.
    pub fn new(endpoint: EndpointConfig) -> Result<Self> {
        endpoint.validate()?;
        let api_key = std::env::var(&endpoint.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        let http = Client::builder().timeout(endpoint.timeout).build()?;
        Ok(GenClient {
            http,
            endpoint,
            api_key,
        })
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        &self.endpoint
    }

    fn post_once(&self, req: &ChatRequest) -> Result<Vec<String>> {
        let mut rb = self.http.post(self.endpoint.completions_url()).json(req);
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send()?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(GenError::Http {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        let parsed: ChatResponse = resp.json()?;
        let mut choices = parsed.choices;
        choices.sort_by_key(|c| c.index.unwrap_or(usize::MAX));
        Ok(choices
            .into_iter()
            .map(|c| c.message.content.unwrap_or_default())
            .collect())
    }

    /// Sends `req`, retrying transient failures with exponential backoff.
    pub fn post(&self, req: &ChatRequest) -> Result<Vec<String>> {
        let mut delay = self.endpoint.backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.post_once(req) {
                Ok(out) => return Ok(out),
                Err(e) if e.is_transient() && attempt <= self.endpoint.max_retries => {
                    debug!("attempt {attempt} failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
                Err(e) if e.is_transient() => {
                    warn!("giving up after {attempt} attempts: {e}");
                    return Err(GenError::RetriesExhausted {
                        attempts: attempt,
                        last: Box::new(e),
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// `k` completions of `prompt`, in order.
    pub fn generate_k(&self, prompt: &str, decoding: &DecodingConfig) -> Result<Vec<String>> {
        decoding.validate()?;
        let k = decoding.k;
        let out = match self.endpoint.mode {
            RequestMode::Batched => {
                self.post(&ChatRequest::new(&self.endpoint.model, prompt, decoding, k))?
            }
            RequestMode::Independent => {
                let req = ChatRequest::new(&self.endpoint.model, prompt, decoding, 1);
                let mut out = Vec::with_capacity(k);
                for _ in 0..k {
                    let mut one = self.post(&req)?;
                    if one.is_empty() {
                        return Err(GenError::Malformed("response has no choices".into()));
                    }
                    out.push(one.swap_remove(0));
                }
                out
            }
        };
        if out.len() < k {
            return Err(GenError::Malformed(format!(
                "expected {k} completions, got {}",
                out.len()
            )));
        }
        Ok(out.into_iter().take(k).collect())
    }
}
