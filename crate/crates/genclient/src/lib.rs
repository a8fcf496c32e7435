//! Collects `k` surrogate generations per input from an OpenAI-compatible
//! chat-completions endpoint and writes them as an active-eval pool file.

mod batch;
mod client;
mod config;
pub mod mock;

pub use batch::{
    build_pool, read_inputs, BuildOptions, BuildSummary, GenInput, JournalEntry, JournalStatus,
};
pub use client::{ChatMessage, ChatRequest, GenClient};
pub use config::{DecodingConfig, EndpointConfig, RequestMode, DEFAULT_API_KEY_ENV};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("transport error: {0}")]
    Transport(#[from] reqwest::Error),

    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<GenError> },

    #[error("malformed response: {0}")]
    Malformed(String),

    #[error("stale journal: {0}")]
    StaleJournal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Pool(#[from] active_eval::Error),
}

impl GenError {
    /// Timeouts, connection failures, HTTP 429 and 5xx are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            GenError::Http { status, .. } => *status == 429 || *status >= 500,
            GenError::Transport(e) => e.is_timeout() || e.is_connect(),
            _ => false,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, GenError::Config(_) | GenError::StaleJournal(_))
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        GenError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = GenError> = std::result::Result<T, E>;
