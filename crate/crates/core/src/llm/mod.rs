//! Text generation backends.

mod heuristic;
mod http;
mod scripted;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use heuristic::HeuristicBackend;
pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use scripted::{ScriptedBackend, ScriptedCall, ScriptedEntry, ScriptedTable};

pub const DEFAULT_QUERY_CAP: u64 = 360;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub n: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("query cap of {0} reached")]
    BudgetExceeded(u64),
}

/// Per-run query counter with an optional cap.
#[derive(Debug, Default)]
pub struct QueryMeter {
    cap: Option<u64>,
    used: AtomicU64,
}

impl QueryMeter {
    pub fn new(cap: Option<u64>) -> Self {
        Self { cap, used: AtomicU64::new(0) }
    }

    /// Count one query, refusing once the cap is reached.
    pub fn charge(&self) -> Result<(), LlmError> {
        let result = self.used.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| match self.cap {
            Some(cap) if u >= cap => None,
            _ => Some(u + 1),
        });
        result.map(|_| ()).map_err(|_| LlmError::BudgetExceeded(self.cap.unwrap_or(0)))
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }
}

pub trait LlmBackend: Send + Sync {
    /// At most `req.n` response texts; one query is charged per call.
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, LlmError>;

    /// Queries charged so far.
    fn queries(&self) -> u64;
}

/// The goal line of a prompt, as written by the prompt builder.
pub fn prompt_goal(prompt: &str) -> &str {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("- Goal: "))
        .unwrap_or("")
}
