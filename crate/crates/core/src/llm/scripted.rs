use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{prompt_goal, GenerationRequest, LlmBackend, LlmError, QueryMeter};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedEntry {
    /// Matched against the prompt's goal line.
    pub goal: String,
    /// Require the whole goal line to equal `goal`.
    #[serde(default)]
    pub exact: bool,
    /// Served in turn, wrapping around.
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedTable {
    #[serde(default)]
    pub entries: Vec<ScriptedEntry>,
    #[serde(default)]
    pub default: String,
}

impl ScriptedTable {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    /// Longest matching pattern, earliest on ties.
    fn lookup(&self, goal: &str) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let hit = if e.exact { goal == e.goal } else { goal.contains(&e.goal) };
            if hit && best.is_none_or(|b| e.goal.len() > self.entries[b].goal.len()) {
                best = Some(i);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScriptedCall {
    pub goal: String,
    pub entry: Option<usize>,
    pub response: String,
}

/// Deterministic table-driven backend.
#[derive(Debug)]
pub struct ScriptedBackend {
    table: ScriptedTable,
    meter: QueryMeter,
    cursors: Mutex<HashMap<usize, usize>>,
    log: Mutex<Vec<ScriptedCall>>,
}

impl ScriptedBackend {
    pub fn new(table: ScriptedTable, cap: Option<u64>) -> Self {
        Self { table, meter: QueryMeter::new(cap), cursors: Mutex::default(), log: Mutex::default() }
    }

    pub fn calls(&self) -> Vec<ScriptedCall> {
        self.log.lock().expect("scripted log").clone()
    }
}

impl LlmBackend for ScriptedBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, LlmError> {
        self.meter.charge()?;
        let goal = prompt_goal(&req.prompt);
        let entry = self.table.lookup(goal);
        let response = match entry {
            Some(i) => {
                let responses = &self.table.entries[i].responses;
                let mut cursors = self.cursors.lock().expect("scripted cursors");
                let k = cursors.entry(i).or_default();
                let r = responses.get(*k % responses.len().max(1)).cloned().unwrap_or_default();
                *k += 1;
                r
            }
            None => self.table.default.clone(),
        };
        self.log.lock().expect("scripted log").push(ScriptedCall {
            goal: goal.to_string(),
            entry,
            response: response.clone(),
        });
        Ok(vec![response])
    }

    fn queries(&self) -> u64 {
        self.meter.used()
    }
}
