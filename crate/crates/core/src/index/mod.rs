//! Proof-suffix database: every intermediate goal of every reference proof,
//! paired with the commands that finished it.

mod features;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prover::{ErrorClass, Prover, StepResult, TOY_PROBE_BUDGET};

pub use features::{
    cosine, distance, embed_goal, parse_goal, raw_embedding, EmbedError, GoalFeatures, DEFAULT_DIMENSION,
};

/// Conventional file name of the persisted index.
pub const INDEX_FILE: &str = "proof_suffix.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub theorem_id: String,
    pub step_index: usize,
    pub goal_text: String,
    pub assumptions: Vec<String>,
    pub suffix: Vec<String>,
    pub constants: BTreeSet<String>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("replay of `{theorem}` failed at step {step}: {message}")]
pub struct ReplayFailure {
    pub theorem: String,
    /// 0-based; equals the script length when the script ends unfinished.
    pub step: usize,
    pub class: Option<ErrorClass>,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot access index file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed index file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("record {0} has embedding width {1}, expected {2}")]
    Dimension(usize, usize, usize),
    #[error("duplicate record {0} step {1}")]
    Duplicate(String, usize),
}

/// Replay a reference script, recording each state before a command.
pub fn replay_and_record(
    prover: &dyn Prover,
    theorem: &str,
    dimension: usize,
) -> Result<Vec<TraceRecord>, ReplayFailure> {
    let fail = |step: usize, class: Option<ErrorClass>, message: String| ReplayFailure {
        theorem: theorem.to_string(),
        step,
        class,
        message,
    };
    let script = prover
        .reference_script(theorem)
        .ok_or_else(|| fail(0, None, "no reference script".into()))?;
    if script.is_empty() {
        return Err(fail(0, None, "empty reference script".into()));
    }
    let mut state = prover
        .probe_initial_state(theorem)
        .map_err(|e| fail(0, None, e.to_string()))?;
    let mut records = Vec::with_capacity(script.len());
    let mut closed = false;
    for (i, command) in script.iter().enumerate() {
        if closed {
            return Err(fail(i, None, "commands after the proof was finished".into()));
        }
        let goal_text = state.goal_text().to_string();
        let features = parse_goal(&goal_text);
        let embedding = embed_goal(&features, dimension).map_err(|e| fail(i, None, e.to_string()))?;
        records.push(TraceRecord {
            theorem_id: theorem.to_string(),
            step_index: i,
            goal_text,
            assumptions: state.assumptions().iter().map(|h| h.text.clone()).collect(),
            suffix: script[i..].to_vec(),
            constants: features.constants,
            embedding,
        });
        match prover.apply_command(&state, command, TOY_PROBE_BUDGET) {
            StepResult::Progressed { state: next } => state = next,
            StepResult::Closed => {
                closed = state.is_closed();
                state = crate::prover::closed_state(&state);
            }
            StepResult::Error { class, message } => return Err(fail(i, Some(class), message)),
        }
    }
    if !closed {
        return Err(fail(script.len(), None, "script does not finish the proof".into()));
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceIndex {
    records: Vec<TraceRecord>,
    features: Vec<GoalFeatures>,
    by_theorem: BTreeMap<String, Range<usize>>,
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    dimension: usize,
    records: Vec<TraceRecord>,
}

impl TraceIndex {
    pub fn from_records(records: Vec<TraceRecord>, dimension: usize) -> Result<Self, IndexError> {
        let mut seen = BTreeSet::new();
        let mut by_theorem: BTreeMap<String, Range<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if r.embedding.len() != dimension {
                return Err(IndexError::Dimension(i, r.embedding.len(), dimension));
            }
            if !seen.insert((r.theorem_id.clone(), r.step_index)) {
                return Err(IndexError::Duplicate(r.theorem_id.clone(), r.step_index));
            }
            by_theorem
                .entry(r.theorem_id.clone())
                .and_modify(|range| range.end = i + 1)
                .or_insert(i..i + 1);
        }
        let features = records.iter().map(|r| parse_goal(&r.goal_text)).collect();
        Ok(Self { records, features, by_theorem, dimension })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn features(&self, i: usize) -> &GoalFeatures {
        &self.features[i]
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn theorems(&self) -> impl Iterator<Item = &str> {
        self.by_theorem.keys().map(String::as_str)
    }

    pub fn records_of(&self, theorem: &str) -> &[TraceRecord] {
        self.by_theorem
            .get(theorem)
            .map(|r| &self.records[r.clone()])
            .unwrap_or(&[])
    }

    /// The step-0 record of `theorem`.
    pub fn initial_record(&self, theorem: &str) -> Option<&TraceRecord> {
        self.records_of(theorem).iter().find(|r| r.step_index == 0)
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let file = IndexFile { dimension: self.dimension, records: self.records.clone() };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let file: IndexFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_records(file.records, file.dimension)
    }
}

/// Index built from a theory together with the warnings raised on the way.
#[derive(Debug, Clone)]
pub struct BuiltIndex {
    pub index: TraceIndex,
    pub warnings: Vec<ReplayFailure>,
}

/// Replay every non-excluded theorem. Failing theorems are skipped and
/// reported, never fatal.
pub fn build_index(prover: &dyn Prover, excluded: &BTreeSet<String>, dimension: usize) -> BuiltIndex {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for theorem in prover.theorem_ids() {
        if excluded.contains(&theorem) {
            continue;
        }
        match replay_and_record(prover, &theorem, dimension) {
            Ok(rs) => records.extend(rs),
            Err(e) => {
                log::warn!("{e}");
                warnings.push(e);
            }
        }
    }
    let index = TraceIndex::from_records(records, dimension).expect("records from distinct theorems");
    BuiltIndex { index, warnings }
}
