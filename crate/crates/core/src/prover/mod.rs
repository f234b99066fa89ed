//! Prover backend contract.
//!
//! A backend probes initial states, executes single proof commands, answers
//! fact queries, and performs the final whole-theory replay. [`ToyProver`]
//! implements the full contract over a small first-order tactic calculus.

pub mod command;
mod toy;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use toy::{Definition, FactDecl, RuleDecl, SortDecl, TheoremDecl, TheoryError, ToyProver, ToyTheory};

/// Per-probe budget for the toy backend.
pub const TOY_PROBE_BUDGET: Duration = Duration::from_secs(1);

/// Rendering used for a state with no remaining goals.
pub const NO_SUBGOALS: &str = "No subgoals!";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofState {
    goals: Vec<String>,
    assumptions: Vec<Hypothesis>,
    subgoal_count: usize,
    fingerprint: String,
}

impl ProofState {
    /// The fingerprint is supplied by the backend, which owns canonicalisation.
    pub fn new(goals: Vec<String>, assumptions: Vec<Hypothesis>, fingerprint: String) -> Self {
        let subgoal_count = goals.len();
        Self { goals, assumptions, subgoal_count, fingerprint }
    }

    pub fn goals(&self) -> &[String] {
        &self.goals
    }

    pub fn assumptions(&self) -> &[Hypothesis] {
        &self.assumptions
    }

    pub fn subgoal_count(&self) -> usize {
        self.subgoal_count
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn is_closed(&self) -> bool {
        self.subgoal_count == 0
    }

    /// Rendering of the first goal, or [`NO_SUBGOALS`].
    pub fn goal_text(&self) -> &str {
        self.goals.first().map(String::as_str).unwrap_or(NO_SUBGOALS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Parse,
    UnknownFact,
    TacticFailed,
    Timeout,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Parse => "parse",
            ErrorClass::UnknownFact => "unknown_fact",
            ErrorClass::TacticFailed => "tactic_failed",
            ErrorClass::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StepResult {
    Progressed { state: ProofState },
    Closed,
    Error { class: ErrorClass, message: String },
}

impl StepResult {
    pub fn error(class: ErrorClass, message: impl Into<String>) -> Self {
        StepResult::Error { class, message: message.into() }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StepResult::Progressed { .. } => "progressed",
            StepResult::Closed => "closed",
            StepResult::Error { .. } => "error",
        }
    }
}

/// Outcome of a whole-theory replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoryCheck {
    pub passed: bool,
    pub log: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactEntry {
    pub name: String,
    /// Statement text, premises joined with `⟹`.
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProverError {
    #[error("unknown theorem `{0}`")]
    UnknownTheorem(String),
    #[error("theorem `{0}` has a malformed statement: {1}")]
    MalformedStatement(String, String),
}

/// Backend contract consumed by the search engine.
///
/// Implementations must be callable from several threads; a backend with
/// single-session semantics should serialise internally.
pub trait Prover: Send + Sync {
    fn probe_initial_state(&self, theorem: &str) -> Result<ProofState, ProverError>;

    /// Execute one command. Deterministic for fixed inputs; never mutates `state`.
    fn apply_command(&self, state: &ProofState, command: &str, budget: Duration) -> StepResult;

    /// Replay `script` from a fresh probe of `theorem` with the theorem itself
    /// unavailable as a fact.
    fn whole_theory_check(&self, theorem: &str, script: &[String]) -> TheoryCheck;

    /// Facts mentioning every constant of `pattern`, most relevant to `state` first.
    fn search_facts(&self, pattern: &str, state: &ProofState) -> Vec<String>;

    fn check_fact_exists(&self, name: &str) -> bool;

    fn fact_statement(&self, name: &str) -> Option<String>;

    /// Every named fact, in declaration order.
    fn fact_table(&self) -> Vec<FactEntry>;

    /// Definitional facts the live context offers for `state`.
    fn context_definitions(&self, state: &ProofState) -> Vec<String>;

    /// Proof methods understood by `apply`.
    fn methods(&self) -> Vec<String>;

    fn theorem_ids(&self) -> Vec<String>;

    fn reference_script(&self, theorem: &str) -> Option<Vec<String>>;
}

/// Apply `commands` in sequence. A `Closed` result part-way through is
/// followed by commands run against the empty state.
pub fn apply_sequence(
    prover: &dyn Prover,
    state: &ProofState,
    commands: &[String],
    budget: Duration,
) -> StepResult {
    let mut current = state.clone();
    let mut last = StepResult::Progressed { state: state.clone() };
    for command in commands {
        last = prover.apply_command(&current, command, budget);
        match &last {
            StepResult::Progressed { state } => current = state.clone(),
            StepResult::Closed => current = closed_state(&current),
            StepResult::Error { .. } => return last,
        }
    }
    last
}

/// The empty state reached after the last goal is discharged.
pub fn closed_state(from: &ProofState) -> ProofState {
    ProofState::new(Vec::new(), from.assumptions.clone(), "closed".to_string())
}
