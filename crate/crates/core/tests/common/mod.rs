#![allow(dead_code)]

pub mod fixtures;
pub mod oracle;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use promise_core::prover::{
    apply_sequence, closed_state, FactEntry, ProofState, Prover, ProverError, StepResult, TheoryCheck, ToyProver,
    TOY_PROBE_BUDGET,
};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn toy_prover() -> ToyProver {
    ToyProver::load(&data_dir().join("toy_theory.json")).expect("seeded theory loads")
}

pub fn toy_theory_json() -> serde_json::Value {
    let text = std::fs::read_to_string(data_dir().join("toy_theory.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Rebuild the state before `step` of a theorem's reference script.
pub fn state_at(p: &dyn Prover, theorem: &str, step: usize) -> ProofState {
    let script = p.reference_script(theorem).unwrap();
    let root = p.probe_initial_state(theorem).unwrap();
    if step == 0 {
        return root;
    }
    match apply_sequence(p, &root, &script[..step], TOY_PROBE_BUDGET) {
        StepResult::Progressed { state } => state,
        StepResult::Closed => closed_state(&root),
        StepResult::Error { message, .. } => panic!("{message}"),
    }
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

/// Delegating prover that counts and records `apply_command` calls and can
/// offer extra context definitions.
pub struct Wrapped<P> {
    pub inner: P,
    pub applies: AtomicU64,
    pub applied: Mutex<Vec<String>>,
    pub extra_context: Vec<String>,
}

impl<P: Prover> Wrapped<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, applies: AtomicU64::new(0), applied: Mutex::default(), extra_context: Vec::new() }
    }

    pub fn applies(&self) -> u64 {
        self.applies.load(Ordering::SeqCst)
    }

    /// How many times `command` reached the prover.
    pub fn applied_count(&self, command: &str) -> usize {
        self.applied.lock().unwrap().iter().filter(|c| *c == command).count()
    }
}

impl<P: Prover> Prover for Wrapped<P> {
    fn probe_initial_state(&self, theorem: &str) -> Result<ProofState, ProverError> {
        self.inner.probe_initial_state(theorem)
    }
    fn apply_command(&self, state: &ProofState, command: &str, budget: Duration) -> StepResult {
        self.applies.fetch_add(1, Ordering::SeqCst);
        self.applied.lock().unwrap().push(command.to_string());
        self.inner.apply_command(state, command, budget)
    }
    fn whole_theory_check(&self, theorem: &str, script: &[String]) -> TheoryCheck {
        self.inner.whole_theory_check(theorem, script)
    }
    fn search_facts(&self, pattern: &str, state: &ProofState) -> Vec<String> {
        self.inner.search_facts(pattern, state)
    }
    fn check_fact_exists(&self, name: &str) -> bool {
        self.inner.check_fact_exists(name)
    }
    fn fact_statement(&self, name: &str) -> Option<String> {
        self.inner.fact_statement(name)
    }
    fn fact_table(&self) -> Vec<FactEntry> {
        self.inner.fact_table()
    }
    fn context_definitions(&self, state: &ProofState) -> Vec<String> {
        let mut out = self.inner.context_definitions(state);
        out.extend(self.extra_context.iter().cloned());
        out
    }
    fn methods(&self) -> Vec<String> {
        self.inner.methods()
    }
    fn theorem_ids(&self) -> Vec<String> {
        self.inner.theorem_ids()
    }
    fn reference_script(&self, theorem: &str) -> Option<Vec<String>> {
        self.inner.reference_script(theorem)
    }
}
