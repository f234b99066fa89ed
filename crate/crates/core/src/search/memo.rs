use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crate::candidates::Candidate;
use crate::prover::{apply_sequence, ProofState, Prover, StepResult};

/// Key identifying one verification: parent state plus candidate.
pub fn task_signature(parent_fingerprint: &str, dedupe_key: &str) -> String {
    format!("{parent_fingerprint}|{dedupe_key}")
}

/// Verification results keyed by task signature. The first writer wins.
#[derive(Debug, Default)]
pub struct MemoCache {
    enabled: bool,
    results: Mutex<HashMap<String, StepResult>>,
    probes: AtomicU64,
    hits: AtomicU64,
}

impl MemoCache {
    pub fn new(enabled: bool) -> Self {
        Self { enabled, ..Self::default() }
    }

    /// Run `cand` on `state`, or return the cached result. The flag reports
    /// a cache hit.
    pub fn verify(&self, prover: &dyn Prover, state: &ProofState, cand: &Candidate, budget: Duration) -> (StepResult, bool) {
        let key = task_signature(state.fingerprint(), &cand.dedupe_key);
        if self.enabled {
            if let Some(r) = self.results.lock().expect("memo lock").get(&key) {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return (r.clone(), true);
            }
        }
        self.probes.fetch_add(1, Ordering::SeqCst);
        let result = apply_sequence(prover, state, &cand.commands, budget);
        if self.enabled {
            let mut map = self.results.lock().expect("memo lock");
            let stored = map.entry(key).or_insert(result);
            return (stored.clone(), false);
        }
        (result, false)
    }

    /// Uncached verifications performed.
    pub fn probes(&self) -> u64 {
        self.probes.load(Ordering::SeqCst)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }
}
