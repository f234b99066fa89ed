//! Seeded Horn-clause corpora and an exhaustive breadth-first prover used as
//! an oracle for the beam search.

use std::collections::BTreeMap;

use promise_core::llm::{ScriptedEntry, ScriptedTable};
use promise_core::prover::{ProofState, Prover, StepResult, ToyProver, TOY_PROBE_BUDGET};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;

pub const LAYERS: usize = 5;
pub const ATOMS_PER_LAYER: usize = 10;
pub const MAX_BRANCHING: usize = 4;
pub const MAX_PROOF_LEN: usize = 5;

pub struct HornCorpus {
    pub theory_json: String,
    /// Goal text to candidate commands.
    pub candidates: BTreeMap<String, Vec<String>>,
    pub theorems: Vec<String>,
}

impl HornCorpus {
    pub fn prover(&self) -> ToyProver {
        ToyProver::from_json(&self.theory_json).expect("generated theory is well formed")
    }

    /// One numbered response per goal, each listing every candidate.
    pub fn scripted_table(&self) -> ScriptedTable {
        ScriptedTable {
            entries: self
                .candidates
                .iter()
                .map(|(goal, cmds)| ScriptedEntry {
                    goal: goal.clone(),
                    exact: true,
                    responses: vec![cmds
                        .iter()
                        .enumerate()
                        .map(|(i, c)| format!("{}. {c}", i + 1))
                        .collect::<Vec<_>>()
                        .join("\n")],
                })
                .collect(),
            default: String::new(),
        }
    }
}

pub struct BfsResult {
    /// Shortest closing script, `done` included.
    pub script: Option<Vec<String>>,
    /// Largest number of successors produced at one level.
    pub max_width: usize,
}

/// Level-by-level enumeration of every candidate path up to `horizon`
/// commands.
pub fn bfs(prover: &dyn Prover, candidates: &BTreeMap<String, Vec<String>>, theorem: &str, horizon: usize) -> BfsResult {
    let root = prover.probe_initial_state(theorem).expect("theorem exists");
    let mut level: Vec<(ProofState, Vec<String>)> = vec![(root, Vec::new())];
    let mut max_width = 1;
    for _ in 0..horizon {
        let mut next = Vec::new();
        for (state, prefix) in &level {
            let Some(goal) = state.goals().first() else { continue };
            for cmd in candidates.get(goal).into_iter().flatten() {
                match prover.apply_command(state, cmd, TOY_PROBE_BUDGET) {
                    StepResult::Closed => {
                        let mut script = prefix.clone();
                        script.push(cmd.clone());
                        script.push("done".into());
                        return BfsResult { script: Some(script), max_width };
                    }
                    StepResult::Progressed { state: s } => {
                        let mut p = prefix.clone();
                        p.push(cmd.clone());
                        next.push((s, p));
                    }
                    StepResult::Error { .. } => {}
                }
            }
        }
        max_width = max_width.max(next.len());
        if next.is_empty() {
            break;
        }
        level = next;
    }
    BfsResult { script: None, max_width }
}

fn atom(layer: usize, i: usize) -> String {
    format!("atom{layer}x{i}")
}

/// Random layered Horn theory. Premises always come from lower layers, so
/// every rule application shrinks the goal multiset and no state repeats.
/// Only targets whose enumeration never exceeds `beam` successors per level
/// and whose proofs, if any, are at most `MAX_PROOF_LEN` steps are kept.
pub fn generate(seed: u64, want: usize, beam: usize, horizon: usize) -> HornCorpus {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rules: Vec<(String, Vec<String>, String)> = Vec::new();
    for layer in 0..LAYERS {
        for i in 0..ATOMS_PER_LAYER {
            let concl = atom(layer, i);
            let count = if layer == 0 { usize::from(rng.gen_bool(0.6)) } else { rng.gen_range(0..=2) };
            for _ in 0..count {
                let premises: Vec<String> = if layer == 0 {
                    Vec::new()
                } else {
                    let n = rng.gen_range(1..=2);
                    (0..n)
                        .map(|_| atom(rng.gen_range(0..layer), rng.gen_range(0..ATOMS_PER_LAYER)))
                        .collect()
                };
                rules.push((format!("hr{}", rules.len()), premises, concl.clone()));
            }
        }
    }
    let mut candidates: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for layer in 0..LAYERS {
        for i in 0..ATOMS_PER_LAYER {
            let goal = atom(layer, i);
            let mut cmds: Vec<String> = rules
                .iter()
                .filter(|r| r.2 == goal)
                .map(|r| format!("apply (rule {})", r.0))
                .collect();
            if rng.gen_bool(0.5) {
                let decoy = &rules[rng.gen_range(0..rules.len())];
                let cmd = format!("apply (rule {})", decoy.0);
                if !cmds.contains(&cmd) {
                    cmds.push(cmd);
                }
            }
            cmds.shuffle(&mut rng);
            cmds.truncate(MAX_BRANCHING);
            if !cmds.is_empty() {
                candidates.insert(goal, cmds);
            }
        }
    }
    let facts: Vec<_> = rules
        .iter()
        .map(|(name, premises, conclusion)| json!({"name": name, "premises": premises, "conclusion": conclusion}))
        .collect();
    let targets: Vec<String> = (1..LAYERS).flat_map(|l| (0..ATOMS_PER_LAYER).map(move |i| atom(l, i))).collect();
    let theory = |chosen: &[(String, String)]| {
        let theorems: Vec<_> = chosen.iter().map(|(name, stmt)| json!({"name": name, "statement": stmt})).collect();
        json!({"facts": facts, "theorems": theorems}).to_string()
    };
    let all: Vec<(String, String)> = targets.iter().map(|a| (format!("thm_{a}"), a.clone())).collect();
    let probe = ToyProver::from_json(&theory(&all)).expect("generated theory is well formed");
    let mut kept = Vec::new();
    for (name, stmt) in &all {
        let r = bfs(&probe, &candidates, name, horizon);
        let short = r.script.as_ref().is_none_or(|s| s.len() - 1 <= MAX_PROOF_LEN);
        if r.max_width <= beam && short {
            kept.push((name.clone(), stmt.clone()));
        }
        if kept.len() == want {
            break;
        }
    }
    HornCorpus {
        theory_json: theory(&kept),
        candidates,
        theorems: kept.into_iter().map(|(n, _)| n).collect(),
    }
}
