//! Loaders for the JSON fixtures shared by several test targets.

use std::path::PathBuf;

use promise_core::names::NameInventory;
use promise_core::prompt::{build_prompt, derive_plan, summarize_failures, Family, FailureNote, PromptInput};
use promise_core::prover::{Hypothesis, ToyProver};
use promise_core::retrieval::TacticTemplate;
use serde::Deserialize;

use super::fixture;

#[derive(Deserialize)]
pub struct Buckets {
    pub definitions: Vec<String>,
    pub simp_facts: Vec<String>,
    pub rule_facts: Vec<String>,
    pub wp_facts: Vec<String>,
}

impl Buckets {
    pub fn inventory(&self) -> NameInventory {
        NameInventory {
            definitions: self.definitions.clone(),
            simp_facts: self.simp_facts.clone(),
            rule_facts: self.rule_facts.clone(),
            wp_facts: self.wp_facts.clone(),
            all: [&self.definitions, &self.simp_facts, &self.rule_facts, &self.wp_facts]
                .into_iter()
                .flatten()
                .cloned()
                .collect(),
        }
    }
}

#[derive(Deserialize)]
pub struct PromptNode {
    pub name: String,
    pub target: String,
    pub goal: String,
    pub assumptions: Vec<Hypothesis>,
    pub prefix: Vec<String>,
    pub failures: Vec<FailureNote>,
    pub candidates: usize,
    pub ranked: Vec<Family>,
    pub templates: Vec<TacticTemplate>,
    pub inventory: Buckets,
}

pub fn prompt_nodes() -> Vec<PromptNode> {
    serde_json::from_str(&std::fs::read_to_string(fixture("prompt_nodes.json")).unwrap()).unwrap()
}

pub fn golden_path(node: &PromptNode) -> PathBuf {
    fixture("../golden").join(format!("{}.txt", node.name))
}

pub fn render_prompt(node: &PromptNode) -> (String, NameInventory) {
    let inventory = node.inventory.inventory();
    let plan = derive_plan(&node.ranked, node.candidates);
    let feedback = summarize_failures(&node.failures);
    let prompt = build_prompt(&PromptInput {
        goal: &node.goal,
        assumptions: &node.assumptions,
        prefix: &node.prefix,
        feedback: &feedback,
        templates: &node.templates,
        inventory: &inventory,
        plan: &plan,
        candidates: node.candidates,
    });
    (prompt, inventory)
}

#[derive(Deserialize)]
pub struct FilterCase {
    pub raw: String,
    pub key: String,
    pub expect: String,
}

#[derive(Deserialize)]
pub struct FilterFixture {
    pub target: String,
    pub inventory: Buckets,
    pub cases: Vec<FilterCase>,
}

pub fn filter_fixture() -> FilterFixture {
    serde_json::from_str(&std::fs::read_to_string(fixture("filter_cases.json")).unwrap()).unwrap()
}

/// Two rules reduce `top(cc)` to the same `mid(cc)` goal.
pub fn twin_rule_theory() -> ToyProver {
    let theory = serde_json::json!({
        "facts": [
            {"name": "top_a", "premises": ["mid(cc)"], "conclusion": "top(cc)"},
            {"name": "top_b", "premises": ["mid(cc)"], "conclusion": "top(cc)"},
            {"name": "mid_low", "premises": ["low(cc)"], "conclusion": "mid(cc)"},
            {"name": "low_base", "conclusion": "low(cc)"}
        ],
        "theorems": [{"name": "twin", "statement": "top(cc)"}]
    });
    ToyProver::from_json(&theory.to_string()).unwrap()
}
