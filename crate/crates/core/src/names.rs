//! Grounded fact-name inventory for a proof state.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::index::GoalFeatures;
use crate::prover::{FactEntry, ProofState, Prover};
use crate::term::{is_ident_start, is_variable_name};

/// Name or statement tokens that mark a WP / refinement fact.
pub const WP_TOKENS: &[&str] = &["wp", "valid", "invs", "hoare", "refine"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Definition,
    Simp,
    Rule,
    Wp,
}

impl Role {
    /// Placeholder standing in for a hidden fact name of this role.
    pub fn placeholder(self) -> &'static str {
        match self {
            Role::Definition | Role::Simp => "<Def/Simp names>",
            Role::Rule => "<Rule lemma>",
            Role::Wp => "<WP/refinement lemma>",
        }
    }
}

fn word_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'')).filter(|w| !w.is_empty())
}

/// True if any `_`/`.`-separated piece of `text`'s words is a WP token.
pub fn mentions_wp(text: &str) -> bool {
    word_tokens(text).any(|w| WP_TOKENS.contains(&w))
}

fn is_bare_equation(statement: &str) -> bool {
    match crate::term::Term::parse(statement) {
        Ok(t) => t.as_equation().is_some(),
        Err(_) => false,
    }
}

pub fn classify_role(name: &str, statement: &str) -> Role {
    if name.ends_with("_def") {
        Role::Definition
    } else if mentions_wp(name) || mentions_wp(statement) {
        Role::Wp
    } else if is_bare_equation(statement) {
        Role::Simp
    } else {
        Role::Rule
    }
}

fn identifier_constants(goal: &GoalFeatures) -> BTreeSet<String> {
    let from_tokens = goal
        .tokens
        .keys()
        .filter(|t| t.chars().next().is_some_and(is_ident_start) && !is_variable_name(t));
    goal.constants
        .iter()
        .filter(|c| c.chars().next().is_some_and(is_ident_start))
        .chain(from_tokens)
        .cloned()
        .collect()
}

/// Each identifier `c` of the goal, followed by `c_def`. Unverified.
pub fn implicit_names_from_goal(goal: &GoalFeatures) -> Vec<String> {
    identifier_constants(goal)
        .into_iter()
        .flat_map(|c| {
            let def = format!("{c}_def");
            [c, def]
        })
        .collect()
}

fn trigrams(text: &str) -> HashMap<String, f64> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = HashMap::new();
    for w in chars.windows(3) {
        *out.entry(w.iter().collect::<String>()).or_insert(0.0) += 1.0;
    }
    out
}

fn profile_cosine(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Character-trigram cosine ranking of facts (name and statement) against
/// the goal. Zero-score facts are kept, ordered by name.
pub fn ngram_retrieve(corpus: &[FactEntry], goal_text: &str, k: usize) -> Vec<String> {
    let query = trigrams(goal_text);
    let mut scored: Vec<(f64, &str)> = corpus
        .iter()
        .map(|f| (profile_cosine(&query, &trigrams(&format!("{} {}", f.name, f.statement))), f.name.as_str()))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, n)| n.to_string()).collect()
}

/// Verified `_def` names from the goal's identifiers and from the prover's
/// live context.
pub fn def_candidates(goal: &GoalFeatures, state: &ProofState, prover: &dyn Prover) -> Vec<String> {
    let schema = identifier_constants(goal).into_iter().map(|c| format!("{c}_def"));
    let mut seen = BTreeSet::new();
    schema
        .chain(prover.context_definitions(state))
        .filter(|n| prover.check_fact_exists(n))
        .filter(|n| seen.insert(n.clone()))
        .collect()
}

/// Live search over each goal constant, merged by hit count.
pub fn live_search(goal: &GoalFeatures, state: &ProofState, prover: &dyn Prover) -> Vec<String> {
    let mut hits: BTreeMap<String, usize> = BTreeMap::new();
    for c in &goal.constants {
        for name in prover.search_facts(c, state) {
            *hits.entry(name).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = hits.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(n, _)| n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCaps {
    pub definitions: usize,
    pub simp: usize,
    pub rules: usize,
    pub wp: usize,
}

impl Default for BucketCaps {
    fn default() -> Self {
        Self { definitions: 12, simp: 12, rules: 12, wp: 12 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameInventory {
    pub definitions: Vec<String>,
    pub simp_facts: Vec<String>,
    pub rule_facts: Vec<String>,
    pub wp_facts: Vec<String>,
    pub all: BTreeSet<String>,
}

impl NameInventory {
    pub fn role_of(&self, name: &str) -> Option<Role> {
        let has = |v: &Vec<String>| v.iter().any(|n| n == name);
        if has(&self.definitions) {
            Some(Role::Definition)
        } else if has(&self.simp_facts) {
            Some(Role::Simp)
        } else if has(&self.rule_facts) {
            Some(Role::Rule)
        } else if has(&self.wp_facts) {
            Some(Role::Wp)
        } else {
            None
        }
    }

    /// Definitions then simp facts, as offered under one heading.
    pub fn defs_and_simps(&self) -> Vec<&str> {
        self.definitions.iter().chain(&self.simp_facts).map(String::as_str).collect()
    }
}

/// `name` is the target or an alias such as `target.simps` / `target(1)`.
pub fn is_alias_of(name: &str, target: &str) -> bool {
    name == target
        || name
            .strip_prefix(target)
            .is_some_and(|rest| rest.starts_with('.') || rest.starts_with('('))
}

pub struct InventoryRequest<'a> {
    pub goal: &'a GoalFeatures,
    pub goal_text: &'a str,
    pub state: &'a ProofState,
    pub target: &'a str,
    /// Names already used by the proof prefix.
    pub prefix_names: &'a [String],
    pub caps: BucketCaps,
    pub ngram_k: usize,
}

pub fn assemble_inventory(req: &InventoryRequest<'_>, prover: &dyn Prover) -> NameInventory {
    let sources = [
        req.prefix_names.to_vec(),
        live_search(req.goal, req.state, prover),
        def_candidates(req.goal, req.state, prover),
        implicit_names_from_goal(req.goal),
        ngram_retrieve(&prover.fact_table(), req.goal_text, req.ngram_k),
    ];
    let mut inv = NameInventory::default();
    let mut seen = BTreeSet::new();
    for name in sources.into_iter().flatten() {
        if is_alias_of(&name, req.target) || !seen.insert(name.clone()) {
            continue;
        }
        if !prover.check_fact_exists(&name) {
            continue;
        }
        let statement = prover.fact_statement(&name).unwrap_or_default();
        let (bucket, cap) = match classify_role(&name, &statement) {
            Role::Definition => (&mut inv.definitions, req.caps.definitions),
            Role::Simp => (&mut inv.simp_facts, req.caps.simp),
            Role::Rule => (&mut inv.rule_facts, req.caps.rules),
            Role::Wp => (&mut inv.wp_facts, req.caps.wp),
        };
        if bucket.len() < cap {
            bucket.push(name);
        }
    }
    // Final sweep for self-references.
    for bucket in [&mut inv.definitions, &mut inv.simp_facts, &mut inv.rule_facts, &mut inv.wp_facts] {
        bucket.retain(|n| !is_alias_of(n, req.target) && prover.check_fact_exists(n));
    }
    inv.all = inv
        .definitions
        .iter()
        .chain(&inv.simp_facts)
        .chain(&inv.rule_facts)
        .chain(&inv.wp_facts)
        .cloned()
        .collect();
    inv
}
