//! From raw model text to a filtered list of candidate command sequences.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::names::{is_alias_of, NameInventory};
use crate::prompt::{head_word, Family, MethodPlan};
use crate::prover::command::{Command, Method};

pub const MAX_COMMANDS: usize = 2;
pub const REPAIR_DISTANCE: usize = 2;

/// Words that open a line worth keeping outside a code fence.
const COMMAND_KEYWORDS: &[&str] = &[
    "apply", "by", "done", "lemma", "theorem", "proof", "qed", "using", "unfolding", "oops", "sorry",
];

const METHOD_ALIASES: &[(&str, &str)] = &[("simp_all", "simp"), ("subst", "unfold"), ("wp_once", "wp")];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub commands: Vec<String>,
    pub first_method: Family,
    pub provenance: Provenance,
    pub dedupe_key: String,
}

impl Candidate {
    pub fn new(commands: Vec<String>, provenance: Provenance) -> Self {
        let first_method = commands.first().map(|c| Family::of_command(c)).unwrap_or(Family::Struct);
        let dedupe_key = commands.join("; ");
        Self { commands, first_method, provenance, dedupe_key }
    }

    /// Fact names referenced by the parseable commands.
    pub fn fact_names(&self) -> Vec<String> {
        self.commands
            .iter()
            .filter_map(|c| Command::parse(c).ok())
            .filter_map(|c| c.method().map(|m| m.fact_names().into_iter().map(str::to_string).collect::<Vec<_>>()))
            .flatten()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeError {
    #[error("empty candidate")]
    Empty,
    #[error("no recognizable proof command")]
    Unrepairable,
}

fn strip_list_marker(line: &str) -> &str {
    let t = line.trim_start();
    let t = t.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')).or_else(|| rest.strip_prefix(':')) {
            return r.trim_start();
        }
    }
    t
}

fn first_word(text: &str) -> &str {
    text.trim_start_matches(['`', '(']).split(|c: char| !(c.is_alphanumeric() || c == '_')).next().unwrap_or("")
}

/// Split model output into raw candidate strings, at most `c` of them.
pub fn parse_llm_output(text: &str, c: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut in_fence = false;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            in_fence = !in_fence;
            continue;
        }
        let item = strip_list_marker(trimmed).trim();
        if item.is_empty() {
            continue;
        }
        if in_fence || COMMAND_KEYWORDS.contains(&first_word(item)) {
            out.push(item.to_string());
        }
        if out.len() >= c {
            break;
        }
    }
    out
}

fn strip_comments(text: &str) -> String {
    let mut out = String::new();
    let mut rest = text;
    while let Some(start) = rest.find("(*") {
        out.push_str(&rest[..start]);
        match rest[start..].find("*)") {
            Some(end) => rest = &rest[start + end + 2..],
            None => {
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Split on `;` and on command keywords at parenthesis depth 0.
fn split_commands(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut depth = 0i32;
    let mut quoted = false;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '"' {
            quoted = !quoted;
        } else if !quoted {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ';' if depth <= 0 => {
                    parts.push(std::mem::take(&mut current));
                    i += 1;
                    continue;
                }
                _ => {}
            }
            let boundary = i == 0 || !(chars[i - 1].is_alphanumeric() || chars[i - 1] == '_');
            if depth <= 0 && boundary && !current.trim().is_empty() {
                let word: String = chars[i..].iter().take_while(|c| c.is_alphanumeric() || **c == '_').collect();
                if matches!(word.as_str(), "apply" | "by" | "done") {
                    parts.push(std::mem::take(&mut current));
                }
            }
        }
        current.push(c);
        i += 1;
    }
    parts.push(current);
    parts.into_iter().map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
}

fn nearest_name<'a>(name: &str, inventory: &'a NameInventory, target: &str) -> Option<&'a str> {
    inventory
        .all
        .iter()
        .filter(|n| !is_alias_of(n, target))
        .map(|n| (strsim::levenshtein(name, n), n.as_str()))
        .filter(|(d, _)| *d <= REPAIR_DISTANCE)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)))
        .map(|(_, n)| n)
}

fn repair_method(mut m: Method, inventory: &NameInventory, target: &str) -> Method {
    if let Some((_, to)) = METHOD_ALIASES.iter().find(|(from, _)| *from == m.name) {
        m.name = to.to_string();
    }
    let facts: BTreeSet<String> = m.fact_names().into_iter().map(str::to_string).collect();
    for arg in &mut m.args {
        if let crate::prover::command::MethodArg::Name(n) = arg {
            if !facts.contains(n.as_str()) || inventory.all.contains(n.as_str()) || is_alias_of(n, target) {
                continue;
            }
            if let Some(fixed) = nearest_name(n, inventory, target) {
                *n = fixed.to_string();
            }
        }
    }
    m
}

/// Canonicalise one raw candidate.
pub fn normalize(raw: &str, inventory: &NameInventory, target: &str) -> Result<Candidate, NormalizeError> {
    let cleaned = strip_comments(raw).replace('`', "");
    let cleaned = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    let cleaned = cleaned.trim_end_matches(['.', ',']).trim();
    if cleaned.is_empty() {
        return Err(NormalizeError::Empty);
    }
    let mut commands = Vec::new();
    for part in split_commands(cleaned) {
        let word = first_word(&part);
        match word {
            "apply" => commands.push(part.clone()),
            "done" => commands.push(part.clone()),
            "by" => {
                let method = part.trim_start_matches("by").trim();
                commands.push(format!("apply {method}"));
                commands.push("done".to_string());
            }
            _ => {
                if commands.is_empty() {
                    return Err(NormalizeError::Unrepairable);
                }
                break;
            }
        }
    }
    if commands.is_empty() {
        return Err(NormalizeError::Unrepairable);
    }
    commands.truncate(MAX_COMMANDS);
    let commands = commands
        .into_iter()
        .map(|c| match Command::parse(&c) {
            Ok(Command::Apply(m)) => Command::Apply(repair_method(m, inventory, target)).to_string(),
            Ok(Command::Done) => "done".to_string(),
            Err(_) => c,
        })
        .collect();
    Ok(Candidate::new(commands, Provenance::Llm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectKind {
    Empty,
    Duplicate,
    ImplausibleSyntax,
    UnknownMethod,
    TimeoutProne,
    UnresolvedTacticVar,
    UngroundedFact,
    SelfReference,
}

impl RejectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectKind::Empty => "empty",
            RejectKind::Duplicate => "duplicate",
            RejectKind::ImplausibleSyntax => "implausible_syntax",
            RejectKind::UnknownMethod => "unknown_method",
            RejectKind::TimeoutProne => "timeout_prone",
            RejectKind::UnresolvedTacticVar => "unresolved_tactic_var",
            RejectKind::UngroundedFact => "ungrounded_fact",
            RejectKind::SelfReference => "self_reference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectReason {
    pub reason: RejectKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejected {
    /// Dedupe key, or the raw text when normalisation failed.
    pub text: String,
    pub reason: RejectReason,
}

/// Patterns treated as likely to exhaust the probe budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeoutRules {
    pub max_simp_add_names: usize,
    pub reject_nested_repeat: bool,
}

impl Default for TimeoutRules {
    fn default() -> Self {
        Self { max_simp_add_names: 8, reject_nested_repeat: true }
    }
}

pub struct FilterContext<'a> {
    pub inventory: &'a NameInventory,
    pub target: &'a str,
    pub methods: &'a [String],
    pub timeout: TimeoutRules,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    pub accepted: Vec<Candidate>,
    pub rejected: Vec<Rejected>,
}

fn has_schematic_outside_quotes(text: &str) -> bool {
    let mut quoted = false;
    for c in text.chars() {
        match c {
            '"' => quoted = !quoted,
            '?' if !quoted => return true,
            _ => {}
        }
    }
    false
}

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '\'' | '.' | '(' | ')')))
        .flat_map(|w| w.split(['(', ')']))
        .filter(|w| !w.is_empty())
}

fn check(c: &Candidate, ctx: &FilterContext<'_>) -> Option<RejectReason> {
    let reject = |reason, detail: String| Some(RejectReason { reason, detail });
    let mut parsed = Vec::new();
    for cmd in &c.commands {
        match Command::parse(cmd) {
            Ok(p) => parsed.push(p),
            Err(e) => return reject(RejectKind::ImplausibleSyntax, format!("`{cmd}`: {e}")),
        }
    }
    if parsed.first() == Some(&Command::Done) && parsed.len() > 1 {
        return reject(RejectKind::ImplausibleSyntax, "commands after done".into());
    }
    for m in parsed.iter().filter_map(Command::method) {
        if !ctx.methods.contains(&m.name) {
            return reject(RejectKind::UnknownMethod, m.name.clone());
        }
    }
    for m in parsed.iter().filter_map(Command::method) {
        if m.name == "simp" && m.fact_names().len() > ctx.timeout.max_simp_add_names {
            return reject(RejectKind::TimeoutProne, format!("simp with {} facts", m.fact_names().len()));
        }
        if ctx.timeout.reject_nested_repeat && m.repeat > 1 {
            return reject(RejectKind::TimeoutProne, "nested repetition".into());
        }
    }
    if c.commands.iter().any(|cmd| has_schematic_outside_quotes(cmd)) {
        return reject(RejectKind::UnresolvedTacticVar, c.dedupe_key.clone());
    }
    for m in parsed.iter().filter_map(Command::method) {
        if let Some(n) = m
            .fact_names()
            .into_iter()
            .find(|n| !ctx.inventory.all.contains(*n) && !is_alias_of(n, ctx.target))
        {
            return reject(RejectKind::UngroundedFact, n.to_string());
        }
    }
    if c.commands.iter().any(|cmd| words(cmd).any(|w| is_alias_of(w, ctx.target))) {
        return reject(RejectKind::SelfReference, ctx.target.to_string());
    }
    None
}

/// Apply the reject rules in order; the first matching rule names the reason.
pub fn static_filter(
    cands: &[Result<Candidate, (String, NormalizeError)>],
    ctx: &FilterContext<'_>,
    seen_keys: &BTreeSet<String>,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    let mut batch = BTreeSet::new();
    for item in cands {
        let c = match item {
            Err((raw, NormalizeError::Empty)) => {
                out.rejected.push(Rejected {
                    text: raw.clone(),
                    reason: RejectReason { reason: RejectKind::Empty, detail: String::new() },
                });
                continue;
            }
            Err((raw, NormalizeError::Unrepairable)) => {
                out.rejected.push(Rejected {
                    text: raw.clone(),
                    reason: RejectReason {
                        reason: RejectKind::ImplausibleSyntax,
                        detail: "no recognizable proof command".into(),
                    },
                });
                continue;
            }
            Ok(c) => c,
        };
        if seen_keys.contains(&c.dedupe_key) || !batch.insert(c.dedupe_key.clone()) {
            out.rejected.push(Rejected {
                text: c.dedupe_key.clone(),
                reason: RejectReason { reason: RejectKind::Duplicate, detail: String::new() },
            });
            continue;
        }
        match check(c, ctx) {
            Some(reason) => out.rejected.push(Rejected { text: c.dedupe_key.clone(), reason }),
            None => out.accepted.push(c.clone()),
        }
    }
    out
}

/// Parse and normalise raw model responses into filter input.
pub fn normalize_all(
    responses: &[String],
    c: usize,
    inventory: &NameInventory,
    target: &str,
) -> Vec<Result<Candidate, (String, NormalizeError)>> {
    let mut out = Vec::new();
    for text in responses {
        let raws = parse_llm_output(text, c);
        if raws.is_empty() {
            out.push(Err((text.trim().to_string(), NormalizeError::Empty)));
        }
        for raw in raws {
            out.push(normalize(&raw, inventory, target).map_err(|e| (raw.clone(), e)));
        }
    }
    out
}

/// Too few accepted model candidates, or too little variety among them.
pub fn is_weak(accepted_llm: &[Candidate], c: usize) -> bool {
    let distinct: BTreeSet<Family> = accepted_llm.iter().map(|c| c.first_method).collect();
    accepted_llm.len() < c.div_ceil(3) || distinct.len() < 2
}

fn schema(family: Family, i: usize, inventory: &NameInventory) -> Vec<String> {
    let pick = |v: &Vec<String>| v.get(i % v.len().max(1)).cloned().filter(|_| !v.is_empty());
    let mut out = Vec::new();
    match family {
        Family::Simp => {
            if i == 0 {
                out.push("apply simp".to_string());
            }
            if let Some(n) = pick(&inventory.simp_facts) {
                out.push(format!("apply (simp add: {n})"));
            }
        }
        Family::Rule => {
            if let Some(n) = pick(&inventory.rule_facts) {
                out.push(format!("apply (rule {n})"));
            }
        }
        Family::Struct => {
            if let Some(n) = pick(&inventory.definitions) {
                out.push(format!("apply (unfold {n})"));
            }
        }
        Family::Wp => {
            if let Some(n) = pick(&inventory.wp_facts) {
                out.push(format!("apply (wp {n})"));
            }
        }
    }
    out
}

/// Grounded schema instances, in plan order, cycling through bucket heads.
pub fn fallback_candidates(inventory: &NameInventory, plan: &MethodPlan, n: usize) -> Vec<Candidate> {
    let order: Vec<Family> = if plan.ranked.is_empty() { Family::ALL.to_vec() } else { plan.ranked.clone() };
    let longest = [
        inventory.simp_facts.len(),
        inventory.rule_facts.len(),
        inventory.definitions.len(),
        inventory.wp_facts.len(),
    ]
    .into_iter()
    .max()
    .unwrap_or(0)
    .max(1);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for i in 0..longest {
        for f in &order {
            for cmd in schema(*f, i, inventory) {
                if out.len() < n && seen.insert(cmd.clone()) {
                    out.push(Candidate::new(vec![cmd], Provenance::Fallback));
                }
            }
        }
    }
    out
}

/// Head method family of a raw command, tolerant of malformed text.
pub fn raw_family(command: &str) -> Family {
    head_word(command).map(Family::of_method).unwrap_or(Family::Struct)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inventory() -> NameInventory {
        let mut inv = NameInventory {
            definitions: vec!["plus_def".into()],
            simp_facts: vec!["add_zero".into(), "zero_add".into()],
            rule_facts: vec!["conj_intro".into()],
            wp_facts: vec!["store_wp".into()],
            all: BTreeSet::new(),
        };
        inv.all = ["plus_def", "add_zero", "zero_add", "conj_intro", "store_wp"].iter().map(|s| s.to_string()).collect();
        inv
    }

    #[test]
    fn output_splitting() {
        assert_eq!(parse_llm_output("1. apply simp\n2. apply (rule r)", 12), ["apply simp", "apply (rule r)"]);
        assert!(parse_llm_output("I think the goal follows from arithmetic.\nTry harder.", 12).is_empty());
        let fenced = "Here:\n```isabelle\napply simp\napply (rule r)\napply (unfold d)\n```";
        assert_eq!(parse_llm_output(fenced, 2), ["apply simp", "apply (rule r)"]);
        assert_eq!(parse_llm_output("- `apply auto`\n* by simp", 12), ["`apply auto`", "by simp"]);
    }

    #[test]
    fn normalization() {
        let inv = inventory();
        let c = normalize("by simp", &inv, "t").unwrap();
        assert_eq!(c.commands, ["apply simp", "done"]);
        let c = normalize("apply (simp add: add_zer)", &inv, "t").unwrap();
        assert_eq!(c.commands, ["apply (simp add: add_zero)"]);
        assert_eq!(normalize("lemma foo: \"x = x\"", &inv, "t"), Err(NormalizeError::Unrepairable));
        assert_eq!(normalize("  (* nothing *) ", &inv, "t"), Err(NormalizeError::Empty));
        let c = normalize("apply   (simp_all  add: add_zero) (* tidy *) ; done", &inv, "t").unwrap();
        assert_eq!(c.dedupe_key, "apply (simp add: add_zero); done");
        let c = normalize("apply (rule conj_intro) apply simp apply simp", &inv, "t").unwrap();
        assert_eq!(c.commands.len(), 2);
        assert_eq!(c.first_method, Family::Rule);
        // Far-off names are left for the filter.
        let c = normalize("apply (rule ghost_lemma)", &inv, "t").unwrap();
        assert_eq!(c.commands, ["apply (rule ghost_lemma)"]);
    }

    #[test]
    fn fallback_schemas() {
        let inv = inventory();
        let plan = crate::prompt::derive_plan(&Family::ALL, 12);
        assert!(fallback_candidates(&inv, &plan, 0).is_empty());
        let five = fallback_candidates(&inv, &plan, 5);
        let keys: BTreeSet<&str> = five.iter().map(|c| c.dedupe_key.as_str()).collect();
        assert_eq!(keys.len(), 5);
        assert!(five.iter().all(|c| c.provenance == Provenance::Fallback));

        let mut no_rules = inv.clone();
        no_rules.rule_facts.clear();
        assert!(fallback_candidates(&no_rules, &plan, 20).iter().all(|c| c.first_method != Family::Rule));

        let empty = NameInventory::default();
        assert_eq!(fallback_candidates(&empty, &plan, 3)[0].commands, ["apply simp"]);
    }

    #[test]
    fn weakness() {
        let a = Candidate::new(vec!["apply simp".into()], Provenance::Llm);
        let b = Candidate::new(vec!["apply (rule r)".into()], Provenance::Llm);
        assert!(is_weak(&[a.clone(), b.clone()], 12));
        assert!(!is_weak(&[a.clone(), b.clone(), a.clone(), b.clone()], 12));
        assert!(is_weak(&[a.clone(), a.clone(), a.clone(), a], 12));
    }
}
