//! Method families, diversification plans, failure feedback and the prompt
//! text itself.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::index::{GoalFeatures, TraceIndex};
use crate::names::{mentions_wp, NameInventory};
use crate::prover::command::Command;
use crate::prover::{ErrorClass, Hypothesis};
use crate::retrieval::TacticTemplate;

/// Shown to the model on every call, after any concrete feedback.
pub const STANDING_WARNING: &str = "avoid context-local pseudo-facts such as assms, this, that, and thesis";

pub const FEEDBACK_LIMIT: usize = 400;
pub const MAX_RENDERED_TEMPLATES: usize = 5;
const FEEDBACK_ITEMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Rule,
    Simp,
    Struct,
    Wp,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Rule, Family::Simp, Family::Struct, Family::Wp];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Rule => "rule",
            Family::Simp => "simp",
            Family::Struct => "struct",
            Family::Wp => "wp",
        }
    }

    pub fn of_method(name: &str) -> Family {
        match name {
            "simp" | "simp_all" | "auto" | "clarsimp" | "force" | "fastforce" => Family::Simp,
            "rule" | "erule" | "drule" | "frule" | "intro" | "elim" | "assumption" | "blast" | "fast" => {
                Family::Rule
            }
            "wp" | "wpsimp" | "wpc" | "wp_once" => Family::Wp,
            _ => Family::Struct,
        }
    }

    /// Family of a command's head method; `done` and unparseable text are
    /// structural.
    pub fn of_command(command: &str) -> Family {
        match Command::parse(command) {
            Ok(Command::Apply(m)) => Family::of_method(&m.name),
            Ok(Command::Done) => Family::Struct,
            Err(_) => head_word(command).map(Family::of_method).unwrap_or(Family::Struct),
        }
    }
}

/// Method name following `apply`, tolerant of malformed text.
pub fn head_word(command: &str) -> Option<&str> {
    let rest = command.trim().strip_prefix("apply")?;
    rest.trim_start()
        .trim_start_matches('(')
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .find(|w| !w.is_empty())
}

pub fn goal_family(goal: &GoalFeatures) -> Family {
    match goal.head.as_deref() {
        Some(h) if mentions_wp(h) => Family::Wp,
        Some("=") => Family::Simp,
        Some("⟶" | "⟹" | "∀" | "∃") => Family::Rule,
        _ => Family::Struct,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodStats {
    #[serde(default)]
    pub usage: BTreeMap<Family, u64>,
    #[serde(default)]
    pub repo_prevalence: BTreeMap<Family, u64>,
}

impl MethodStats {
    /// Fresh usage; prevalence counted over the first step of every suffix.
    pub fn from_index(index: &TraceIndex) -> Self {
        let mut repo_prevalence = BTreeMap::new();
        for r in index.records() {
            if let Some(first) = r.suffix.first() {
                *repo_prevalence.entry(Family::of_command(first)).or_default() += 1;
            }
        }
        Self { usage: BTreeMap::new(), repo_prevalence }
    }

    pub fn usage_of(&self, f: Family) -> u64 {
        self.usage.get(&f).copied().unwrap_or(0)
    }

    pub fn prevalence_of(&self, f: Family) -> u64 {
        self.repo_prevalence.get(&f).copied().unwrap_or(0)
    }

    pub fn record_success(&mut self, f: Family) {
        *self.usage.entry(f).or_default() += 1;
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }
}

/// Order the families by goal compatibility, template evidence, rarity,
/// prevalence, then name.
pub fn rank_methods(family: Family, templates: &[TacticTemplate], stats: &MethodStats) -> Vec<Family> {
    let mut evidence: BTreeMap<Family, usize> = BTreeMap::new();
    for t in templates {
        if let Some(first) = t.steps.first() {
            *evidence.entry(Family::of_command(first)).or_default() += 1;
        }
    }
    let mut ranked = Family::ALL.to_vec();
    ranked.sort_by_key(|f| {
        (
            *f != family,
            std::cmp::Reverse(evidence.get(f).copied().unwrap_or(0)),
            stats.usage_of(*f),
            std::cmp::Reverse(stats.prevalence_of(*f)),
            *f,
        )
    });
    ranked
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodPlan {
    pub ranked: Vec<Family>,
    pub targets: BTreeMap<Family, usize>,
    pub slots: Vec<Family>,
}

/// Share given to the top family. Capped so that every family keeps a slot
/// once there are at least four.
fn top_share(c: usize) -> usize {
    let half = c.div_ceil(2);
    if c >= 4 {
        half.min(c - 3)
    } else {
        half
    }
}

pub fn derive_plan(ranked: &[Family], c: usize) -> MethodPlan {
    let mut targets: BTreeMap<Family, usize> = BTreeMap::new();
    if ranked.is_empty() || c == 0 {
        return MethodPlan { ranked: ranked.to_vec(), targets, slots: Vec::new() };
    }
    targets.insert(ranked[0], top_share(c));
    let others = &ranked[1..];
    let mut rest = c - top_share(c);
    let mut i = 0;
    while rest > 0 {
        let f = if others.is_empty() { ranked[0] } else { others[i % others.len()] };
        *targets.entry(f).or_default() += 1;
        rest -= 1;
        i += 1;
    }
    let mut remaining = targets.clone();
    let mut slots = Vec::with_capacity(c);
    while slots.len() < c {
        for f in ranked {
            let left = remaining.entry(*f).or_default();
            if *left > 0 {
                *left -= 1;
                slots.push(*f);
            }
        }
    }
    MethodPlan { ranked: ranked.to_vec(), targets, slots }
}

/// One verification failure remembered for feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureNote {
    pub command: String,
    pub class: ErrorClass,
    pub message: String,
}

fn quoted_name(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

fn clip(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        let mut out: String = s.chars().take(max.saturating_sub(3)).collect();
        out.push_str("...");
        out
    }
}

/// Compact feedback: one line per error class, alphabetical, naming at most
/// three offenders, followed by the standing warning.
pub fn summarize_failures(notes: &[FailureNote]) -> String {
    let mut by_class: BTreeMap<&'static str, Vec<String>> = BTreeMap::new();
    for n in notes {
        let item = match n.class {
            ErrorClass::UnknownFact => quoted_name(&n.message).unwrap_or(&n.command).to_string(),
            _ => n.command.clone(),
        };
        let items = by_class.entry(n.class.as_str()).or_default();
        if !items.contains(&item) {
            items.push(item);
        }
    }
    let mut lines: Vec<String> = by_class
        .into_iter()
        .map(|(class, items)| {
            let shown: Vec<String> = items.iter().take(FEEDBACK_ITEMS).map(|i| clip(i, 48)).collect();
            let mut line = format!("{class}: {}", shown.join(", "));
            if items.len() > FEEDBACK_ITEMS {
                let _ = write!(line, " and {} more", items.len() - FEEDBACK_ITEMS);
            }
            line
        })
        .collect();
    let budget = FEEDBACK_LIMIT - STANDING_WARNING.len() - 1;
    while !lines.is_empty() && lines.iter().map(|l| l.len() + 1).sum::<usize>() > budget {
        lines.pop();
    }
    lines.push(STANDING_WARNING.to_string());
    lines.join("\n")
}

pub struct PromptInput<'a> {
    pub goal: &'a str,
    pub assumptions: &'a [Hypothesis],
    pub prefix: &'a [String],
    pub feedback: &'a str,
    pub templates: &'a [TacticTemplate],
    pub inventory: &'a NameInventory,
    pub plan: &'a MethodPlan,
    pub candidates: usize,
}

fn names_row(names: &[&str]) -> String {
    if names.is_empty() {
        "none".to_string()
    } else {
        names.join(", ")
    }
}

fn diversity_line(plan: &MethodPlan) -> String {
    let parts: Vec<String> = plan
        .ranked
        .iter()
        .filter_map(|f| match plan.targets.get(f) {
            Some(&n) if n > 0 => Some(format!("{n} {}", f.as_str())),
            _ => None,
        })
        .collect();
    format!(
        "spread the first methods over the families as {}; no two candidates may differ only in spacing or argument order.",
        parts.join(", ")
    )
}

/// Section headings, in emission order.
pub const SECTIONS: [&str; 6] = [
    "System role.",
    "Task.",
    "Current state.",
    "Structural retrieval templates.",
    "Role-partitioned theorem inventory.",
    "Generation contract.",
];

pub fn build_prompt(input: &PromptInput<'_>) -> String {
    let c = input.candidates;
    let mut p = String::new();
    let _ = writeln!(p, "{} You write Isabelle/HOL proof steps for a machine-checked development.", SECTIONS[0]);
    let _ = writeln!(
        p,
        "{} Give exactly {c} different candidates for the next step on the goal below. Each candidate has one or two commands. Write `apply` commands only, optionally followed by `done`; never use `by`.",
        SECTIONS[1]
    );
    p.push('\n');
    let _ = writeln!(p, "{}", SECTIONS[2]);
    let _ = writeln!(p, "- Goal: {}", input.goal);
    let assumptions: Vec<String> = input.assumptions.iter().map(|h| format!("{}: {}", h.name, h.text)).collect();
    let _ = writeln!(
        p,
        "- Assumptions: {}",
        if assumptions.is_empty() { "none".to_string() } else { assumptions.join("; ") }
    );
    let _ = writeln!(
        p,
        "- Proof prefix: {}",
        if input.prefix.is_empty() { "none".to_string() } else { input.prefix.join(" ; ") }
    );
    let mut feedback = input.feedback.lines();
    let _ = writeln!(p, "- Feedback: {}", feedback.next().unwrap_or(STANDING_WARNING));
    for line in feedback {
        let _ = writeln!(p, "  {line}");
    }
    p.push('\n');
    let _ = writeln!(p, "{}", SECTIONS[3]);
    if input.templates.is_empty() {
        let _ = writeln!(p, "- none");
    }
    for (i, t) in input.templates.iter().take(MAX_RENDERED_TEMPLATES).enumerate() {
        let _ = writeln!(p, "- T{}: {}", i + 1, t.steps.join(" → "));
    }
    p.push('\n');
    let inv = input.inventory;
    let _ = writeln!(p, "{}", SECTIONS[4]);
    let _ = writeln!(p, "- Defs/Simp: {}", names_row(&inv.defs_and_simps()));
    let rules: Vec<&str> = inv.rule_facts.iter().map(String::as_str).collect();
    let _ = writeln!(p, "- Rules: {}", names_row(&rules));
    let wp: Vec<&str> = inv.wp_facts.iter().map(String::as_str).collect();
    let _ = writeln!(p, "- WP/Ref.: {}", names_row(&wp));
    p.push('\n');
    let _ = writeln!(p, "{}", SECTIONS[5]);
    let _ = writeln!(
        p,
        "- Grounding: name only facts from the inventory above. Placeholders in the templates hide real names; do not guess them."
    );
    let _ = writeln!(
        p,
        "- Reasoning: copy a template's shape first and then fill in inventory names. A step that makes progress is better than a gamble on closing the goal at once."
    );
    let _ = writeln!(p, "- Diversity: {}", diversity_line(input.plan));
    let _ = writeln!(
        p,
        "- Output: exactly {c} numbered lines, one candidate per line, with the two commands of a candidate separated by `;`."
    );
    p
}

/// Every concrete name in `prompt` that is a fact name of `facts`.
pub fn fact_names_in(prompt: &str, facts: &BTreeSet<String>) -> BTreeSet<String> {
    prompt
        .split(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '\'' | '.')))
        .map(|w| w.trim_end_matches('.'))
        .filter(|w| facts.contains(*w))
        .map(str::to_string)
        .collect()
}
