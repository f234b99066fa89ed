//! Structural retrieval over the proof-suffix index and template abstraction.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{cosine, distance, parse_goal, raw_embedding, EmbedError, GoalFeatures, TraceIndex, TraceRecord};
use crate::names::classify_role;
use crate::prover::command::{Command, Method, MethodArg};
use crate::prover::Prover;

pub const REWEIGHT_STRUCT: f64 = 0.55;
pub const REWEIGHT_GOAL: f64 = 0.35;
pub const REWEIGHT_CONST: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructWeights {
    pub alpha: f64,
    pub beta: f64,
    pub c_max: usize,
}

impl Default for StructWeights {
    fn default() -> Self {
        Self { alpha: 0.05, beta: 0.10, c_max: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("no indexed records outside the target theorem")]
    EmptyIndex,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// A goal prepared for retrieval.
#[derive(Debug, Clone)]
pub struct Query {
    pub text: String,
    pub features: GoalFeatures,
    pub embedding: Vec<f64>,
}

impl Query {
    pub fn new(goal_text: &str, dimension: usize) -> Self {
        let features = parse_goal(goal_text);
        let embedding = raw_embedding(&features, dimension);
        Self { text: goal_text.to_string(), features, embedding }
    }
}

/// Multiset Jaccard: sum of minimum counts over sum of maximum counts.
pub fn lexical_overlap(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> f64 {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let (mut lo, mut hi) = (0usize, 0usize);
    for k in keys {
        let (x, y) = (a.get(k).copied().unwrap_or(0), b.get(k).copied().unwrap_or(0));
        lo += x.min(y);
        hi += x.max(y);
    }
    if hi == 0 {
        0.0
    } else {
        lo as f64 / hi as f64
    }
}

pub fn set_jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// `(1 - d) + α·min(m, c_max) + β·ℓ`.
pub fn struct_score_from_parts(d: f64, m: usize, l: f64, w: &StructWeights) -> f64 {
    (1.0 - d) + w.alpha * m.min(w.c_max) as f64 + w.beta * l
}

pub fn struct_score(
    query: &Query,
    record: &TraceRecord,
    record_features: &GoalFeatures,
    w: &StructWeights,
) -> Result<f64, EmbedError> {
    let d = distance(&query.embedding, &record.embedding)?;
    let m = query.features.constants.intersection(&record.constants).count();
    let l = lexical_overlap(&query.features.tokens, &record_features.tokens);
    Ok(struct_score_from_parts(d, m, l, w))
}

pub fn rerank_score(s_struct: f64, s_goal: f64, s_const: f64) -> f64 {
    REWEIGHT_STRUCT * s_struct + REWEIGHT_GOAL * s_goal + REWEIGHT_CONST * s_const
}

#[derive(Debug, Clone, Copy)]
pub struct Shortlisted<'a> {
    pub record: &'a TraceRecord,
    pub s_struct: f64,
}

fn by_record(a: &TraceRecord, b: &TraceRecord) -> Ordering {
    a.theorem_id.cmp(&b.theorem_id).then(a.step_index.cmp(&b.step_index))
}

/// Top-`k` records by structural score, never from `target`.
pub fn retrieve_shortlist<'a>(
    index: &'a TraceIndex,
    query: &Query,
    target: &str,
    k: usize,
    w: &StructWeights,
) -> Result<Vec<Shortlisted<'a>>, RetrievalError> {
    let mut scored = Vec::new();
    for (i, record) in index.records().iter().enumerate() {
        if record.theorem_id == target {
            continue;
        }
        let s_struct = struct_score(query, record, index.features(i), w)?;
        scored.push(Shortlisted { record, s_struct });
    }
    if scored.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    scored.sort_by(|a, b| b.s_struct.total_cmp(&a.s_struct).then_with(|| by_record(a.record, b.record)));
    scored.truncate(k);
    Ok(scored)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScoredCandidate<'a> {
    pub record: &'a TraceRecord,
    pub s_struct: f64,
    pub s_goal: f64,
    pub s_const: f64,
    pub s_rerank: f64,
}

impl ScoredCandidate<'_> {
    pub fn recompute(&self) -> f64 {
        rerank_score(self.s_struct, self.s_goal, self.s_const)
    }
}

/// Deterministic order used after reranking.
pub fn sort_scored(cands: &mut [ScoredCandidate<'_>]) {
    cands.sort_by(|a, b| b.s_rerank.total_cmp(&a.s_rerank).then_with(|| by_record(a.record, b.record)));
}

pub fn rerank<'a>(
    shortlist: &[Shortlisted<'a>],
    index: &TraceIndex,
    query: &Query,
    target_statement: &str,
) -> Vec<ScoredCandidate<'a>> {
    let target_constants = parse_goal(target_statement).constants;
    let mut out: Vec<ScoredCandidate<'a>> = shortlist
        .iter()
        .map(|s| {
            let initial = index.initial_record(&s.record.theorem_id).unwrap_or(s.record);
            let s_goal = cosine(&query.embedding, &initial.embedding).unwrap_or(0.0).clamp(0.0, 1.0);
            let s_const = set_jaccard(&target_constants, &initial.constants);
            ScoredCandidate {
                record: s.record,
                s_struct: s.s_struct,
                s_goal,
                s_const,
                s_rerank: rerank_score(s.s_struct, s_goal, s_const),
            }
        })
        .collect();
    sort_scored(&mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacticTemplate {
    pub steps: Vec<String>,
    pub source_theorem: String,
    pub source_score: f64,
}

fn abstract_method(method: &Method, prover: &dyn Prover) -> Method {
    let facts: BTreeSet<&str> = method.fact_names().into_iter().collect();
    let mut args: Vec<MethodArg> = Vec::new();
    for arg in &method.args {
        let replaced = match arg {
            MethodArg::Name(n) if facts.contains(n.as_str()) && prover.check_fact_exists(n) => {
                let statement = prover.fact_statement(n).unwrap_or_default();
                MethodArg::Name(classify_role(n, &statement).placeholder().to_string())
            }
            other => other.clone(),
        };
        let duplicate = matches!((&replaced, args.last()), (MethodArg::Name(p), Some(MethodArg::Name(q)))
            if p == q && p.starts_with('<'));
        if !duplicate {
            args.push(replaced);
        }
    }
    Method { name: method.name.clone(), args, repeat: method.repeat }
}

/// Word-level fallback for commands outside the command grammar.
fn abstract_raw(command: &str, prover: &dyn Prover) -> String {
    let mut out = String::new();
    let mut word = String::new();
    let mut last_placeholder: Option<&'static str> = None;
    let flush = |word: &mut String, out: &mut String, last: &mut Option<&'static str>| {
        if word.is_empty() {
            return;
        }
        if prover.check_fact_exists(word) {
            let statement = prover.fact_statement(word).unwrap_or_default();
            let p = classify_role(word, &statement).placeholder();
            if *last != Some(p) {
                out.push_str(p);
            } else {
                let trimmed = out.trim_end().len();
                out.truncate(trimmed);
            }
            *last = Some(p);
        } else {
            out.push_str(word);
            *last = None;
        }
        word.clear();
    };
    for c in command.chars() {
        if c.is_alphanumeric() || matches!(c, '_' | '\'' | '.') {
            word.push(c);
        } else {
            flush(&mut word, &mut out, &mut last_placeholder);
            if !c.is_whitespace() {
                last_placeholder = None;
            }
            out.push(c);
        }
    }
    flush(&mut word, &mut out, &mut last_placeholder);
    out
}

/// Replace every fact name in `suffix` with its role placeholder.
pub fn abstract_steps(suffix: &[String], prover: &dyn Prover) -> Vec<String> {
    suffix
        .iter()
        .map(|cmd| match Command::parse(cmd) {
            Ok(Command::Apply(m)) => Command::Apply(abstract_method(&m, prover)).to_string(),
            Ok(Command::Done) => "done".to_string(),
            Err(_) => abstract_raw(cmd, prover),
        })
        .collect()
}

pub fn abstract_template(suffix: &[String], source_theorem: &str, source_score: f64, prover: &dyn Prover) -> TacticTemplate {
    TacticTemplate {
        steps: abstract_steps(suffix, prover),
        source_theorem: source_theorem.to_string(),
        source_score,
    }
}

/// Templates from the best `n` candidates, at most `per_theorem` from any
/// one source theorem (`None` disables the cap).
pub fn select_templates(
    reranked: &[ScoredCandidate<'_>],
    n: usize,
    per_theorem: Option<usize>,
    prover: &dyn Prover,
) -> Vec<TacticTemplate> {
    let mut taken: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for c in reranked {
        if out.len() >= n {
            break;
        }
        let count = taken.entry(c.record.theorem_id.as_str()).or_default();
        if per_theorem.is_some_and(|cap| *count >= cap) {
            continue;
        }
        *count += 1;
        out.push(abstract_template(&c.record.suffix, &c.record.theorem_id, c.s_rerank, prover));
    }
    out
}
