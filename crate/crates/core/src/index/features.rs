//! Goal features and the hashed embedding built from them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term::{tokenize, Term};

pub const DEFAULT_DIMENSION: usize = 4096;

const TOKEN_WEIGHT: f64 = 1.0;
const CONSTANT_WEIGHT: f64 = 2.0;
const SHAPE_WEIGHT: f64 = 1.5;

const VAR_LABEL: &str = "_v";
const BOUND_LABEL: &str = "_b";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalFeatures {
    pub tokens: BTreeMap<String, usize>,
    pub constants: BTreeSet<String>,
    /// Parent head paired with a child label.
    pub shape: BTreeMap<(String, String), usize>,
    pub depth: usize,
    /// Head of the parsed goal, if it parsed.
    pub head: Option<String>,
}

impl GoalFeatures {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.constants.is_empty() && self.shape.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.tokens.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("goal has no features to embed")]
    EmptyGoal,
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

fn label(t: &Term) -> String {
    match t {
        Term::Var(_) => VAR_LABEL.to_string(),
        Term::Bound(_) => BOUND_LABEL.to_string(),
        other => other.head().unwrap_or(VAR_LABEL).to_string(),
    }
}

fn collect_shape(t: &Term, out: &mut BTreeMap<(String, String), usize>) {
    match t {
        Term::App(f, args) => {
            for a in args {
                *out.entry((f.clone(), label(a))).or_default() += 1;
                collect_shape(a, out);
            }
        }
        Term::Binder { quant, body, .. } => {
            *out.entry((quant.symbol().to_string(), label(body))).or_default() += 1;
            collect_shape(body, out);
        }
        _ => {}
    }
}

/// Total: text outside the toy grammar yields lexical tokens only.
pub fn parse_goal(goal_text: &str) -> GoalFeatures {
    let mut features = GoalFeatures::default();
    for tok in tokenize(goal_text) {
        if let Some(lexeme) = tok.lexeme() {
            *features.tokens.entry(lexeme).or_default() += 1;
        }
    }
    if let Ok(term) = Term::parse(goal_text) {
        term.constants(&mut features.constants);
        collect_shape(&term, &mut features.shape);
        features.depth = term.depth();
        features.head = term.head().map(str::to_string);
    }
    features
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn bucket(namespace: &str, key: &str, dimension: usize) -> usize {
    let mut bytes = Vec::with_capacity(namespace.len() + key.len());
    bytes.extend_from_slice(namespace.as_bytes());
    bytes.extend_from_slice(key.as_bytes());
    (fnv1a(&bytes) % dimension as u64) as usize
}

/// Hashed feature vector before normalisation; all-zero for empty features.
pub fn raw_embedding(features: &GoalFeatures, dimension: usize) -> Vec<f64> {
    let mut v = vec![0.0; dimension];
    for (tok, n) in &features.tokens {
        v[bucket("t:", tok, dimension)] += TOKEN_WEIGHT * *n as f64;
    }
    for c in &features.constants {
        v[bucket("c:", c, dimension)] += CONSTANT_WEIGHT;
    }
    for ((p, c), n) in &features.shape {
        v[bucket("s:", &format!("{p}\u{1f}{c}"), dimension)] += SHAPE_WEIGHT * *n as f64;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn embed_goal(features: &GoalFeatures, dimension: usize) -> Result<Vec<f64>, EmbedError> {
    if features.is_empty() {
        return Err(EmbedError::EmptyGoal);
    }
    Ok(raw_embedding(features, dimension))
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// `(1 - cos) / 2`, clipped to `[0, 1]`.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    let c = cosine(a, b)?;
    Ok(((1.0 - c) / 2.0).clamp(0.0, 1.0))
}
