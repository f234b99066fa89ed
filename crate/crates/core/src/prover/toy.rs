use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::command::{Command, Method};
use super::{
    ErrorClass, FactEntry, Hypothesis, ProofState, Prover, ProverError, StepResult, TheoryCheck,
    TOY_PROBE_BUDGET,
};
use crate::term::{self, builtin_simp_rules, match_term, RewriteError, RewriteRule, Rewriter, Subst, Term};

/// Rewrite steps allowed per `simp` / `unfold` call.
pub const MAX_REWRITE_STEPS: usize = 1000;
const MAX_REPEAT: usize = 100;

const METHODS: &[&str] = &["assumption", "cases", "rule", "simp", "unfold", "wp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDecl {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
    /// Member of the default simp set.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub simp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactDecl {
    pub name: String,
    #[serde(default)]
    pub premises: Vec<String>,
    pub conclusion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Definition {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremDecl {
    pub name: String,
    pub statement: String,
    /// Each premise may carry a label: `"h: P(x)"`.
    #[serde(default)]
    pub premises: Vec<String>,
    #[serde(default)]
    pub script: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortDecl {
    pub name: String,
    pub constructors: Vec<String>,
}

/// A toy theory as loaded from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToyTheory {
    #[serde(default)]
    pub sorts: Vec<SortDecl>,
    /// Variable name to sort name, consulted by `cases`.
    #[serde(default)]
    pub variables: BTreeMap<String, String>,
    #[serde(default)]
    pub rules: Vec<RuleDecl>,
    #[serde(default)]
    pub facts: Vec<FactDecl>,
    #[serde(default)]
    pub definitions: Vec<Definition>,
    #[serde(default)]
    pub theorems: Vec<TheoremDecl>,
}

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("cannot read theory file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed theory file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("`{name}`: cannot parse `{text}`: {source}")]
    Term {
        name: String,
        text: String,
        source: term::ParseError,
    },
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("definition `{0}` must end in `_def`")]
    DefinitionName(String),
    #[error("rule `{0}` has a bare variable on its left-hand side")]
    VariableLhs(String),
    #[error("sort `{sort}`: constructor `{constructor}` looks like a variable")]
    Constructor { sort: String, constructor: String },
    #[error("variable `{var}` has undeclared sort `{sort}`")]
    UnknownSort { var: String, sort: String },
}

impl ToyTheory {
    pub fn from_json(text: &str) -> Result<Self, TheoryError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, TheoryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FactKind {
    Rewrite,
    Fact,
    Definition,
    Theorem,
}

#[derive(Debug, Clone)]
struct CompiledFact {
    name: String,
    kind: FactKind,
    premises: Vec<Term>,
    conclusion: Term,
    simp: bool,
    constants: BTreeSet<String>,
}

impl CompiledFact {
    fn statement(&self) -> String {
        let t = self
            .premises
            .iter()
            .rev()
            .fold(self.conclusion.clone(), |acc, p| Term::App("⟹".into(), vec![p.clone(), acc]));
        t.to_string()
    }

    fn as_rewrite(&self) -> Option<RewriteRule> {
        if !self.premises.is_empty() {
            return None;
        }
        let (lhs, rhs) = match self.conclusion.as_equation() {
            Some((l, r)) => (l.clone(), r.clone()),
            None => (self.conclusion.clone(), Term::truth()),
        };
        if matches!(lhs, Term::Var(_)) {
            return None;
        }
        Some(RewriteRule { name: self.name.clone(), lhs, rhs, schematic: true })
    }
}

#[derive(Debug, Clone)]
struct CompiledTheorem {
    statement: Term,
    premises: Vec<(String, Term)>,
    script: Vec<String>,
}

/// Deterministic, pure implementation of the prover contract.
#[derive(Debug, Clone)]
pub struct ToyProver {
    facts: Vec<CompiledFact>,
    by_name: HashMap<String, usize>,
    theorems: BTreeMap<String, CompiledTheorem>,
    theorem_order: Vec<String>,
    sorts: BTreeMap<String, Vec<String>>,
    variables: BTreeMap<String, String>,
    simp_set: Vec<RewriteRule>,
    builtins: Vec<RewriteRule>,
}

fn parse_term(name: &str, text: &str) -> Result<Term, TheoryError> {
    Term::parse(text).map_err(|source| TheoryError::Term {
        name: name.to_string(),
        text: text.to_string(),
        source,
    })
}

fn constants_of(terms: &[&Term]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for t in terms {
        t.constants(&mut out);
    }
    out
}

/// Split an optional `label:` prefix off a premise.
fn split_label(text: &str) -> Option<(&str, &str)> {
    let (label, rest) = text.split_once(':')?;
    let label = label.trim();
    let mut chars = label.chars();
    let ok = chars.next().is_some_and(term::is_ident_start) && chars.all(term::is_ident_char);
    ok.then_some((label, rest))
}

fn fingerprint(goals: &[Term], assumptions: &[Term]) -> String {
    let goals: Vec<String> = goals.iter().map(Term::canonical).collect();
    let mut hyps: Vec<String> = assumptions.iter().map(Term::canonical).collect();
    hyps.sort();
    format!("k={}|{}|{}", goals.len(), goals.join(" ;; "), hyps.join(" ;; "))
}

/// Constants mentioned by a search pattern, read lexically so that
/// fragments such as `+ 0` are accepted.
fn pattern_constants(pattern: &str) -> BTreeSet<String> {
    term::tokenize(pattern)
        .into_iter()
        .filter_map(|t| match t {
            term::Token::Ident(s) if !term::is_variable_name(&s) => Some(s),
            term::Token::Num(s) => Some(s),
            term::Token::Sym(s) => Some(s.to_string()),
            _ => None,
        })
        .collect()
}

struct Internal {
    goals: Vec<Term>,
    hyps: Vec<(String, Term)>,
}

type Exec = Result<Vec<Term>, (ErrorClass, String)>;

impl ToyProver {
    pub fn new(theory: ToyTheory) -> Result<Self, TheoryError> {
        let mut facts = Vec::new();
        let mut seen = BTreeSet::new();
        let mut claim = |name: &str| {
            if seen.insert(name.to_string()) {
                Ok(())
            } else {
                Err(TheoryError::Duplicate(name.to_string()))
            }
        };
        for r in &theory.rules {
            claim(&r.name)?;
            let lhs = parse_term(&r.name, &r.lhs)?;
            if matches!(lhs, Term::Var(_)) {
                return Err(TheoryError::VariableLhs(r.name.clone()));
            }
            let rhs = parse_term(&r.name, &r.rhs)?;
            let conclusion = Term::App("=".into(), vec![lhs, rhs]);
            facts.push(CompiledFact {
                name: r.name.clone(),
                kind: FactKind::Rewrite,
                premises: Vec::new(),
                constants: constants_of(&[&conclusion]),
                conclusion,
                simp: r.simp,
            });
        }
        for f in &theory.facts {
            claim(&f.name)?;
            let premises = f
                .premises
                .iter()
                .map(|p| parse_term(&f.name, p))
                .collect::<Result<Vec<_>, _>>()?;
            let conclusion = parse_term(&f.name, &f.conclusion)?;
            let mut all: Vec<&Term> = premises.iter().collect();
            all.push(&conclusion);
            facts.push(CompiledFact {
                name: f.name.clone(),
                kind: FactKind::Fact,
                constants: constants_of(&all),
                premises,
                conclusion,
                simp: false,
            });
        }
        for d in &theory.definitions {
            claim(&d.name)?;
            if !d.name.ends_with("_def") {
                return Err(TheoryError::DefinitionName(d.name.clone()));
            }
            let lhs = parse_term(&d.name, &d.lhs)?;
            if matches!(lhs, Term::Var(_)) {
                return Err(TheoryError::VariableLhs(d.name.clone()));
            }
            let rhs = parse_term(&d.name, &d.rhs)?;
            let conclusion = Term::App("=".into(), vec![lhs, rhs]);
            facts.push(CompiledFact {
                name: d.name.clone(),
                kind: FactKind::Definition,
                premises: Vec::new(),
                constants: constants_of(&[&conclusion]),
                conclusion,
                simp: false,
            });
        }
        let mut theorems = BTreeMap::new();
        let mut theorem_order = Vec::new();
        for t in &theory.theorems {
            claim(&t.name)?;
            let statement = parse_term(&t.name, &t.statement)?;
            let mut premises = Vec::new();
            for (i, p) in t.premises.iter().enumerate() {
                let (label, text) = match split_label(p) {
                    Some((l, rest)) => (l.to_string(), rest),
                    None => (format!("h{}", i + 1), p.as_str()),
                };
                premises.push((label, parse_term(&t.name, text)?));
            }
            let mut all: Vec<&Term> = premises.iter().map(|(_, p)| p).collect();
            all.push(&statement);
            facts.push(CompiledFact {
                name: t.name.clone(),
                kind: FactKind::Theorem,
                constants: constants_of(&all),
                premises: premises.iter().map(|(_, p)| p.clone()).collect(),
                conclusion: statement.clone(),
                simp: false,
            });
            theorem_order.push(t.name.clone());
            theorems.insert(
                t.name.clone(),
                CompiledTheorem { statement, premises, script: t.script.clone() },
            );
        }
        let mut sorts = BTreeMap::new();
        for s in &theory.sorts {
            for c in &s.constructors {
                if term::is_variable_name(c) {
                    return Err(TheoryError::Constructor { sort: s.name.clone(), constructor: c.clone() });
                }
            }
            sorts.insert(s.name.clone(), s.constructors.clone());
        }
        for (var, sort) in &theory.variables {
            if !sorts.contains_key(sort) {
                return Err(TheoryError::UnknownSort { var: var.clone(), sort: sort.clone() });
            }
        }
        let by_name = facts.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
        let simp_set = facts.iter().filter(|f| f.simp).filter_map(CompiledFact::as_rewrite).collect();
        Ok(Self {
            facts,
            by_name,
            theorems,
            theorem_order,
            sorts,
            variables: theory.variables,
            simp_set,
            builtins: builtin_simp_rules(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, TheoryError> {
        Self::new(ToyTheory::from_json(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, TheoryError> {
        Self::new(ToyTheory::load(path)?)
    }

    fn state_from(&self, goals: Vec<Term>, hyps: Vec<(String, Term)>) -> ProofState {
        let hyp_terms: Vec<Term> = hyps.iter().map(|(_, t)| t.clone()).collect();
        let fp = fingerprint(&goals, &hyp_terms);
        ProofState::new(
            goals.iter().map(Term::to_string).collect(),
            hyps.into_iter()
                .map(|(name, t)| Hypothesis { name, text: t.to_string() })
                .collect(),
            fp,
        )
    }

    fn internal(state: &ProofState) -> Result<Internal, String> {
        let goals = state
            .goals()
            .iter()
            .map(|g| Term::parse(g).map_err(|e| format!("goal `{g}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let hyps = state
            .assumptions()
            .iter()
            .map(|h| {
                Term::parse(&h.text)
                    .map(|t| (h.name.clone(), t))
                    .map_err(|e| format!("assumption `{}`: {e}", h.name))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Internal { goals, hyps })
    }

    fn lookup(&self, name: &str, excluded: Option<&str>) -> Option<&CompiledFact> {
        if excluded == Some(name) {
            return None;
        }
        self.by_name.get(name).map(|&i| &self.facts[i])
    }

    fn step(&self, state: &ProofState, command: &str, budget: Duration, excluded: Option<&str>) -> StepResult {
        let deadline = Instant::now() + budget;
        let cmd = match Command::parse(command) {
            Ok(c) => c,
            Err(e) => return StepResult::error(ErrorClass::Parse, e.to_string()),
        };
        let internal = match Self::internal(state) {
            Ok(i) => i,
            Err(e) => return StepResult::error(ErrorClass::Parse, e),
        };
        let method = match cmd {
            Command::Done => {
                return if internal.goals.is_empty() {
                    StepResult::Closed
                } else {
                    StepResult::error(
                        ErrorClass::TacticFailed,
                        format!("{} subgoal(s) remain", internal.goals.len()),
                    )
                };
            }
            Command::Apply(m) => m,
        };
        if !METHODS.contains(&method.name.as_str()) {
            return StepResult::error(ErrorClass::Parse, format!("unknown method `{}`", method.name));
        }
        for name in method.fact_names() {
            if self.lookup(name, excluded).is_none() {
                return StepResult::error(ErrorClass::UnknownFact, format!("unknown fact `{name}`"));
            }
        }
        if internal.goals.is_empty() {
            return StepResult::error(ErrorClass::TacticFailed, "no subgoals");
        }
        let mut goals = internal.goals;
        let mut applied = 0;
        loop {
            match self.run_method(&method, &goals, &internal.hyps, deadline, excluded) {
                Ok(next) => {
                    goals = next;
                    applied += 1;
                }
                Err((class, msg)) => {
                    if applied == 0 || class == ErrorClass::Timeout {
                        return StepResult::error(class, msg);
                    }
                    break;
                }
            }
            if method.repeat == 0 || goals.is_empty() || applied >= MAX_REPEAT {
                break;
            }
        }
        if Instant::now() > deadline {
            return StepResult::error(ErrorClass::Timeout, "probe budget exceeded");
        }
        if goals.is_empty() {
            StepResult::Closed
        } else {
            StepResult::Progressed { state: self.state_from(goals, internal.hyps) }
        }
    }

    fn run_method(
        &self,
        method: &Method,
        goals: &[Term],
        hyps: &[(String, Term)],
        deadline: Instant,
        excluded: Option<&str>,
    ) -> Exec {
        let (first, rest) = goals.split_first().ok_or((ErrorClass::TacticFailed, "no subgoals".to_string()))?;
        let replaced = match method.name.as_str() {
            "simp" => self.simp(method, first, hyps, deadline, excluded)?,
            "unfold" => self.unfold(method, first, deadline, excluded)?,
            "rule" | "wp" => self.resolve(method, first, excluded)?,
            "assumption" => {
                if hyps.iter().any(|(_, h)| h == first) {
                    Vec::new()
                } else {
                    return Err((ErrorClass::TacticFailed, "no matching assumption".into()));
                }
            }
            "cases" => self.cases(method, first)?,
            other => return Err((ErrorClass::Parse, format!("unknown method `{other}`"))),
        };
        let mut out = replaced;
        out.extend(rest.iter().cloned());
        Ok(out)
    }

    fn rewrite(&self, rules: &[RewriteRule], goal: &Term, deadline: Instant) -> Result<Term, (ErrorClass, String)> {
        let rw = Rewriter { rules, max_steps: MAX_REWRITE_STEPS, deadline: Some(deadline) };
        match rw.normalize(goal) {
            Ok((t, _)) => Ok(t),
            Err(RewriteError::StepLimit) => Err((
                ErrorClass::Timeout,
                format!("rewriting exceeded {MAX_REWRITE_STEPS} steps"),
            )),
            Err(RewriteError::Deadline) => Err((ErrorClass::Timeout, "probe budget exceeded".into())),
        }
    }

    fn simp(
        &self,
        method: &Method,
        goal: &Term,
        hyps: &[(String, Term)],
        deadline: Instant,
        excluded: Option<&str>,
    ) -> Exec {
        let mut rules: Vec<RewriteRule> = method
            .fact_names()
            .into_iter()
            .filter_map(|n| self.lookup(n, excluded))
            .filter_map(CompiledFact::as_rewrite)
            .collect();
        rules.extend(self.simp_set.iter().filter(|r| excluded != Some(r.name.as_str())).cloned());
        for (name, h) in hyps {
            let (lhs, rhs) = match h.as_equation() {
                Some((l, r)) => (l.clone(), r.clone()),
                None => (h.clone(), Term::truth()),
            };
            rules.push(RewriteRule { name: name.clone(), lhs, rhs, schematic: false });
        }
        rules.extend(self.builtins.iter().cloned());
        let result = self.rewrite(&rules, goal, deadline)?;
        if result.is_true() {
            Ok(Vec::new())
        } else if result == *goal {
            Err((ErrorClass::TacticFailed, "simp made no progress".into()))
        } else {
            Ok(vec![result])
        }
    }

    fn unfold(&self, method: &Method, goal: &Term, deadline: Instant, excluded: Option<&str>) -> Exec {
        let names = method.fact_names();
        if names.is_empty() {
            return Err((ErrorClass::Parse, "unfold needs at least one fact".into()));
        }
        let mut rules = Vec::new();
        for n in names {
            let fact = self.lookup(n, excluded).expect("checked by caller");
            match (fact.premises.is_empty(), fact.conclusion.as_equation()) {
                (true, Some((l, r))) if !matches!(l, Term::Var(_)) => rules.push(RewriteRule {
                    name: fact.name.clone(),
                    lhs: l.clone(),
                    rhs: r.clone(),
                    schematic: true,
                }),
                _ => return Err((ErrorClass::TacticFailed, format!("`{n}` is not an unconditional equation"))),
            }
        }
        let result = self.rewrite(&rules, goal, deadline)?;
        if result == *goal {
            Err((ErrorClass::TacticFailed, "nothing to unfold".into()))
        } else if result.is_true() {
            Ok(Vec::new())
        } else {
            Ok(vec![result])
        }
    }

    fn resolve(&self, method: &Method, goal: &Term, excluded: Option<&str>) -> Exec {
        let names = method.fact_names();
        if names.is_empty() {
            return Err((ErrorClass::Parse, format!("{} needs a fact", method.name)));
        }
        for n in names {
            let fact = self.lookup(n, excluded).expect("checked by caller");
            let mut subst = Subst::new();
            if match_term(&fact.conclusion, goal, true, &mut subst) {
                return Ok(fact.premises.iter().map(|p| term::instantiate(p, &subst)).collect());
            }
        }
        Err((ErrorClass::TacticFailed, "conclusion does not unify with the goal".into()))
    }

    fn cases(&self, method: &Method, goal: &Term) -> Exec {
        let names: Vec<&str> = method.names().collect();
        let [var] = names.as_slice() else {
            return Err((ErrorClass::Parse, "cases needs exactly one variable".into()));
        };
        let Some(constructors) = self.variables.get(*var).and_then(|s| self.sorts.get(s)) else {
            return Err((ErrorClass::TacticFailed, format!("`{var}` has no finite sort")));
        };
        if !goal.contains_var(var) {
            return Err((ErrorClass::TacticFailed, format!("`{var}` does not occur in the goal")));
        }
        Ok(constructors
            .iter()
            .map(|c| goal.substitute_var(var, &Term::Const(c.clone())))
            .collect())
    }

    fn replay(&self, theorem: &str, script: &[String], excluded: Option<&str>) -> TheoryCheck {
        let mut log = Vec::new();
        let mut state = match self.probe_initial_state(theorem) {
            Ok(s) => s,
            Err(e) => {
                log.push(e.to_string());
                return TheoryCheck { passed: false, log };
            }
        };
        let mut finished = false;
        for (i, command) in script.iter().enumerate() {
            if finished {
                log.push(format!("step {i}: `{command}` after the proof was finished"));
                return TheoryCheck { passed: false, log };
            }
            let is_done = matches!(Command::parse(command), Ok(Command::Done));
            match self.step(&state, command, TOY_PROBE_BUDGET, excluded) {
                StepResult::Progressed { state: next } => state = next,
                StepResult::Closed => {
                    state = super::closed_state(&state);
                    finished = is_done;
                }
                StepResult::Error { class, message } => {
                    log.push(format!("step {i}: `{command}` failed ({}): {message}", class.as_str()));
                    return TheoryCheck { passed: false, log };
                }
            }
        }
        if !finished {
            log.push(format!(
                "proof not finished: {} subgoal(s) remain and no closing `done`",
                state.subgoal_count()
            ));
        }
        TheoryCheck { passed: finished, log }
    }
}

impl Prover for ToyProver {
    fn probe_initial_state(&self, theorem: &str) -> Result<ProofState, ProverError> {
        let t = self
            .theorems
            .get(theorem)
            .ok_or_else(|| ProverError::UnknownTheorem(theorem.to_string()))?;
        Ok(self.state_from(vec![t.statement.clone()], t.premises.clone()))
    }

    fn apply_command(&self, state: &ProofState, command: &str, budget: Duration) -> StepResult {
        self.step(state, command, budget, None)
    }

    fn whole_theory_check(&self, theorem: &str, script: &[String]) -> TheoryCheck {
        self.replay(theorem, script, Some(theorem))
    }

    fn search_facts(&self, pattern: &str, state: &ProofState) -> Vec<String> {
        let wanted = pattern_constants(pattern);
        let mut state_consts = BTreeSet::new();
        if let Ok(internal) = Self::internal(state) {
            for g in &internal.goals {
                g.constants(&mut state_consts);
            }
        }
        let mut hits: Vec<(usize, &str)> = self
            .facts
            .iter()
            .filter(|f| wanted.is_subset(&f.constants))
            .map(|f| (f.constants.intersection(&state_consts).count(), f.name.as_str()))
            .collect();
        hits.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        hits.into_iter().map(|(_, n)| n.to_string()).collect()
    }

    fn check_fact_exists(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    fn fact_statement(&self, name: &str) -> Option<String> {
        self.lookup(name, None).map(CompiledFact::statement)
    }

    fn fact_table(&self) -> Vec<FactEntry> {
        self.facts
            .iter()
            .map(|f| FactEntry { name: f.name.clone(), statement: f.statement() })
            .collect()
    }

    fn context_definitions(&self, state: &ProofState) -> Vec<String> {
        let mut mentioned = BTreeSet::new();
        if let Ok(internal) = Self::internal(state) {
            for g in &internal.goals {
                g.constants(&mut mentioned);
            }
            for (_, h) in &internal.hyps {
                h.constants(&mut mentioned);
            }
        }
        self.facts
            .iter()
            .filter(|f| f.kind == FactKind::Definition)
            .filter(|f| {
                f.conclusion
                    .as_equation()
                    .and_then(|(lhs, _)| lhs.head())
                    .is_some_and(|h| mentioned.contains(h))
            })
            .map(|f| f.name.clone())
            .collect()
    }

    fn methods(&self) -> Vec<String> {
        METHODS.iter().map(|m| m.to_string()).collect()
    }

    fn theorem_ids(&self) -> Vec<String> {
        self.theorem_order.clone()
    }

    fn reference_script(&self, theorem: &str) -> Option<Vec<String>> {
        self.theorems.get(theorem).map(|t| t.script.clone())
    }
}
