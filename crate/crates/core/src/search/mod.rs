//! Retrieval-grounded beam search over proof states.

mod memo;
mod scoring;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{
    fallback_candidates, is_weak, normalize_all, static_filter, Candidate, FilterContext, Provenance, TimeoutRules,
};
use crate::index::TraceIndex;
use crate::llm::{GenerationRequest, LlmBackend, LlmError, DEFAULT_MAX_TOKENS, DEFAULT_QUERY_CAP};
use crate::names::{assemble_inventory, BucketCaps, InventoryRequest, NameInventory};
use crate::prompt::{
    build_prompt, derive_plan, goal_family, rank_methods, summarize_failures, FailureNote, MethodStats, PromptInput,
};
use crate::prover::command::Command;
use crate::prover::{ErrorClass, ProofState, Prover, StepResult};
use crate::retrieval::{rerank, retrieve_shortlist, select_templates, Query, StructWeights, TacticTemplate};

pub use memo::{task_signature, MemoCache};
pub use scoring::{adapt_budgets, beam_score, diversification_reward, progress_gain, BudgetController, Budgets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub candidate_budget: usize,
    pub regen_limit: usize,
    pub depth_bound: usize,
    pub hard_cap: usize,
    pub probe_timeout_secs: f64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub gamma_w: f64,
    pub gamma_cap: f64,
    pub seed: u64,
    pub query_cap: Option<u64>,
    pub fallbacks: bool,
    pub adapt_budgets: bool,
    pub memoize: bool,
    pub weights: StructWeights,
    pub shortlist_size: usize,
    pub template_count: usize,
    /// Most templates drawn from one source theorem; `None` for no limit.
    pub templates_per_theorem: Option<usize>,
    pub bucket_caps: BucketCaps,
    pub ngram_k: usize,
    pub timeout_rules: TimeoutRules,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            beam_width: 6,
            candidate_budget: 12,
            regen_limit: 2,
            depth_bound: 10,
            hard_cap: 12,
            probe_timeout_secs: 120.0,
            temperature: 0.9,
            max_tokens: DEFAULT_MAX_TOKENS,
            gamma_w: 0.2,
            gamma_cap: 0.15,
            seed: 0,
            query_cap: Some(DEFAULT_QUERY_CAP),
            fallbacks: true,
            adapt_budgets: true,
            memoize: true,
            weights: StructWeights::default(),
            shortlist_size: 30,
            template_count: 8,
            templates_per_theorem: Some(2),
            bucket_caps: BucketCaps::default(),
            ngram_k: 16,
            timeout_rules: TimeoutRules::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("depth bound {0} exceeds hard cap {1}")]
    DepthAboveCap(usize, usize),
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("beam_width", self.beam_width),
            ("candidate_budget", self.candidate_budget),
            ("regen_limit", self.regen_limit),
            ("depth_bound", self.depth_bound),
        ] {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        if self.depth_bound > self.hard_cap {
            return Err(ConfigError::DepthAboveCap(self.depth_bound, self.hard_cap));
        }
        Ok(())
    }

    pub fn probe_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.probe_timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamNode {
    pub prefix: Vec<String>,
    pub state: ProofState,
    pub depth: usize,
    pub score: f64,
    /// Δ of the step that produced this node.
    pub last_gain: usize,
    /// Fingerprints from the root down to the parent.
    pub ancestors: Vec<String>,
    /// Failures seen at this node in its latest round.
    pub feedback: Vec<FailureNote>,
}

impl BeamNode {
    pub fn root(state: ProofState) -> Self {
        Self { prefix: Vec::new(), state, depth: 0, score: 0.0, last_gain: 0, ancestors: Vec::new(), feedback: Vec::new() }
    }

    pub fn goal_text(&self) -> &str {
        self.state.goal_text()
    }

    pub fn subgoals(&self) -> usize {
        self.state.subgoal_count()
    }
}

/// A progressed child counts only if it is new along its own path.
pub fn makes_progress(parent: &BeamNode, child: &ProofState) -> bool {
    let fp = child.fingerprint();
    fp != parent.state.fingerprint() && !parent.ancestors.iter().any(|a| a == fp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    BeamExhausted,
    DepthExhausted,
    RegenExhausted,
    BudgetExhausted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub llm_queries: u64,
    pub prover_probes: u64,
    pub cache_hits: u64,
    pub max_depth_reached: usize,
    pub candidates_generated: u64,
    pub candidates_rejected: u64,
    pub fallbacks_used: u64,
    pub whole_theory_checks: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Proved { script: Vec<String>, stats: SearchStats },
    Failed { reason: FailReason, stats: SearchStats },
}

impl SearchOutcome {
    pub fn stats(&self) -> &SearchStats {
        match self {
            SearchOutcome::Proved { stats, .. } | SearchOutcome::Failed { stats, .. } => stats,
        }
    }

    pub fn is_proved(&self) -> bool {
        matches!(self, SearchOutcome::Proved { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("unknown theorem `{0}`")]
    UnknownTheorem(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One line of the search log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub kind: String,
    pub depth: usize,
    pub parent_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_hit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inventory: Option<Vec<String>>,
}

/// Everything the search reads but does not own.
pub struct SearchDeps<'a> {
    pub prover: &'a dyn Prover,
    pub index: &'a TraceIndex,
    pub llm: &'a dyn LlmBackend,
    pub stats: &'a Mutex<MethodStats>,
}

pub enum GenOutcome {
    Qed(Vec<String>),
    Fail,
    Next(Vec<BeamNode>),
    BudgetExceeded,
}

/// Per-run mutable state shared by generator calls.
pub struct SearchRun<'a> {
    pub target: String,
    pub target_statement: String,
    pub cfg: SearchConfig,
    pub budgets: Budgets,
    pub deps: SearchDeps<'a>,
    pub memo: MemoCache,
    pub log: Vec<LogEntry>,
    pub stats: SearchStats,
    /// Dedupe keys already tried, per node. Nodes are told apart by their
    /// prefix, so equal states reached along different paths share only the
    /// memo cache.
    pub seen: BTreeMap<String, BTreeSet<String>>,
    /// Outcome counts of the latest generator call.
    pub window: Window,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Window {
    pub verified: usize,
    pub timeouts: usize,
    pub successors: usize,
    pub gaining: usize,
}

struct Pooled {
    node: BeamNode,
    parent: usize,
    key: String,
    log_at: usize,
}

/// Prompt material for one node.
pub struct NodeContext {
    pub templates: Vec<TacticTemplate>,
    pub inventory: NameInventory,
    pub prompt: String,
    pub plan: crate::prompt::MethodPlan,
}

fn fact_names_of(commands: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for c in commands {
        if let Ok(Command::Apply(m)) = Command::parse(c) {
            for n in m.fact_names() {
                if !out.iter().any(|o: &String| o == n) {
                    out.push(n.to_string());
                }
            }
        }
    }
    out
}

impl<'a> SearchRun<'a> {
    pub fn new(target: &str, target_statement: &str, cfg: SearchConfig, deps: SearchDeps<'a>) -> Self {
        let budgets = Budgets { beam_width: cfg.beam_width, candidates: cfg.candidate_budget };
        let memo = MemoCache::new(cfg.memoize);
        Self {
            target: target.to_string(),
            target_statement: target_statement.to_string(),
            cfg,
            budgets,
            deps,
            memo,
            log: Vec::new(),
            stats: SearchStats::default(),
            seen: BTreeMap::new(),
            window: Window::default(),
        }
    }

    /// Retrieval, name inventory, plan and prompt for `node`.
    pub fn node_context(&self, node: &BeamNode, usage: &MethodStats) -> NodeContext {
        let query = Query::new(node.goal_text(), self.deps.index.dimension());
        let templates = match retrieve_shortlist(
            self.deps.index,
            &query,
            &self.target,
            self.cfg.shortlist_size,
            &self.cfg.weights,
        ) {
            Ok(shortlist) => {
                let reranked = rerank(&shortlist, self.deps.index, &query, &self.target_statement);
                select_templates(&reranked, self.cfg.template_count, self.cfg.templates_per_theorem, self.deps.prover)
            }
            Err(e) => {
                log::debug!("no templates: {e}");
                Vec::new()
            }
        };
        let prefix_names = fact_names_of(&node.prefix);
        let inventory = assemble_inventory(
            &InventoryRequest {
                goal: &query.features,
                goal_text: node.goal_text(),
                state: &node.state,
                target: &self.target,
                prefix_names: &prefix_names,
                caps: self.cfg.bucket_caps,
                ngram_k: self.cfg.ngram_k,
            },
            self.deps.prover,
        );
        let ranked = rank_methods(goal_family(&query.features), &templates, usage);
        let plan = derive_plan(&ranked, self.budgets.candidates);
        let feedback = summarize_failures(&node.feedback);
        let prompt = build_prompt(&PromptInput {
            goal: node.goal_text(),
            assumptions: node.state.assumptions(),
            prefix: &node.prefix,
            feedback: &feedback,
            templates: &templates,
            inventory: &inventory,
            plan: &plan,
            candidates: self.budgets.candidates,
        });
        NodeContext { templates, inventory, prompt, plan }
    }

    fn generate(&mut self, prompt: String) -> Result<Vec<String>, LlmError> {
        let req = GenerationRequest {
            prompt,
            n: self.budgets.candidates,
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
            seed: Some(self.cfg.seed),
        };
        match self.deps.llm.generate(&req) {
            Ok(texts) => {
                self.stats.llm_queries += 1;
                Ok(texts)
            }
            Err(LlmError::BackendUnavailable(msg)) => {
                self.stats.llm_queries += 1;
                log::warn!("generation failed: {msg}");
                Ok(Vec::new())
            }
            Err(e) => Err(e),
        }
    }

    /// Accepted candidates for `node`, topped up with fallbacks when the
    /// model's output is weak.
    fn candidates_for(&mut self, node: &BeamNode, ctx: &NodeContext, texts: &[String]) -> Vec<Candidate> {
        let c = self.budgets.candidates;
        let normalized = normalize_all(texts, c, &ctx.inventory, &self.target);
        self.stats.candidates_generated += normalized.len() as u64;
        let methods = self.deps.prover.methods();
        let filter = FilterContext {
            inventory: &ctx.inventory,
            target: &self.target,
            methods: &methods,
            timeout: self.cfg.timeout_rules,
        };
        let parent_fp = node.state.fingerprint().to_string();
        let node_key = node.prefix.join("\n");
        let seen = self.seen.entry(node_key.clone()).or_default().clone();
        let outcome = static_filter(&normalized, &filter, &seen);
        let mut accepted = outcome.accepted;
        let mut rejected = outcome.rejected;
        if self.cfg.fallbacks && is_weak(&accepted, c) {
            let mut taken = seen.clone();
            taken.extend(accepted.iter().map(|a| a.dedupe_key.clone()));
            let fb: Vec<_> = fallback_candidates(&ctx.inventory, &ctx.plan, c).into_iter().map(Ok).collect();
            let extra = static_filter(&fb, &filter, &taken);
            for cand in extra.accepted {
                if accepted.len() >= c {
                    break;
                }
                self.stats.fallbacks_used += 1;
                accepted.push(cand);
            }
            rejected.extend(extra.rejected.into_iter().filter(|r| r.reason.reason != crate::candidates::RejectKind::Duplicate));
        }
        accepted.truncate(c);
        self.stats.candidates_rejected += rejected.len() as u64;
        for r in rejected {
            self.log.push(LogEntry {
                kind: "reject".into(),
                depth: node.depth + 1,
                parent_fingerprint: parent_fp.clone(),
                command: Some(r.text),
                reject_reason: Some(r.reason.reason.as_str().to_string()),
                ..LogEntry::default()
            });
        }
        let seen = self.seen.entry(node_key).or_default();
        seen.extend(accepted.iter().map(|a| a.dedupe_key.clone()));
        accepted
    }

    /// One call of the command generator over `frontier`.
    pub fn command_generator(&mut self, frontier: &mut [BeamNode]) -> GenOutcome {
        let usage = self.deps.stats.lock().expect("method stats").clone();
        let budget = self.cfg.probe_timeout();
        self.window = Window::default();
        let mut pool: Vec<Pooled> = Vec::new();
        for _round in 0..self.cfg.regen_limit {
            for (pi, node) in frontier.iter_mut().enumerate() {
                let ctx = self.node_context(node, &usage);
                self.log.push(LogEntry {
                    kind: "retrieval".into(),
                    depth: node.depth,
                    parent_fingerprint: node.state.fingerprint().to_string(),
                    templates: Some(ctx.templates.iter().map(|t| t.source_theorem.clone()).collect()),
                    inventory: Some(ctx.inventory.all.iter().cloned().collect()),
                    ..LogEntry::default()
                });
                let texts = match self.generate(ctx.prompt.clone()) {
                    Ok(t) => t,
                    Err(_) => return GenOutcome::BudgetExceeded,
                };
                let accepted = self.candidates_for(node, &ctx, &texts);
                let mut notes = Vec::new();
                for cand in accepted {
                    let (result, hit) = self.memo.verify(self.deps.prover, &node.state, &cand, budget);
                    self.window.verified += 1;
                    let mut entry = LogEntry {
                        kind: "probe".into(),
                        depth: node.depth + 1,
                        parent_fingerprint: node.state.fingerprint().to_string(),
                        command: Some(cand.dedupe_key.clone()),
                        outcome: Some(result.label().to_string()),
                        cache_hit: Some(hit),
                        provenance: Some(cand.provenance),
                        ..LogEntry::default()
                    };
                    match result {
                        StepResult::Closed => {
                            let mut script = node.prefix.clone();
                            script.extend(cand.commands.iter().cloned());
                            if script.last().map(String::as_str) != Some("done") {
                                script.push("done".to_string());
                            }
                            self.stats.whole_theory_checks += 1;
                            let check = self.deps.prover.whole_theory_check(&self.target, &script);
                            if check.passed {
                                self.log.push(entry);
                                return GenOutcome::Qed(script);
                            }
                            entry.reject_reason = Some("whole_theory_failed".into());
                            self.log.push(entry);
                        }
                        StepResult::Progressed { state } => {
                            if !makes_progress(node, &state) {
                                entry.reject_reason = Some("no_progress".into());
                                self.log.push(entry);
                                continue;
                            }
                            let gain = progress_gain(node.subgoals(), state.subgoal_count());
                            let bonus = diversification_reward(
                                usage.usage_of(cand.first_method),
                                self.cfg.gamma_w,
                                self.cfg.gamma_cap,
                            );
                            let mut prefix = node.prefix.clone();
                            prefix.extend(cand.commands.iter().cloned());
                            let score = beam_score(state.subgoal_count(), prefix.len(), gain, bonus);
                            self.deps.stats.lock().expect("method stats").record_success(cand.first_method);
                            self.window.successors += 1;
                            if gain > 0 {
                                self.window.gaining += 1;
                            }
                            let mut ancestors = node.ancestors.clone();
                            ancestors.push(node.state.fingerprint().to_string());
                            entry.score = Some(score);
                            entry.selected = Some(false);
                            let log_at = self.log.len();
                            self.log.push(entry);
                            pool.push(Pooled {
                                node: BeamNode {
                                    prefix,
                                    state,
                                    depth: node.depth + 1,
                                    score,
                                    last_gain: gain,
                                    ancestors,
                                    feedback: Vec::new(),
                                },
                                parent: pi,
                                key: cand.dedupe_key.clone(),
                                log_at,
                            });
                        }
                        StepResult::Error { class, message } => {
                            if class == ErrorClass::Timeout {
                                self.window.timeouts += 1;
                            }
                            entry.reject_reason = Some(class.as_str().to_string());
                            self.log.push(entry);
                            notes.push(FailureNote { command: cand.dedupe_key.clone(), class, message });
                        }
                    }
                }
                node.feedback = notes;
            }
            if !pool.is_empty() {
                pool.sort_by(|a, b| {
                    b.node
                        .score
                        .total_cmp(&a.node.score)
                        .then(a.parent.cmp(&b.parent))
                        .then_with(|| a.key.cmp(&b.key))
                });
                pool.truncate(self.budgets.beam_width);
                for p in &pool {
                    self.log[p.log_at].selected = Some(true);
                }
                return GenOutcome::Next(pool.into_iter().map(|p| p.node).collect());
            }
        }
        GenOutcome::Fail
    }

    fn finish(&mut self, started: Instant) -> SearchStats {
        let mut stats = self.stats.clone();
        stats.prover_probes = self.memo.probes();
        stats.cache_hits = self.memo.hits();
        stats.wall_time_ms = started.elapsed().as_millis() as u64;
        stats
    }

    /// Depth loop from `root`.
    pub fn run(&mut self, root: ProofState) -> SearchOutcome {
        let started = Instant::now();
        let root_k = root.subgoal_count();
        let mut frontier = vec![BeamNode::root(root)];
        let mut limit = self.cfg.depth_bound;
        let mut controller = BudgetController::default();
        let mut depth = 0;
        loop {
            if depth >= limit {
                let promising = frontier.iter().any(|n| n.last_gain > 0 || n.subgoals() < root_k);
                if limit < self.cfg.hard_cap && promising {
                    limit += 1;
                    log::debug!("extending depth bound to {limit}");
                } else {
                    let stats = self.finish(started);
                    return SearchOutcome::Failed { reason: FailReason::DepthExhausted, stats };
                }
            }
            depth += 1;
            self.stats.max_depth_reached = depth;
            match self.command_generator(&mut frontier) {
                GenOutcome::Qed(script) => {
                    let stats = self.finish(started);
                    return SearchOutcome::Proved { script, stats };
                }
                GenOutcome::Fail => {
                    let stats = self.finish(started);
                    return SearchOutcome::Failed { reason: FailReason::BeamExhausted, stats };
                }
                GenOutcome::BudgetExceeded => {
                    let stats = self.finish(started);
                    return SearchOutcome::Failed { reason: FailReason::BudgetExhausted, stats };
                }
                GenOutcome::Next(nodes) => {
                    frontier = nodes;
                    if self.cfg.adapt_budgets {
                        let w = self.window;
                        let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
                        self.budgets = controller.update(
                            self.budgets,
                            self.cfg.candidate_budget,
                            rate(w.timeouts, w.verified),
                            rate(w.gaining, w.successors),
                        );
                    }
                }
            }
        }
    }
}

/// Prove `target` from its initial state.
pub fn search(target: &str, cfg: &SearchConfig, deps: SearchDeps<'_>) -> Result<(SearchOutcome, Vec<LogEntry>), SearchError> {
    cfg.validate()?;
    let root = deps
        .prover
        .probe_initial_state(target)
        .map_err(|_| SearchError::UnknownTheorem(target.to_string()))?;
    let statement = root.goal_text().to_string();
    let mut run = SearchRun::new(target, &statement, cfg.clone(), deps);
    let outcome = run.run(root);
    Ok((outcome, run.log))
}
