//! Operator commands behind the `promise` binary: index building, single
//! theorem proving and benchmark batches.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use promise_core::index::{build_index, IndexError, TraceIndex, DEFAULT_DIMENSION};
use promise_core::llm::{HeuristicBackend, HttpBackend, HttpConfig, LlmBackend, ScriptedBackend, ScriptedTable};
use promise_core::prompt::MethodStats;
use promise_core::prover::{Prover, TheoryError, ToyProver};
use promise_core::search::{search, LogEntry, SearchConfig, SearchDeps, SearchError, SearchOutcome, SearchStats};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("unknown theorem `{0}`")]
    UnknownTheorem(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Io(_) => 3,
            CliError::UnknownTheorem(_) => 4,
        }
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        match e {
            TheoryError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
    Heuristic,
}

/// Run configuration: every search knob plus backend selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub search: SearchConfig,
    pub backend: BackendKind,
    /// Scripted response table, relative to the config file.
    pub scripted_table: Option<PathBuf>,
    pub http: HttpConfig,
    pub index_dimension: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if let (Some(table), Some(dir)) = (&cfg.scripted_table, path.parent()) {
            cfg.scripted_table = Some(dir.join(table));
        }
        cfg.search.validate().map_err(|e| CliError::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn dimension(&self) -> usize {
        self.index_dimension.unwrap_or(DEFAULT_DIMENSION)
    }
}

/// Makes a fresh backend, with its own query meter, for each run.
pub struct BackendFactory {
    kind: BackendKind,
    table: ScriptedTable,
    http: HttpConfig,
    cap: Option<u64>,
}

impl BackendFactory {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let table = match (&cfg.scripted_table, cfg.backend) {
            (Some(path), BackendKind::Scripted) => ScriptedTable::load(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::Other | std::io::ErrorKind::InvalidData => {
                    CliError::Parse(format!("{}: {e}", path.display()))
                }
                _ => io_err(path, e),
            })?,
            _ => ScriptedTable::default(),
        };
        Ok(Self { kind: cfg.backend, table, http: cfg.http.clone(), cap: cfg.search.query_cap })
    }

    pub fn make(&self) -> Box<dyn LlmBackend> {
        match self.kind {
            BackendKind::Scripted => Box::new(ScriptedBackend::new(self.table.clone(), self.cap)),
            BackendKind::Http => Box::new(HttpBackend::new(self.http.clone(), self.cap)),
            BackendKind::Heuristic => Box::new(HeuristicBackend::new(self.cap)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Proved,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub theorem_id: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_reason: Option<String>,
    pub stats: SearchStats,
}

impl RunResult {
    fn error(theorem_id: &str, message: String) -> Self {
        Self {
            theorem_id: theorem_id.to_string(),
            status: RunStatus::Error,
            script: None,
            fail_reason: Some(message),
            stats: SearchStats::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkTask {
    pub theorem_id: String,
    pub level: String,
    pub theory_file: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCount {
    pub attempted: usize,
    pub proved: usize,
}

pub type Summary = BTreeMap<String, LevelCount>;

/// Write through a temporary sibling so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

pub fn result_path(out_dir: &Path, theorem_id: &str) -> PathBuf {
    out_dir.join(format!("{theorem_id}.json"))
}

pub fn log_path(out_dir: &Path, theorem_id: &str) -> PathBuf {
    out_dir.join(format!("{theorem_id}.log.jsonl"))
}

fn write_run(out_dir: &Path, result: &RunResult, log: &[LogEntry]) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut lines = Vec::new();
    for entry in log {
        lines.extend(serde_json::to_vec(entry).expect("serializable"));
        lines.push(b'\n');
    }
    write_atomic(&log_path(out_dir, &result.theorem_id), &lines)?;
    write_atomic(&result_path(out_dir, &result.theorem_id), &pretty(result))
}

/// Build the suffix index for `theory` and persist it at `out`.
pub fn run_index(theory: &Path, out: &Path, excluded: &BTreeSet<String>, dimension: usize) -> Result<usize, CliError> {
    let prover = ToyProver::load(theory)?;
    let built = build_index(&prover, excluded, dimension);
    for w in &built.warnings {
        log::warn!("skipped {}: {w}", w.theorem);
    }
    built.index.save(out)?;
    Ok(built.index.len())
}

fn index_for(prover: &dyn Prover, index: Option<&Path>, dimension: usize) -> Result<TraceIndex, CliError> {
    match index {
        Some(path) => Ok(TraceIndex::load(path)?),
        None => Ok(build_index(prover, &BTreeSet::new(), dimension).index),
    }
}

/// Search one theorem. The final script is re-checked against a separately
/// loaded copy of the theory before it counts as proved.
fn prove_one(
    theory: &Path,
    prover: &ToyProver,
    index: &TraceIndex,
    theorem_id: &str,
    cfg: &RunConfig,
    backends: &BackendFactory,
) -> Result<(RunResult, Vec<LogEntry>), CliError> {
    let llm = backends.make();
    let stats = Mutex::new(MethodStats::from_index(index));
    let deps = SearchDeps { prover, index, llm: llm.as_ref(), stats: &stats };
    let (outcome, log) = search(theorem_id, &cfg.search, deps).map_err(|e| match e {
        SearchError::UnknownTheorem(t) => CliError::UnknownTheorem(t),
        SearchError::Config(c) => CliError::Parse(c.to_string()),
    })?;
    let result = match outcome {
        SearchOutcome::Proved { script, stats } => {
            let fresh = ToyProver::load(theory)?;
            if fresh.whole_theory_check(theorem_id, &script).passed {
                RunResult { theorem_id: theorem_id.into(), status: RunStatus::Proved, script: Some(script), fail_reason: None, stats }
            } else {
                RunResult {
                    theorem_id: theorem_id.into(),
                    status: RunStatus::Failed,
                    script: None,
                    fail_reason: Some("whole_theory_failed".into()),
                    stats,
                }
            }
        }
        SearchOutcome::Failed { reason, stats } => RunResult {
            theorem_id: theorem_id.into(),
            status: RunStatus::Failed,
            script: None,
            fail_reason: Some(serde_json::to_value(reason).expect("serializable").as_str().unwrap_or_default().to_string()),
            stats,
        },
    };
    Ok((result, log))
}

/// Prove one theorem and write `<id>.json` and `<id>.log.jsonl` to `out_dir`.
pub fn run_prove(
    theory: &Path,
    theorem_id: &str,
    index: Option<&Path>,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<RunResult, CliError> {
    let prover = ToyProver::load(theory)?;
    if !prover.theorem_ids().iter().any(|t| t == theorem_id) {
        return Err(CliError::UnknownTheorem(theorem_id.into()));
    }
    let index = index_for(&prover, index, cfg.dimension())?;
    let backends = BackendFactory::new(cfg)?;
    let (result, log) = prove_one(theory, &prover, &index, theorem_id, cfg, &backends)?;
    write_run(out_dir, &result, &log)?;
    Ok(result)
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkTask>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut tasks: Vec<BenchmarkTask> =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    for t in &mut tasks {
        t.theory_file = dir.join(&t.theory_file);
    }
    Ok(tasks)
}

/// Fold per-task results into per-level counts.
pub fn summarize<'a>(tasks: &[BenchmarkTask], results: impl IntoIterator<Item = &'a RunResult>) -> Summary {
    let status: HashMap<&str, RunStatus> = results.into_iter().map(|r| (r.theorem_id.as_str(), r.status)).collect();
    let mut summary = Summary::new();
    for t in tasks {
        let entry = summary.entry(t.level.clone()).or_default();
        entry.attempted += 1;
        if status.get(t.theorem_id.as_str()) == Some(&RunStatus::Proved) {
            entry.proved += 1;
        }
    }
    summary
}

struct Theory {
    prover: ToyProver,
    index: TraceIndex,
}

/// Run every task of a benchmark, writing per-task files and `summary.json`
/// into `out_dir`. Task failures are recorded, never fatal.
pub fn run_bench(
    benchmark: &Path,
    index: Option<&Path>,
    cfg: &RunConfig,
    out_dir: &Path,
    parallelism: usize,
) -> Result<(Summary, Vec<RunResult>), CliError> {
    let tasks = load_benchmark(benchmark)?;
    let backends = BackendFactory::new(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let mut theories: BTreeMap<PathBuf, Result<Theory, String>> = BTreeMap::new();
    for t in &tasks {
        if theories.contains_key(&t.theory_file) {
            continue;
        }
        let loaded = ToyProver::load(&t.theory_file).map_err(|e| e.to_string()).and_then(|prover| {
            let index = index_for(&prover, index, cfg.dimension()).map_err(|e| e.to_string())?;
            Ok(Theory { prover, index })
        });
        theories.insert(t.theory_file.clone(), loaded);
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<RunResult>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let worker = || -> Result<(), CliError> {
        loop {
            let i = next.fetch_add(1, Ordering::SeqCst);
            let Some(task) = tasks.get(i) else { return Ok(()) };
            let (result, log) = match &theories[&task.theory_file] {
                Err(msg) => (RunResult::error(&task.theorem_id, msg.clone()), Vec::new()),
                Ok(th) => match prove_one(&task.theory_file, &th.prover, &th.index, &task.theorem_id, cfg, &backends) {
                    Ok(done) => done,
                    Err(e) => (RunResult::error(&task.theorem_id, e.to_string()), Vec::new()),
                },
            };
            log::info!("{} [{}]: {:?}", task.theorem_id, task.level, result.status);
            write_run(out_dir, &result, &log)?;
            *slots[i].lock().expect("result slot") = Some(result);
        }
    };
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..parallelism.max(1)).map(|_| scope.spawn(worker)).collect();
        handles.into_iter().try_for_each(|h| h.join().expect("worker panicked"))
    })?;

    let results: Vec<RunResult> = slots.into_iter().map(|s| s.into_inner().expect("result slot").expect("task ran")).collect();
    let summary = summarize(&tasks, &results);
    write_atomic(&out_dir.join(SUMMARY_FILE), &pretty(&summary))?;
    Ok((summary, results))
}
