use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use promise_cli::{run_bench, run_index, run_prove, BackendKind, CliError, RunConfig, RunStatus};
use promise_core::index::INDEX_FILE;

#[derive(Parser)]
#[command(name = "promise", version, about = "Retrieval-grounded beam search over a toy prover")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine proof suffixes of every theorem into an index file.
    Index {
        #[arg(long)]
        theory: PathBuf,
        #[arg(long, default_value = INDEX_FILE)]
        out: PathBuf,
        /// Theorems left out of the index.
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Search for a proof of one theorem.
    Prove {
        #[arg(long)]
        theory: PathBuf,
        #[arg(long)]
        theorem: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every task of a benchmark file.
    Bench {
        /// Benchmark JSON: a list of {theorem_id, level, theory_file}.
        #[arg(long, alias = "benchmark")]
        theory: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Prebuilt index; built in memory when absent.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Response table for the scripted backend.
    #[arg(long)]
    scripted: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.search.seed = seed;
        }
        if let Some(backend) = self.backend {
            cfg.backend = backend;
        }
        if let Some(table) = &self.scripted {
            cfg.scripted_table = Some(table.clone());
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Index { theory, out, exclude, config } => {
            let cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let excluded: BTreeSet<String> = exclude.into_iter().collect();
            let n = run_index(&theory, &out, &excluded, cfg.dimension())?;
            println!("{n} records written to {}", out.display());
            Ok(0)
        }
        Command::Prove { theory, theorem, run } => {
            let cfg = run.config()?;
            let result = run_prove(&theory, &theorem, run.index.as_deref(), &cfg, &run.out)?;
            let status = serde_json::to_string(&result.status).expect("serializable");
            println!("{theorem}: {}", status.trim_matches('"'));
            Ok(if result.status == RunStatus::Proved { 0 } else { 1 })
        }
        Command::Bench { theory, parallelism, run } => {
            let cfg = run.config()?;
            let (summary, _) = run_bench(&theory, run.index.as_deref(), &cfg, &run.out, parallelism)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
