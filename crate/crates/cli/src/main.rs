//! `bdlayer`: batch runs of boundary-layer computations from JSON configs.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numerical failure (with `error.json` in the output directory), 4 i/o error.

mod config;
mod examples;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use config::{RunConfig, Task};
use tasks::{Outputs, TaskError, TaskSummary};

#[derive(Parser)]
#[command(name = "bdlayer", version, about = "Boundary layers and admissible boundary values for 1D conservation laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a config.
    Run(RunArgs),
    /// Run only the `simulate` tasks.
    Simulate(RunArgs),
    /// Run only the `layer` tasks.
    Layer(RunArgs),
    /// Run only the `admissible` tasks.
    Admissible(RunArgs),
    /// Run only the `riemann` tasks.
    Riemann(RunArgs),
    /// Run only the `study` tasks.
    Study(RunArgs),
    /// Run the invariant suite (standalone, or the `verify` tasks of a config).
    Verify(RunArgs),
    /// Print the bundled example configs.
    ListExamples {
        /// Print the JSON text of one example instead of the catalog.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Config file (JSON).
    #[arg(long, conflicts_with = "example")]
    config: Option<PathBuf>,
    /// Bundled example config by name.
    #[arg(long)]
    example: Option<String>,
    /// Output directory (default: the config's `output`, else `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampled audits; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Config(String),
    Numeric { task: Option<String>, error: bdlayer::Error },
    Io(String),
    Verify,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify => 1,
            Failure::Config(_) => 2,
            Failure::Numeric { .. } => 3,
            Failure::Io(_) => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListExamples { show } => list_examples(show.as_deref()),
        Command::Run(a) => run(&a, None),
        Command::Simulate(a) => run(&a, Some("simulate")),
        Command::Layer(a) => run(&a, Some("layer")),
        Command::Admissible(a) => run(&a, Some("admissible")),
        Command::Riemann(a) => run(&a, Some("riemann")),
        Command::Study(a) => run(&a, Some("study")),
        Command::Verify(a) if a.config.is_none() && a.example.is_none() => verify_standalone(&a),
        Command::Verify(a) => run(&a, Some("verify")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(msg) => eprintln!("error: {msg}"),
                Failure::Numeric { task, error } => {
                    eprintln!("numerical failure{}: {error}", task.as_ref().map(|t| format!(" in task `{t}`")).unwrap_or_default())
                }
                Failure::Io(msg) => eprintln!("error: {msg}"),
                Failure::Verify => eprintln!("verification failed"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn list_examples(show: Option<&str>) -> Result<(), Failure> {
    if let Some(name) = show {
        let e = examples::find(name).ok_or_else(|| Failure::Config(format!("no bundled example `{name}`")))?;
        print!("{}", e.text);
        return Ok(());
    }
    for e in examples::EXAMPLES {
        println!("{:<26} {}", e.name, e.summary);
    }
    Ok(())
}

fn setup_pool(jobs: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn load(args: &RunArgs) -> Result<RunConfig, Failure> {
    let text = match (&args.config, &args.example) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => examples::find(name)
            .ok_or_else(|| Failure::Config(format!("no bundled example `{name}` (see list-examples)")))?
            .text
            .to_string(),
        (None, None) => return Err(Failure::Config("one of --config or --example is required".into())),
    };
    config::parse(&text).map_err(|e| Failure::Config(e.to_string()))
}

fn numeric(task: Option<String>, error: bdlayer::Error) -> Failure {
    if error.is_config() {
        let prefix = task.map(|t| format!("task `{t}`: ")).unwrap_or_default();
        Failure::Config(format!("{prefix}{error}"))
    } else {
        Failure::Numeric { task, error }
    }
}

fn write_error_report(dir: &Path, failure: &Failure) {
    if let Failure::Numeric { task, error } = failure {
        let report = json!({ "task": task, "kind": error.kind(), "message": error.to_string() });
        if let Ok(mut out) = Outputs::new(dir) {
            let _ = out.json("error.json", &report);
        }
    }
}

fn run(args: &RunArgs, only: Option<&str>) -> Result<(), Failure> {
    setup_pool(args.jobs)?;
    let cfg = load(args)?;
    let selected: Vec<&Task> = cfg.tasks.iter().filter(|t| only.is_none_or(|k| t.kind() == k)).collect();
    if selected.is_empty() {
        return Err(Failure::Config(format!("config `{}` has no `{}` tasks", cfg.name, only.unwrap_or("?"))));
    }
    let dir = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| Path::new("out").join(&cfg.name));
    let seed = args.seed.unwrap_or(cfg.seed);
    let result = execute(&cfg, &selected, seed, &dir);
    if let Err(f) = &result {
        write_error_report(&dir, f);
    }
    result
}

fn execute(cfg: &RunConfig, selected: &[&Task], seed: u64, dir: &Path) -> Result<(), Failure> {
    let model = cfg.model().map_err(|e| numeric(None, e))?;
    // Each task writes its own artifacts, so tasks run independently.
    let results: Vec<Result<TaskSummary, Failure>> = selected
        .par_iter()
        .map(|task| {
            let mut out = Outputs::new(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
            tasks::run_task(cfg, &model, task, seed, &mut out).map_err(|e| match e {
                TaskError::Numeric(err) => numeric(Some(task.id().to_string()), err),
                TaskError::Io(err) => Failure::Io(format!("task `{}`: {err}", task.id())),
            })
        })
        .collect();
    let mut summaries = Vec::new();
    for r in results {
        summaries.push(r?);
    }
    let verified = summaries.iter().all(|s| s.passed != Some(false));
    for s in &summaries {
        let status = match s.passed {
            Some(true) => " (passed)",
            Some(false) => " (FAILED)",
            None => "",
        };
        println!("{} {}{status}: {}", s.task, s.id, s.artifacts.join(", "));
    }
    let summary = json!({
        "name": cfg.name,
        "description": cfg.description,
        "model": cfg.model.name,
        "params": cfg.model.params,
        "seed": seed,
        "tasks": summaries,
    });
    let mut out = Outputs::new(dir).map_err(|e| Failure::Io(e.to_string()))?;
    out.json(&format!("{}.run.json", cfg.name), &summary).map_err(|e| Failure::Io(e.to_string()))?;
    println!("artifacts in {}", dir.display());
    if verified {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn verify_standalone(args: &RunArgs) -> Result<(), Failure> {
    setup_pool(args.jobs)?;
    let seed = args.seed.unwrap_or(0);
    let report = bdlayer::verify::run_suite(seed);
    for c in &report.checks {
        println!("{}  {}: worst {:.3e} (tol {:.1e}) {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.worst, c.tolerance, c.detail);
    }
    if let Some(dir) = &args.out {
        let mut out = Outputs::new(dir).map_err(|e| Failure::Io(e.to_string()))?;
        out.json("verify.json", &report).map_err(|e| Failure::Io(e.to_string()))?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}
