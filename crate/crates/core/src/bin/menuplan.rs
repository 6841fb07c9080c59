use std::fs::File;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use menuplan::embed::{match_rate, MatchStage};
use menuplan::pipeline::{exit, run_pipeline, solve_to_file, PipelineConfig, PipelineError, Runner, StageError};
use menuplan::planner::{PlanBounds, PlanProblem, SolveOptions};
use menuplan::service::{self, AppState};

#[derive(Parser)]
#[command(name = "menuplan", version, about = "Recipe matching, nutrition, price prediction and least-cost menu planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline configuration (TOML). Defaults to $PLANNER_DATA_DIR/pipeline.toml.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the corpus; writes rejections.csv and corpus_stats.json.
    Ingest(ConfigArg),
    /// Match ingredients to nutrition entries; writes matches.csv and review_queue.csv.
    Match(ConfigArg),
    /// Compute per-serving nutrient profiles and category summaries.
    Nutrition(ConfigArg),
    /// Fit price models and predict recipe costs.
    Price(ConfigArg),
    /// Solve the menu planning problem.
    Plan(PlanArgs),
    /// Run every stage before planning and print a summary.
    Report(ConfigArg),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Run every stage end to end.
    Pipeline(ConfigArg),
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Solve a plan_problem.json directly instead of building one from the corpus.
    #[arg(long, conflicts_with = "config")]
    problem: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p_min: Option<f64>,
    #[arg(long)]
    c_min: Option<f64>,
    /// Use `inf` for no fat bound.
    #[arg(long)]
    f_max: Option<f64>,
    /// Solver time budget in seconds; 0 means unlimited.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Write the solution here instead of stdout (with --problem).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Listen address; defaults to $PLANNER_BIND or 127.0.0.1:8080.
    #[arg(long, env = "PLANNER_BIND", default_value = service::DEFAULT_BIND)]
    bind: SocketAddr,
}

/// A failure reported on stderr as one JSON line.
struct Failure {
    code: i32,
    body: serde_json::Value,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure { code: e.exit_code(), body: json!({ "error": e.code(), "detail": e.to_string() }) }
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure {
            code: e.error.exit_code(),
            body: json!({ "error": e.error.code(), "stage": e.stage, "detail": e.error.to_string() }),
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(out))
        .map_err(|e| PipelineError::Io { path: PathBuf::from("<stdout>"), message: e.to_string() }.into())
}

fn load_config(arg: &ConfigArg) -> Result<PipelineConfig, Failure> {
    let path = match &arg.config {
        Some(p) => p.clone(),
        None => match std::env::var_os("PLANNER_DATA_DIR") {
            Some(dir) => Path::new(&dir).join("pipeline.toml"),
            None => {
                return Err(PipelineError::Config("pass --config or set PLANNER_DATA_DIR".into()).into());
            }
        },
    };
    Ok(PipelineConfig::load(&path)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest(c) => {
            let config = load_config(&c)?;
            let mut runner = Runner::new(config, true);
            let outcome = runner.ingest();
            print_json(&runner.reports)?;
            outcome?;
        }
        Command::Match(c) => {
            let config = load_config(&c)?;
            let mut runner = Runner::new(config, true);
            let snapshot = runner.ingest()?;
            let outcome = runner.match_stage(&snapshot);
            print_json(&runner.reports)?;
            outcome?;
        }
        Command::Nutrition(c) => {
            let config = load_config(&c)?;
            let mut runner = Runner::new(config, true);
            let snapshot = runner.ingest()?;
            let matches = runner.match_stage(&snapshot)?;
            let outcome = runner.nutrition_stage(&snapshot, &matches);
            print_json(&runner.reports)?;
            outcome?;
        }
        Command::Price(c) => {
            let config = load_config(&c)?;
            let mut runner = Runner::new(config, true);
            let snapshot = runner.ingest()?;
            let outcome = runner.pricing_stage(&snapshot);
            print_json(&runner.reports)?;
            outcome?;
        }
        Command::Report(c) => {
            let config = load_config(&c)?;
            let mut runner = Runner::new(config, true);
            let a = runner.through_pricing()?;
            let total = a.matches.records.len() + a.matches.review_queue.len();
            let count = |s: MatchStage| a.matches.records.iter().filter(|r| r.stage == s).count();
            print_json(&json!({
                "stages": runner.reports,
                "corpus": menuplan::corpus::corpus_stats(&a.snapshot),
                "matching": {
                    "ingredients": total,
                    "auto": count(MatchStage::Auto),
                    "reviewed_top5": count(MatchStage::ReviewedTop5),
                    "manual": count(MatchStage::Manual),
                    "auto_match_rate": match_rate(&a.matches.records, total),
                },
                "price_models": a.price_book.models.len(),
            }))?;
        }
        Command::Pipeline(c) => {
            let config = load_config(&c)?;
            let result = run_pipeline(&config);
            print_json(&result.stages)?;
            if let Some(e) = result.failure {
                return Err(e.into());
            }
        }
        Command::Plan(args) => plan(args)?,
        Command::Serve(args) => {
            let config = load_config(&args.config)?;
            let state = AppState::load(&config)?;
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| Failure::from(PipelineError::Io { path: PathBuf::from("<runtime>"), message: e.to_string() }))?;
            eprintln!("{}", json!({ "event": "listening", "bind": args.bind.to_string() }));
            rt.block_on(service::serve(state, args.bind))
                .map_err(|e| Failure::from(PipelineError::Io { path: PathBuf::from(args.bind.to_string()), message: e.to_string() }))?;
        }
    }
    Ok(())
}

fn plan(args: PlanArgs) -> Result<(), Failure> {
    let budget = |secs: f64| (secs > 0.0).then(|| Duration::from_secs_f64(secs));
    if let Some(path) = &args.problem {
        let file = File::open(path).map_err(|e| PipelineError::Io { path: path.clone(), message: e.to_string() })?;
        let base: PlanProblem = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let defaults = base.bounds();
        let bounds = PlanBounds {
            p_min: args.p_min.unwrap_or(defaults.p_min),
            c_min: args.c_min.unwrap_or(defaults.c_min),
            f_max: args.f_max.unwrap_or(defaults.f_max),
        };
        let problem = base.with_parameters(args.m.unwrap_or(base.m()), bounds).map_err(PipelineError::Plan)?;
        let options = SolveOptions { time_budget: args.time_budget.and_then(budget) };
        let solution = solve_to_file(&problem, &options)?;
        match &args.out {
            Some(out) => {
                let file = File::create(out).map_err(|e| PipelineError::Io { path: out.clone(), message: e.to_string() })?;
                serde_json::to_writer_pretty(file, &solution)
                    .map_err(|e| PipelineError::Io { path: out.clone(), message: e.to_string() })?;
            }
            None => print_json(&solution)?,
        }
        return Ok(());
    }
    let config = load_config(&args.config)?;
    let bounds = PlanBounds {
        p_min: args.p_min.unwrap_or(config.p_min),
        c_min: args.c_min.unwrap_or(config.c_min),
        f_max: args.f_max.unwrap_or(config.f_max),
    };
    let m = args.m.unwrap_or(config.m);
    let options = SolveOptions { time_budget: budget(args.time_budget.unwrap_or(config.time_budget_secs)) };
    let mut runner = Runner::new(config, true);
    let artifacts = runner.through_pricing()?;
    let outcome = runner.plan(&artifacts, m, bounds, options);
    print_json(&runner.reports)?;
    outcome?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(f) => {
            eprintln!("{}", f.body);
            ExitCode::from(f.code as u8)
        }
    }
}
