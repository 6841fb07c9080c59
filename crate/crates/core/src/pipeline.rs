//! Stage orchestration: ingest → match → nutrition → pricing → plan.
//!
//! Each stage writes its report files into the configured output directory
//! and the run halts at the first stage that reports a blocking error.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, load_corpus, CorpusError, CorpusPaths, CorpusSnapshot};
use crate::embed::{self, EmbedError, EmbeddingProvider, MatchIndex, MatchOutcome, OverrideTable, PrecomputedVectors, TrigramHasher};
use crate::nutrition::{self, NutrientProfile, NutritionError};
use crate::planner::{self, audit, PlanBounds, PlanError, PlanItem, PlanProblem, SolutionFile, SolveOptions};
use crate::pricing::{self, DateFilter, InflationTable, PriceBook, PriceMap, PricingError};

/// Process exit codes shared by the CLI and the C bindings.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const IO: i32 = 4;
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_tau() -> f64 {
    embed::DEFAULT_TAU
}
fn default_m() -> usize {
    planner::DEFAULT_M
}
fn default_p_min() -> f64 {
    planner::DEFAULT_P_MIN
}
fn default_c_min() -> f64 {
    planner::DEFAULT_C_MIN
}
fn default_f_max() -> f64 {
    planner::DEFAULT_F_MAX
}
fn default_time_budget() -> f64 {
    10.0
}
fn default_bin_width() -> f64 {
    5.0
}

/// Run configuration, read from a TOML file. Relative paths resolve against
/// the directory containing the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub recipes: PathBuf,
    pub nutrition: PathBuf,
    pub invoices: PathBuf,
    pub price_map: PathBuf,
    #[serde(default)]
    pub conversions: Option<PathBuf>,
    #[serde(default)]
    pub overrides: Option<PathBuf>,
    #[serde(default)]
    pub inflation: Option<PathBuf>,
    /// Precomputed embeddings; the built-in trigram embedder is used without it.
    #[serde(default)]
    pub vectors: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_p_min")]
    pub p_min: f64,
    #[serde(default = "default_c_min")]
    pub c_min: f64,
    #[serde(default = "default_f_max")]
    pub f_max: f64,
    /// Solver wall-clock budget in seconds; 0 disables the limit.
    #[serde(default = "default_time_budget")]
    pub time_budget_secs: f64,
    #[serde(default)]
    pub since: Option<NaiveDate>,
    #[serde(default)]
    pub until: Option<NaiveDate>,
    #[serde(default = "default_bin_width")]
    pub histogram_bin_percent: f64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut config: PipelineConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.resolve(&self.output_dir).join(name)
    }

    pub fn bounds(&self) -> PlanBounds {
        PlanBounds { p_min: self.p_min, c_min: self.c_min, f_max: self.f_max }
    }

    pub fn time_budget(&self) -> Option<Duration> {
        (self.time_budget_secs > 0.0).then(|| Duration::from_secs_f64(self.time_budget_secs))
    }

    fn corpus_paths(&self) -> CorpusPaths {
        CorpusPaths {
            recipes: self.resolve(&self.recipes),
            nutrition: self.resolve(&self.nutrition),
            invoices: self.resolve(&self.invoices),
            conversions: self.conversions.as_deref().map(|p| self.resolve(p)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Match,
    Nutrition,
    Pricing,
    Plan,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Match => "match",
            Stage::Nutrition => "nutrition",
            Stage::Pricing => "pricing",
            Stage::Plan => "plan",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{count} input rows failed validation; first: {first}")]
    Rejected { count: usize, first: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{count} ingredients need review; candidates written to {}", queue.display())]
    Unresolved { count: usize, queue: PathBuf },
    #[error(transparent)]
    Nutrition(#[from] NutritionError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

impl PipelineError {
    fn io(path: &Path, e: impl fmt::Display) -> Self {
        PipelineError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "InvalidConfig",
            PipelineError::Io { .. } => "IoError",
            PipelineError::Corpus(CorpusError::FileUnreadable { .. }) => "FileUnreadable",
            PipelineError::Corpus(CorpusError::SchemaViolation { .. }) => "SchemaViolation",
            PipelineError::Corpus(CorpusError::DuplicateId { .. }) => "DuplicateId",
            PipelineError::Rejected { .. } => "SchemaViolation",
            PipelineError::Embed(EmbedError::Io(_)) => "IoError",
            PipelineError::Embed(_) => "MatchError",
            PipelineError::Unresolved { .. } => "UnresolvedMatches",
            PipelineError::Nutrition(NutritionError::MissingMatch { .. }) => "MissingMatch",
            PipelineError::Nutrition(NutritionError::UnknownUnit { .. }) => "UnknownUnit",
            PipelineError::Nutrition(_) => "NutritionError",
            PipelineError::Pricing(PricingError::MissingPriceModel { .. }) => "MissingPriceModel",
            PipelineError::Pricing(PricingError::Io(_)) => "IoError",
            PipelineError::Pricing(_) => "PricingError",
            PipelineError::Plan(PlanError::Infeasible(_)) => "Infeasible",
            PipelineError::Plan(PlanError::TimeBudgetExceeded(_)) => "TimeBudgetExceeded",
            PipelineError::Plan(_) => "InvalidProblem",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. }
            | PipelineError::Corpus(CorpusError::FileUnreadable { .. })
            | PipelineError::Embed(EmbedError::Io(_))
            | PipelineError::Pricing(PricingError::Io(_)) => exit::IO,
            PipelineError::Plan(PlanError::Infeasible(_)) => exit::INFEASIBLE,
            _ => exit::VALIDATION,
        }
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {error}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub error: PipelineError,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    pub ok: bool,
    pub artifacts: Vec<PathBuf>,
    pub detail: String,
}

/// Predicted cost of one recipe with and without inflation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecipeCost {
    pub estimated: f64,
    pub predicted: f64,
}

/// Everything computed up to (not including) planning.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub config: PipelineConfig,
    pub snapshot: CorpusSnapshot,
    pub matches: MatchOutcome,
    pub profiles: BTreeMap<String, NutrientProfile>,
    pub inflation: InflationTable,
    pub price_book: PriceBook,
    pub costs: BTreeMap<String, RecipeCost>,
}

impl Artifacts {
    /// Runs every stage before planning without writing any files.
    pub fn compute(config: &PipelineConfig) -> Result<Artifacts, StageError> {
        let mut runner = Runner::new(config.clone(), false);
        runner.through_pricing()
    }

    /// Builds the planning problem from every recipe with a profile and a cost.
    pub fn plan_problem(&self, m: usize, bounds: PlanBounds) -> Result<PlanProblem, PlanError> {
        let items = self
            .snapshot
            .recipes
            .iter()
            .filter_map(|r| {
                let profile = self.profiles.get(&r.id)?;
                let cost = self.costs.get(&r.id)?;
                Some(PlanItem {
                    recipe_id: r.id.clone(),
                    cost: cost.predicted,
                    protein: profile.protein,
                    calcium: profile.calcium,
                    fat: profile.fat,
                    category: r.category.to_string(),
                })
            })
            .collect();
        PlanProblem::new(items, m, bounds)
    }
}

/// Outcome of [`run_pipeline`].
#[derive(Debug)]
pub struct PipelineResult {
    pub stages: Vec<StageReport>,
    pub solution: Option<SolutionFile>,
    pub failure: Option<StageError>,
}

impl PipelineResult {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map(|f| f.error.exit_code()).unwrap_or(exit::SUCCESS)
    }

    pub fn artifact(&self, name: &str) -> Option<&Path> {
        self.stages
            .iter()
            .flat_map(|s| s.artifacts.iter())
            .find(|p| p.file_name().is_some_and(|f| f == name))
            .map(PathBuf::as_path)
    }
}

/// Runs every stage, writing reports into the output directory.
pub fn run_pipeline(config: &PipelineConfig) -> PipelineResult {
    let mut runner = Runner::new(config.clone(), true);
    let outcome = runner.through_pricing().and_then(|artifacts| {
        let bounds = config.bounds();
        runner.plan(&artifacts, config.m, bounds, SolveOptions { time_budget: config.time_budget() })
    });
    match outcome {
        Ok(solution) => PipelineResult { stages: runner.reports, solution: Some(solution), failure: None },
        Err(e) => PipelineResult { stages: runner.reports, solution: None, failure: Some(e) },
    }
}

/// Stage-by-stage driver. Public so the CLI can stop after any stage.
pub struct Runner {
    config: PipelineConfig,
    write: bool,
    pub reports: Vec<StageReport>,
}

impl Runner {
    pub fn new(config: PipelineConfig, write: bool) -> Self {
        Runner { config, write, reports: Vec::new() }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_path(name)
    }

    fn create(&self, name: &str, artifacts: &mut Vec<PathBuf>) -> Result<Option<BufWriter<File>>, PipelineError> {
        if !self.write {
            return Ok(None);
        }
        let path = self.out(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        let file = File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
        artifacts.push(path);
        Ok(Some(BufWriter::new(file)))
    }

    fn finish<T>(&mut self, stage: Stage, artifacts: Vec<PathBuf>, result: Result<(T, String), PipelineError>) -> Result<T, StageError> {
        match result {
            Ok((value, detail)) => {
                self.reports.push(StageReport { stage, ok: true, artifacts, detail });
                Ok(value)
            }
            Err(error) => {
                self.reports.push(StageReport { stage, ok: false, artifacts, detail: error.to_string() });
                Err(StageError { stage, error })
            }
        }
    }

    pub fn ingest(&mut self) -> Result<CorpusSnapshot, StageError> {
        let mut artifacts = Vec::new();
        let result = (|| {
            let snapshot = load_corpus(&self.config.corpus_paths())?;
            if let Some(w) = self.create("rejections.csv", &mut artifacts)? {
                corpus::write_rejections_csv(&snapshot.rejections, w).map_err(|e| PipelineError::io(&self.out("rejections.csv"), e))?;
            }
            let stats = corpus::corpus_stats(&snapshot);
            if let Some(w) = self.create("corpus_stats.json", &mut artifacts)? {
                serde_json::to_writer_pretty(w, &stats).map_err(|e| PipelineError::io(&self.out("corpus_stats.json"), e))?;
            }
            if let Some(first) = snapshot.rejections.first() {
                return Err(PipelineError::Rejected { count: snapshot.rejections.len(), first: first.to_error().to_string() });
            }
            let detail = format!("{} recipes, {} nutrition entries, {} invoices", stats.recipes, stats.nutrition_entries, stats.invoices);
            Ok((snapshot, detail))
        })();
        self.finish(Stage::Ingest, artifacts, result)
    }

    pub fn provider(&self) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
        match &self.config.vectors {
            Some(p) => {
                let path = self.config.resolve(p);
                let file = File::open(&path).map_err(|e| PipelineError::io(&path, e))?;
                Ok(Box::new(PrecomputedVectors::from_tsv(BufReader::new(file))?))
            }
            None => Ok(Box::new(TrigramHasher)),
        }
    }

    fn overrides(&self) -> Result<OverrideTable, PipelineError> {
        match &self.config.overrides {
            Some(p) => {
                let path = self.config.resolve(p);
                let file = File::open(&path).map_err(|e| PipelineError::io(&path, e))?;
                Ok(OverrideTable::from_csv(file)?)
            }
            None => Ok(OverrideTable::default()),
        }
    }

    pub fn match_stage(&mut self, snapshot: &CorpusSnapshot) -> Result<MatchOutcome, StageError> {
        let mut artifacts = Vec::new();
        let result = (|| {
            let provider = self.provider()?;
            let index = MatchIndex::build(provider.as_ref(), snapshot)?;
            let overrides = self.overrides()?;
            let outcome = embed::match_two_stage(provider.as_ref(), &index, snapshot, &overrides, self.config.tau)?;
            if let Some(w) = self.create("matches.csv", &mut artifacts)? {
                embed::write_matches(&outcome.records, w).map_err(|e| PipelineError::io(&self.out("matches.csv"), e))?;
            }
            if let Some(w) = self.create("review_queue.csv", &mut artifacts)? {
                embed::write_review_queue(&outcome.review_queue, w)
                    .map_err(|e| PipelineError::io(&self.out("review_queue.csv"), e))?;
            }
            let total = outcome.records.len() + outcome.review_queue.len();
            if !outcome.review_queue.is_empty() {
                return Err(PipelineError::Unresolved { count: outcome.review_queue.len(), queue: self.out("review_queue.csv") });
            }
            let rate = embed::match_rate(&outcome.records, total.max(1));
            let detail = format!("{} ingredients matched, {:.1}% automatically", total, rate * 100.0);
            Ok((outcome, detail))
        })();
        self.finish(Stage::Match, artifacts, result)
    }

    pub fn nutrition_stage(
        &mut self,
        snapshot: &CorpusSnapshot,
        matches: &MatchOutcome,
    ) -> Result<BTreeMap<String, NutrientProfile>, StageError> {
        let mut artifacts = Vec::new();
        let result = (|| {
            let by_ingredient = matches.by_ingredient();
            let mut profiles = BTreeMap::new();
            for recipe in &snapshot.recipes {
                let p = nutrition::recipe_profile(recipe, &by_ingredient, snapshot, &snapshot.conversions)?;
                profiles.insert(recipe.id.clone(), p);
            }
            let report = nutrition::profile_report(snapshot, &profiles);
            if let Some(w) = self.create("nutrition_report.csv", &mut artifacts)? {
                nutrition::write_report_csv(&report, w).map_err(|e| PipelineError::io(&self.out("nutrition_report.csv"), e))?;
            }
            if let Some(w) = self.create("nutrition_summary.csv", &mut artifacts)? {
                nutrition::write_summary_csv(&report, w).map_err(|e| PipelineError::io(&self.out("nutrition_summary.csv"), e))?;
            }
            let detail = format!("{} recipe profiles", profiles.len());
            Ok((profiles, detail))
        })();
        self.finish(Stage::Nutrition, artifacts, result)
    }

    pub fn pricing_stage(
        &mut self,
        snapshot: &CorpusSnapshot,
    ) -> Result<(InflationTable, PriceBook, BTreeMap<String, RecipeCost>), StageError> {
        let mut artifacts = Vec::new();
        let result = (|| {
            let inflation = match &self.config.inflation {
                Some(p) => {
                    let path = self.config.resolve(p);
                    InflationTable::from_csv(File::open(&path).map_err(|e| PipelineError::io(&path, e))?)?
                }
                None => InflationTable::default(),
            };
            let map_path = self.config.resolve(&self.config.price_map);
            let map = PriceMap::from_csv(File::open(&map_path).map_err(|e| PipelineError::io(&map_path, e))?)?;
            let filter = DateFilter { since: self.config.since, until: self.config.until };
            let book = PriceBook::fit(&snapshot.invoices, filter);
            let zero = InflationTable::zero();
            let mut costs = BTreeMap::new();
            for recipe in &snapshot.recipes {
                let estimated = pricing::predict_recipe_cost(recipe, &book, &map, &zero)?;
                let predicted = pricing::predict_recipe_cost(recipe, &book, &map, &inflation)?;
                costs.insert(recipe.id.clone(), RecipeCost { estimated, predicted });
            }
            let before: BTreeMap<String, f64> = costs.iter().map(|(k, c)| (k.clone(), c.estimated)).collect();
            let after: BTreeMap<String, f64> = costs.iter().map(|(k, c)| (k.clone(), c.predicted)).collect();
            let change = pricing::cost_change_report(&before, &after, self.config.histogram_bin_percent)?;
            self.write_price_reports(snapshot, &inflation, &book, &change, &mut artifacts)?;
            let detail = format!(
                "{} price models, {} recipe costs, {:.1}% of recipes decrease",
                book.models.len(),
                costs.len(),
                change.negative_fraction * 100.0
            );
            Ok(((inflation, book, costs), detail))
        })();
        self.finish(Stage::Pricing, artifacts, result)
    }

    fn write_price_reports(
        &self,
        snapshot: &CorpusSnapshot,
        inflation: &InflationTable,
        book: &PriceBook,
        change: &pricing::CostChangeReport,
        artifacts: &mut Vec<PathBuf>,
    ) -> Result<(), PipelineError> {
        let csv_err = |name: &str| {
            let path = self.out(name);
            move |e: csv::Error| PipelineError::io(&path, e)
        };
        if let Some(w) = self.create("price_report.csv", artifacts)? {
            let mut w = csv::Writer::from_writer(w);
            let write = |w: &mut csv::Writer<_>| -> csv::Result<()> {
                w.write_record(["recipe_id", "category", "predicted_cost", "percent_change"])?;
                for row in &change.rows {
                    let category = snapshot.recipe(&row.recipe_id).map(|r| r.category.to_string()).unwrap_or_default();
                    let pct = row.percent_change.map(|p| p.to_string()).unwrap_or_default();
                    w.write_record([row.recipe_id.as_str(), &category, &row.after.to_string(), &pct])?;
                }
                w.flush()?;
                Ok(())
            };
            write(&mut w).map_err(csv_err("price_report.csv"))?;
        }
        if let Some(w) = self.create("price_models.csv", artifacts)? {
            let mut w = csv::Writer::from_writer(w);
            let write = |w: &mut csv::Writer<_>| -> csv::Result<()> {
                w.write_record(["ingredient_key", "category", "orders", "purchases", "buy_probability", "mean_unit_price", "predicted_cost"])?;
                for m in book.models.values() {
                    w.write_record([
                        m.ingredient_key.clone(),
                        m.category.to_string(),
                        m.orders.to_string(),
                        m.purchases.to_string(),
                        m.buy_probability.to_string(),
                        m.mean_unit_price.to_string(),
                        m.predicted_cost(inflation).to_string(),
                    ])?;
                }
                w.flush()?;
                Ok(())
            };
            write(&mut w).map_err(csv_err("price_models.csv"))?;
        }
        if let Some(w) = self.create("cost_histogram.csv", artifacts)? {
            let mut w = csv::Writer::from_writer(w);
            let write = |w: &mut csv::Writer<_>| -> csv::Result<()> {
                w.write_record(["lower_percent", "upper_percent", "count"])?;
                for b in &change.histogram {
                    w.write_record([b.lower.to_string(), b.upper.to_string(), b.count.to_string()])?;
                }
                w.flush()?;
                Ok(())
            };
            write(&mut w).map_err(csv_err("cost_histogram.csv"))?;
        }
        if let Some(w) = self.create("price_history.csv", artifacts)? {
            let mut w = csv::Writer::from_writer(w);
            let write = |w: &mut csv::Writer<_>| -> csv::Result<()> {
                w.write_record(["ingredient_key", "date", "source", "unit_price", "was_free"])?;
                let mut rows: Vec<_> = snapshot.invoices.iter().collect();
                rows.sort_by(|a, b| a.key().cmp(&b.key()).then(a.date.cmp(&b.date)).then(a.source.cmp(&b.source)));
                for inv in rows {
                    w.write_record([inv.key(), inv.date.to_string(), inv.source.clone(), inv.unit_price.to_string(), inv.was_free.to_string()])?;
                }
                w.flush()?;
                Ok(())
            };
            write(&mut w).map_err(csv_err("price_history.csv"))?;
        }
        Ok(())
    }

    pub fn through_pricing(&mut self) -> Result<Artifacts, StageError> {
        let snapshot = self.ingest()?;
        let matches = self.match_stage(&snapshot)?;
        let profiles = self.nutrition_stage(&snapshot, &matches)?;
        let (inflation, price_book, costs) = self.pricing_stage(&snapshot)?;
        Ok(Artifacts { config: self.config.clone(), snapshot, matches, profiles, inflation, price_book, costs })
    }

    pub fn plan(
        &mut self,
        artifacts: &Artifacts,
        m: usize,
        bounds: PlanBounds,
        options: SolveOptions,
    ) -> Result<SolutionFile, StageError> {
        let mut files = Vec::new();
        let result = (|| {
            let problem = artifacts.plan_problem(m, bounds)?;
            if let Some(w) = self.create("plan_problem.json", &mut files)? {
                serde_json::to_writer_pretty(w, &problem).map_err(|e| PipelineError::io(&self.out("plan_problem.json"), e))?;
            }
            let solution = solve_to_file(&problem, &options)?;
            if let Some(w) = self.create("plan_solution.json", &mut files)? {
                serde_json::to_writer_pretty(w, &solution).map_err(|e| PipelineError::io(&self.out("plan_solution.json"), e))?;
            }
            let detail = format!(
                "{} recipes, total cost ${:.2}{}",
                solution.solution.selected.len(),
                solution.solution.total_cost,
                if solution.solution.optimal { "" } else { " (time budget reached; not proven optimal)" }
            );
            Ok((solution, detail))
        })();
        self.finish(Stage::Plan, files, result)
    }
}

/// Solves and attaches the audit.
pub fn solve_to_file(problem: &PlanProblem, options: &SolveOptions) -> Result<SolutionFile, PipelineError> {
    let (solution, _) = planner::solve_with(problem, options)?;
    let audit = audit(problem, &solution.selected)?;
    Ok(SolutionFile { solution, audit })
}
