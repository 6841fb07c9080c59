//! Read-mostly HTTP API over the computed artifacts.
//!
//! Responses are serialized from ordered containers only, so the same
//! request against the same data yields the same bytes.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{Category, IngredientLine, Recipe};
use crate::embed::MatchStage;
use crate::nutrition::NutrientProfile;
use crate::pipeline::{solve_to_file, Artifacts, PipelineConfig, PipelineError, RecipeCost, StageError};
use crate::planner::{PlanBounds, PlanError, SolveOptions};
use crate::pricing::PriceModel;
use crate::text::normalize;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 500;
pub const DEFAULT_PLAN_BUDGET_MS: u64 = 10_000;

pub struct AppState {
    config: PipelineConfig,
    artifacts: RwLock<Arc<Artifacts>>,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    pub fn new(artifacts: Artifacts) -> SharedState {
        Arc::new(AppState { config: artifacts.config.clone(), artifacts: RwLock::new(Arc::new(artifacts)) })
    }

    /// Computes artifacts from `config` without writing report files.
    pub fn load(config: &PipelineConfig) -> Result<SharedState, StageError> {
        Ok(AppState::new(Artifacts::compute(config)?))
    }

    pub fn snapshot(&self) -> Arc<Artifacts> {
        self.artifacts.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn replace(&self, next: Artifacts) {
        *self.artifacts.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
    }
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/recipes", get(search_recipes))
        .route("/api/recipes/{id}", get(recipe_detail))
        .route("/api/plan", post(plan))
        .route("/api/prices/{ingredient_key}", get(price))
        .route("/api/reload", post(reload))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint") })
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: SharedState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { error: code.into(), detail: detail.into(), constraint: None } }
    }
}

impl From<PlanError> for ApiError {
    fn from(e: PlanError) -> Self {
        match &e {
            PlanError::Infeasible(why) => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: ErrorBody {
                    error: "Infeasible".into(),
                    detail: why.to_string(),
                    constraint: Some(why.constraint().into()),
                },
            },
            PlanError::TimeBudgetExceeded(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "TimeBudgetExceeded", e.to_string()),
            PlanError::InvalidProblem(_) | PlanError::UnknownRecipeId(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "InvalidProblem", e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    recipes: usize,
    nutrition_entries: usize,
    price_models: usize,
}

async fn health(State(state): State<SharedState>) -> Json<Health> {
    let a = state.snapshot();
    Json(Health {
        status: "ok",
        recipes: a.snapshot.recipes.len(),
        nutrition_entries: a.snapshot.nutrition.len(),
        price_models: a.price_book.models.len(),
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchQuery {
    /// Substring of any ingredient line, compared after normalization.
    pub text: Option<String>,
    pub category: Option<String>,
    pub year: Option<String>,
    pub limit: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct RecipeSummary {
    pub id: String,
    pub name: String,
    pub category: Category,
    pub servings: u32,
    pub year_tags: Vec<String>,
    pub cost: Option<RecipeCost>,
    pub protein: Option<f64>,
    pub calcium: Option<f64>,
    pub fat: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SearchResponse {
    total: usize,
    recipes: Vec<RecipeSummary>,
}

fn summary(a: &Artifacts, r: &Recipe) -> RecipeSummary {
    let profile = a.profiles.get(&r.id);
    RecipeSummary {
        id: r.id.clone(),
        name: r.name.clone(),
        category: r.category,
        servings: r.servings,
        year_tags: r.year_tags.iter().cloned().collect(),
        cost: a.costs.get(&r.id).copied(),
        protein: profile.map(|p| p.protein),
        calcium: profile.map(|p| p.calcium),
        fat: profile.map(|p| p.fat),
    }
}

async fn search_recipes(
    State(state): State<SharedState>,
    query: Result<Query<SearchQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<SearchResponse> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", e.body_text()))?;
    let category = q
        .category
        .as_deref()
        .map(str::parse::<Category>)
        .transpose()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", e))?;
    let limit = q.limit.unwrap_or(DEFAULT_LIMIT);
    if limit == 0 || limit > MAX_LIMIT {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", format!("limit must be in 1..={MAX_LIMIT}")));
    }
    let needle = q.text.as_deref().map(normalize).unwrap_or_default();
    let year = q.year.as_deref().map(str::trim).filter(|y| !y.is_empty());

    let a = state.snapshot();
    let mut hits: Vec<&Recipe> = a
        .snapshot
        .recipes
        .iter()
        .filter(|r| category.is_none_or(|c| r.category == c))
        .filter(|r| year.is_none_or(|y| r.year_tags.contains(y)))
        .filter(|r| needle.is_empty() || r.lines.iter().any(|l| normalize(&l.raw_text).contains(needle.as_str())))
        .collect();
    hits.sort_by(|x, y| x.name.cmp(&y.name).then_with(|| x.id.cmp(&y.id)));
    let total = hits.len();
    let recipes = hits.into_iter().take(limit).map(|r| summary(&a, r)).collect();
    Ok(Json(SearchResponse { total, recipes }))
}

#[derive(Debug, Serialize)]
struct LineDetail {
    #[serde(flatten)]
    line: IngredientLine,
    mfd_id: Option<String>,
    description: Option<String>,
    score: Option<f64>,
    stage: Option<MatchStage>,
}

#[derive(Debug, Serialize)]
struct RecipeDetail {
    #[serde(flatten)]
    summary: RecipeSummary,
    profile: Option<NutrientProfile>,
    lines: Vec<LineDetail>,
}

async fn recipe_detail(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<RecipeDetail> {
    let a = state.snapshot();
    let recipe = a
        .snapshot
        .recipe(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("unknown recipe id {id:?}")))?;
    let by_ingredient = a.matches.by_ingredient();
    let lines = recipe
        .lines
        .iter()
        .map(|l| {
            let m = by_ingredient.get(&normalize(&l.raw_text));
            LineDetail {
                line: l.clone(),
                mfd_id: m.map(|m| m.mfd_id.clone()),
                description: m.and_then(|m| a.snapshot.nutrition_entry(&m.mfd_id)).map(|e| e.description.clone()),
                score: m.map(|m| m.score),
                stage: m.map(|m| m.stage),
            }
        })
        .collect();
    Ok(Json(RecipeDetail { summary: summary(&a, recipe), profile: a.profiles.get(&recipe.id).cloned(), lines }))
}

/// Body of `POST /api/plan`. Omitted fields take the configured values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub m: Option<usize>,
    pub p_min: Option<f64>,
    pub c_min: Option<f64>,
    pub f_max: Option<f64>,
    pub time_budget_ms: Option<u64>,
}

async fn plan(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let req: PlanRequest = if body.iter().all(u8::is_ascii_whitespace) {
        PlanRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", e.to_string()))?
    };
    let a = state.snapshot();
    let c = &state.config;
    let bounds = PlanBounds {
        p_min: req.p_min.unwrap_or(c.p_min),
        c_min: req.c_min.unwrap_or(c.c_min),
        f_max: req.f_max.unwrap_or(c.f_max),
    };
    let m = req.m.unwrap_or(c.m);
    let budget = Duration::from_millis(req.time_budget_ms.unwrap_or(DEFAULT_PLAN_BUDGET_MS));
    let result = tokio::task::spawn_blocking(move || {
        let problem = a.plan_problem(m, bounds).map_err(PipelineError::Plan)?;
        solve_to_file(&problem, &SolveOptions { time_budget: Some(budget) })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?;
    match result {
        Ok(file) => Ok(Json(file).into_response()),
        Err(PipelineError::Plan(e)) => Err(e.into()),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string())),
    }
}

#[derive(Debug, Serialize)]
struct PricePoint {
    date: String,
    source: String,
    unit_price: f64,
    was_free: bool,
}

#[derive(Debug, Serialize)]
struct PriceResponse {
    #[serde(flatten)]
    model: PriceModel,
    inflation_factor_percent: f64,
    predicted_cost: f64,
    history: Vec<PricePoint>,
}

async fn price(State(state): State<SharedState>, Path(key): Path<String>) -> ApiResult<PriceResponse> {
    let a = state.snapshot();
    let key = normalize(&key);
    let model = a
        .price_book
        .get(&key)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("no price model for {key:?}")))?;
    let mut rows: Vec<_> = a.snapshot.invoices.iter().filter(|i| i.key() == key).collect();
    rows.sort_by(|x, y| x.date.cmp(&y.date).then_with(|| x.source.cmp(&y.source)));
    let history = rows
        .into_iter()
        .map(|i| PricePoint { date: i.date.to_string(), source: i.source.clone(), unit_price: i.unit_price, was_free: i.was_free })
        .collect();
    Ok(Json(PriceResponse {
        model: model.clone(),
        inflation_factor_percent: a.inflation.factor_percent(model.category),
        predicted_cost: model.predicted_cost(&a.inflation),
        history,
    }))
}

async fn reload(State(state): State<SharedState>) -> Result<Response, ApiError> {
    let config = state.config.clone();
    let next = tokio::task::spawn_blocking(move || Artifacts::compute(&config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, e.error.code(), e.to_string()))?;
    let recipes = next.snapshot.recipes.len();
    state.replace(next);
    Ok(Json(json!({ "status": "reloaded", "recipes": recipes })).into_response())
}
