//! Recipe ingredient matching, nutrition and cost estimation, and exact
//! minimum-cost meal-schedule selection.
//!
//! The pipeline runs in five stages, each backed by one module:
//!
//! 1. [`corpus`] loads recipes, nutrition entries, invoices and unit
//!    conversions into an immutable [`corpus::CorpusSnapshot`].
//! 2. [`embed`] links ingredient strings to nutrition entries by cosine
//!    similarity of text embeddings, with a human review queue and overrides.
//! 3. [`nutrition`] converts household measures to grams and aggregates
//!    per-serving nutrient profiles.
//! 4. [`pricing`] fits buy-probability / mean-price models from invoices and
//!    applies category inflation.
//! 5. [`planner`] picks `M` recipes at minimum total cost under nutrient and
//!    category-balance constraints with an exact branch-and-bound solver.
//!
//! [`pipeline`] wires the stages together and [`service`] exposes the
//! results over HTTP.

pub mod corpus;
pub mod embed;
pub mod nutrition;
pub mod pipeline;
pub mod planner;
pub mod pricing;
pub mod service;
mod tabular;
pub mod text;

pub use corpus::{load_corpus, Category, CorpusPaths, CorpusSnapshot, IngredientLine, Recipe, Unit};
pub use embed::{cosine_similarity, EmbeddingProvider, EmbeddingVector, TrigramHasher};
pub use nutrition::{ConversionTable, NutrientProfile};
pub use planner::{solve, PlanBounds, PlanItem, PlanProblem, PlanSolution};
pub use pricing::{predict_ingredient_cost, InflationCategory, InflationTable, PriceModel};
