//! Minimum-cost recipe selection as a binary integer program.
//!
//! Pick exactly `M` of `N` recipes minimizing total cost subject to
//!
//! * `Σ protein ≥ p_min · M`
//! * `Σ calcium ≥ c_min · M`
//! * `Σ fat ≤ f_max · M`
//! * `⌊M/k⌋ ≤ count(category) ≤ ⌊M/k⌋ + 1` for each of the `k` categories.
//!
//! Costs are held as integer cents and nutrients as integer millionths of
//! their unit, so the objective and every constraint are evaluated exactly
//! and independently of summation order. Among equal-cost optima the
//! selection whose sorted recipe-id list is lexicographically smallest wins.

mod bnb;
mod brute;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bnb::{solve_with, SolveOptions, SolveStats};
pub use brute::enumerate_optimum;

/// Nutrient values are stored as multiples of this fraction of their unit.
pub const NUTRIENT_SCALE: f64 = 1e6;

pub const DEFAULT_P_MIN: f64 = 15.0;
pub const DEFAULT_C_MIN: f64 = 433.33;
pub const DEFAULT_F_MAX: f64 = 30.0;
pub const DEFAULT_M: usize = 15;

pub fn default_categories() -> Vec<String> {
    crate::corpus::Category::ALL.iter().map(|c| c.to_string()).collect()
}

/// `(⌊M/k⌋, ⌊M/k⌋ + 1)`.
pub fn category_bounds(m: usize, num_categories: usize) -> (usize, usize) {
    let lower = m / num_categories.max(1);
    (lower, lower + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanItem {
    pub recipe_id: String,
    /// Dollars.
    pub cost: f64,
    /// Grams per serving.
    pub protein: f64,
    /// Milligrams per serving.
    pub calcium: f64,
    /// Grams per serving.
    pub fat: f64,
    pub category: String,
}

/// Average-per-recipe nutrient bounds. `f_max = ∞` disables the fat bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanBounds {
    pub p_min: f64,
    pub c_min: f64,
    #[serde(with = "unbounded")]
    pub f_max: f64,
}

/// JSON has no infinity: an unbounded value is written and read as `null`.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for PlanBounds {
    fn default() -> Self {
        PlanBounds { p_min: DEFAULT_P_MIN, c_min: DEFAULT_C_MIN, f_max: DEFAULT_F_MAX }
    }
}

/// Serialized layout of `plan_problem.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanProblemFile {
    pub items: Vec<PlanItem>,
    pub m: usize,
    #[serde(default = "default_p_min")]
    pub p_min: f64,
    #[serde(default = "default_c_min")]
    pub c_min: f64,
    #[serde(default = "default_f_max", with = "unbounded")]
    pub f_max: f64,
    #[serde(default = "default_categories")]
    pub categories: Vec<String>,
}

fn default_p_min() -> f64 {
    DEFAULT_P_MIN
}
fn default_c_min() -> f64 {
    DEFAULT_C_MIN
}
fn default_f_max() -> f64 {
    DEFAULT_F_MAX
}

/// Exact integer form of one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct QItem {
    pub cost: i64,
    pub protein: i64,
    pub calcium: i64,
    pub fat: i64,
    pub category: usize,
}

/// A validated problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanProblemFile", into = "PlanProblemFile")]
pub struct PlanProblem {
    items: Vec<PlanItem>,
    m: usize,
    bounds: PlanBounds,
    categories: Vec<String>,
    quantized: Vec<QItem>,
    protein_required: i64,
    calcium_required: i64,
    /// `None` when the fat bound is infinite.
    fat_allowed: Option<i64>,
}

/// Dollars to cents, rounding half away from zero.
pub fn to_cents(dollars: f64) -> i64 {
    (dollars * 100.0).round() as i64
}

fn quantize(v: f64) -> i64 {
    (v * NUTRIENT_SCALE).round() as i64
}

fn dequantize(v: i64) -> f64 {
    v as f64 / NUTRIENT_SCALE
}

impl PlanProblem {
    pub fn new(items: Vec<PlanItem>, m: usize, bounds: PlanBounds) -> Result<Self, PlanError> {
        Self::with_categories(items, m, bounds, default_categories())
    }

    pub fn with_categories(
        items: Vec<PlanItem>,
        m: usize,
        bounds: PlanBounds,
        categories: Vec<String>,
    ) -> Result<Self, PlanError> {
        let invalid = |msg: String| Err(PlanError::InvalidProblem(msg));
        if categories.is_empty() {
            return invalid("at least one category is required".into());
        }
        let mut cat_index = BTreeMap::new();
        for (i, c) in categories.iter().enumerate() {
            if cat_index.insert(c.clone(), i).is_some() {
                return invalid(format!("category {c:?} is declared twice"));
            }
        }
        if m == 0 {
            return invalid("M must be at least 1".into());
        }
        if m > items.len() {
            return invalid(format!("M = {m} exceeds the number of recipes ({})", items.len()));
        }
        let PlanBounds { p_min, c_min, f_max } = bounds;
        if !(p_min.is_finite() && p_min >= 0.0) || !(c_min.is_finite() && c_min >= 0.0) {
            return invalid("p_min and c_min must be finite and non-negative".into());
        }
        if f_max.is_nan() || f_max < 0.0 {
            return invalid("f_max must be non-negative".into());
        }
        let mut seen = std::collections::HashSet::new();
        let mut quantized = Vec::with_capacity(items.len());
        for item in &items {
            if !seen.insert(item.recipe_id.as_str()) {
                return invalid(format!("recipe {:?} appears twice", item.recipe_id));
            }
            let Some(&category) = cat_index.get(&item.category) else {
                return invalid(format!("recipe {:?} has undeclared category {:?}", item.recipe_id, item.category));
            };
            if !item.cost.is_finite() || item.cost.abs() > 1e12 {
                return invalid(format!("recipe {:?} has invalid cost {}", item.recipe_id, item.cost));
            }
            for (name, v) in [("protein", item.protein), ("calcium", item.calcium), ("fat", item.fat)] {
                if !(v.is_finite() && (0.0..1e9).contains(&v)) {
                    return invalid(format!("recipe {:?} has invalid {name} {v}", item.recipe_id));
                }
            }
            quantized.push(QItem {
                cost: to_cents(item.cost),
                protein: quantize(item.protein),
                calcium: quantize(item.calcium),
                fat: quantize(item.fat),
                category,
            });
        }
        let mi = m as i64;
        Ok(PlanProblem {
            items,
            m,
            bounds,
            categories,
            quantized,
            protein_required: quantize(p_min) * mi,
            calcium_required: quantize(c_min) * mi,
            fat_allowed: f_max.is_finite().then(|| quantize(f_max) * mi),
        })
    }

    pub fn items(&self) -> &[PlanItem] {
        &self.items
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bounds(&self) -> PlanBounds {
        self.bounds
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Same items and categories with different `M` or bounds.
    pub fn with_parameters(&self, m: usize, bounds: PlanBounds) -> Result<Self, PlanError> {
        Self::with_categories(self.items.clone(), m, bounds, self.categories.clone())
    }

    pub fn category_bounds(&self) -> (usize, usize) {
        category_bounds(self.m, self.categories.len())
    }

    pub(crate) fn quantized(&self) -> &[QItem] {
        &self.quantized
    }

    /// Exact feasibility of a full selection given by item indices.
    pub(crate) fn is_feasible(&self, selection: &[usize]) -> bool {
        if selection.len() != self.m {
            return false;
        }
        let (lo, hi) = self.category_bounds();
        let mut counts = vec![0usize; self.categories.len()];
        let (mut p, mut c, mut f) = (0i64, 0i64, 0i64);
        for &i in selection {
            let q = &self.quantized[i];
            counts[q.category] += 1;
            p += q.protein;
            c += q.calcium;
            f += q.fat;
        }
        counts.iter().all(|&n| n >= lo && n <= hi)
            && p >= self.protein_required
            && c >= self.calcium_required
            && self.fat_allowed.is_none_or(|cap| f <= cap)
    }

    /// Builds the reported solution for a selection of item indices.
    pub(crate) fn solution(&self, selection: &[usize], optimal: bool) -> PlanSolution {
        let m = selection.len().max(1) as f64;
        let mut selected: Vec<String> = selection.iter().map(|&i| self.items[i].recipe_id.clone()).collect();
        selected.sort();
        let mut category_counts: BTreeMap<String, usize> = self.categories.iter().map(|c| (c.clone(), 0)).collect();
        let (mut cost, mut p, mut c, mut f) = (0i64, 0i64, 0i64, 0i64);
        for &i in selection {
            let q = &self.quantized[i];
            *category_counts.get_mut(&self.categories[q.category]).expect("declared") += 1;
            cost += q.cost;
            p += q.protein;
            c += q.calcium;
            f += q.fat;
        }
        PlanSolution {
            selected,
            total_cost: cost as f64 / 100.0,
            avg_protein: dequantize(p) / m,
            avg_calcium: dequantize(c) / m,
            avg_fat: dequantize(f) / m,
            category_counts,
            optimal,
        }
    }
}

impl TryFrom<PlanProblemFile> for PlanProblem {
    type Error = PlanError;

    fn try_from(f: PlanProblemFile) -> Result<Self, Self::Error> {
        PlanProblem::with_categories(f.items, f.m, PlanBounds { p_min: f.p_min, c_min: f.c_min, f_max: f.f_max }, f.categories)
    }
}

impl From<PlanProblem> for PlanProblemFile {
    fn from(p: PlanProblem) -> Self {
        PlanProblemFile {
            items: p.items,
            m: p.m,
            p_min: p.bounds.p_min,
            c_min: p.bounds.c_min,
            f_max: p.bounds.f_max,
            categories: p.categories,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    /// Sorted recipe ids.
    pub selected: Vec<String>,
    pub total_cost: f64,
    pub avg_protein: f64,
    pub avg_calcium: f64,
    pub avg_fat: f64,
    pub category_counts: BTreeMap<String, usize>,
    /// True when the solver proved global optimality (including the tie-break).
    pub optimal: bool,
}

/// The aggregate that makes a problem infeasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Infeasibility {
    CategoryBand { category: String, available: usize, lower: usize },
    CategoryCapacity { selectable: usize, m: usize },
    Protein { best_average: f64, required: f64 },
    Calcium { best_average: f64, required: f64, with_other_bounds: bool },
    Fat { best_average: f64, allowed: f64, with_other_bounds: bool },
}

impl Infeasibility {
    pub fn constraint(&self) -> &'static str {
        match self {
            Infeasibility::CategoryBand { .. } | Infeasibility::CategoryCapacity { .. } => "category",
            Infeasibility::Protein { .. } => "protein",
            Infeasibility::Calcium { .. } => "calcium",
            Infeasibility::Fat { .. } => "fat",
        }
    }
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::CategoryBand { category, available, lower } => {
                write!(f, "category band: {category} has {available} recipes but at least {lower} are required")
            }
            Infeasibility::CategoryCapacity { selectable, m } => {
                write!(f, "category band: upper bands admit at most {selectable} recipes, fewer than M = {m}")
            }
            Infeasibility::Protein { best_average, required } => write!(
                f,
                "protein: best achievable average {best_average:.3} g is below the minimum {required} g"
            ),
            Infeasibility::Calcium { best_average, required, with_other_bounds: false } => write!(
                f,
                "calcium: best achievable average {best_average:.3} mg is below the minimum {required} mg"
            ),
            Infeasibility::Calcium { required, .. } => write!(
                f,
                "calcium: the minimum {required} mg cannot be met together with the protein bound"
            ),
            Infeasibility::Fat { best_average, allowed, with_other_bounds: false } => write!(
                f,
                "fat: lowest achievable average {best_average:.3} g exceeds the maximum {allowed} g"
            ),
            Infeasibility::Fat { allowed, .. } => write!(
                f,
                "fat: the maximum {allowed} g cannot be met together with the protein and calcium bounds"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),
    #[error("time budget of {0:?} exhausted before any feasible plan was found")]
    TimeBudgetExceeded(Duration),
    #[error("unknown recipe id {0:?}")]
    UnknownRecipeId(String),
}

/// Solves to proven optimality with no time limit.
pub fn solve(problem: &PlanProblem) -> Result<PlanSolution, PlanError> {
    solve_with(problem, &SolveOptions::default()).map(|(s, _)| s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint: String,
    pub required: String,
    pub actual: f64,
    pub satisfied: bool,
}

/// Independent recomputation of a selection against the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub m: usize,
    pub selected: usize,
    pub total_cost: f64,
    pub total_protein: f64,
    pub total_calcium: f64,
    pub total_fat: f64,
    pub mean_protein: f64,
    pub mean_calcium: f64,
    pub mean_fat: f64,
    pub category_counts: BTreeMap<String, usize>,
    pub checks: Vec<ConstraintCheck>,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Recomputes cost, nutrient totals and means (total / M) and category
/// counts of `selected`, checking every constraint.
pub fn audit(problem: &PlanProblem, selected: &[String]) -> Result<AuditReport, PlanError> {
    let index: BTreeMap<&str, usize> =
        problem.items.iter().enumerate().map(|(i, it)| (it.recipe_id.as_str(), i)).collect();
    let mut rows = Vec::with_capacity(selected.len());
    let mut violations = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for id in selected {
        let &i = index.get(id.as_str()).ok_or_else(|| PlanError::UnknownRecipeId(id.clone()))?;
        if !seen.insert(i) {
            violations.push(format!("recipe {id:?} selected more than once"));
        }
        rows.push(i);
    }
    let m = problem.m;
    let (lo, hi) = problem.category_bounds();
    let mut counts: BTreeMap<String, usize> = problem.categories.iter().map(|c| (c.clone(), 0)).collect();
    let (mut cost, mut p, mut c, mut f) = (0i64, 0i64, 0i64, 0i64);
    for &i in &rows {
        let q = &problem.quantized[i];
        *counts.get_mut(&problem.categories[q.category]).expect("declared") += 1;
        cost += q.cost;
        p += q.protein;
        c += q.calcium;
        f += q.fat;
    }
    let mean = |v: i64| dequantize(v) / m as f64;
    let mut checks = vec![ConstraintCheck {
        constraint: "size".into(),
        required: format!("= {m}"),
        actual: rows.len() as f64,
        satisfied: rows.len() == m,
    }];
    checks.push(ConstraintCheck {
        constraint: "protein".into(),
        required: format!(">= {} g average", problem.bounds.p_min),
        actual: mean(p),
        satisfied: p >= problem.protein_required,
    });
    checks.push(ConstraintCheck {
        constraint: "calcium".into(),
        required: format!(">= {} mg average", problem.bounds.c_min),
        actual: mean(c),
        satisfied: c >= problem.calcium_required,
    });
    checks.push(ConstraintCheck {
        constraint: "fat".into(),
        required: format!("<= {} g average", problem.bounds.f_max),
        actual: mean(f),
        satisfied: problem.fat_allowed.is_none_or(|cap| f <= cap),
    });
    for (name, &n) in &counts {
        checks.push(ConstraintCheck {
            constraint: format!("category:{name}"),
            required: format!("{lo}..={hi}"),
            actual: n as f64,
            satisfied: n >= lo && n <= hi,
        });
    }
    violations.extend(checks.iter().filter(|c| !c.satisfied).map(|c| {
        format!("{} is {} (required {})", c.constraint, c.actual, c.required)
    }));
    Ok(AuditReport {
        m,
        selected: rows.len(),
        total_cost: cost as f64 / 100.0,
        total_protein: dequantize(p),
        total_calcium: dequantize(c),
        total_fat: dequantize(f),
        mean_protein: mean(p),
        mean_calcium: mean(c),
        mean_fat: mean(f),
        category_counts: counts,
        checks,
        violations,
    })
}

/// `plan_solution.json` layout: the solution plus its audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    #[serde(flatten)]
    pub solution: PlanSolution,
    pub audit: AuditReport,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn item(id: &str, cost: f64, protein: f64, calcium: f64, fat: f64, category: &str) -> PlanItem {
        PlanItem { recipe_id: id.into(), cost, protein, calcium, fat, category: category.into() }
    }

    #[test]
    fn bands() {
        assert_eq!(category_bounds(15, 4), (3, 4));
        assert_eq!(category_bounds(16, 4), (4, 5));
        assert_eq!(category_bounds(4, 4), (1, 2));
    }

    #[test]
    fn cents_round_half_up() {
        assert_eq!(to_cents(0.125), 13);
        assert_eq!(to_cents(1.602), 160);
        assert_eq!(to_cents(3.204), 320);
        assert_eq!(to_cents(0.0), 0);
    }

    #[test]
    fn rejects_bad_problems() {
        let items = vec![item("a", 1.0, 1.0, 1.0, 1.0, "Beef")];
        assert!(PlanProblem::new(items.clone(), 2, PlanBounds::default()).is_err());
        assert!(PlanProblem::new(items.clone(), 0, PlanBounds::default()).is_err());
        let mut dup = items.clone();
        dup.push(items[0].clone());
        assert!(PlanProblem::new(dup, 1, PlanBounds::default()).is_err());
        let odd = vec![item("a", 1.0, 1.0, 1.0, 1.0, "Pork")];
        assert!(PlanProblem::new(odd, 1, PlanBounds::default()).is_err());
        let neg = PlanBounds { p_min: -1.0, ..Default::default() };
        assert!(PlanProblem::new(items, 1, neg).is_err());
    }

    #[test]
    fn audit_means_and_violations() {
        let items = vec![
            item("a", 1.0, 10.0, 500.0, 10.0, "Beef"),
            item("b", 2.0, 20.0, 500.0, 10.0, "Poultry"),
            item("c", 3.0, 20.0, 500.0, 10.0, "Seafood"),
        ];
        let bounds = PlanBounds { p_min: 15.0, c_min: 0.0, f_max: 30.0 };
        let p = PlanProblem::with_categories(items, 2, bounds, vec!["Beef".into(), "Poultry".into(), "Seafood".into()]).unwrap();
        let r = audit(&p, &["a".into(), "b".into()]).unwrap();
        assert_eq!(r.mean_protein, 15.0);
        assert_eq!(r.total_cost, 3.0);
        assert!(r.passed(), "{:?}", r.violations);

        let empty = audit(&p, &[]).unwrap();
        assert!(!empty.passed());
        assert!(empty.violations.iter().any(|v| v.starts_with("size")));

        assert_eq!(audit(&p, &["zz".into()]), Err(PlanError::UnknownRecipeId("zz".into())));
        let dup = audit(&p, &["a".into(), "a".into()]).unwrap();
        assert!(!dup.passed());
    }

    #[test]
    fn problem_json_round_trip() {
        let items = vec![item("a", 1.25, 10.0, 500.0, 10.0, "Beef"), item("b", 2.0, 20.0, 5.0, 1.0, "Poultry")];
        let p = PlanProblem::new(items, 1, PlanBounds::default()).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: PlanProblem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let minimal = r#"{"items":[{"recipe_id":"a","cost":1,"protein":1,"calcium":1,"fat":1,"category":"Beef"}],"m":1}"#;
        let p: PlanProblem = serde_json::from_str(minimal).unwrap();
        assert_eq!(p.bounds(), PlanBounds::default());
        assert!(serde_json::from_str::<PlanProblem>(r#"{"items":[],"m":1}"#).is_err());
    }
}
