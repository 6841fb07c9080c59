//! Recipe, nutrition, invoice and conversion-table ingestion.
//!
//! Every input is a header-keyed CSV file, or a JSON array of row objects
//! carrying the same keys (selected by a `.json` extension). Structural
//! problems with a file (unreadable, malformed, missing columns) abort the
//! load. Row-level validation failures are collected into the snapshot's
//! rejection list so that all problems surface in one pass; callers that
//! need a clean corpus use [`CorpusSnapshot::ensure_clean`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nutrition::{ConversionTable, NutrientProfile, NUTRIENTS};
use crate::pricing::InflationCategory;
use crate::tabular::{Row, Table, TableError};
use crate::text::normalize;

/// Protein category of a recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Beef,
    Poultry,
    Seafood,
    Vegetarian,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Beef, Category::Poultry, Category::Seafood, Category::Vegetarian];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Beef => "Beef",
            Category::Poultry => "Poultry",
            Category::Seafood => "Seafood",
            Category::Vegetarian => "Vegetarian",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown category {s:?} (expected Beef, Poultry, Seafood or Vegetarian)"))
    }
}

/// Household or metric measure of an ingredient line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Gram,
    Kilogram,
    Ounce,
    Pound,
    Cup,
    Tablespoon,
    Teaspoon,
    Can,
    Each,
    Unknown,
}

impl Unit {
    pub const ALL: [Unit; 10] = [
        Unit::Gram,
        Unit::Kilogram,
        Unit::Ounce,
        Unit::Pound,
        Unit::Cup,
        Unit::Tablespoon,
        Unit::Teaspoon,
        Unit::Can,
        Unit::Each,
        Unit::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Gram => "gram",
            Unit::Kilogram => "kilogram",
            Unit::Ounce => "ounce",
            Unit::Pound => "pound",
            Unit::Cup => "cup",
            Unit::Tablespoon => "tablespoon",
            Unit::Teaspoon => "teaspoon",
            Unit::Can => "can",
            Unit::Each => "each",
            Unit::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unit = match s.trim().to_ascii_lowercase().as_str() {
            "g" | "gram" | "grams" => Unit::Gram,
            "kg" | "kilogram" | "kilograms" => Unit::Kilogram,
            "oz" | "ounce" | "ounces" => Unit::Ounce,
            "lb" | "lbs" | "pound" | "pounds" => Unit::Pound,
            "cup" | "cups" | "c" => Unit::Cup,
            "tbsp" | "tablespoon" | "tablespoons" => Unit::Tablespoon,
            "tsp" | "teaspoon" | "teaspoons" => Unit::Teaspoon,
            "can" | "cans" => Unit::Can,
            "each" | "ea" | "whole" | "piece" | "pieces" => Unit::Each,
            "" | "unknown" => Unit::Unknown,
            other => return Err(format!("unknown unit {other:?}")),
        };
        Ok(unit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngredientLine {
    pub line_index: u32,
    pub raw_text: String,
    pub quantity: f64,
    pub unit: Unit,
    /// Conversion group (e.g. `rice`, `beans`) used to pick a grams-per-unit factor.
    pub group: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: String,
    pub name: String,
    pub category: Category,
    pub servings: u32,
    pub year_tags: BTreeSet<String>,
    /// Sorted by `line_index`.
    pub lines: Vec<IngredientLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutritionEntry {
    pub mfd_id: String,
    pub description: String,
    pub per_100g: NutrientProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvoiceRecord {
    pub source: String,
    pub date: NaiveDate,
    pub product_text: String,
    pub unit_price: f64,
    pub was_free: bool,
    pub food_category: InflationCategory,
}

impl InvoiceRecord {
    /// Key under which invoice rows are grouped into price models.
    pub fn key(&self) -> String {
        normalize(&self.product_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFile {
    Recipes,
    Nutrition,
    Invoices,
    Conversions,
}

impl fmt::Display for InputFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFile::Recipes => "recipes",
            InputFile::Nutrition => "nutrition",
            InputFile::Invoices => "invoices",
            InputFile::Conversions => "conversions",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectionKind {
    SchemaViolation,
    DuplicateId,
}

/// One row that failed validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub file: InputFile,
    pub line: usize,
    pub kind: RejectionKind,
    /// Recipe id, mfd_id or other record key, when the row had one.
    pub record_id: Option<String>,
    pub field: String,
    pub message: String,
}

impl Rejection {
    pub fn to_error(&self) -> CorpusError {
        match self.kind {
            RejectionKind::SchemaViolation => CorpusError::SchemaViolation {
                file: self.file,
                line: self.line,
                field: self.field.clone(),
                message: self.message.clone(),
            },
            RejectionKind::DuplicateId => CorpusError::DuplicateId {
                file: self.file,
                line: self.line,
                id: self.record_id.clone().unwrap_or_default(),
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {message}")]
    FileUnreadable { path: PathBuf, message: String },
    #[error("{file} line {line}: field `{field}`: {message}")]
    SchemaViolation { file: InputFile, line: usize, field: String, message: String },
    #[error("{file} line {line}: duplicate id {id:?}")]
    DuplicateId { file: InputFile, line: usize, id: String },
}

impl CorpusError {
    fn from_table(file: InputFile, path: Option<&Path>, err: TableError) -> Self {
        match err {
            TableError::Io(message) => CorpusError::FileUnreadable {
                path: path.map(Path::to_path_buf).unwrap_or_default(),
                message,
            },
            TableError::Parse { line, message } => {
                CorpusError::SchemaViolation { file, line, field: String::new(), message }
            }
            TableError::MissingColumn(field) => CorpusError::SchemaViolation {
                file,
                line: 1,
                field,
                message: "required column is missing from the header".into(),
            },
        }
    }
}

/// Input locations. Without a conversions file the built-in table applies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub recipes: PathBuf,
    pub nutrition: PathBuf,
    pub invoices: PathBuf,
    pub conversions: Option<PathBuf>,
}

/// Immutable, validated view of all input data.
#[derive(Debug, Clone, Default)]
pub struct CorpusSnapshot {
    pub recipes: Vec<Recipe>,
    pub nutrition: Vec<NutritionEntry>,
    pub invoices: Vec<InvoiceRecord>,
    pub conversions: ConversionTable,
    pub rejections: Vec<Rejection>,
    /// Distinct recipe ids seen in the recipe file, accepted or not.
    pub recipe_ids_seen: usize,
    recipe_index: HashMap<String, usize>,
    nutrition_index: HashMap<String, usize>,
}

impl CorpusSnapshot {
    pub fn recipe(&self, id: &str) -> Option<&Recipe> {
        self.recipe_index.get(id).map(|&i| &self.recipes[i])
    }

    pub fn nutrition_entry(&self, mfd_id: &str) -> Option<&NutritionEntry> {
        self.nutrition_index.get(mfd_id).map(|&i| &self.nutrition[i])
    }

    /// Recipes rejected as a whole (distinct ids with at least one rejected row).
    pub fn rejected_recipe_ids(&self) -> BTreeSet<&str> {
        self.rejections
            .iter()
            .filter(|r| r.file == InputFile::Recipes)
            .filter_map(|r| r.record_id.as_deref())
            .collect()
    }

    /// Fails with the first rejection, if any.
    pub fn ensure_clean(&self) -> Result<(), CorpusError> {
        match self.rejections.first() {
            Some(r) => Err(r.to_error()),
            None => Ok(()),
        }
    }

    /// Distinct normalized ingredient strings across all recipes, sorted.
    pub fn distinct_ingredients(&self) -> BTreeSet<String> {
        self.recipes
            .iter()
            .flat_map(|r| r.lines.iter())
            .map(|l| normalize(&l.raw_text))
            .collect()
    }

    /// Parses all four inputs from in-memory CSV text.
    pub fn from_csv_strs(
        recipes: &str,
        nutrition: &str,
        invoices: &str,
        conversions: Option<&str>,
    ) -> Result<CorpusSnapshot, CorpusError> {
        let table = |file, text: &str| Table::from_csv_str(text).map_err(|e| CorpusError::from_table(file, None, e));
        let conversions = conversions.map(|c| table(InputFile::Conversions, c)).transpose()?;
        build_snapshot(
            table(InputFile::Recipes, recipes)?,
            table(InputFile::Nutrition, nutrition)?,
            table(InputFile::Invoices, invoices)?,
            conversions,
        )
    }
}

/// Loads and validates every input file into a snapshot.
pub fn load_corpus(paths: &CorpusPaths) -> Result<CorpusSnapshot, CorpusError> {
    let read = |file, path: &Path| Table::read(path).map_err(|e| CorpusError::from_table(file, Some(path), e));
    let recipes = read(InputFile::Recipes, &paths.recipes)?;
    let nutrition = read(InputFile::Nutrition, &paths.nutrition)?;
    let invoices = read(InputFile::Invoices, &paths.invoices)?;
    let conversions = paths
        .conversions
        .as_deref()
        .map(|p| read(InputFile::Conversions, p))
        .transpose()?;
    build_snapshot(recipes, nutrition, invoices, conversions)
}

fn build_snapshot(
    recipes: Table,
    nutrition: Table,
    invoices: Table,
    conversions: Option<Table>,
) -> Result<CorpusSnapshot, CorpusError> {
    let mut rejections = Vec::new();
    let (recipes, recipe_ids_seen) = parse_recipes(&recipes, &mut rejections)?;
    let nutrition = parse_nutrition(&nutrition, &mut rejections)?;
    let invoices = parse_invoices(&invoices, &mut rejections)?;
    let conversions = match conversions {
        Some(table) => parse_conversions(&table, &mut rejections)?,
        None => ConversionTable::default(),
    };
    let recipe_index = recipes.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
    let nutrition_index = nutrition.iter().enumerate().map(|(i, e)| (e.mfd_id.clone(), i)).collect();
    Ok(CorpusSnapshot {
        recipes,
        nutrition,
        invoices,
        conversions,
        rejections,
        recipe_ids_seen,
        recipe_index,
        nutrition_index,
    })
}

struct RowCtx<'a> {
    table: &'a Table,
    row: &'a Row,
    file: InputFile,
    record_id: Option<String>,
    errors: Vec<Rejection>,
}

impl<'a> RowCtx<'a> {
    fn new(table: &'a Table, row: &'a Row, file: InputFile, id_field: &str) -> Self {
        let id = table.get(row, id_field);
        let record_id = (!id.is_empty()).then(|| id.to_string());
        RowCtx { table, row, file, record_id, errors: Vec::new() }
    }

    fn violation(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(Rejection {
            file: self.file,
            line: self.row.line,
            kind: RejectionKind::SchemaViolation,
            record_id: self.record_id.clone(),
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn raw(&self, field: &str) -> &'a str {
        self.table.get(self.row, field)
    }

    fn text(&mut self, field: &str) -> Option<String> {
        let value = self.raw(field);
        if value.is_empty() {
            self.violation(field, "required value is missing");
            None
        } else {
            Some(value.to_string())
        }
    }

    fn optional_text(&self, field: &str) -> Option<String> {
        let value = self.raw(field);
        (!value.is_empty()).then(|| value.to_string())
    }

    fn parse<T: FromStr>(&mut self, field: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let value = self.raw(field);
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.violation(field, format!("cannot parse {value:?}: {e}"));
                None
            }
        }
    }

    /// Non-negative finite decimal; empty reads as `missing`.
    fn decimal(&mut self, field: &str, missing: Option<f64>) -> Option<f64> {
        let value = self.raw(field);
        if value.is_empty() {
            if missing.is_none() {
                self.violation(field, "required value is missing");
            }
            return missing;
        }
        match value.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
            Ok(v) => {
                self.violation(field, format!("must be a non-negative number (got {v})"));
                None
            }
            Err(_) => {
                self.violation(field, format!("cannot parse {value:?} as a decimal"));
                None
            }
        }
    }

    fn boolean(&mut self, field: &str) -> Option<bool> {
        match self.raw(field).to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "y" | "t" => Some(true),
            "false" | "0" | "no" | "n" | "f" | "" => Some(false),
            other => {
                self.violation(field, format!("cannot parse {other:?} as a boolean"));
                None
            }
        }
    }
}

const RECIPE_COLUMNS: [&str; 9] =
    ["id", "name", "category", "servings", "year_tags", "line_index", "raw_text", "quantity", "unit"];

struct RecipeDraft {
    first_line: usize,
    name: String,
    category: Category,
    servings: u32,
    year_tags: BTreeSet<String>,
    lines: Vec<IngredientLine>,
}

fn parse_recipes(table: &Table, rejections: &mut Vec<Rejection>) -> Result<(Vec<Recipe>, usize), CorpusError> {
    table
        .require(&RECIPE_COLUMNS)
        .map_err(|e| CorpusError::from_table(InputFile::Recipes, None, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut drafts: HashMap<String, RecipeDraft> = HashMap::new();
    let mut bad: HashMap<String, Vec<Rejection>> = HashMap::new();
    let mut anonymous = Vec::new();

    for row in &table.rows {
        let mut ctx = RowCtx::new(table, row, InputFile::Recipes, "id");
        let id = ctx.text("id");
        let name = ctx.text("name");
        let category = ctx.parse::<Category>("category");
        let servings = match ctx.raw("servings").parse::<u32>() {
            Ok(0) => {
                ctx.violation("servings", "servings must be at least 1");
                None
            }
            Ok(n) => Some(n),
            Err(_) => {
                let raw = ctx.raw("servings").to_string();
                ctx.violation("servings", format!("cannot parse {raw:?} as a positive integer"));
                None
            }
        };
        let year_tags: BTreeSet<String> = ctx
            .raw("year_tags")
            .split('|')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        let line_index = ctx.parse::<u32>("line_index");
        let raw_text = ctx.text("raw_text");
        let quantity = ctx.decimal("quantity", Some(0.0));
        let unit = ctx.parse::<Unit>("unit");
        if let (Some(q), Some(u)) = (quantity, unit) {
            if u == Unit::Unknown && q > 0.0 {
                ctx.violation("unit", "a measured line (quantity > 0) needs a unit");
            }
        }

        let Some(id) = id else {
            anonymous.append(&mut ctx.errors);
            continue;
        };
        if !drafts.contains_key(&id) && !bad.contains_key(&id) {
            order.push(id.clone());
        }
        let line = match (line_index, raw_text, quantity, unit) {
            (Some(line_index), Some(raw_text), Some(quantity), Some(unit)) => Some(IngredientLine {
                line_index,
                raw_text,
                quantity: if unit == Unit::Unknown { 0.0 } else { quantity },
                unit,
                group: ctx.optional_text("group"),
                note: ctx.optional_text("note"),
            }),
            _ => None,
        };

        if let (Some(name), Some(category), Some(servings)) = (name, category, servings) {
            match drafts.get_mut(&id) {
                Some(draft) => {
                    if draft.name != name {
                        ctx.violation("name", format!("conflicts with {:?} on line {}", draft.name, draft.first_line));
                    }
                    if draft.category != category {
                        ctx.violation("category", format!("conflicts with {} on line {}", draft.category, draft.first_line));
                    }
                    if draft.servings != servings {
                        ctx.violation("servings", format!("conflicts with {} on line {}", draft.servings, draft.first_line));
                    }
                    if draft.year_tags != year_tags {
                        ctx.violation("year_tags", format!("conflicts with line {}", draft.first_line));
                    }
                    if let Some(line) = &line {
                        if draft.lines.iter().any(|l| l.line_index == line.line_index) {
                            ctx.violation("line_index", format!("line_index {} repeats within recipe", line.line_index));
                        }
                    }
                }
                None if !bad.contains_key(&id) => {
                    drafts.insert(
                        id.clone(),
                        RecipeDraft { first_line: row.line, name, category, servings, year_tags, lines: Vec::new() },
                    );
                }
                None => {}
            }
        }

        if ctx.errors.is_empty() {
            if let (Some(draft), Some(line)) = (drafts.get_mut(&id), line) {
                draft.lines.push(line);
            }
        } else {
            drafts.remove(&id);
            bad.entry(id).or_default().append(&mut ctx.errors);
        }
    }

    let seen = order.len();
    let mut recipes = Vec::with_capacity(drafts.len());
    for id in order {
        if let Some(mut errors) = bad.remove(&id) {
            rejections.append(&mut errors);
            continue;
        }
        let draft = drafts.remove(&id).expect("every seen id is either a draft or rejected");
        let mut lines = draft.lines;
        lines.sort_by_key(|l| l.line_index);
        recipes.push(Recipe {
            id,
            name: draft.name,
            category: draft.category,
            servings: draft.servings,
            year_tags: draft.year_tags,
            lines,
        });
    }
    rejections.append(&mut anonymous);
    Ok((recipes, seen))
}

fn parse_nutrition(table: &Table, rejections: &mut Vec<Rejection>) -> Result<Vec<NutritionEntry>, CorpusError> {
    let mut columns = vec!["mfd_id", "description"];
    columns.extend(NUTRIENTS);
    table
        .require(&columns)
        .map_err(|e| CorpusError::from_table(InputFile::Nutrition, None, e))?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut entries = Vec::new();
    for row in &table.rows {
        let mut ctx = RowCtx::new(table, row, InputFile::Nutrition, "mfd_id");
        let mfd_id = ctx.text("mfd_id");
        let description = ctx.text("description");
        let mut values = [0.0; 16];
        let mut complete = true;
        for (slot, name) in values.iter_mut().zip(NUTRIENTS) {
            // Missing nutrient cells are absent from the source database and read as zero.
            match ctx.decimal(name, Some(0.0)) {
                Some(v) => *slot = v,
                None => complete = false,
            }
        }
        let profile = NutrientProfile::from_array(values);
        if complete {
            if let Err(message) = profile.check() {
                ctx.violation("saturated_fat", message);
            }
        }
        if let Some(id) = &mfd_id {
            if let Some(first) = seen.get(id) {
                ctx.errors.push(Rejection {
                    file: InputFile::Nutrition,
                    line: row.line,
                    kind: RejectionKind::DuplicateId,
                    record_id: Some(id.clone()),
                    field: "mfd_id".into(),
                    message: format!("mfd_id already defined on line {first}"),
                });
            }
        }
        if !ctx.errors.is_empty() {
            rejections.append(&mut ctx.errors);
            continue;
        }
        let (Some(mfd_id), Some(description)) = (mfd_id, description) else { unreachable!() };
        seen.insert(mfd_id.clone(), row.line);
        entries.push(NutritionEntry { mfd_id, description, per_100g: profile });
    }
    Ok(entries)
}

fn parse_invoices(table: &Table, rejections: &mut Vec<Rejection>) -> Result<Vec<InvoiceRecord>, CorpusError> {
    table
        .require(&["source", "date", "product_text", "unit_price", "was_free", "food_category"])
        .map_err(|e| CorpusError::from_table(InputFile::Invoices, None, e))?;
    let mut records = Vec::new();
    for row in &table.rows {
        let mut ctx = RowCtx::new(table, row, InputFile::Invoices, "product_text");
        let source = ctx.text("source");
        let date = {
            let raw = ctx.raw("date");
            match NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
                Ok(d) => Some(d),
                Err(e) => {
                    ctx.violation("date", format!("{raw:?} is not an ISO-8601 calendar date: {e}"));
                    None
                }
            }
        };
        let product_text = ctx.text("product_text");
        let was_free = ctx.boolean("was_free");
        let unit_price = ctx.decimal("unit_price", was_free.filter(|f| *f).map(|_| 0.0));
        if let (Some(true), Some(price)) = (was_free, unit_price) {
            if price != 0.0 {
                ctx.violation("unit_price", "free rows must have unit_price 0");
            }
        }
        let food_category = ctx.parse::<InflationCategory>("food_category");
        match (source, date, product_text, unit_price, was_free, food_category) {
            (Some(source), Some(date), Some(product_text), Some(unit_price), Some(was_free), Some(food_category))
                if ctx.errors.is_empty() =>
            {
                records.push(InvoiceRecord { source, date, product_text, unit_price, was_free, food_category })
            }
            _ => rejections.append(&mut ctx.errors),
        }
    }
    Ok(records)
}

fn parse_conversions(table: &Table, rejections: &mut Vec<Rejection>) -> Result<ConversionTable, CorpusError> {
    table
        .require(&["unit", "ingredient_group", "grams_per_unit"])
        .map_err(|e| CorpusError::from_table(InputFile::Conversions, None, e))?;
    let mut conversions = ConversionTable::default();
    for row in &table.rows {
        let mut ctx = RowCtx::new(table, row, InputFile::Conversions, "ingredient_group");
        let unit = match ctx.raw("unit") {
            "" => {
                ctx.violation("unit", "required value is missing");
                None
            }
            _ => ctx.parse::<Unit>("unit"),
        };
        let group = ctx.raw("ingredient_group").trim_matches('*').to_string();
        let grams = ctx.decimal("grams_per_unit", None);
        if let (Some(unit), Some(grams)) = (unit, grams) {
            if unit == Unit::Unknown && group.is_empty() {
                ctx.violation("ingredient_group", "unmeasured-line weights must name a group");
            } else if let Err(e) = conversions.insert(unit, &group, grams) {
                ctx.violation("grams_per_unit", e.to_string());
            }
        }
        rejections.append(&mut ctx.errors);
    }
    Ok(conversions)
}

/// Summary counts over a snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub recipes: usize,
    pub ingredient_lines: usize,
    pub distinct_ingredients: usize,
    pub nutrition_entries: usize,
    pub invoices: usize,
    pub recipes_per_category: BTreeMap<Category, usize>,
    pub invoices_per_source: BTreeMap<String, usize>,
    pub rejections: usize,
}

pub fn corpus_stats(snapshot: &CorpusSnapshot) -> StatsReport {
    let mut recipes_per_category: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for r in &snapshot.recipes {
        *recipes_per_category.entry(r.category).or_default() += 1;
    }
    let mut invoices_per_source = BTreeMap::new();
    for inv in &snapshot.invoices {
        *invoices_per_source.entry(inv.source.clone()).or_default() += 1;
    }
    StatsReport {
        recipes: snapshot.recipes.len(),
        ingredient_lines: snapshot.recipes.iter().map(|r| r.lines.len()).sum(),
        distinct_ingredients: snapshot.distinct_ingredients().len(),
        nutrition_entries: snapshot.nutrition.len(),
        invoices: snapshot.invoices.len(),
        recipes_per_category,
        invoices_per_source,
        rejections: snapshot.rejections.len(),
    }
}

/// Writes `file,line,kind,record_id,field,message`.
pub fn write_rejections_csv<W: Write>(rejections: &[Rejection], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["file", "line", "kind", "record_id", "field", "message"])?;
    for r in rejections {
        w.write_record([
            r.file.to_string(),
            r.line.to_string(),
            format!("{:?}", r.kind),
            r.record_id.clone().unwrap_or_default(),
            r.field.clone(),
            r.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const RECIPES: &str = "\
id,name,category,servings,year_tags,line_index,raw_text,quantity,unit,group
r1,Rice Bowl,Vegetarian,4,2023-24|2024-25,0,White rice,2,cup,rice
r1,Rice Bowl,Vegetarian,4,2023-24|2024-25,1,Black beans,1,can,beans
r2,Salmon Patties,Seafood,4,2024-25,0,Canned salmon,2,can,fish
r2,Salmon Patties,Seafood,4,2024-25,1,Salt,,,
";

    pub(crate) fn nutrition_csv(n: usize) -> String {
        let mut s = String::from("mfd_id,description");
        for name in NUTRIENTS {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for i in 0..n {
            s.push_str(&format!("m{i},Food {i}"));
            for j in 0..16 {
                s.push_str(&format!(",{}", if j == 5 { 0.5 } else { (i + j) as f64 }));
            }
            s.push('\n');
        }
        s
    }

    const INVOICES: &str = "\
source,date,product_text,unit_price,was_free,food_category
Food Bank,2024-09-01,Rice white 25lb,0.55,false,PastaRice
Food Bank,2024-10-01,Rice white 25lb,0,true,PastaRice
Wholesaler,2024-09-15,Salmon canned,,true,Seafood
Wholesaler,2023-03-02,Black beans,0.91,false,Legumes
Restaurant Store,2024-11-20,Black beans,0.99,false,Legumes
";

    #[test]
    fn loads_valid_files() {
        let snap = CorpusSnapshot::from_csv_strs(RECIPES, &nutrition_csv(10), INVOICES, None).unwrap();
        assert_eq!(snap.recipes.len(), 2);
        assert_eq!(snap.nutrition.len(), 10);
        assert_eq!(snap.invoices.len(), 5);
        assert!(snap.rejections.is_empty(), "{:?}", snap.rejections);
        snap.ensure_clean().unwrap();
        let r2 = snap.recipe("r2").unwrap();
        assert_eq!(r2.lines[1].unit, Unit::Unknown);
        assert_eq!(r2.lines[1].quantity, 0.0);
        assert_eq!(snap.recipe("r1").unwrap().lines[0].group.as_deref(), Some("rice"));
        assert!(snap.recipe("r1").unwrap().year_tags.contains("2023-24"));
    }

    #[test]
    fn zero_servings_is_a_schema_violation() {
        let recipes = "id,name,category,servings,year_tags,line_index,raw_text,quantity,unit\n\
                       r1,Soup,Vegetarian,0,2024-25,0,Water,1,cup\n";
        let snap = CorpusSnapshot::from_csv_strs(recipes, &nutrition_csv(1), INVOICES, None).unwrap();
        assert!(snap.recipes.is_empty());
        match snap.ensure_clean().unwrap_err() {
            CorpusError::SchemaViolation { field, line, .. } => {
                assert_eq!(field, "servings");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_mfd_id_is_rejected() {
        let mut nutrition = nutrition_csv(2);
        nutrition.push_str(nutrition_csv(1).lines().nth(1).unwrap());
        nutrition.push('\n');
        let snap = CorpusSnapshot::from_csv_strs(RECIPES, &nutrition, INVOICES, None).unwrap();
        assert_eq!(snap.nutrition.len(), 2);
        assert!(matches!(snap.ensure_clean().unwrap_err(), CorpusError::DuplicateId { ref id, line: 4, .. } if id == "m0"));
    }

    #[test]
    fn invalid_rows_reject_the_whole_recipe() {
        let recipes = "id,name,category,servings,year_tags,line_index,raw_text,quantity,unit\n\
                       r1,Soup,Vegetarian,2,,0,Water,1,cup\n\
                       r1,Soup,Vegetarian,2,,1,Onion,2,\n\
                       r2,Stew,Goat,2,,0,Goat,1,pound\n\
                       r3,Chili,Beef,2,,0,Ground beef,1,pound\n\
                       r3,Chili,Beef,2,,0,Beans,1,can\n\
                       r4,Tacos,Beef,3,,0,Tortillas,8,each\n";
        let snap = CorpusSnapshot::from_csv_strs(recipes, &nutrition_csv(1), INVOICES, None).unwrap();
        assert_eq!(snap.recipes.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["r4"]);
        assert_eq!(snap.recipe_ids_seen, 4);
        let rejected = snap.rejected_recipe_ids();
        assert_eq!(rejected.into_iter().collect::<Vec<_>>(), ["r1", "r2", "r3"]);
        let fields: Vec<&str> = snap.rejections.iter().map(|r| r.field.as_str()).collect();
        assert_eq!(fields, ["unit", "category", "line_index"]);
    }

    #[test]
    fn free_rows_need_zero_price() {
        let invoices = "source,date,product_text,unit_price,was_free,food_category\n\
                        A,2024-01-01,Eggs,1.5,true,Eggs\n\
                        A,2024-02-30,Eggs,1.5,false,Eggs\n\
                        A,2024-02-01,Eggs,1.5,false,Candy\n";
        let snap = CorpusSnapshot::from_csv_strs(RECIPES, &nutrition_csv(1), invoices, None).unwrap();
        assert!(snap.invoices.is_empty());
        let fields: Vec<&str> = snap.rejections.iter().map(|r| r.field.as_str()).collect();
        assert_eq!(fields, ["unit_price", "date", "food_category"]);
    }

    #[test]
    fn missing_column_aborts() {
        let err = CorpusSnapshot::from_csv_strs("id,name\nr1,x\n", &nutrition_csv(1), INVOICES, None).unwrap_err();
        assert!(matches!(err, CorpusError::SchemaViolation { ref field, line: 1, .. } if field == "category"));
    }

    #[test]
    fn conversions_override_defaults() {
        let conv = "unit,ingredient_group,grams_per_unit\ncup,rice,185\ncan,,400\nunknown,spice,1\nunknown,,3\n";
        let snap = CorpusSnapshot::from_csv_strs(RECIPES, &nutrition_csv(1), INVOICES, Some(conv)).unwrap();
        assert_eq!(snap.conversions.grams_per_unit(Unit::Cup, Some("rice")), Some(185.0));
        assert_eq!(snap.conversions.grams_per_unit(Unit::Can, Some("fish")), Some(400.0));
        assert_eq!(snap.rejections.len(), 1);
        assert_eq!(snap.rejections[0].field, "ingredient_group");
    }

    #[test]
    fn stats_count_lines_and_categories() {
        let recipes = "id,name,category,servings,year_tags,line_index,raw_text,quantity,unit\n\
                       a,A,Beef,1,,0,x,1,g\na,A,Beef,1,,1,y,1,g\n\
                       b,B,Beef,1,,0,x,1,g\nb,B,Beef,1,,1,z,1,g\n\
                       c,C,Seafood,1,,0,x,1,g\nc,C,Seafood,1,,1,y,1,g\n";
        let snap = CorpusSnapshot::from_csv_strs(recipes, &nutrition_csv(0), INVOICES, None).unwrap();
        let stats = corpus_stats(&snap);
        assert_eq!(stats.recipes, 3);
        assert_eq!(stats.ingredient_lines, 6);
        assert_eq!(stats.distinct_ingredients, 3);
        assert_eq!(stats.recipes_per_category[&Category::Beef], 2);
        assert_eq!(stats.recipes_per_category[&Category::Poultry], 0);
        assert_eq!(stats.invoices_per_source["Wholesaler"], 2);
    }

    #[test]
    fn empty_corpus_counts_zero() {
        let snap = CorpusSnapshot::from_csv_strs("", "", "", None).unwrap();
        let stats = corpus_stats(&snap);
        assert_eq!(stats.recipes, 0);
        assert_eq!(stats.ingredient_lines, 0);
        assert_eq!(stats.invoices, 0);
        assert!(stats.recipes_per_category.values().all(|&n| n == 0));
    }

    #[test]
    fn json_recipes_match_csv() {
        let json = r#"[
          {"id":"r1","name":"Rice Bowl","category":"Vegetarian","servings":4,"year_tags":["2023-24","2024-25"],
           "line_index":0,"raw_text":"White rice","quantity":2,"unit":"cup","group":"rice"},
          {"id":"r1","name":"Rice Bowl","category":"Vegetarian","servings":4,"year_tags":["2023-24","2024-25"],
           "line_index":1,"raw_text":"Black beans","quantity":1,"unit":"can","group":"beans"}
        ]"#;
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, body: &str| {
            let p = dir.path().join(name);
            std::fs::write(&p, body).unwrap();
            p
        };
        let paths = CorpusPaths {
            recipes: write("recipes.json", json),
            nutrition: write("nutrition.csv", &nutrition_csv(1)),
            invoices: write("invoices.csv", INVOICES),
            conversions: None,
        };
        let from_json = load_corpus(&paths).unwrap();
        let from_csv = CorpusSnapshot::from_csv_strs(RECIPES, &nutrition_csv(1), INVOICES, None).unwrap();
        assert_eq!(from_json.recipes[0], from_csv.recipes[0]);
    }

    #[test]
    fn unreadable_file() {
        let paths = CorpusPaths {
            recipes: "/nonexistent/recipes.csv".into(),
            nutrition: "/nonexistent/n.csv".into(),
            invoices: "/nonexistent/i.csv".into(),
            conversions: None,
        };
        assert!(matches!(load_corpus(&paths), Err(CorpusError::FileUnreadable { .. })));
    }
}
