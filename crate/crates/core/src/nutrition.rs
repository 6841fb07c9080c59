//! Household-unit to gram conversion and per-serving nutrient aggregation.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, CorpusSnapshot, IngredientLine, Recipe, Unit};
use crate::embed::MatchRecord;
use crate::text::normalize;

/// Column names of the nutrient panel, in file order.
pub const NUTRIENTS: [&str; 16] = [
    "calories",
    "protein",
    "fiber",
    "carbohydrates",
    "fat",
    "saturated_fat",
    "calcium",
    "iron",
    "magnesium",
    "zinc",
    "cholesterol",
    "sodium",
    "vitamin_c",
    "folate",
    "vitamin_b6",
    "vitamin_b12",
];

/// Amounts of the 16 tracked nutrients.
///
/// Units: calories in kcal; protein through saturated_fat in g; calcium
/// through vitamin_c in mg; folate, vitamin_b6 and vitamin_b12 in µg.
/// Nutrition entries store these per 100 g of food, recipe profiles per
/// serving.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NutrientProfile {
    pub calories: f64,
    pub protein: f64,
    pub fiber: f64,
    pub carbohydrates: f64,
    pub fat: f64,
    pub saturated_fat: f64,
    pub calcium: f64,
    pub iron: f64,
    pub magnesium: f64,
    pub zinc: f64,
    pub cholesterol: f64,
    pub sodium: f64,
    pub vitamin_c: f64,
    pub folate: f64,
    pub vitamin_b6: f64,
    pub vitamin_b12: f64,
}

impl NutrientProfile {
    pub fn to_array(&self) -> [f64; 16] {
        [
            self.calories,
            self.protein,
            self.fiber,
            self.carbohydrates,
            self.fat,
            self.saturated_fat,
            self.calcium,
            self.iron,
            self.magnesium,
            self.zinc,
            self.cholesterol,
            self.sodium,
            self.vitamin_c,
            self.folate,
            self.vitamin_b6,
            self.vitamin_b12,
        ]
    }

    pub fn from_array(v: [f64; 16]) -> Self {
        NutrientProfile {
            calories: v[0],
            protein: v[1],
            fiber: v[2],
            carbohydrates: v[3],
            fat: v[4],
            saturated_fat: v[5],
            calcium: v[6],
            iron: v[7],
            magnesium: v[8],
            zinc: v[9],
            cholesterol: v[10],
            sodium: v[11],
            vitamin_c: v[12],
            folate: v[13],
            vitamin_b6: v[14],
            vitamin_b12: v[15],
        }
    }

    /// Looks up a nutrient by its column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        NUTRIENTS.iter().position(|n| *n == name).map(|i| self.to_array()[i])
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_array(self.to_array().map(f))
    }

    /// `self += other * factor`, nutrient by nutrient.
    pub fn add_scaled(&mut self, other: &NutrientProfile, factor: f64) {
        let mut acc = self.to_array();
        for (a, b) in acc.iter_mut().zip(other.to_array()) {
            *a += b * factor;
        }
        *self = Self::from_array(acc);
    }

    pub fn divided_by(&self, divisor: f64) -> Self {
        self.map(|v| v / divisor)
    }

    /// Returns the first violated invariant, if any.
    pub fn check(&self) -> Result<(), String> {
        for (name, value) in NUTRIENTS.iter().zip(self.to_array()) {
            if !value.is_finite() || value < 0.0 {
                return Err(format!("{name} must be a non-negative number (got {value})"));
            }
        }
        if self.saturated_fat > self.fat {
            return Err(format!(
                "saturated_fat {} exceeds fat {}",
                self.saturated_fat, self.fat
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NutritionError {
    #[error("line {line_index} of recipe {recipe_id} ({text:?}) has no usable gram conversion for unit {unit}")]
    UnknownUnit { recipe_id: String, line_index: u32, text: String, unit: Unit },
    #[error("line {line_index} of recipe {recipe_id} ({text:?}) has no nutrition match")]
    MissingMatch { recipe_id: String, line_index: u32, text: String },
    #[error("recipe {recipe_id} is matched to unknown nutrition entry {mfd_id}")]
    UnknownEntry { recipe_id: String, mfd_id: String },
    #[error("invalid conversion factor for {unit}/{group}: {value}")]
    InvalidFactor { unit: Unit, group: String, value: f64 },
}

/// Grams per household unit, optionally specialised by ingredient group.
///
/// Mass and volume units carry built-in defaults (volume assumes water
/// density). `can` and `each` have no universal default and must be given
/// per group. Rows for the `unknown` unit give the total weight assumed for
/// an unmeasured line of that group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionTable {
    defaults: BTreeMap<Unit, f64>,
    by_group: BTreeMap<(Unit, String), f64>,
}

impl Default for ConversionTable {
    fn default() -> Self {
        let defaults = [
            (Unit::Gram, 1.0),
            (Unit::Kilogram, 1000.0),
            (Unit::Ounce, 28.349523125),
            (Unit::Pound, 453.59237),
            (Unit::Cup, 236.5882365),
            (Unit::Tablespoon, 14.78676478125),
            (Unit::Teaspoon, 4.92892159375),
        ]
        .into_iter()
        .collect();
        ConversionTable { defaults, by_group: BTreeMap::new() }
    }
}

impl ConversionTable {
    /// Adds or replaces an entry. An empty or `*` group sets the unit default.
    pub fn insert(&mut self, unit: Unit, group: &str, grams_per_unit: f64) -> Result<(), NutritionError> {
        let group = normalize(group);
        if !(grams_per_unit.is_finite() && grams_per_unit > 0.0) {
            return Err(NutritionError::InvalidFactor { unit, group, value: grams_per_unit });
        }
        if group.is_empty() {
            self.defaults.insert(unit, grams_per_unit);
        } else {
            self.by_group.insert((unit, group), grams_per_unit);
        }
        Ok(())
    }

    /// Grams per unit for `(unit, group)`, falling back to the unit default.
    pub fn grams_per_unit(&self, unit: Unit, group: Option<&str>) -> Option<f64> {
        group
            .map(normalize)
            .filter(|g| !g.is_empty())
            .and_then(|g| self.by_group.get(&(unit, g)).copied())
            .or_else(|| self.defaults.get(&unit).copied())
    }

    pub fn len(&self) -> usize {
        self.defaults.len() + self.by_group.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Weight in grams of one ingredient line.
///
/// Measured lines convert as `quantity × grams_per_unit`. Unmeasured lines
/// (`unit = unknown`) resolve only through an explicit `unknown` row for the
/// line's group.
pub fn line_grams(line: &IngredientLine, group: Option<&str>, table: &ConversionTable) -> Option<f64> {
    let per_unit = table.grams_per_unit(line.unit, group)?;
    if line.unit == Unit::Unknown {
        Some(per_unit)
    } else {
        Some(line.quantity * per_unit)
    }
}

/// Unscaled nutrient totals for a whole recipe (all servings).
///
/// Lines are summed in ascending `line_index` order regardless of the order
/// they are stored in, so the result is bit-identical under reordering.
pub fn recipe_totals(
    recipe: &Recipe,
    matches: &HashMap<String, MatchRecord>,
    snapshot: &CorpusSnapshot,
    table: &ConversionTable,
) -> Result<NutrientProfile, NutritionError> {
    let mut lines: Vec<&IngredientLine> = recipe.lines.iter().collect();
    lines.sort_by_key(|l| l.line_index);
    let mut total = NutrientProfile::default();
    for line in lines {
        let key = normalize(&line.raw_text);
        let record = matches.get(&key).ok_or_else(|| NutritionError::MissingMatch {
            recipe_id: recipe.id.clone(),
            line_index: line.line_index,
            text: line.raw_text.clone(),
        })?;
        let entry = snapshot.nutrition_entry(&record.mfd_id).ok_or_else(|| NutritionError::UnknownEntry {
            recipe_id: recipe.id.clone(),
            mfd_id: record.mfd_id.clone(),
        })?;
        let grams = line_grams(line, line.group.as_deref(), table).ok_or_else(|| NutritionError::UnknownUnit {
            recipe_id: recipe.id.clone(),
            line_index: line.line_index,
            text: line.raw_text.clone(),
            unit: line.unit,
        })?;
        total.add_scaled(&entry.per_100g, grams / 100.0);
    }
    Ok(total)
}

/// Per-serving nutrient profile: recipe totals divided once by `servings`.
pub fn recipe_profile(
    recipe: &Recipe,
    matches: &HashMap<String, MatchRecord>,
    snapshot: &CorpusSnapshot,
    table: &ConversionTable,
) -> Result<NutrientProfile, NutritionError> {
    let totals = recipe_totals(recipe, matches, snapshot, table)?;
    Ok(totals.divided_by(f64::from(recipe.servings)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub recipe_id: String,
    pub category: Category,
    pub profile: NutrientProfile,
}

/// Five-number summary of one nutrient within one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: Category,
    pub nutrient: &'static str,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NutritionReport {
    pub rows: Vec<ProfileRow>,
    pub summaries: Vec<CategorySummary>,
}

/// Nutrients summarised per category in the report (box-plot data).
pub const SUMMARY_NUTRIENTS: [&str; 3] = ["carbohydrates", "cholesterol", "sodium"];

/// Quantile by linear interpolation between closest ranks, `h = (n-1)·p`.
/// `sorted` must be non-empty and ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Builds the per-recipe table (in snapshot order) and per-category summaries
/// of carbohydrates, cholesterol and sodium.
pub fn profile_report(snapshot: &CorpusSnapshot, profiles: &BTreeMap<String, NutrientProfile>) -> NutritionReport {
    let rows: Vec<ProfileRow> = snapshot
        .recipes
        .iter()
        .filter_map(|r| {
            profiles.get(&r.id).map(|p| ProfileRow { recipe_id: r.id.clone(), category: r.category, profile: *p })
        })
        .collect();
    let mut summaries = Vec::new();
    for category in Category::ALL {
        for nutrient in SUMMARY_NUTRIENTS {
            let mut values: Vec<f64> = rows
                .iter()
                .filter(|r| r.category == category)
                .filter_map(|r| r.profile.get(nutrient))
                .collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            summaries.push(CategorySummary {
                category,
                nutrient,
                count: values.len(),
                min: values[0],
                q1: quantile(&values, 0.25),
                median: quantile(&values, 0.5),
                q3: quantile(&values, 0.75),
                max: values[values.len() - 1],
            });
        }
    }
    NutritionReport { rows, summaries }
}

/// Writes `recipe_id,category,<16 nutrients>`.
pub fn write_report_csv<W: Write>(report: &NutritionReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["recipe_id", "category"];
    header.extend(NUTRIENTS);
    w.write_record(&header)?;
    for row in &report.rows {
        let mut record = vec![row.recipe_id.clone(), row.category.to_string()];
        record.extend(row.profile.to_array().iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `category,nutrient,count,min,q1,median,q3,max`.
pub fn write_summary_csv<W: Write>(report: &NutritionReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["category", "nutrient", "count", "min", "q1", "median", "q3", "max"])?;
    for s in &report.summaries {
        w.write_record([
            s.category.to_string(),
            s.nutrient.to_string(),
            s.count.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
