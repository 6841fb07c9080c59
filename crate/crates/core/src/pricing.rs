//! Invoice-driven ingredient cost models and recipe cost prediction.
//!
//! An ingredient's predicted cost is
//! `buy_probability × mean_unit_price × (1 + factor_percent / 100)`, where the
//! buy probability is the share of orders that were paid rather than donated
//! and the factor is the expected price change for the item's food category.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{InvoiceRecord, Recipe};
use crate::tabular::Table;
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InflationCategory {
    Beef,
    Poultry,
    Seafood,
    Eggs,
    Legumes,
    Dairy,
    PastaRice,
    Fruit,
    Vegetables,
    Baking,
    Spices,
    Soups,
}

impl InflationCategory {
    pub const ALL: [InflationCategory; 12] = [
        InflationCategory::Beef,
        InflationCategory::Poultry,
        InflationCategory::Seafood,
        InflationCategory::Eggs,
        InflationCategory::Legumes,
        InflationCategory::Dairy,
        InflationCategory::PastaRice,
        InflationCategory::Fruit,
        InflationCategory::Vegetables,
        InflationCategory::Baking,
        InflationCategory::Spices,
        InflationCategory::Soups,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InflationCategory::Beef => "Beef",
            InflationCategory::Poultry => "Poultry",
            InflationCategory::Seafood => "Seafood",
            InflationCategory::Eggs => "Eggs",
            InflationCategory::Legumes => "Legumes",
            InflationCategory::Dairy => "Dairy",
            InflationCategory::PastaRice => "PastaRice",
            InflationCategory::Fruit => "Fruit",
            InflationCategory::Vegetables => "Vegetables",
            InflationCategory::Baking => "Baking",
            InflationCategory::Spices => "Spices",
            InflationCategory::Soups => "Soups",
        }
    }

    /// Default expected year-over-year price change, in percent.
    pub fn default_factor_percent(self) -> f64 {
        match self {
            InflationCategory::Beef => 6.8,
            InflationCategory::Poultry => 2.3,
            InflationCategory::Seafood => 3.0,
            InflationCategory::Eggs => 40.0,
            InflationCategory::Legumes => 2.7,
            InflationCategory::Dairy => 1.7,
            InflationCategory::PastaRice => -0.6,
            InflationCategory::Fruit => 1.6,
            InflationCategory::Vegetables => -2.5,
            InflationCategory::Baking => 1.5,
            InflationCategory::Spices => 1.6,
            InflationCategory::Soups => 1.6,
        }
    }
}

impl fmt::Display for InflationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InflationCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        InflationCategory::ALL
            .into_iter()
            .find(|c| c.as_str().to_lowercase() == key)
            .ok_or_else(|| format!("unknown food category {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("no invoice rows for ingredient key {0:?}")]
    NoInvoices(String),
    #[error("recipe {recipe_id} line {line_index}: {reason}")]
    MissingPriceModel { recipe_id: String, line_index: u32, reason: String },
    #[error("cost reports cover different recipes: {0}")]
    CoverageMismatch(String),
    #[error("{file} line {line}: {message}")]
    Parse { file: &'static str, line: usize, message: String },
    #[error("cannot read {0}")]
    Io(String),
}

/// Per-category inflation factors in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationTable {
    factors: BTreeMap<InflationCategory, f64>,
}

impl Default for InflationTable {
    fn default() -> Self {
        InflationTable {
            factors: InflationCategory::ALL.iter().map(|c| (*c, c.default_factor_percent())).collect(),
        }
    }
}

impl InflationTable {
    /// Every category at 0 %, i.e. historical prices carried forward.
    pub fn zero() -> Self {
        InflationTable { factors: InflationCategory::ALL.iter().map(|c| (*c, 0.0)).collect() }
    }

    pub fn factor_percent(&self, category: InflationCategory) -> f64 {
        self.factors.get(&category).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, category: InflationCategory, factor_percent: f64) {
        self.factors.insert(category, factor_percent);
    }

    pub fn iter(&self) -> impl Iterator<Item = (InflationCategory, f64)> + '_ {
        self.factors.iter().map(|(c, f)| (*c, *f))
    }

    /// Reads `category,factor_percent` rows on top of the defaults.
    pub fn from_csv<R: Read>(mut input: R) -> Result<Self, PricingError> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(|e| PricingError::Io(e.to_string()))?;
        let table = Table::from_csv_str(&text).map_err(|e| parse_err("inflation.csv", e))?;
        table
            .require(&["category", "factor_percent"])
            .map_err(|e| parse_err("inflation.csv", e))?;
        let mut out = InflationTable::default();
        for row in &table.rows {
            let bad = |message: String| PricingError::Parse { file: "inflation.csv", line: row.line, message };
            let category: InflationCategory = table.get(row, "category").parse().map_err(bad)?;
            let raw = table.get(row, "factor_percent");
            let factor: f64 = raw
                .parse()
                .ok()
                .filter(|f: &f64| f.is_finite())
                .ok_or_else(|| bad(format!("invalid factor_percent {raw:?}")))?;
            out.set(category, factor);
        }
        Ok(out)
    }

    /// Writes every category in enum order with shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["category", "factor_percent"])?;
        for (c, f) in self.iter() {
            w.write_record([c.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_err(file: &'static str, e: crate::tabular::TableError) -> PricingError {
    use crate::tabular::TableError;
    match e {
        TableError::Io(m) => PricingError::Io(m),
        TableError::Parse { line, message } => PricingError::Parse { file, line, message },
        TableError::MissingColumn(c) => PricingError::Parse { file, line: 1, message: format!("missing column {c}") },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    pub ingredient_key: String,
    pub buy_probability: f64,
    pub mean_unit_price: f64,
    pub category: InflationCategory,
    pub orders: usize,
    pub purchases: usize,
}

impl PriceModel {
    pub fn predicted_cost(&self, inflation: &InflationTable) -> f64 {
        predict_ingredient_cost(self.buy_probability, self.mean_unit_price, inflation.factor_percent(self.category))
    }
}

/// `buy_probability × mean_unit_price × (1 + factor_percent / 100)`.
pub fn predict_ingredient_cost(buy_probability: f64, mean_unit_price: f64, factor_percent: f64) -> f64 {
    buy_probability * mean_unit_price * (1.0 + factor_percent / 100.0)
}

/// Fits one model from every invoice row of an ingredient key.
pub fn fit_price_model(
    key: &str,
    rows: &[&InvoiceRecord],
    category: InflationCategory,
) -> Result<PriceModel, PricingError> {
    if rows.is_empty() {
        return Err(PricingError::NoInvoices(key.to_string()));
    }
    let paid: Vec<f64> = rows.iter().filter(|r| !r.was_free).map(|r| r.unit_price).collect();
    let mean_unit_price = if paid.is_empty() { 0.0 } else { paid.iter().sum::<f64>() / paid.len() as f64 };
    Ok(PriceModel {
        ingredient_key: key.to_string(),
        buy_probability: paid.len() as f64 / rows.len() as f64,
        mean_unit_price,
        category,
        orders: rows.len(),
        purchases: paid.len(),
    })
}

/// Optional inclusive date window applied before fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateFilter {
    pub since: Option<NaiveDate>,
    pub until: Option<NaiveDate>,
}

impl DateFilter {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.since.is_none_or(|s| date >= s) && self.until.is_none_or(|u| date <= u)
    }
}

/// Price models keyed by normalized product text.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PriceBook {
    pub models: BTreeMap<String, PriceModel>,
}

impl PriceBook {
    /// Groups invoices by key and fits one model per key. A key's category is
    /// the most frequent `food_category` among its rows (earliest enum value
    /// on a tie).
    pub fn fit(invoices: &[InvoiceRecord], filter: DateFilter) -> PriceBook {
        let mut groups: BTreeMap<String, Vec<&InvoiceRecord>> = BTreeMap::new();
        for inv in invoices.iter().filter(|i| filter.contains(i.date)) {
            groups.entry(inv.key()).or_default().push(inv);
        }
        let models = groups
            .into_iter()
            .map(|(key, rows)| {
                let mut counts: BTreeMap<InflationCategory, usize> = BTreeMap::new();
                for r in &rows {
                    *counts.entry(r.food_category).or_default() += 1;
                }
                let best = counts.values().copied().max().unwrap_or(0);
                let category = counts.iter().find(|(_, n)| **n == best).map(|(c, _)| *c).expect("non-empty group");
                let model = fit_price_model(&key, &rows, category).expect("non-empty group");
                (key, model)
            })
            .collect();
        PriceBook { models }
    }

    pub fn get(&self, key: &str) -> Option<&PriceModel> {
        self.models.get(&normalize(key))
    }
}

/// One `price_map.csv` row: how many invoice units of `ingredient_key` a
/// recipe line uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceMapEntry {
    pub ingredient_key: String,
    pub quantity: f64,
}

/// Recipe line → invoice keys. Several keys on one line are averaged with
/// equal weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceMap {
    lines: HashMap<(String, u32), Vec<PriceMapEntry>>,
}

impl PriceMap {
    pub fn insert(&mut self, recipe_id: &str, line_index: u32, ingredient_key: &str, quantity: f64) {
        self.lines
            .entry((recipe_id.to_string(), line_index))
            .or_default()
            .push(PriceMapEntry { ingredient_key: normalize(ingredient_key), quantity });
    }

    pub fn entries(&self, recipe_id: &str, line_index: u32) -> Option<&[PriceMapEntry]> {
        self.lines.get(&(recipe_id.to_string(), line_index)).map(Vec::as_slice)
    }

    /// Reads `recipe_id,line_index,ingredient_key,quantity`.
    pub fn from_csv<R: Read>(mut input: R) -> Result<Self, PricingError> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(|e| PricingError::Io(e.to_string()))?;
        let table = Table::from_csv_str(&text).map_err(|e| parse_err("price_map.csv", e))?;
        table
            .require(&["recipe_id", "line_index", "ingredient_key", "quantity"])
            .map_err(|e| parse_err("price_map.csv", e))?;
        let mut map = PriceMap::default();
        for row in &table.rows {
            let bad = |message: String| PricingError::Parse { file: "price_map.csv", line: row.line, message };
            let recipe_id = table.get(row, "recipe_id");
            let key = table.get(row, "ingredient_key");
            if recipe_id.is_empty() || key.is_empty() {
                return Err(bad("recipe_id and ingredient_key are required".into()));
            }
            let line_index: u32 = table
                .get(row, "line_index")
                .parse()
                .map_err(|_| bad(format!("invalid line_index {:?}", table.get(row, "line_index"))))?;
            let raw_q = table.get(row, "quantity");
            let quantity: f64 = raw_q
                .parse()
                .ok()
                .filter(|q: &f64| q.is_finite() && *q >= 0.0)
                .ok_or_else(|| bad(format!("invalid quantity {raw_q:?}")))?;
            map.insert(recipe_id, line_index, key, quantity);
        }
        Ok(map)
    }
}

/// Predicted cost of one recipe line: mean over its mapped keys of
/// `quantity × C_i`.
pub fn predict_line_cost(
    recipe_id: &str,
    line_index: u32,
    book: &PriceBook,
    map: &PriceMap,
    inflation: &InflationTable,
) -> Result<f64, PricingError> {
    let missing = |reason: String| PricingError::MissingPriceModel {
        recipe_id: recipe_id.to_string(),
        line_index,
        reason,
    };
    let entries = map
        .entries(recipe_id, line_index)
        .filter(|e| !e.is_empty())
        .ok_or_else(|| missing("line has no price_map entry".into()))?;
    let mut sum = 0.0;
    for e in entries {
        let model = book
            .models
            .get(&e.ingredient_key)
            .ok_or_else(|| missing(format!("no invoices for key {:?}", e.ingredient_key)))?;
        sum += e.quantity * model.predicted_cost(inflation);
    }
    Ok(sum / entries.len() as f64)
}

/// Predicted recipe cost `R_j`: line costs summed in `line_index` order.
pub fn predict_recipe_cost(
    recipe: &Recipe,
    book: &PriceBook,
    map: &PriceMap,
    inflation: &InflationTable,
) -> Result<f64, PricingError> {
    let mut indices: Vec<u32> = recipe.lines.iter().map(|l| l.line_index).collect();
    indices.sort_unstable();
    let mut total = 0.0;
    for index in indices {
        total += predict_line_cost(&recipe.id, index, book, map, inflation)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostChange {
    pub recipe_id: String,
    pub before: f64,
    pub after: f64,
    /// `None` when the before-cost is zero and the after-cost is not.
    pub percent_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CostChangeReport {
    pub rows: Vec<CostChange>,
    pub histogram: Vec<HistogramBin>,
    /// Share of recipes with a defined, strictly negative change.
    pub negative_fraction: f64,
}

pub fn percent_change(before: f64, after: f64) -> Option<f64> {
    if before == 0.0 {
        (after == 0.0).then_some(0.0)
    } else {
        Some((after - before) / before * 100.0)
    }
}

/// Per-recipe percent change between two cost sets, with a histogram of
/// `bin_width`-percent bins aligned at multiples of the width.
pub fn cost_change_report(
    before: &BTreeMap<String, f64>,
    after: &BTreeMap<String, f64>,
    bin_width: f64,
) -> Result<CostChangeReport, PricingError> {
    if let Some(id) = before.keys().find(|k| !after.contains_key(*k)).or(after.keys().find(|k| !before.contains_key(*k))) {
        return Err(PricingError::CoverageMismatch(format!("recipe {id:?} is present in only one set")));
    }
    let rows: Vec<CostChange> = before
        .iter()
        .map(|(id, &b)| {
            let a = after[id];
            CostChange { recipe_id: id.clone(), before: b, after: a, percent_change: percent_change(b, a) }
        })
        .collect();
    let changes: Vec<f64> = rows.iter().filter_map(|r| r.percent_change).collect();
    let negative_fraction = if rows.is_empty() {
        0.0
    } else {
        changes.iter().filter(|c| **c < 0.0).count() as f64 / rows.len() as f64
    };
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for c in &changes {
        *counts.entry((c / bin_width).floor() as i64).or_default() += 1;
    }
    let histogram = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&lo), Some(&hi)) => (lo..=hi)
            .map(|b| HistogramBin {
                lower: b as f64 * bin_width,
                upper: (b + 1) as f64 * bin_width,
                count: counts.get(&b).copied().unwrap_or(0),
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(CostChangeReport { rows, histogram, negative_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, IngredientLine, Unit};

    fn invoice(price: f64, free: bool) -> InvoiceRecord {
        InvoiceRecord {
            source: "Food Bank".into(),
            date: NaiveDate::from_ymd_opt(2024, 9, 1).unwrap(),
            product_text: "Rice".into(),
            unit_price: price,
            was_free: free,
            food_category: InflationCategory::PastaRice,
        }
    }

    #[test]
    fn always_free_item() {
        let rows: Vec<_> = (0..4).map(|_| invoice(0.0, true)).collect();
        let refs: Vec<_> = rows.iter().collect();
        let m = fit_price_model("rice", &refs, InflationCategory::Seafood).unwrap();
        assert_eq!((m.buy_probability, m.mean_unit_price, m.orders, m.purchases), (0.0, 0.0, 4, 0));
    }

    #[test]
    fn three_of_four_purchased() {
        let rows = [invoice(1.0, false), invoice(0.0, true), invoice(2.0, false), invoice(3.0, false)];
        let refs: Vec<_> = rows.iter().collect();
        let m = fit_price_model("rice", &refs, InflationCategory::PastaRice).unwrap();
        assert_eq!(m.buy_probability, 0.75);
        assert_eq!(m.mean_unit_price, 2.0);
    }

    #[test]
    fn singleton_purchase() {
        let rows = [invoice(5.0, false)];
        let m = fit_price_model("rice", &[&rows[0]], InflationCategory::PastaRice).unwrap();
        assert_eq!((m.buy_probability, m.mean_unit_price), (1.0, 5.0));
    }

    #[test]
    fn no_rows_is_an_error() {
        assert_eq!(
            fit_price_model("rice", &[], InflationCategory::PastaRice),
            Err(PricingError::NoInvoices("rice".into()))
        );
    }

    #[test]
    fn ingredient_cost_cases() {
        assert_eq!(predict_ingredient_cost(0.0, 9.99, 40.0), 0.0);
        assert_eq!(predict_ingredient_cost(1.0, 1.0, 0.0), 1.0);
        assert!((predict_ingredient_cost(0.75, 2.0, 6.8) - 1.602).abs() < 1e-12);
    }

    #[test]
    fn category_names_parse_loosely() {
        assert_eq!("Pasta/Rice".parse::<InflationCategory>(), Ok(InflationCategory::PastaRice));
        assert_eq!("vegetables".parse::<InflationCategory>(), Ok(InflationCategory::Vegetables));
        assert!("Candy".parse::<InflationCategory>().is_err());
    }

    #[test]
    fn inflation_csv_overrides_defaults() {
        let t = InflationTable::from_csv("category,factor_percent\nEggs,10\n".as_bytes()).unwrap();
        assert_eq!(t.factor_percent(InflationCategory::Eggs), 10.0);
        assert_eq!(t.factor_percent(InflationCategory::Beef), 6.8);
        assert!(InflationTable::from_csv("category,factor_percent\nEggs,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn date_filter_limits_fit() {
        let mut old = invoice(10.0, false);
        old.date = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let rows = vec![old, invoice(2.0, false)];
        let all = PriceBook::fit(&rows, DateFilter::default());
        assert_eq!(all.get("RICE").unwrap().mean_unit_price, 6.0);
        let filter = DateFilter { since: NaiveDate::from_ymd_opt(2024, 1, 1), until: None };
        let recent = PriceBook::fit(&rows, filter);
        assert_eq!(recent.get("rice").unwrap().mean_unit_price, 2.0);
    }

    fn recipe(lines: &[u32]) -> Recipe {
        Recipe {
            id: "r".into(),
            name: "R".into(),
            category: Category::Beef,
            servings: 4,
            year_tags: Default::default(),
            lines: lines
                .iter()
                .map(|&i| IngredientLine {
                    line_index: i,
                    raw_text: format!("line {i}"),
                    quantity: 1.0,
                    unit: Unit::Each,
                    group: None,
                    note: None,
                })
                .collect(),
        }
    }

    fn beef_book() -> PriceBook {
        let model = PriceModel {
            ingredient_key: "beef".into(),
            buy_probability: 0.75,
            mean_unit_price: 2.0,
            category: InflationCategory::Beef,
            orders: 4,
            purchases: 3,
        };
        PriceBook { models: [("beef".to_string(), model)].into_iter().collect() }
    }

    #[test]
    fn recipe_cost_scales_line_quantity() {
        let mut map = PriceMap::default();
        map.insert("r", 0, "Beef", 2.0);
        let cost = predict_recipe_cost(&recipe(&[0]), &beef_book(), &map, &InflationTable::default()).unwrap();
        assert!((cost - 3.204).abs() < 1e-12);
    }

    #[test]
    fn multiple_keys_average() {
        let mut book = beef_book();
        book.models.insert(
            "rice".into(),
            PriceModel {
                ingredient_key: "rice".into(),
                buy_probability: 1.0,
                mean_unit_price: 1.0,
                category: InflationCategory::PastaRice,
                orders: 1,
                purchases: 1,
            },
        );
        let mut map = PriceMap::default();
        map.insert("r", 0, "beef", 1.0);
        map.insert("r", 0, "rice", 3.0);
        let cost = predict_line_cost("r", 0, &book, &map, &InflationTable::zero()).unwrap();
        assert_eq!(cost, (1.5 + 3.0) / 2.0);
    }

    #[test]
    fn unmapped_line_names_the_line() {
        let mut map = PriceMap::default();
        map.insert("r", 0, "beef", 1.0);
        let err = predict_recipe_cost(&recipe(&[0, 3]), &beef_book(), &map, &InflationTable::default()).unwrap_err();
        assert!(matches!(err, PricingError::MissingPriceModel { line_index: 3, .. }));
        map.insert("r", 3, "tofu", 1.0);
        let err = predict_recipe_cost(&recipe(&[0, 3]), &beef_book(), &map, &InflationTable::default()).unwrap_err();
        assert!(err.to_string().contains("tofu"));
    }

    #[test]
    fn donated_recipe_costs_nothing() {
        let mut book = beef_book();
        book.models.get_mut("beef").unwrap().buy_probability = 0.0;
        let mut map = PriceMap::default();
        map.insert("r", 0, "beef", 5.0);
        map.insert("r", 1, "beef", 1.0);
        assert_eq!(predict_recipe_cost(&recipe(&[0, 1]), &book, &map, &InflationTable::default()).unwrap(), 0.0);
    }

    #[test]
    fn price_map_csv() {
        let csv = "recipe_id,line_index,ingredient_key,quantity\nr,0,Ground Beef,1.5\nr,0,beef,2\n";
        let map = PriceMap::from_csv(csv.as_bytes()).unwrap();
        let e = map.entries("r", 0).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].ingredient_key, "ground beef");
        assert!(PriceMap::from_csv("recipe_id,line_index,ingredient_key,quantity\nr,x,beef,1\n".as_bytes()).is_err());
    }

    fn costs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn cost_change_cases() {
        let same = costs(&[("a", 1.0), ("b", 2.0)]);
        let r = cost_change_report(&same, &same, 5.0).unwrap();
        assert!(r.rows.iter().all(|row| row.percent_change == Some(0.0)));
        assert_eq!(r.negative_fraction, 0.0);

        let r = cost_change_report(&costs(&[("a", 1.0)]), &costs(&[("a", 1.1)]), 5.0).unwrap();
        assert!((r.rows[0].percent_change.unwrap() - 10.0).abs() < 1e-9);

        let r = cost_change_report(&BTreeMap::new(), &BTreeMap::new(), 5.0).unwrap();
        assert!(r.rows.is_empty() && r.histogram.is_empty());

        assert!(matches!(
            cost_change_report(&costs(&[("a", 1.0)]), &costs(&[("b", 1.0)]), 5.0),
            Err(PricingError::CoverageMismatch(_))
        ));
    }

    #[test]
    fn histogram_bins_and_negative_share() {
        let before = costs(&[("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 0.0)]);
        let after = costs(&[("a", 0.97), ("b", 1.02), ("c", 1.12), ("d", 1.0)]);
        let r = cost_change_report(&before, &after, 5.0).unwrap();
        assert_eq!(r.rows[3].percent_change, None);
        assert_eq!(r.negative_fraction, 0.25);
        let bins: Vec<(f64, usize)> = r.histogram.iter().map(|b| (b.lower, b.count)).collect();
        assert_eq!(bins, [(-5.0, 1), (0.0, 1), (5.0, 0), (10.0, 1)]);
    }
}
