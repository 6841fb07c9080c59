#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use menuplan::nutrition::NUTRIENTS;
use menuplan::planner::{PlanBounds, PlanItem, PlanProblem};
use menuplan::Category;
use rand::Rng;
use tempfile::TempDir;

pub const FIXTURE_FILES: [&str; 7] =
    ["recipes.csv", "nutrition.csv", "invoices.csv", "conversions.csv", "overrides.csv", "price_map.csv", "pipeline.toml"];

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small")
}

/// Copies the eight-recipe fixture into a fresh directory so outputs land there.
pub fn small_fixture() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for f in FIXTURE_FILES {
        fs::copy(fixture_dir().join(f), dir.path().join(f)).unwrap();
    }
    let config = dir.path().join("pipeline.toml");
    (dir, config)
}

pub fn rewrite(path: &Path, edit: impl FnOnce(String) -> String) {
    let text = fs::read_to_string(path).unwrap();
    fs::write(path, edit(text)).unwrap();
}

/// Random plan item with costs on a cent grid so that exact ties occur.
pub fn random_item<R: Rng>(rng: &mut R, id: usize, category: &str) -> PlanItem {
    PlanItem {
        recipe_id: format!("r{id:03}"),
        cost: f64::from(rng.gen_range(100..1200u32)) / 100.0,
        protein: rng.gen_range(5.0..35.0),
        calcium: rng.gen_range(50.0..900.0),
        fat: rng.gen_range(2.0..45.0),
        category: category.to_string(),
    }
}

pub fn category_names() -> Vec<String> {
    Category::ALL.iter().map(|c| c.to_string()).collect()
}

/// Random instance with every category represented at least `m / 4 + 1`
/// times so the structural checks pass and the nutrient bounds decide.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, m: usize) -> PlanProblem {
    let cats = category_names();
    let per = m / cats.len() + 1;
    let items: Vec<PlanItem> = (0..n)
        .map(|i| {
            let c = if i < per * cats.len() { i % cats.len() } else { rng.gen_range(0..cats.len()) };
            random_item(rng, i, &cats[c])
        })
        .collect();
    let bounds = PlanBounds {
        p_min: rng.gen_range(10.0..22.0),
        c_min: rng.gen_range(200.0..520.0),
        f_max: rng.gen_range(18.0..35.0),
    };
    PlanProblem::new(items, m, bounds).unwrap()
}

/// Writes a synthetic corpus where each recipe has one distinctive main
/// ingredient (described verbatim in the nutrition file, so it matches
/// automatically) and one shared pantry ingredient.
pub fn synthetic_corpus<R: Rng>(dir: &Path, per_category: [usize; 4], rng: &mut R) -> PathBuf {
    let mut recipes = String::from("id,name,category,servings,year_tags,line_index,raw_text,quantity,unit,group\n");
    let mut nutrition = format!("mfd_id,description,{}\n", NUTRIENTS.join(","));
    let mut price_map = String::from("recipe_id,line_index,ingredient_key,quantity\n");
    let mut invoices = String::from("source,date,product_text,unit_price,was_free,food_category\n");
    let staples = [("Beef", "beef trim"), ("Poultry", "chicken quarters"), ("Seafood", "pollock fillet"), ("Vegetarian", "pinto beans")];
    let invoice_category = ["Beef", "Poultry", "Seafood", "Legumes"];
    let words = ["tangy", "smoky", "herbed", "golden", "spicy", "savory", "zesty", "hearty", "crispy", "mild"];

    let mut id = 0;
    for (c, count) in per_category.iter().enumerate() {
        let (category, staple) = staples[c];
        for _ in 0..*count {
            id += 1;
            let rid = format!("s{id:03}");
            let main = format!("{} {} {} {id}", words[id % words.len()], category.to_lowercase(), words[(id / 3) % words.len()]);
            let name = format!("Synthetic {category} Dish {id}");
            let year = if id % 2 == 0 { "2023-24" } else { "2024-25" };
            let grams: f64 = 400.0;
            writeln!(recipes, "{rid},{name},{category},4,{year},0,{main},{grams},g,").unwrap();
            writeln!(recipes, "{rid},{name},{category},4,{year},1,Vegetable oil,1,tbsp,").unwrap();

            let mut values = [0.0; 16];
            values[0] = rng.gen_range(100.0..400.0);
            values[1] = rng.gen_range(8.0..35.0);
            values[4] = rng.gen_range(3.0..40.0);
            values[5] = values[4] * 0.3;
            values[6] = rng.gen_range(150.0..900.0);
            values[11] = rng.gen_range(50.0..800.0);
            let v: Vec<String> = values.iter().map(|x| format!("{x:.4}")).collect();
            writeln!(nutrition, "m{id:03},{main},{}", v.join(",")).unwrap();

            writeln!(price_map, "{rid},0,{staple},{:.2}", rng.gen_range(0.5..3.5)).unwrap();
            writeln!(price_map, "{rid},1,vegetable oil,0.1").unwrap();
        }
        for (k, source) in ["Food Bank", "Wholesaler", "Restaurant Depot"].iter().enumerate() {
            let free = k == 0;
            let price = if free { 0.0 } else { 1.5 + c as f64 + k as f64 * 0.25 };
            writeln!(invoices, "{source},2024-0{}-15,{staple},{price},{free},{}", k + 3, invoice_category[c]).unwrap();
        }
    }
    let oil: Vec<String> = (0..16).map(|j| if j == 4 { "100".into() } else if j == 0 { "884".into() } else { "0".into() }).collect();
    writeln!(nutrition, "m_oil,vegetable oil,{}", oil.join(",")).unwrap();
    invoices.push_str("Wholesaler,2024-03-01,vegetable oil,2.4,false,Baking\n");

    fs::write(dir.join("recipes.csv"), recipes).unwrap();
    fs::write(dir.join("nutrition.csv"), nutrition).unwrap();
    fs::write(dir.join("invoices.csv"), invoices).unwrap();
    fs::write(dir.join("price_map.csv"), price_map).unwrap();
    let config = dir.join("pipeline.toml");
    fs::write(
        &config,
        "recipes = \"recipes.csv\"\nnutrition = \"nutrition.csv\"\ninvoices = \"invoices.csv\"\n\
         price_map = \"price_map.csv\"\noutput_dir = \"out\"\nm = 15\n",
    )
    .unwrap();
    config
}

/// Exhaustive reference solver written independently of the library:
/// enumerates every M-subset over the integer-quantized data and keeps the
/// cheapest, breaking cost ties by the lexicographically smallest sorted id
/// list. Returns total cents and the sorted ids.
pub fn oracle_optimum(problem: &PlanProblem) -> Option<(i64, Vec<String>)> {
    struct Q {
        id: String,
        cost: i64,
        protein: i64,
        calcium: i64,
        fat: i64,
        cat: usize,
    }
    let micro = |x: f64| (x * 1e6).round() as i64;
    let cats = problem.categories();
    let mut items: Vec<Q> = problem
        .items()
        .iter()
        .map(|it| Q {
            id: it.recipe_id.clone(),
            cost: (it.cost * 100.0).round() as i64,
            protein: micro(it.protein),
            calcium: micro(it.calcium),
            fat: micro(it.fat),
            cat: cats.iter().position(|c| *c == it.category).unwrap(),
        })
        .collect();
    // Visiting items in id order makes the first cheapest subset found the
    // lexicographically smallest one.
    items.sort_by(|a, b| a.id.cmp(&b.id));
    let m = problem.m();
    let b = problem.bounds();
    let lo = m / cats.len();
    let hi = lo + 1;
    let need_p = micro(b.p_min) * m as i64;
    let need_c = micro(b.c_min) * m as i64;
    let allow_f = b.f_max.is_finite().then(|| micro(b.f_max) * m as i64);

    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut chosen = Vec::with_capacity(m);
    fn rec(
        items: &[Q],
        start: usize,
        m: usize,
        chosen: &mut Vec<usize>,
        check: &dyn Fn(&[usize]) -> bool,
        best: &mut Option<(i64, Vec<usize>)>,
    ) {
        if chosen.len() == m {
            if check(chosen) {
                let cost: i64 = chosen.iter().map(|&i| items[i].cost).sum();
                if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    *best = Some((cost, chosen.clone()));
                }
            }
            return;
        }
        for i in start..items.len() {
            if items.len() - i < m - chosen.len() {
                break;
            }
            chosen.push(i);
            rec(items, i + 1, m, chosen, check, best);
            chosen.pop();
        }
    }
    let check = |sel: &[usize]| {
        let mut counts = vec![0usize; cats.len()];
        let (mut p, mut c, mut f) = (0i64, 0i64, 0i64);
        for &i in sel {
            counts[items[i].cat] += 1;
            p += items[i].protein;
            c += items[i].calcium;
            f += items[i].fat;
        }
        counts.iter().all(|&n| (lo..=hi).contains(&n)) && p >= need_p && c >= need_c && allow_f.is_none_or(|a| f <= a)
    };
    rec(&items, 0, m, &mut chosen, &check, &mut best);
    best.map(|(cost, sel)| (cost, sel.into_iter().map(|i| items[i].id.clone()).collect()))
}
