//! C ABI over the menuplan planner, pricing and similarity primitives.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Fallible calls return a [`MenuplanStatus`];
//! the message for the most recent failure on the calling thread is
//! available from [`menuplan_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::time::Duration;

use menuplan::embed::EMBEDDING_DIM;
use menuplan::pipeline::{exit, run_pipeline, solve_to_file, PipelineConfig, PipelineError};
use menuplan::planner::{self, PlanBounds, PlanError, PlanItem, PlanProblem, SolutionFile, SolveOptions};
use menuplan::EmbeddingVector;

/// Result codes. Values 2 to 4 equal the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MenuplanStatus {
    Ok = 0,
    InvalidArgument = 1,
    Validation = 2,
    Infeasible = 3,
    Io = 4,
    Internal = 5,
}

/// A planning problem under construction.
pub struct MenuplanProblem {
    items: Vec<PlanItem>,
    m: usize,
    bounds: PlanBounds,
    categories: Vec<String>,
}

/// A solved plan with its audit.
pub struct MenuplanSolution {
    file: SolutionFile,
    ids: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn fail(status: MenuplanStatus, message: impl Into<String>) -> MenuplanStatus {
    set_error(message);
    status
}

fn plan_status(e: &PlanError) -> MenuplanStatus {
    match e {
        PlanError::Infeasible(_) => MenuplanStatus::Infeasible,
        PlanError::TimeBudgetExceeded(_) => MenuplanStatus::Validation,
        PlanError::InvalidProblem(_) | PlanError::UnknownRecipeId(_) => MenuplanStatus::InvalidArgument,
    }
}

fn pipeline_status(e: &PipelineError) -> MenuplanStatus {
    match e.exit_code() {
        exit::INFEASIBLE => MenuplanStatus::Infeasible,
        exit::IO => MenuplanStatus::Io,
        _ => MenuplanStatus::Validation,
    }
}

/// Runs `f`, turning a panic into `Internal`.
fn guard(f: impl FnOnce() -> MenuplanStatus) -> MenuplanStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(MenuplanStatus::Internal, "internal panic"))
}

/// Borrows a NUL-terminated UTF-8 string.
///
/// # Safety
/// `p` must be null or point to a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, MenuplanStatus> {
    if p.is_null() {
        return Err(fail(MenuplanStatus::InvalidArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MenuplanStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message describing the last failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn menuplan_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn menuplan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an empty problem selecting `m` recipes. Pass `INFINITY` as
/// `f_max` to drop the fat bound.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn menuplan_problem_new(
    m: usize,
    p_min: f64,
    c_min: f64,
    f_max: f64,
    out: *mut *mut MenuplanProblem,
) -> MenuplanStatus {
    guard(|| {
        if out.is_null() {
            return fail(MenuplanStatus::InvalidArgument, "out is null");
        }
        if m == 0 || p_min.is_nan() || c_min.is_nan() || f_max.is_nan() {
            return fail(MenuplanStatus::InvalidArgument, "m must be positive and bounds must be numbers");
        }
        let problem = MenuplanProblem {
            items: Vec::new(),
            m,
            bounds: PlanBounds { p_min, c_min, f_max },
            categories: planner::default_categories(),
        };
        *out = Box::into_raw(Box::new(problem));
        MenuplanStatus::Ok
    })
}

/// Appends a candidate recipe. Values are per serving: cost in dollars,
/// protein and fat in grams, calcium in milligrams.
///
/// # Safety
/// `problem` must come from [`menuplan_problem_new`]; the strings must be
/// valid NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn menuplan_problem_add_item(
    problem: *mut MenuplanProblem,
    recipe_id: *const c_char,
    cost: f64,
    protein: f64,
    calcium: f64,
    fat: f64,
    category: *const c_char,
) -> MenuplanStatus {
    guard(|| {
        let Some(problem) = problem.as_mut() else {
            return fail(MenuplanStatus::InvalidArgument, "problem is null");
        };
        let (id, cat) = match (str_arg(recipe_id, "recipe_id"), str_arg(category, "category")) {
            (Ok(id), Ok(cat)) => (id, cat),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        problem.items.push(PlanItem {
            recipe_id: id.to_string(),
            cost,
            protein,
            calcium,
            fat,
            category: cat.to_string(),
        });
        MenuplanStatus::Ok
    })
}

/// Parses a problem in the `plan_problem.json` format. The problem is
/// validated up front so bad input fails here rather than at solve time.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menuplan_problem_from_json(json: *const c_char, out: *mut *mut MenuplanProblem) -> MenuplanStatus {
    guard(|| {
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(MenuplanStatus::InvalidArgument, "out is null");
        }
        let parsed: PlanProblem = match serde_json::from_str(text) {
            Ok(p) => p,
            Err(e) => return fail(MenuplanStatus::Validation, e.to_string()),
        };
        let problem = MenuplanProblem {
            items: parsed.items().to_vec(),
            m: parsed.m(),
            bounds: parsed.bounds(),
            categories: parsed.categories().to_vec(),
        };
        *out = Box::into_raw(Box::new(problem));
        MenuplanStatus::Ok
    })
}

/// Number of items added so far.
///
/// # Safety
/// `problem` must be null or come from [`menuplan_problem_new`].
#[no_mangle]
pub unsafe extern "C" fn menuplan_problem_len(problem: *const MenuplanProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.items.len())
}

/// # Safety
/// `problem` must be null or an unfreed handle from [`menuplan_problem_new`].
#[no_mangle]
pub unsafe extern "C" fn menuplan_problem_free(problem: *mut MenuplanProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves to optimality. A positive `time_budget_secs` bounds the search;
/// when it runs out the best plan found is returned with the optimal flag
/// cleared. Infeasible problems return `Infeasible` with the violated
/// constraint in the error message.
///
/// # Safety
/// `problem` must come from [`menuplan_problem_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menuplan_solve(
    problem: *const MenuplanProblem,
    time_budget_secs: f64,
    out: *mut *mut MenuplanSolution,
) -> MenuplanStatus {
    guard(|| {
        let Some(problem) = problem.as_ref() else {
            return fail(MenuplanStatus::InvalidArgument, "problem is null");
        };
        if out.is_null() {
            return fail(MenuplanStatus::InvalidArgument, "out is null");
        }
        let built = match PlanProblem::with_categories(problem.items.clone(), problem.m, problem.bounds, problem.categories.clone()) {
            Ok(p) => p,
            Err(e) => return fail(plan_status(&e), e.to_string()),
        };
        let options = SolveOptions {
            time_budget: (time_budget_secs > 0.0 && time_budget_secs.is_finite()).then(|| Duration::from_secs_f64(time_budget_secs)),
        };
        match solve_to_file(&built, &options) {
            Ok(file) => {
                let ids = file.solution.selected.iter().map(|s| CString::new(s.as_str()).unwrap_or_default()).collect();
                *out = Box::into_raw(Box::new(MenuplanSolution { file, ids }));
                MenuplanStatus::Ok
            }
            Err(PipelineError::Plan(e)) => fail(plan_status(&e), e.to_string()),
            Err(e) => fail(pipeline_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `solution` must be null or come from [`menuplan_solve`].
#[no_mangle]
pub unsafe extern "C" fn menuplan_solution_total_cost(solution: *const MenuplanSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.file.solution.total_cost)
}

/// # Safety
/// `solution` must be null or come from [`menuplan_solve`].
#[no_mangle]
pub unsafe extern "C" fn menuplan_solution_len(solution: *const MenuplanSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.ids.len())
}

/// The `index`-th selected recipe id in sorted order, or null when out of
/// range. Borrowed from the solution.
///
/// # Safety
/// `solution` must be null or come from [`menuplan_solve`].
#[no_mangle]
pub unsafe extern "C" fn menuplan_solution_selected_id(solution: *const MenuplanSolution, index: usize) -> *const c_char {
    solution.as_ref().and_then(|s| s.ids.get(index)).map_or(ptr::null(), |id| id.as_ptr())
}

/// # Safety
/// `solution` must be null or come from [`menuplan_solve`].
#[no_mangle]
pub unsafe extern "C" fn menuplan_solution_is_optimal(solution: *const MenuplanSolution) -> bool {
    solution.as_ref().is_some_and(|s| s.file.solution.optimal)
}

/// The solution and its audit as JSON. Release with [`menuplan_string_free`].
///
/// # Safety
/// `solution` must be null or come from [`menuplan_solve`].
#[no_mangle]
pub unsafe extern "C" fn menuplan_solution_to_json(solution: *const MenuplanSolution) -> *mut c_char {
    match solution.as_ref() {
        Some(s) => serde_json::to_string(&s.file).map(into_c_string).unwrap_or(ptr::null_mut()),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `solution` must be null or an unfreed handle from [`menuplan_solve`].
#[no_mangle]
pub unsafe extern "C" fn menuplan_solution_free(solution: *mut MenuplanSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn menuplan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Cosine similarity of two embedding vectors of `len` (must be 384) values.
///
/// # Safety
/// `a` and `b` must each point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menuplan_cosine_similarity(a: *const f64, b: *const f64, len: usize, out: *mut f64) -> MenuplanStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(MenuplanStatus::InvalidArgument, "null pointer argument");
        }
        if len != EMBEDDING_DIM {
            return fail(MenuplanStatus::InvalidArgument, format!("expected {EMBEDDING_DIM} values, got {len}"));
        }
        let va = EmbeddingVector::new(std::slice::from_raw_parts(a, len).to_vec());
        let vb = EmbeddingVector::new(std::slice::from_raw_parts(b, len).to_vec());
        match va.and_then(|va| vb.and_then(|vb| menuplan::cosine_similarity(&va, &vb))) {
            Ok(s) => {
                *out = s;
                MenuplanStatus::Ok
            }
            Err(e) => fail(MenuplanStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// `buy_probability × mean_unit_price × (1 + factor_percent / 100)`.
#[no_mangle]
pub extern "C" fn menuplan_predict_ingredient_cost(buy_probability: f64, mean_unit_price: f64, factor_percent: f64) -> f64 {
    menuplan::predict_ingredient_cost(buy_probability, mean_unit_price, factor_percent)
}

/// Per-category selection band for `m` recipes over `num_categories`.
///
/// # Safety
/// `lower` and `upper` must be writable.
#[no_mangle]
pub unsafe extern "C" fn menuplan_category_bounds(m: usize, num_categories: usize, lower: *mut usize, upper: *mut usize) -> MenuplanStatus {
    guard(|| {
        if lower.is_null() || upper.is_null() || num_categories == 0 {
            return fail(MenuplanStatus::InvalidArgument, "null output or zero categories");
        }
        let (lo, hi) = planner::category_bounds(m, num_categories);
        *lower = lo;
        *upper = hi;
        MenuplanStatus::Ok
    })
}

/// Runs every stage from a TOML configuration file. On return `report_out`
/// (when non-null) receives a JSON report of the stages, to be released
/// with [`menuplan_string_free`], whether or not the run succeeded.
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string; `report_out` must be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn menuplan_run_pipeline(config_path: *const c_char, report_out: *mut *mut c_char) -> MenuplanStatus {
    guard(|| {
        let path = match str_arg(config_path, "config_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if !report_out.is_null() {
            *report_out = ptr::null_mut();
        }
        let config = match PipelineConfig::load(Path::new(path)) {
            Ok(c) => c,
            Err(e) => return fail(pipeline_status(&e), e.to_string()),
        };
        let result = run_pipeline(&config);
        if !report_out.is_null() {
            let report = serde_json::json!({
                "stages": result.stages,
                "failure": result.failure.as_ref().map(|f| serde_json::json!({
                    "stage": f.stage,
                    "error": f.error.code(),
                    "detail": f.error.to_string(),
                })),
            });
            *report_out = into_c_string(report.to_string());
        }
        match &result.failure {
            None => MenuplanStatus::Ok,
            Some(f) => fail(pipeline_status(&f.error), f.to_string()),
        }
    })
}
