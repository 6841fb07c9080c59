#ifndef MENUPLAN_H
#define MENUPLAN_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes. Values 2 to 4 equal the command-line exit codes.
typedef enum MenuplanStatus {
  MENUPLAN_STATUS_OK = 0,
  MENUPLAN_STATUS_INVALID_ARGUMENT = 1,
  MENUPLAN_STATUS_VALIDATION = 2,
  MENUPLAN_STATUS_INFEASIBLE = 3,
  MENUPLAN_STATUS_IO = 4,
  MENUPLAN_STATUS_INTERNAL = 5,
} MenuplanStatus;

// A planning problem under construction.
typedef struct MenuplanProblem MenuplanProblem;

// A solved plan with its audit.
typedef struct MenuplanSolution MenuplanSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *menuplan_last_error_message(void);

// Library version as a static string.
const char *menuplan_version(void);

// Creates an empty problem selecting `m` recipes. Pass `INFINITY` as
// `f_max` to drop the fat bound.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum MenuplanStatus menuplan_problem_new(size_t m,
                                         double p_min,
                                         double c_min,
                                         double f_max,
                                         struct MenuplanProblem **out);

// Appends a candidate recipe. Values are per serving: cost in dollars,
// protein and fat in grams, calcium in milligrams.
//
// # Safety
// `problem` must come from [`menuplan_problem_new`]; the strings must be
// valid NUL-terminated UTF-8.
enum MenuplanStatus menuplan_problem_add_item(struct MenuplanProblem *problem,
                                              const char *recipe_id,
                                              double cost,
                                              double protein,
                                              double calcium,
                                              double fat,
                                              const char *category);

// Parses a problem in the `plan_problem.json` format. The problem is
// validated up front so bad input fails here rather than at solve time.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be writable.
enum MenuplanStatus menuplan_problem_from_json(const char *json, struct MenuplanProblem **out);

// Number of items added so far.
//
// # Safety
// `problem` must be null or come from [`menuplan_problem_new`].
size_t menuplan_problem_len(const struct MenuplanProblem *problem);

// # Safety
// `problem` must be null or an unfreed handle from [`menuplan_problem_new`].
void menuplan_problem_free(struct MenuplanProblem *problem);

// Solves to optimality. A positive `time_budget_secs` bounds the search;
// when it runs out the best plan found is returned with the optimal flag
// cleared. Infeasible problems return `Infeasible` with the violated
// constraint in the error message.
//
// # Safety
// `problem` must come from [`menuplan_problem_new`]; `out` must be writable.
enum MenuplanStatus menuplan_solve(const struct MenuplanProblem *problem,
                                   double time_budget_secs,
                                   struct MenuplanSolution **out);

// # Safety
// `solution` must be null or come from [`menuplan_solve`].
double menuplan_solution_total_cost(const struct MenuplanSolution *solution);

// # Safety
// `solution` must be null or come from [`menuplan_solve`].
size_t menuplan_solution_len(const struct MenuplanSolution *solution);

// The `index`-th selected recipe id in sorted order, or null when out of
// range. Borrowed from the solution.
//
// # Safety
// `solution` must be null or come from [`menuplan_solve`].
const char *menuplan_solution_selected_id(const struct MenuplanSolution *solution, size_t index);

// # Safety
// `solution` must be null or come from [`menuplan_solve`].
bool menuplan_solution_is_optimal(const struct MenuplanSolution *solution);

// The solution and its audit as JSON. Release with [`menuplan_string_free`].
//
// # Safety
// `solution` must be null or come from [`menuplan_solve`].
char *menuplan_solution_to_json(const struct MenuplanSolution *solution);

// # Safety
// `solution` must be null or an unfreed handle from [`menuplan_solve`].
void menuplan_solution_free(struct MenuplanSolution *solution);

// # Safety
// `s` must be null or a string returned by this library, freed once.
void menuplan_string_free(char *s);

// Cosine similarity of two embedding vectors of `len` (must be 384) values.
//
// # Safety
// `a` and `b` must each point to `len` readable doubles; `out` must be writable.
enum MenuplanStatus menuplan_cosine_similarity(const double *a,
                                               const double *b,
                                               size_t len,
                                               double *out);

// `buy_probability × mean_unit_price × (1 + factor_percent / 100)`.
double menuplan_predict_ingredient_cost(double buy_probability,
                                        double mean_unit_price,
                                        double factor_percent);

// Per-category selection band for `m` recipes over `num_categories`.
//
// # Safety
// `lower` and `upper` must be writable.
enum MenuplanStatus menuplan_category_bounds(size_t m,
                                             size_t num_categories,
                                             size_t *lower,
                                             size_t *upper);

// Runs every stage from a TOML configuration file. On return `report_out`
// (when non-null) receives a JSON report of the stages, to be released
// with [`menuplan_string_free`], whether or not the run succeeded.
//
// # Safety
// `config_path` must be a valid NUL-terminated string; `report_out` must be
// null or writable.
enum MenuplanStatus menuplan_run_pipeline(const char *config_path, char **report_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MENUPLAN_H */
