//! Exhaustive enumeration of all `C(N, M)` selections, used as a reference
//! for the branch-and-bound solver on small instances.

use super::{PlanError, PlanProblem, PlanSolution};

/// Largest instance the enumerator accepts.
pub const MAX_ENUMERATION_ITEMS: usize = 30;

/// Minimum-cost feasible selection by trying every `M`-subset, or `None` when
/// no subset is feasible. Equal costs are resolved by comparing sorted
/// recipe-id lists.
pub fn enumerate_optimum(problem: &PlanProblem) -> Result<Option<PlanSolution>, PlanError> {
    let n = problem.items().len();
    if n > MAX_ENUMERATION_ITEMS {
        return Err(PlanError::InvalidProblem(format!(
            "enumeration is limited to {MAX_ENUMERATION_ITEMS} recipes (got {n})"
        )));
    }
    let mut best: Option<(i64, Vec<String>, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(problem.m());
    visit(problem, 0, &mut current, &mut best);
    Ok(best.map(|(_, _, sel)| problem.solution(&sel, true)))
}

fn visit(problem: &PlanProblem, start: usize, current: &mut Vec<usize>, best: &mut Option<(i64, Vec<String>, Vec<usize>)>) {
    let n = problem.items().len();
    let m = problem.m();
    if current.len() == m {
        if !problem.is_feasible(current) {
            return;
        }
        let cost: i64 = current.iter().map(|&i| problem.quantized()[i].cost).sum();
        let better = match best {
            None => true,
            Some((best_cost, best_ids, _)) => {
                cost < *best_cost || (cost == *best_cost && sorted_ids(problem, current) < *best_ids)
            }
        };
        if better {
            *best = Some((cost, sorted_ids(problem, current), current.clone()));
        }
        return;
    }
    for i in start..n {
        if n - i < m - current.len() {
            break;
        }
        current.push(i);
        visit(problem, i + 1, current, best);
        current.pop();
    }
}

fn sorted_ids(problem: &PlanProblem, selection: &[usize]) -> Vec<String> {
    let mut ids: Vec<String> = selection.iter().map(|&i| problem.items()[i].recipe_id.clone()).collect();
    ids.sort();
    ids
}
