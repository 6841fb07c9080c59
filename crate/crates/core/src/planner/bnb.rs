//! Depth-first branch-and-bound over the selection variables.
//!
//! Every node bounds its subtree with exact greedy completions of the
//! remaining `rem` slots under the per-category bands: cheapest cost, largest
//! protein, largest calcium and smallest fat, each taken independently. The
//! band-constrained greedy is exact for a single objective because each
//! category's best-`c` prefix sum is concave/convex in `c`.
//!
//! The cost pass branches in cost order and proves the optimal cost. The
//! tie-break then walks the recipes in id order and keeps each one if some
//! optimum contains it together with everything kept so far. Members of the
//! current witness optimum are kept for free; any other recipe costs one
//! budgeted search. The result is the optimum with the lexicographically
//! smallest sorted id list.

use std::time::{Duration, Instant};

use serde::Serialize;

use super::{dequantize, Infeasibility, PlanError, PlanProblem, PlanSolution, QItem};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Wall-clock limit. When it runs out the best plan found so far is
    /// returned with `optimal = false`.
    pub time_budget: Option<Duration>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub cost_nodes: u64,
    pub tie_break_nodes: u64,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Strict improvement on the incumbent cost.
    Cost,
    /// Any leaf with cost ≤ budget; stop at the first.
    Budget(i64),
    /// Any feasible leaf; stop at the first.
    Feasible,
}

#[derive(Debug, Clone, Copy)]
struct Active {
    protein: bool,
    calcium: bool,
    fat: bool,
}

const ALL_BOUNDS: Active = Active { protein: true, calcium: true, fat: true };

const FIXED: usize = usize::MAX;

struct Search<'a> {
    items: &'a [QItem],
    m: usize,
    k: usize,
    lo: usize,
    hi: usize,
    p_req: i64,
    c_req: i64,
    f_cap: Option<i64>,
    active: Active,
    mode: Mode,
    /// Branching order over the free items.
    order: Vec<usize>,
    /// Position of each item in `order`, or `FIXED` when it is not free.
    pos: Vec<usize>,
    by_cost: Vec<usize>,
    by_protein: Vec<usize>,
    by_calcium: Vec<usize>,
    by_fat: Vec<usize>,
    /// `suffix[d * k + c]`: items of category `c` at branching positions ≥ d.
    suffix: Vec<usize>,
    deadline: Option<Instant>,
    nodes: u64,
    timed_out: bool,
    stop: bool,
    best_cost: i64,
    best: Option<Vec<usize>>,
    // per-node scratch
    need: Vec<usize>,
    cap: Vec<usize>,
    seen: Vec<usize>,
    extra: Vec<usize>,
}

struct State {
    counts: Vec<usize>,
    chosen: Vec<usize>,
    cost: i64,
    protein: i64,
    calcium: i64,
    fat: i64,
}

impl<'a> Search<'a> {
    fn new(problem: &'a PlanProblem, order: Vec<usize>, mode: Mode, active: Active, deadline: Option<Instant>) -> Self {
        let items = problem.quantized();
        let n = items.len();
        let k = problem.categories().len();
        let (lo, hi) = problem.category_bounds();
        let mut pos = vec![FIXED; n];
        for (d, &i) in order.iter().enumerate() {
            pos[i] = d;
        }
        let ids = |i: usize| problem.items()[i].recipe_id.as_str();
        let sorted_by = |key: &dyn Fn(&QItem) -> i64| {
            let mut v: Vec<usize> = (0..n).collect();
            v.sort_by(|&a, &b| key(&items[a]).cmp(&key(&items[b])).then_with(|| ids(a).cmp(ids(b))));
            v
        };
        let by_cost = sorted_by(&|q| q.cost);
        let by_protein = sorted_by(&|q| -q.protein);
        let by_calcium = sorted_by(&|q| -q.calcium);
        let by_fat = sorted_by(&|q| q.fat);
        let mut suffix = vec![0; (order.len() + 1) * k];
        for d in (0..order.len()).rev() {
            for c in 0..k {
                suffix[d * k + c] = suffix[(d + 1) * k + c];
            }
            suffix[d * k + items[order[d]].category] += 1;
        }
        Search {
            items,
            m: problem.m(),
            k,
            lo,
            hi,
            p_req: problem.protein_required,
            c_req: problem.calcium_required,
            f_cap: problem.fat_allowed,
            active,
            mode,
            order,
            pos,
            by_cost,
            by_protein,
            by_calcium,
            by_fat,
            suffix,
            deadline,
            nodes: 0,
            timed_out: false,
            stop: false,
            best_cost: i64::MAX,
            best: None,
            need: vec![0; k],
            cap: vec![0; k],
            seen: vec![0; k],
            extra: vec![0; k],
        }
    }

    fn run(&mut self) {
        self.run_with(&[]);
    }

    /// Searches completions of the items in `fixed`, which must not be free.
    fn run_with(&mut self, fixed: &[usize]) {
        let mut state = State {
            counts: vec![0; self.k],
            chosen: Vec::with_capacity(self.m),
            cost: 0,
            protein: 0,
            calcium: 0,
            fat: 0,
        };
        for &i in fixed {
            debug_assert_eq!(self.pos[i], FIXED);
            let q = self.items[i];
            state.counts[q.category] += 1;
            state.chosen.push(i);
            state.cost += q.cost;
            state.protein += q.protein;
            state.calcium += q.calcium;
            state.fat += q.fat;
        }
        self.dfs(0, &mut state);
    }

    /// Best sum of `value` over `rem` undecided items honouring `need`/`cap`,
    /// scanning `list` in its (best-first) order.
    fn completion(&mut self, which: usize, depth: usize, rem: usize, value: fn(&QItem) -> i64) -> Option<i64> {
        let list = match which {
            0 => &self.by_cost,
            1 => &self.by_protein,
            2 => &self.by_calcium,
            _ => &self.by_fat,
        };
        let need_total: usize = self.need.iter().sum();
        let free = rem - need_total;
        let mut need_left = need_total;
        let mut free_used = 0;
        self.seen.iter_mut().for_each(|s| *s = 0);
        self.extra.iter_mut().for_each(|s| *s = 0);
        let mut sum = 0i64;
        if need_left == 0 && free == 0 {
            return Some(0);
        }
        for &i in list {
            if self.pos[i] < depth || self.pos[i] == FIXED {
                continue;
            }
            let q = &self.items[i];
            let c = q.category;
            self.seen[c] += 1;
            if self.seen[c] <= self.need[c] {
                sum += value(q);
                need_left -= 1;
            } else if free_used < free && self.extra[c] + self.need[c] < self.cap[c] {
                sum += value(q);
                free_used += 1;
                self.extra[c] += 1;
            } else {
                continue;
            }
            if need_left == 0 && free_used == free {
                return Some(sum);
            }
        }
        None
    }

    fn leaf(&mut self, s: &State) {
        let feasible = s.counts.iter().all(|&n| n >= self.lo && n <= self.hi)
            && (!self.active.protein || s.protein >= self.p_req)
            && (!self.active.calcium || s.calcium >= self.c_req)
            && (!self.active.fat || self.f_cap.is_none_or(|cap| s.fat <= cap));
        if !feasible {
            return;
        }
        match self.mode {
            Mode::Cost => {
                if s.cost < self.best_cost {
                    self.best_cost = s.cost;
                    self.best = Some(s.chosen.clone());
                }
            }
            Mode::Budget(budget) => {
                if s.cost <= budget {
                    self.best_cost = s.cost;
                    self.best = Some(s.chosen.clone());
                    self.stop = true;
                }
            }
            Mode::Feasible => {
                self.best_cost = s.cost;
                self.best = Some(s.chosen.clone());
                self.stop = true;
            }
        }
    }

    fn prunable(&mut self, depth: usize, s: &State) -> bool {
        let rem = self.m - s.chosen.len();
        let base = depth * self.k;
        let mut need_total = 0;
        let mut room = 0;
        for c in 0..self.k {
            let avail = self.suffix[base + c];
            let need = self.lo.saturating_sub(s.counts[c]);
            let cap = self.hi - s.counts[c];
            if need > avail {
                return true;
            }
            self.need[c] = need;
            self.cap[c] = cap;
            need_total += need;
            room += cap.min(avail);
        }
        if need_total > rem || room < rem {
            return true;
        }
        match self.mode {
            Mode::Cost | Mode::Budget(_) => {
                let Some(lb) = self.completion(0, depth, rem, |q| q.cost) else { return true };
                let total = s.cost + lb;
                let pruned = match self.mode {
                    Mode::Cost => total >= self.best_cost,
                    Mode::Budget(budget) => total > budget,
                    Mode::Feasible => false,
                };
                if pruned {
                    return true;
                }
            }
            Mode::Feasible => {}
        }
        if self.active.protein {
            match self.completion(1, depth, rem, |q| q.protein) {
                Some(ub) if s.protein + ub >= self.p_req => {}
                _ => return true,
            }
        }
        if self.active.calcium {
            match self.completion(2, depth, rem, |q| q.calcium) {
                Some(ub) if s.calcium + ub >= self.c_req => {}
                _ => return true,
            }
        }
        if self.active.fat {
            if let Some(cap) = self.f_cap {
                match self.completion(3, depth, rem, |q| q.fat) {
                    Some(lb) if s.fat + lb <= cap => {}
                    _ => return true,
                }
            }
        }
        false
    }

    fn dfs(&mut self, depth: usize, s: &mut State) {
        self.nodes += 1;
        if self.nodes.is_multiple_of(1024) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.timed_out = true;
                    self.stop = true;
                }
            }
        }
        if self.stop {
            return;
        }
        if s.chosen.len() == self.m {
            self.leaf(s);
            return;
        }
        if depth == self.order.len() || self.prunable(depth, s) {
            return;
        }
        let i = self.order[depth];
        let q = self.items[i];
        if s.counts[q.category] < self.hi {
            s.counts[q.category] += 1;
            s.chosen.push(i);
            s.cost += q.cost;
            s.protein += q.protein;
            s.calcium += q.calcium;
            s.fat += q.fat;
            self.dfs(depth + 1, s);
            s.counts[q.category] -= 1;
            s.chosen.pop();
            s.cost -= q.cost;
            s.protein -= q.protein;
            s.calcium -= q.calcium;
            s.fat -= q.fat;
            if self.stop {
                return;
            }
        }
        self.dfs(depth + 1, s);
    }
}

fn cost_order(problem: &PlanProblem) -> Vec<usize> {
    let items = problem.quantized();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        items[a]
            .cost
            .cmp(&items[b].cost)
            .then_with(|| problem.items()[a].recipe_id.cmp(&problem.items()[b].recipe_id))
    });
    order
}

fn id_order(problem: &PlanProblem) -> Vec<usize> {
    let mut order: Vec<usize> = (0..problem.items().len()).collect();
    order.sort_by(|&a, &b| problem.items()[a].recipe_id.cmp(&problem.items()[b].recipe_id));
    order
}

/// Lexicographically smallest optimum given one optimum (`witness`) of cost
/// `budget`. Returns `None` if the deadline passes first.
fn lexicographic_optimum(
    problem: &PlanProblem,
    budget: i64,
    witness: Vec<usize>,
    deadline: Option<Instant>,
    stats: &mut SolveStats,
) -> Option<Vec<usize>> {
    let n = problem.items().len();
    let m = problem.m();
    let by_cost = cost_order(problem);
    let mut in_witness = vec![false; n];
    witness.iter().for_each(|&i| in_witness[i] = true);
    let mut decided = vec![false; n];
    let (_, hi) = problem.category_bounds();
    let mut kept_per_category = vec![0usize; problem.categories().len()];
    let mut kept: Vec<usize> = Vec::with_capacity(m);
    for i in id_order(problem) {
        if kept.len() == m {
            break;
        }
        decided[i] = true;
        let category = problem.quantized()[i].category;
        if in_witness[i] {
            kept.push(i);
            kept_per_category[category] += 1;
            continue;
        }
        if kept_per_category[category] == hi {
            continue;
        }
        let free: Vec<usize> = by_cost.iter().copied().filter(|&j| !decided[j]).collect();
        let mut search = Search::new(problem, free, Mode::Budget(budget), ALL_BOUNDS, deadline);
        kept.push(i);
        search.run_with(&kept);
        stats.tie_break_nodes += search.nodes;
        if search.timed_out {
            return None;
        }
        match search.best {
            Some(sel) => {
                in_witness.iter_mut().for_each(|w| *w = false);
                sel.iter().for_each(|&j| in_witness[j] = true);
                kept_per_category[category] += 1;
            }
            None => {
                kept.pop();
            }
        }
    }
    kept.sort_unstable();
    Some(kept)
}

/// Exact solve with an optional time budget.
pub fn solve_with(problem: &PlanProblem, options: &SolveOptions) -> Result<(PlanSolution, SolveStats), PlanError> {
    let started = Instant::now();
    let deadline = options.time_budget.map(|b| started + b);
    let mut stats = SolveStats::default();

    if let Some(reason) = structural_infeasibility(problem) {
        return Err(PlanError::Infeasible(reason));
    }

    let mut cost_search = Search::new(problem, cost_order(problem), Mode::Cost, ALL_BOUNDS, deadline);
    cost_search.run();
    stats.cost_nodes = cost_search.nodes;
    let Some(incumbent) = cost_search.best.take() else {
        if cost_search.timed_out {
            return Err(PlanError::TimeBudgetExceeded(options.time_budget.unwrap_or_default()));
        }
        return Err(PlanError::Infeasible(diagnose(problem, deadline, options.time_budget)?));
    };
    if cost_search.timed_out {
        stats.timed_out = true;
        return Ok((problem.solution(&incumbent, false), stats));
    }

    match lexicographic_optimum(problem, cost_search.best_cost, incumbent.clone(), deadline, &mut stats) {
        Some(sel) => Ok((problem.solution(&sel, true), stats)),
        None => {
            stats.timed_out = true;
            Ok((problem.solution(&incumbent, false), stats))
        }
    }
}

/// Category-count infeasibility, decidable without search.
fn structural_infeasibility(problem: &PlanProblem) -> Option<Infeasibility> {
    let (lo, hi) = problem.category_bounds();
    let k = problem.categories().len();
    let mut available = vec![0usize; k];
    for q in problem.quantized() {
        available[q.category] += 1;
    }
    for (c, &n) in available.iter().enumerate() {
        if n < lo {
            return Some(Infeasibility::CategoryBand { category: problem.categories()[c].clone(), available: n, lower: lo });
        }
    }
    let selectable: usize = available.iter().map(|&n| n.min(hi)).sum();
    if selectable < problem.m() {
        return Some(Infeasibility::CategoryCapacity { selectable, m: problem.m() });
    }
    None
}

/// Names the first bound, in protein → calcium → fat order, that no
/// selection satisfying the earlier bounds can meet.
fn diagnose(
    problem: &PlanProblem,
    deadline: Option<Instant>,
    budget: Option<Duration>,
) -> Result<Infeasibility, PlanError> {
    let m = problem.m() as f64;
    let bounds = problem.bounds();
    let mut probe = Search::new(problem, cost_order(problem), Mode::Feasible, ALL_BOUNDS, deadline);
    for c in 0..probe.k {
        probe.need[c] = probe.lo;
        probe.cap[c] = probe.hi;
    }
    let best_protein = probe.completion(1, 0, problem.m(), |q| q.protein).unwrap_or(0);
    let best_calcium = probe.completion(2, 0, problem.m(), |q| q.calcium).unwrap_or(0);
    let least_fat = probe.completion(3, 0, problem.m(), |q| q.fat).unwrap_or(i64::MAX);
    let avg = |v: i64| dequantize(v) / m;
    if best_protein < problem.protein_required {
        return Ok(Infeasibility::Protein { best_average: avg(best_protein), required: bounds.p_min });
    }
    if best_calcium < problem.calcium_required {
        return Ok(Infeasibility::Calcium { best_average: avg(best_calcium), required: bounds.c_min, with_other_bounds: false });
    }
    if let Some(cap) = problem.fat_allowed {
        if least_fat > cap {
            return Ok(Infeasibility::Fat { best_average: avg(least_fat), allowed: bounds.f_max, with_other_bounds: false });
        }
    }
    let pair = Active { protein: true, calcium: true, fat: false };
    let mut joint = Search::new(problem, cost_order(problem), Mode::Feasible, pair, deadline);
    joint.run();
    if joint.timed_out {
        return Err(PlanError::TimeBudgetExceeded(budget.unwrap_or_default()));
    }
    if joint.best.is_none() {
        return Ok(Infeasibility::Calcium { best_average: avg(best_calcium), required: bounds.c_min, with_other_bounds: true });
    }
    Ok(Infeasibility::Fat { best_average: avg(least_fat), allowed: bounds.f_max, with_other_bounds: true })
}
