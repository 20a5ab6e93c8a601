//! LP-relaxation branch and bound.
//!
//! Best-first on LP bounds with depth-first plunging until the first
//! incumbent, branching on the most fractional integer column (ties to the
//! lowest index). An optional round-fix-dive heuristic repairs rounded
//! points against monotone and packing rows, then re-solves the continuous
//! part. Every incumbent is re-checked row by row independently of the
//! simplex before it is accepted.

use crate::milp::{
    mip_gap, LogRecord, LpStatus, MilpError, MilpProblem, MilpSolution, MilpStatus, Sense,
};
use crate::simplex::{solve_lp, SimplexOptions};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// Relative MIP gap at which the search stops with `GapLimit`.
    /// Zero means run to exhaustion (`Optimal`).
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Integrality tolerance on the LP relaxation values.
    pub int_tol: f64,
    /// Round-fix-dive incumbent heuristic on/off.
    pub heuristics: bool,
    /// LP re-solves the dive heuristic may spend per invocation.
    pub dive_rounds: usize,
    pub simplex: SimplexOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            gap_tol: 0.0,
            time_limit: None,
            node_limit: None,
            int_tol: 1e-6,
            heuristics: true,
            dive_rounds: 120,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Clone)]
struct Node {
    /// Best known lower bound for this subtree (parent LP objective).
    bound: f64,
    /// (column, lower, upper) tightenings relative to the root problem.
    tightenings: Vec<(usize, f64, f64)>,
    seq: usize,
}

struct HeapEntry(Node);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.bound == other.0.bound && self.0.seq == other.0.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for best(-lowest)-bound-first,
        // breaking ties toward older nodes.
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

/// Two-variable precedence `u <= v` and single-choice packing rows, used by
/// the rounding heuristic to repair monotone chains and mode choices.
struct RepairStructure {
    precedence: Vec<(usize, usize)>,
    packing: Vec<Vec<usize>>,
}

impl RepairStructure {
    fn extract(p: &MilpProblem) -> Self {
        let mut precedence = Vec::new();
        let mut packing = Vec::new();
        for row in &p.rows {
            if row.sense != Sense::Le {
                continue;
            }
            if row.rhs.abs() < 1e-12 && row.coeffs.len() == 2 {
                let (c0, a0) = row.coeffs[0];
                let (c1, a1) = row.coeffs[1];
                let both_binary = p.variables[c0].kind.is_integral()
                    && p.variables[c1].kind.is_integral();
                if both_binary {
                    if (a0 - 1.0).abs() < 1e-12 && (a1 + 1.0).abs() < 1e-12 {
                        precedence.push((c0, c1));
                    } else if (a1 - 1.0).abs() < 1e-12 && (a0 + 1.0).abs() < 1e-12 {
                        precedence.push((c1, c0));
                    }
                }
            }
            if (row.rhs - 1.0).abs() < 1e-12
                && row.coeffs.len() >= 2
                && row
                    .coeffs
                    .iter()
                    .all(|&(c, a)| (a - 1.0).abs() < 1e-12 && p.variables[c].kind.is_integral())
            {
                packing.push(row.coeffs.iter().map(|&(c, _)| c).collect());
            }
        }
        RepairStructure {
            precedence,
            packing,
        }
    }

    /// Rounds integer columns, drops surplus members of packing rows
    /// (keeping the largest LP fraction), then closes precedence chains.
    fn round_and_repair(&self, p: &MilpProblem, lp_values: &[f64]) -> BTreeMap<usize, f64> {
        let mut fixed: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, var) in p.variables.iter().enumerate() {
            if var.kind.is_integral() {
                fixed.insert(j, lp_values[j].round().clamp(var.lower, var.upper));
            }
        }
        for group in &self.packing {
            let on: Vec<usize> = group.iter().copied().filter(|c| fixed[c] > 0.5).collect();
            if on.len() > 1 {
                let keep = on
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        lp_values[a]
                            .total_cmp(&lp_values[b])
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                for c in on {
                    if c != keep {
                        fixed.insert(c, 0.0);
                    }
                }
            }
        }
        loop {
            let mut changed = false;
            for &(u, v) in &self.precedence {
                if fixed.get(&u).copied().unwrap_or(0.0) > 0.5
                    && fixed.get(&v).copied().unwrap_or(0.0) < 0.5
                {
                    // Respect hard bounds introduced by branching.
                    if p.variables[v].upper >= 1.0 {
                        fixed.insert(v, 1.0);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        fixed
    }
}

/// Primal heuristics: one-shot round-and-repair, falling back to an
/// iterative LP dive that fixes integral-valued columns plus the most
/// nearly integral fractional one per round.
fn find_incumbent(
    problem: &MilpProblem,
    repair: &RepairStructure,
    lp_values: &[f64],
    opts: &BnbOptions,
) -> Option<(f64, Vec<f64>)> {
    let rounded = repair.round_and_repair(problem, lp_values);
    if let Ok(fp) = problem.with_fixed(rounded.iter()) {
        let sol = solve_lp(&fp, &opts.simplex);
        if sol.status == LpStatus::Optimal && problem.check_point(&sol.values, 1e-6).is_empty() {
            return Some((sol.objective, sol.values));
        }
    }
    // Dive: round one fractional column per pass, leaving the rest free so
    // the LP can re-balance around each fixing.
    let mut fixings: BTreeMap<usize, f64> = BTreeMap::new();
    let mut values = lp_values.to_vec();
    for _ in 0..opts.dive_rounds.max(1) {
        let mut frac: Option<(usize, f64)> = None;
        for (j, var) in problem.variables.iter().enumerate() {
            if !var.kind.is_integral() || fixings.contains_key(&j) {
                continue;
            }
            let v = values[j];
            let d = (v - v.round()).abs();
            if d > opts.int_tol && frac.map_or(true, |(_, fd)| d < fd - 1e-12) {
                frac = Some((j, d));
            }
        }
        let Some((j, _)) = frac else {
            // Integral already; the current LP point is the incumbent.
            if problem.check_point(&values, 1e-6).is_empty() {
                let obj = problem.objective_value(&values);
                eprintln!("DIVE: success obj={obj} after {} fixings", fixings.len());
                return Some((obj, values));
            }
            eprintln!("DIVE: integral but check failed: {:?}", problem.check_point(&values, 1e-6).first());
            return None;
        };
        fixings.insert(j, values[j].round());
        let fp = problem.with_fixed(fixings.iter()).ok()?;
        let sol = solve_lp(&fp, &opts.simplex);
        if sol.status == LpStatus::Optimal {
            values = sol.values;
        } else {
            // Flip the rounding once before giving up.
            let flipped = if values[j].round() > 0.5 {
                values[j].floor()
            } else {
                values[j].ceil()
            };
            fixings.insert(j, flipped);
            let fp = problem.with_fixed(fixings.iter()).ok()?;
            let sol = solve_lp(&fp, &opts.simplex);
            if sol.status != LpStatus::Optimal {
                eprintln!("DIVE: dead end after {} fixings (flip failed, {:?})", fixings.len(), sol.status);
                return None;
            }
            values = sol.values;
        }
    }
    eprintln!("DIVE: round cap exhausted");
    None
}

/// Solves the MILP. The returned solution carries the convergence log with
/// schema `elapsed_s,nodes,incumbent,best_bound,gap`.
pub fn solve_milp(problem: &MilpProblem, opts: &BnbOptions) -> MilpSolution {
    let start = Instant::now();
    let mut work = problem.clone();
    let root_bounds: Vec<(f64, f64)> = problem
        .variables
        .iter()
        .map(|v| (v.lower, v.upper))
        .collect();
    let repair = RepairStructure::extract(problem);

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut dfs: Vec<Node> = Vec::new();
    let mut seq = 0usize;
    let mut node_count = 0usize;
    let mut log: Vec<LogRecord> = Vec::new();
    let mut status = MilpStatus::Optimal;

    dfs.push(Node {
        bound: f64::NEG_INFINITY,
        tightenings: Vec::new(),
        seq,
    });

    let open_bound = |heap: &BinaryHeap<HeapEntry>, dfs: &[Node], extra: Option<f64>| -> f64 {
        let mut b = f64::INFINITY;
        if let Some(e) = heap.peek() {
            b = b.min(e.0.bound);
        }
        for n in dfs {
            b = b.min(n.bound);
        }
        if let Some(x) = extra {
            b = b.min(x);
        }
        b
    };

    macro_rules! record {
        ($bound:expr) => {{
            let inc = incumbent.as_ref().map(|i| i.0).unwrap_or(f64::INFINITY);
            // An empty open set means the incumbent is the bound.
            let bound = f64::min($bound, inc);
            log.push(LogRecord {
                elapsed_s: start.elapsed().as_secs_f64(),
                nodes: node_count,
                incumbent: inc,
                best_bound: bound,
                gap: mip_gap(inc, bound),
            });
        }};
    }

    'search: loop {
        // Pop: plunge depth-first until an incumbent exists.
        let node = if incumbent.is_none() && !dfs.is_empty() {
            dfs.pop()
        } else {
            if !dfs.is_empty() {
                for n in dfs.drain(..) {
                    heap.push(HeapEntry(n));
                }
            }
            heap.pop().map(|e| e.0)
        };
        let Some(node) = node else {
            break;
        };
        let inc_obj = incumbent.as_ref().map(|i| i.0).unwrap_or(f64::INFINITY);
        // Lazy re-prune on stale bounds.
        if node.bound >= inc_obj - 1e-9 {
            continue;
        }
        if let Some(limit) = opts.time_limit {
            if start.elapsed() >= limit {
                status = MilpStatus::TimeLimit;
                break;
            }
        }
        if let Some(limit) = opts.node_limit {
            if node_count >= limit {
                status = MilpStatus::TimeLimit;
                break;
            }
        }
        node_count += 1;

        // Apply this node's bound tightenings.
        for &(c, lo, hi) in &node.tightenings {
            work.variables[c].lower = lo;
            work.variables[c].upper = hi;
        }
        let sol = solve_lp(&work, &opts.simplex);
        let restore = |work: &mut MilpProblem| {
            for &(c, _, _) in &node.tightenings {
                let (lo, hi) = root_bounds[c];
                work.variables[c].lower = lo;
                work.variables[c].upper = hi;
            }
        };

        match sol.status {
            LpStatus::Infeasible => {
                restore(&mut work);
                continue;
            }
            LpStatus::Unbounded | LpStatus::IterationLimit => {
                restore(&mut work);
                status = MilpStatus::TimeLimit;
                break;
            }
            LpStatus::Optimal => {}
        }
        if sol.objective >= inc_obj - 1e-9 {
            restore(&mut work);
            continue;
        }

        // Fractional integer columns.
        let mut branch_col: Option<(usize, f64)> = None;
        let mut best_frac = opts.int_tol;
        for (j, var) in work.variables.iter().enumerate() {
            if !var.kind.is_integral() {
                continue;
            }
            let v = sol.values[j];
            let frac = (v - v.round()).abs();
            if frac > best_frac {
                // Most fractional: distance to the nearest half-integer.
                let score = 0.5 - (v - v.floor() - 0.5).abs();
                match branch_col {
                    Some((_, s)) if s >= score => {}
                    _ => branch_col = Some((j, score)),
                }
            }
            let _ = &mut best_frac;
        }

        if let Some((col, _)) = branch_col {
            let v = sol.values[col];
            let lo_child = (col, work.variables[col].lower, v.floor());
            let hi_child = (col, v.ceil(), work.variables[col].upper);
            let mut mk = |t: (usize, f64, f64)| {
                seq += 1;
                let mut tight = node.tightenings.clone();
                tight.push(t);
                Node {
                    bound: sol.objective,
                    tightenings: tight,
                    seq,
                }
            };
            // Plunge toward the ceil side first.
            let (first, second) = (mk(hi_child), mk(lo_child));
            if incumbent.is_none() {
                dfs.push(second);
                dfs.push(first);
            } else {
                heap.push(HeapEntry(first));
                heap.push(HeapEntry(second));
            }

            // Round-and-repair / LP-dive heuristic.
            if opts.heuristics && (node_count == 1 || node_count % 50 == 0) {
                restore(&mut work);
                if let Some((obj, values)) = find_incumbent(problem, &repair, &sol.values, opts)
                {
                    let inc_obj = incumbent.as_ref().map(|i| i.0).unwrap_or(f64::INFINITY);
                    if obj < inc_obj - 1e-12 {
                        incumbent = Some((obj, values));
                        record!(open_bound(&heap, &dfs, Some(sol.objective)));
                    }
                }
            } else {
                restore(&mut work);
            }
        } else {
            // Integral point; verify independently before accepting.
            restore(&mut work);
            if problem.check_point(&sol.values, 1e-6).is_empty()
                && sol.objective < inc_obj - 1e-12
            {
                incumbent = Some((sol.objective, sol.values));
                record!(open_bound(&heap, &dfs, None));
            }
        }

        if node_count % 16 == 0 || node_count == 1 {
            record!(open_bound(&heap, &dfs, None));
        }
        // Early stop on gap.
        if opts.gap_tol > 0.0 {
            if let Some((inc, _)) = &incumbent {
                let bound = open_bound(&heap, &dfs, None);
                if mip_gap(*inc, bound) <= opts.gap_tol {
                    status = MilpStatus::GapLimit;
                    break 'search;
                }
            }
        }
    }

    let wall = start.elapsed().as_secs_f64();
    match incumbent {
        None => {
            if status == MilpStatus::Optimal {
                // Exhausted without ever finding a feasible point.
                MilpSolution::infeasible(node_count, wall)
            } else {
                let mut s = MilpSolution::infeasible(node_count, wall);
                s.status = status;
                s.log = log;
                s
            }
        }
        Some((obj, values)) => {
            let bound = match status {
                MilpStatus::Optimal => obj,
                _ => open_bound(&heap, &dfs, None).min(obj),
            };
            let gap = mip_gap(obj, bound);
            log.push(LogRecord {
                elapsed_s: wall,
                nodes: node_count,
                incumbent: obj,
                best_bound: bound,
                gap,
            });
            MilpSolution {
                values,
                objective: obj,
                best_bound: bound,
                mip_gap: gap,
                status,
                node_count,
                wall_time: wall,
                log,
            }
        }
    }
}

/// Solves with the given columns pinched to fixed values. A fixing that
/// contradicts the column bounds is reported as an error, distinct from the
/// pinched problem being infeasible.
pub fn fix_and_solve(
    problem: &MilpProblem,
    fixings: &BTreeMap<usize, f64>,
    opts: &BnbOptions,
) -> Result<MilpSolution, MilpError> {
    let fixed = problem.with_fixed(fixings.iter())?;
    Ok(solve_milp(&fixed, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::VarKind;

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MilpProblem {
        let mut p = MilpProblem::new();
        for (j, &v) in values.iter().enumerate() {
            let col = p.add_var(format!("item{j}"), 0.0, 1.0, VarKind::Binary);
            p.set_objective(col, -v);
        }
        p.add_row(
            "cap",
            weights.iter().enumerate().map(|(j, &w)| (j, w)).collect(),
            Sense::Le,
            cap,
        );
        p
    }

    #[test]
    fn knapsack_matches_exhaustive_enumeration() {
        let values = [7.0, 4.0, 3.0, 5.0, 6.0, 2.0, 9.0, 1.0];
        let weights = [5.0, 3.0, 2.0, 4.0, 5.0, 1.0, 6.0, 1.0];
        let cap = 12.0;
        let p = knapsack(&values, &weights, cap);
        let sol = solve_milp(&p, &BnbOptions::default());
        assert_eq!(sol.status, MilpStatus::Optimal);

        let mut best = 0.0f64;
        for mask in 0u32..256 {
            let (mut v, mut w) = (0.0, 0.0);
            for j in 0..8 {
                if mask & (1 << j) != 0 {
                    v += values[j];
                    w += weights[j];
                }
            }
            if w <= cap {
                best = best.max(v);
            }
        }
        assert!(
            (sol.objective - (-best)).abs() < 1e-9,
            "bnb {} vs enumeration {}",
            sol.objective,
            -best
        );
        assert!(sol.mip_gap <= 1e-9);
    }

    #[test]
    fn integral_relaxation_solves_at_root() {
        // Totally unimodular flow-style rows keep the relaxation integral.
        let mut p = MilpProblem::new();
        for j in 0..4 {
            let c = p.add_var(format!("y{j}"), 0.0, 1.0, VarKind::Binary);
            p.set_objective(c, if j % 2 == 0 { -1.0 } else { -2.0 });
        }
        p.add_row("a", vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        p.add_row("b", vec![(2, 1.0), (3, 1.0)], Sense::Le, 1.0);
        let sol = solve_milp(&p, &BnbOptions::default());
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.node_count, 1);
        assert!((sol.objective - (-4.0)).abs() < 1e-9);
    }

    #[test]
    fn infeasible_root_is_reported() {
        let mut p = MilpProblem::new();
        let x = p.add_var("x", 0.0, 1.0, VarKind::Binary);
        p.add_row("impossible", vec![(x, 1.0)], Sense::Ge, 2.0);
        let sol = solve_milp(&p, &BnbOptions::default());
        assert_eq!(sol.status, MilpStatus::Infeasible);
    }

    #[test]
    fn fix_and_solve_roundtrips_the_optimum() {
        let values = [3.0, 1.0, 4.0, 1.0, 5.0];
        let weights = [2.0, 1.0, 3.0, 2.0, 4.0];
        let p = knapsack(&values, &weights, 6.0);
        let opts = BnbOptions::default();
        let sol = solve_milp(&p, &opts);
        let fixings: BTreeMap<usize, f64> = (0..5).map(|j| (j, sol.values[j].round())).collect();
        let refixed = fix_and_solve(&p, &fixings, &opts).unwrap();
        assert!((refixed.objective - sol.objective).abs() < 1e-9);

        // An inferior forced choice cannot beat the optimum.
        let mut inferior = BTreeMap::new();
        inferior.insert(0usize, 0.0);
        inferior.insert(2usize, 0.0);
        inferior.insert(4usize, 0.0);
        let worse = fix_and_solve(&p, &inferior, &opts).unwrap();
        assert!(worse.objective >= sol.objective - 1e-9);
    }

    #[test]
    fn contradictory_fixings_error_distinctly() {
        let p = knapsack(&[1.0, 2.0], &[1.0, 1.0], 1.0);
        let first: BTreeMap<usize, f64> = [(0usize, 1.0)].into();
        let once = p.with_fixed(&first).unwrap();
        let second: BTreeMap<usize, f64> = [(0usize, 0.0)].into();
        let err = fix_and_solve(&once, &second, &BnbOptions::default()).unwrap_err();
        assert!(matches!(err, MilpError::InfeasibleFixing { .. }));
    }

    #[test]
    fn log_bounds_are_monotone() {
        let values = [7.0, 4.0, 3.0, 5.0, 6.0, 2.0, 9.0, 1.0, 8.0, 3.5];
        let weights = [5.0, 3.0, 2.0, 4.0, 5.0, 1.0, 6.0, 1.0, 7.0, 2.5];
        let p = knapsack(&values, &weights, 14.0);
        let sol = solve_milp(&p, &BnbOptions::default());
        for pair in sol.log.windows(2) {
            assert!(pair[1].incumbent <= pair[0].incumbent + 1e-9);
            assert!(pair[1].best_bound >= pair[0].best_bound - 1e-9);
        }
        assert!(sol.best_bound <= sol.objective + 1e-9);
    }
}
