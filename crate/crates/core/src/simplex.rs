//! Bounded-variable primal simplex on a dense tableau.
//!
//! Rows are normalized to `Ax + s = b` with ranged slacks (`<=` gives
//! `s in [0, inf)`, `=` gives `s in [0, 0]`, `>=` gives `s in (-inf, 0]`).
//! The initial basis is the slack basis; rows whose slack cannot absorb the
//! initial residual get an artificial column, and phase 1 minimizes the sum
//! of artificials. Pricing uses the largest-violation rule and switches to
//! Bland's rule after a run of degenerate pivots.

use crate::milp::{LpSolution, LpStatus, MilpProblem, Sense};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Primal feasibility tolerance.
    pub feas_tol: f64,
    /// Reduced-cost (optimality) tolerance.
    pub opt_tol: f64,
    /// Iteration cap; 0 picks a size-based default.
    pub max_iters: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degen_stall: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            max_iters: 0,
            degen_stall: 50,
        }
    }
}

const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum ColState {
    Basic,
    NbLower,
    NbUpper,
    /// Nonbasic free column resting at zero.
    NbFree,
}

struct Tableau {
    m: usize,
    n_struct: usize,
    width: usize,
    /// Row-major `B^{-1} [A | I | A_art]`.
    t: Vec<f64>,
    /// Basic variable values, one per row.
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Reduced costs for the current phase.
    d: Vec<f64>,
    artificial_start: usize,
    iterations: usize,
    degenerate_run: usize,
}

impl Tableau {

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            ColState::NbLower => self.lower[j],
            ColState::NbUpper => self.upper[j],
            ColState::NbFree => 0.0,
            ColState::Basic => unreachable!("basic column priced as nonbasic"),
        }
    }


    /// Recomputes the reduced-cost row `d = c - c_B B^{-1} A` for the given
    /// phase costs. Only rows with a nonzero basic cost contribute.
    fn reset_reduced_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = i * self.width;
                for j in 0..self.width {
                    self.d[j] -= cb * self.t[row + j];
                }
            }
        }
    }

    /// One pricing pass. Returns the entering column and its direction
    /// (+1 increase, -1 decrease), or None when priced out.
    fn price(&self, opt_tol: f64, bland: bool, phase2: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_viol = opt_tol;
        for j in 0..self.width {
            match self.state[j] {
                ColState::Basic => continue,
                _ => {}
            }
            if phase2 && j >= self.artificial_start {
                continue;
            }
            // Fixed columns cannot move.
            if self.upper[j] - self.lower[j] <= 1e-12 && self.state[j] != ColState::NbFree {
                continue;
            }
            let dj = self.d[j];
            let candidate = match self.state[j] {
                ColState::NbLower => {
                    if dj < -opt_tol {
                        Some((j, 1.0, -dj))
                    } else {
                        None
                    }
                }
                ColState::NbUpper => {
                    if dj > opt_tol {
                        Some((j, -1.0, dj))
                    } else {
                        None
                    }
                }
                ColState::NbFree => {
                    if dj < -opt_tol {
                        Some((j, 1.0, -dj))
                    } else if dj > opt_tol {
                        Some((j, -1.0, dj))
                    } else {
                        None
                    }
                }
                ColState::Basic => None,
            };
            if let Some((j, dir, viol)) = candidate {
                if bland {
                    return Some((j, dir));
                }
                if viol > best_viol {
                    best_viol = viol;
                    best = Some((j, dir));
                }
            }
        }
        best
    }

    /// Bounded ratio test. Returns (step, Some(limiting row)) or
    /// (step, None) for a bound flip of the entering column;
    /// step == infinity signals an unbounded direction.
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> (f64, Option<usize>) {
        let own_span = self.upper[q] - self.lower[q];
        let mut best_ratio = if own_span.is_finite() {
            own_span
        } else {
            f64::INFINITY
        };
        let mut best_row: Option<usize> = None;
        let mut best_key = f64::NEG_INFINITY; // |pivot| for stability ties
        let mut best_var = usize::MAX;
        for i in 0..self.m {
            let y = self.t[i * self.width + q];
            if y.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -dir * y; // d(xb_i)/d(step)
            let b = self.basis[i];
            let ratio = if rate > 0.0 {
                if self.upper[b].is_finite() {
                    (self.upper[b] - self.xb[i]).max(0.0) / rate
                } else {
                    continue;
                }
            } else {
                if self.lower[b].is_finite() {
                    (self.xb[i] - self.lower[b]).max(0.0) / -rate
                } else {
                    continue;
                }
            };
            let better = if ratio < best_ratio - 1e-12 {
                true
            } else if ratio <= best_ratio + 1e-12 {
                if bland {
                    b < best_var
                } else {
                    y.abs() > best_key
                }
            } else {
                false
            };
            if better {
                best_ratio = best_ratio.min(ratio);
                best_row = Some(i);
                best_key = y.abs();
                best_var = b;
            }
        }
        (best_ratio.max(0.0), best_row)
    }

    fn apply_bound_flip(&mut self, q: usize, dir: f64, step: f64) {
        for i in 0..self.m {
            let y = self.t[i * self.width + q];
            if y != 0.0 {
                self.xb[i] -= dir * step * y;
            }
        }
        self.state[q] = if dir > 0.0 {
            ColState::NbUpper
        } else {
            ColState::NbLower
        };
        if step > 1e-10 {
            self.degenerate_run = 0;
        }
    }

    fn pivot(&mut self, r: usize, q: usize, dir: f64, step: f64, scratch: &mut Vec<f64>) {
        let width = self.width;
        // Update basic values with the pre-elimination column.
        let entering_value = self.nonbasic_value(q) + dir * step;
        for i in 0..self.m {
            if i != r {
                let y = self.t[i * width + q];
                if y != 0.0 {
                    self.xb[i] -= dir * step * y;
                }
            }
        }
        let leaving = self.basis[r];
        // Record which bound the leaving variable hit.
        let rate = -dir * self.t[r * width + q];
        self.state[leaving] = if rate > 0.0 {
            ColState::NbUpper
        } else {
            ColState::NbLower
        };
        // Gauss-Jordan elimination on column q.
        let piv = self.t[r * width + q];
        let inv = 1.0 / piv;
        scratch.clear();
        scratch.extend_from_slice(&self.t[r * width..(r + 1) * width]);
        for v in scratch.iter_mut() {
            *v *= inv;
        }
        self.t[r * width..(r + 1) * width].copy_from_slice(scratch);
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * width + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * width..(i + 1) * width];
            for (a, &p) in row.iter_mut().zip(scratch.iter()) {
                *a -= f * p;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (a, &p) in self.d.iter_mut().zip(scratch.iter()) {
                *a -= f * p;
            }
        }
        self.basis[r] = q;
        self.state[q] = ColState::Basic;
        self.xb[r] = entering_value;
        if step <= 1e-10 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
    }

    /// Runs pivots until priced out. Returns None when the current phase is
    /// optimal, or an early status.
    fn optimize(&mut self, opts: &SimplexOptions, max_iters: usize, phase2: bool) -> Option<LpStatus> {
        let mut scratch = Vec::with_capacity(self.width);
        loop {
            if self.iterations >= max_iters {
                return Some(LpStatus::IterationLimit);
            }
            let bland = self.degenerate_run >= opts.degen_stall;
            let Some((q, dir)) = self.price(opts.opt_tol, bland, phase2) else {
                return None;
            };
            let (step, row) = self.ratio_test(q, dir, bland);
            if step.is_infinite() {
                return Some(LpStatus::Unbounded);
            }
            self.iterations += 1;
            match row {
                None => self.apply_bound_flip(q, dir, step),
                Some(r) => self.pivot(r, q, dir, step, &mut scratch),
            }
        }
    }
}

/// Solves the LP relaxation of `problem` (integrality markers ignored).
/// Columns pinched to a single value (branching fixings) are substituted
/// into the right-hand sides and leave the tableau entirely.
pub fn solve_lp(problem: &MilpProblem, opts: &SimplexOptions) -> LpSolution {
    let n_all = problem.num_vars();
    let m = problem.num_rows();
    let feas = opts.feas_tol;

    let mut active: Vec<usize> = Vec::with_capacity(n_all);
    let mut col_of: Vec<Option<usize>> = vec![None; n_all];
    let mut fixed_value: Vec<f64> = vec![0.0; n_all];
    for (j, v) in problem.variables.iter().enumerate() {
        if v.upper - v.lower <= 1e-12 {
            fixed_value[j] = v.lower;
        } else {
            col_of[j] = Some(active.len());
            active.push(j);
        }
    }
    let n = active.len();

    let mut lower = Vec::with_capacity(n + m);
    let mut upper = Vec::with_capacity(n + m);
    for &j in &active {
        lower.push(problem.variables[j].lower);
        upper.push(problem.variables[j].upper);
    }
    for row in &problem.rows {
        let (lo, hi) = match row.sense {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Eq => (0.0, 0.0),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
        };
        lower.push(lo);
        upper.push(hi);
    }

    // Initial nonbasic placement for active structurals.
    let mut state = vec![ColState::NbLower; n];
    for j in 0..n {
        state[j] = if lower[j].is_finite() {
            ColState::NbLower
        } else if upper[j].is_finite() {
            ColState::NbUpper
        } else {
            ColState::NbFree
        };
    }
    let value_of = |j: usize, st: ColState| -> f64 {
        match st {
            ColState::NbLower => lower[j],
            ColState::NbUpper => upper[j],
            _ => 0.0,
        }
    };

    // Row residuals at the initial point decide which rows need an
    // artificial column. Fixed columns contribute as constants.
    let mut residual = vec![0.0f64; m];
    for (i, row) in problem.rows.iter().enumerate() {
        let mut act = 0.0;
        for &(c, a) in &row.coeffs {
            act += a * match col_of[c] {
                Some(k) => value_of(k, state[k]),
                None => fixed_value[c],
            };
        }
        residual[i] = row.rhs - act;
    }
    let mut art_rows: Vec<(usize, f64)> = Vec::new(); // (row, sign)
    for i in 0..m {
        let (lo, hi) = (lower[n + i], upper[n + i]);
        let r = residual[i];
        if r < lo - feas || r > hi + feas {
            let clamp = r.clamp(lo.max(-f64::MAX), hi.min(f64::MAX));
            art_rows.push((i, (r - clamp).signum()));
        }
    }
    let n_art = art_rows.len();
    let width = n + m + n_art;

    let mut tab = Tableau {
        m,
        n_struct: n,
        width,
        t: vec![0.0; m * width],
        xb: vec![0.0; m],
        basis: vec![0; m],
        state: {
            let mut s = state.clone();
            s.extend(vec![ColState::NbLower; m + n_art]);
            s
        },
        lower,
        upper,
        d: vec![0.0; width],
        artificial_start: n + m,
        iterations: 0,
        degenerate_run: 0,
    };
    for (k, _) in art_rows.iter().enumerate() {
        tab.lower.push(0.0);
        tab.upper.push(f64::INFINITY);
        let _ = k;
    }

    // Fill A (active columns only) and slacks; mark slack basics.
    for (i, row) in problem.rows.iter().enumerate() {
        let base = i * width;
        for &(c, a) in &row.coeffs {
            if let Some(k) = col_of[c] {
                tab.t[base + k] += a;
            }
        }
        tab.t[base + n + i] = 1.0;
        tab.basis[i] = n + i;
        tab.state[n + i] = ColState::Basic;
        tab.xb[i] = residual[i];
    }
    // Rows needing artificials: slack moves to its clamped bound, the
    // artificial becomes basic, and the row is scaled so the artificial's
    // tableau column is +1.
    for (k, &(i, sign)) in art_rows.iter().enumerate() {
        let slack = n + i;
        let (lo, hi) = (tab.lower[slack], tab.upper[slack]);
        let clamp = residual[i].clamp(lo.max(-f64::MAX), hi.min(f64::MAX));
        tab.state[slack] = if clamp == lo && lo.is_finite() {
            ColState::NbLower
        } else {
            ColState::NbUpper
        };
        let art = n + m + k;
        let base = i * width;
        tab.t[base + art] = sign;
        if sign < 0.0 {
            for j in 0..width {
                tab.t[base + j] = -tab.t[base + j];
            }
        }
        // After moving the slack out of the basis the remaining residual is
        // carried by the artificial.
        tab.basis[i] = art;
        tab.state[art] = ColState::Basic;
        // The clamped slack is nonbasic; the artificial carries what is left
        // of the residual, scaled positive.
        tab.xb[i] = (residual[i] - clamp) * sign;
    }

    let max_iters = if opts.max_iters > 0 {
        opts.max_iters
    } else {
        5_000 + 40 * (m + n)
    };

    // Phase 1.
    if n_art > 0 {
        let mut cost1 = vec![0.0; width];
        for j in n + m..width {
            cost1[j] = 1.0;
        }
        tab.reset_reduced_costs(&cost1);
        if let Some(status) = tab.optimize(opts, max_iters, false) {
            return finish(problem, &tab, status, &active, &fixed_value);
        }
        let infeas: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= n + m)
            .map(|i| tab.xb[i].max(0.0))
            .sum();
        if infeas > feas * 10.0 {
            return finish(problem, &tab, LpStatus::Infeasible, &active, &fixed_value);
        }
        // Pin artificials at zero for phase 2.
        for j in n + m..width {
            tab.upper[j] = 0.0;
        }
    }

    // Phase 2.
    let mut cost2 = vec![0.0; width];
    for (k, &j) in active.iter().enumerate() {
        cost2[k] = problem.objective[j];
    }
    tab.reset_reduced_costs(&cost2);
    let status = match tab.optimize(opts, max_iters, true) {
        None => LpStatus::Optimal,
        Some(s) => s,
    };
    finish(problem, &tab, status, &active, &fixed_value)
}

fn finish(
    problem: &MilpProblem,
    tab: &Tableau,
    status: LpStatus,
    active: &[usize],
    fixed_value: &[f64],
) -> LpSolution {
    let n = tab.n_struct;
    let mut values = fixed_value.to_vec();
    for (k, &j) in active.iter().enumerate() {
        values[j] = match tab.state[k] {
            ColState::Basic => 0.0, // filled below
            ColState::NbLower => tab.lower[k],
            ColState::NbUpper => tab.upper[k],
            ColState::NbFree => 0.0,
        };
    }
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            values[active[b]] = tab.xb[i];
        }
    }
    let mut duals = vec![0.0; tab.m];
    for i in 0..tab.m {
        duals[i] = -tab.d[n + i];
    }
    let objective = if status == LpStatus::Optimal {
        problem.objective_value(&values)
    } else if status == LpStatus::Unbounded {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    LpSolution {
        values,
        objective,
        status,
        iterations: tab.iterations,
        duals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{MilpProblem, Sense, VarKind};

    fn lp() -> SimplexOptions {
        SimplexOptions::default()
    }

    #[test]
    fn textbook_vertex() {
        // max x1 + x2 s.t. x1 + x2 <= 1, x >= 0  -> objective 1.0
        let mut p = MilpProblem::new();
        let x1 = p.add_var("x1", 0.0, f64::INFINITY, VarKind::Continuous);
        let x2 = p.add_var("x2", 0.0, f64::INFINITY, VarKind::Continuous);
        p.set_objective(x1, -1.0);
        p.set_objective(x2, -1.0);
        p.add_row("cap", vec![(x1, 1.0), (x2, 1.0)], Sense::Le, 1.0);
        let sol = solve_lp(&p, &lp());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - (-1.0)).abs() < 1e-9, "{}", sol.objective);
    }

    #[test]
    fn infeasible_box() {
        // x1 <= -1 and x1 >= 0 has an empty polytope.
        let mut p = MilpProblem::new();
        let x1 = p.add_var("x1", 0.0, f64::INFINITY, VarKind::Continuous);
        p.add_row("neg", vec![(x1, 1.0)], Sense::Le, -1.0);
        let sol = solve_lp(&p, &lp());
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut p = MilpProblem::new();
        let x1 = p.add_var("x1", 0.0, f64::INFINITY, VarKind::Continuous);
        p.set_objective(x1, -1.0);
        p.add_row("floor", vec![(x1, 1.0)], Sense::Ge, 1.0);
        let sol = solve_lp(&p, &lp());
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_ranged_bounds() {
        // min -x - 2y  s.t. x + y = 4, x - y >= -2, 0<=x<=3, 0<=y<=3
        // optimum: y=3, x=1 -> -7
        let mut p = MilpProblem::new();
        let x = p.add_var("x", 0.0, 3.0, VarKind::Continuous);
        let y = p.add_var("y", 0.0, 3.0, VarKind::Continuous);
        p.set_objective(x, -1.0);
        p.set_objective(y, -2.0);
        p.add_row("sum", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0);
        p.add_row("diff", vec![(x, 1.0), (y, -1.0)], Sense::Ge, -2.0);
        let sol = solve_lp(&p, &lp());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - (-7.0)).abs() < 1e-8);
        assert!((sol.values[0] - 1.0).abs() < 1e-8);
        assert!((sol.values[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn negative_lower_bounds() {
        // min x + y with x >= -5, y >= -3, x + y >= -6 -> -6 on the row.
        let mut p = MilpProblem::new();
        let x = p.add_var("x", -5.0, 5.0, VarKind::Continuous);
        let y = p.add_var("y", -3.0, 3.0, VarKind::Continuous);
        p.set_objective(x, 1.0);
        p.set_objective(y, 1.0);
        p.add_row("floor", vec![(x, 1.0), (y, 1.0)], Sense::Ge, -6.0);
        let sol = solve_lp(&p, &lp());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - (-6.0)).abs() < 1e-8);
    }

    /// Brute-force oracle: enumerate every choice of m basic columns among
    /// structurals+slacks and every lower/upper placement of the nonbasics,
    /// solve the square system, and keep the best feasible point.
    fn enumerate_optimum(p: &MilpProblem) -> Option<f64> {
        let n = p.num_vars();
        let m = p.num_rows();
        let total = n + m;
        // Dense A with slacks.
        let mut a = vec![vec![0.0f64; total]; m];
        let mut lo = vec![0.0; total];
        let mut hi = vec![0.0; total];
        for j in 0..n {
            lo[j] = p.variables[j].lower;
            hi[j] = p.variables[j].upper;
        }
        for (i, row) in p.rows.iter().enumerate() {
            for &(c, v) in &row.coeffs {
                a[i][c] += v;
            }
            a[i][n + i] = 1.0;
            let (l, h) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Eq => (0.0, 0.0),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lo[n + i] = l;
            hi[n + i] = h;
        }
        let mut best: Option<f64> = None;
        let cols: Vec<usize> = (0..total).collect();
        // All size-m subsets.
        let mut subset = vec![0usize; m];
        fn visit(
            cols: &[usize],
            k: usize,
            start: usize,
            subset: &mut Vec<usize>,
            f: &mut dyn FnMut(&[usize]),
        ) {
            if k == 0 {
                f(subset);
                return;
            }
            for i in start..=cols.len() - k {
                let pos = subset.len() - k;
                subset[pos] = cols[i];
                visit(cols, k - 1, i + 1, subset, f);
            }
        }
        let rhs: Vec<f64> = p.rows.iter().map(|r| r.rhs).collect();
        let mut check = |basis: &[usize]| {
            let nb: Vec<usize> = (0..total).filter(|j| !basis.contains(j)).collect();
            // Nonbasic bound combinations.
            for mask in 0..(1u32 << nb.len()) {
                let mut xval = vec![0.0; total];
                let mut ok = true;
                for (bit, &j) in nb.iter().enumerate() {
                    let at_upper = mask & (1 << bit) != 0;
                    let v = if at_upper { hi[j] } else { lo[j] };
                    if !v.is_finite() {
                        ok = false;
                        break;
                    }
                    xval[j] = v;
                }
                if !ok {
                    continue;
                }
                // Solve B xB = b - A_N x_N by Gaussian elimination.
                let mut mat = vec![vec![0.0f64; m + 1]; m];
                for i in 0..m {
                    for (k, &j) in basis.iter().enumerate() {
                        mat[i][k] = a[i][j];
                    }
                    let mut r = rhs[i];
                    for &j in &nb {
                        r -= a[i][j] * xval[j];
                    }
                    mat[i][m] = r;
                }
                let mut singular = false;
                for col in 0..m {
                    let piv = (col..m).max_by(|&x, &y| {
                        mat[x][col].abs().partial_cmp(&mat[y][col].abs()).unwrap()
                    });
                    let piv = piv.unwrap();
                    if mat[piv][col].abs() < 1e-9 {
                        singular = true;
                        break;
                    }
                    mat.swap(col, piv);
                    let d = mat[col][col];
                    for k in col..=m {
                        mat[col][k] /= d;
                    }
                    for r in 0..m {
                        if r != col && mat[r][col] != 0.0 {
                            let f = mat[r][col];
                            for k in col..=m {
                                mat[r][k] -= f * mat[col][k];
                            }
                        }
                    }
                }
                if singular {
                    continue;
                }
                for (k, &j) in basis.iter().enumerate() {
                    xval[j] = mat[k][m];
                }
                let feasible = (0..total)
                    .all(|j| xval[j] >= lo[j] - 1e-7 && xval[j] <= hi[j] + 1e-7);
                if feasible {
                    let obj: f64 = (0..n).map(|j| p.objective[j] * xval[j]).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        };
        visit(&cols, m, 0, &mut subset, &mut check);
        best
    }

    #[test]
    fn random_instances_match_vertex_enumeration() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        for trial in 0..25 {
            let mut p = MilpProblem::new();
            let n = 3;
            for j in 0..n {
                let name = format!("v{j}");
                p.add_var(name, 0.0, rng.random_range(1.0..5.0), VarKind::Continuous);
            }
            for j in 0..n {
                p.set_objective(j, rng.random_range(-3.0..3.0));
            }
            for i in 0..3 {
                let coeffs: Vec<(usize, f64)> = (0..n)
                    .map(|j| (j, rng.random_range(-2.0..2.0)))
                    .collect();
                let sense = match i % 3 {
                    0 => Sense::Le,
                    1 => Sense::Ge,
                    _ => Sense::Eq,
                };
                let rhs = rng.random_range(-2.0..4.0);
                p.add_row(format!("r{i}"), coeffs, sense, rhs);
            }
            let sol = solve_lp(&p, &lp());
            let oracle = enumerate_optimum(&p);
            match (sol.status, oracle) {
                (LpStatus::Optimal, Some(best)) => {
                    assert!(
                        (sol.objective - best).abs() < 1e-6,
                        "trial {trial}: simplex {} vs oracle {best}",
                        sol.objective
                    );
                    assert!(p.check_point(&sol.values, 1e-6).is_empty());
                }
                (LpStatus::Infeasible, None) => {}
                (s, o) => panic!("trial {trial}: simplex {s:?} vs oracle {o:?}"),
            }
        }
    }

    #[test]
    fn dual_certificate_prices_out() {
        let mut p = MilpProblem::new();
        let x = p.add_var("x", 0.0, 4.0, VarKind::Continuous);
        let y = p.add_var("y", 0.0, 4.0, VarKind::Continuous);
        p.set_objective(x, -2.0);
        p.set_objective(y, -3.0);
        p.add_row("r0", vec![(x, 1.0), (y, 2.0)], Sense::Le, 6.0);
        p.add_row("r1", vec![(x, 2.0), (y, 1.0)], Sense::Le, 6.0);
        let sol = solve_lp(&p, &lp());
        assert_eq!(sol.status, LpStatus::Optimal);
        // Reduced cost c_j - y'a_j must be >= -tol for at-lower columns and
        // <= tol for at-upper columns (minimization).
        for (j, var) in p.variables.iter().enumerate() {
            let mut red = p.objective[j];
            for (i, row) in p.rows.iter().enumerate() {
                for &(c, a) in &row.coeffs {
                    if c == j {
                        red -= sol.duals[i] * a;
                    }
                }
            }
            let v = sol.values[j];
            if (v - var.lower).abs() < 1e-7 {
                assert!(red >= -1e-6, "col {j} at lower with reduced cost {red}");
            } else if (v - var.upper).abs() < 1e-7 {
                assert!(red <= 1e-6, "col {j} at upper with reduced cost {red}");
            } else {
                assert!(red.abs() <= 1e-6, "interior col {j} with reduced cost {red}");
            }
        }
    }

    #[test]
    fn determinism_bit_for_bit() {
        let mut p = MilpProblem::new();
        for j in 0..6 {
            p.add_var(format!("x{j}"), 0.0, 2.0, VarKind::Continuous);
        }
        for j in 0..6 {
            p.set_objective(j, if j % 2 == 0 { -1.0 } else { -2.0 });
        }
        p.add_row("a", vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 3.0);
        p.add_row("b", vec![(3, 1.0), (4, 1.0), (5, 1.0)], Sense::Le, 2.5);
        p.add_row("c", vec![(0, 1.0), (3, 1.0)], Sense::Eq, 1.0);
        let s1 = solve_lp(&p, &lp());
        let s2 = solve_lp(&p, &lp());
        assert_eq!(s1.objective.to_bits(), s2.objective.to_bits());
        assert_eq!(s1.values.len(), s2.values.len());
        for (a, b) in s1.values.iter().zip(&s2.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
