//! Dense bounded-variable primal simplex (two phases) with exact duals from
//! the final basis. Sized for models with at most a few hundred rows.

use alloc::vec;
use alloc::vec::Vec;

use super::{LinearModel, ObjSense, RowSense, SolveOutcome, SolveStats, SolveStatus, SolverError};

#[derive(Debug, Clone)]
pub struct DenseSimplex {
    /// Reduced-cost optimality tolerance.
    pub opt_tol: f64,
    /// Primal feasibility tolerance (phase-one residual, scaled).
    pub feas_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub max_iterations: u64,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self {
            opt_tol: 1e-9,
            feas_tol: 1e-9,
            pivot_tol: 1e-10,
            bland_after: 25,
            max_iterations: 200_000,
        }
    }
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Row-major `m x ncols`, equal to `B^-1 A`.
    t: Vec<f64>,
    /// Reduced costs for the active phase.
    d: Vec<f64>,
    basic: Vec<usize>,
    is_basic: Vec<bool>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    iterations: u64,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn reset_costs(&mut self, cost: &[f64]) {
        for j in 0..self.ncols {
            let mut dj = cost[j];
            for i in 0..self.m {
                let a = self.at(i, j);
                if a != 0.0 {
                    dj -= cost[self.basic[i]] * a;
                }
            }
            self.d[j] = if self.is_basic[j] { 0.0 } else { dj };
        }
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let n = self.ncols;
        let piv = self.t[p * n + q];
        for v in &mut self.t[p * n..(p + 1) * n] {
            *v /= piv;
        }
        let (before, rest) = self.t.split_at_mut(p * n);
        let (prow, after) = rest.split_at_mut(n);
        for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = row[q];
            if f != 0.0 {
                for (a, &b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (a, &b) in self.d.iter_mut().zip(prow.iter()) {
                *a -= f * b;
            }
        }
        self.d[q] = 0.0;
        let leaving = self.basic[p];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basic[p] = q;
    }

    fn run(&mut self, cfg: &DenseSimplex) -> Result<Phase, SolverError> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= cfg.max_iterations {
                return Err(SolverError::IterationLimit);
            }
            let bland = degenerate_run >= cfg.bland_after;
            // entering variable
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.ncols {
                if self.is_basic[j] {
                    continue;
                }
                let dj = self.d[j];
                let dir = if dj < -cfg.opt_tol && self.x[j] < self.upper[j] - cfg.feas_tol {
                    1.0
                } else if dj > cfg.opt_tol && self.x[j] > self.lower[j] + cfg.feas_tol {
                    -1.0
                } else {
                    continue;
                };
                match enter {
                    None => enter = Some((j, dir)),
                    Some((k, _)) if !bland && dj.abs() > self.d[k].abs() => enter = Some((j, dir)),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((q, dir)) = enter else {
                return Ok(Phase::Optimal);
            };
            self.iterations += 1;

            // ratio test
            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, f64, f64)> = None; // (row, bound hit, |alpha|)
            for i in 0..self.m {
                let alpha = self.at(i, q);
                let delta = dir * alpha;
                let b = self.basic[i];
                let (limit, bound) = if delta > cfg.pivot_tol && self.lower[b].is_finite() {
                    (((self.x[b] - self.lower[b]) / delta).max(0.0), self.lower[b])
                } else if delta < -cfg.pivot_tol && self.upper[b].is_finite() {
                    (((self.upper[b] - self.x[b]) / -delta).max(0.0), self.upper[b])
                } else {
                    continue;
                };
                let better = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 {
                    match leave {
                        // a pivot is preferred over a bound flip on ties
                        None => true,
                        Some((r, _, _)) if bland => b < self.basic[r],
                        Some((_, _, a)) => alpha.abs() > a,
                    }
                } else {
                    false
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((i, bound, alpha.abs()));
                }
            }
            if !theta.is_finite() {
                return Ok(Phase::Unbounded);
            }
            if theta > 1e-12 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }

            let step = dir * theta;
            self.x[q] += step;
            for i in 0..self.m {
                let a = self.at(i, q);
                if a != 0.0 {
                    self.x[self.basic[i]] -= step * a;
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((p, bound, _)) => {
                    let out = self.basic[p];
                    self.pivot(p, q);
                    self.x[out] = bound;
                }
            }
        }
    }
}

/// Dense LU with partial pivoting; solves `M z = rhs` (or `M^T z = rhs`).
fn dense_solve(mut mat: Vec<f64>, n: usize, rhs: &[f64], transpose: bool) -> Option<Vec<f64>> {
    if transpose {
        let mut tr = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                tr[j * n + i] = mat[i * n + j];
            }
        }
        mat = tr;
    }
    let mut b = rhs.to_vec();
    for col in 0..n {
        let p = (col..n).max_by(|&a, &c| mat[a * n + col].abs().total_cmp(&mat[c * n + col].abs()))?;
        if mat[p * n + col].abs() < 1e-14 {
            return None;
        }
        if p != col {
            for k in 0..n {
                mat.swap(p * n + k, col * n + k);
            }
            b.swap(p, col);
        }
        let piv = mat[col * n + col];
        for r in col + 1..n {
            let f = mat[r * n + col] / piv;
            if f != 0.0 {
                for k in col..n {
                    mat[r * n + k] -= f * mat[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= mat[r * n + k] * z[k];
        }
        z[r] = s / mat[r * n + r];
    }
    Some(z)
}

impl DenseSimplex {
    pub fn solve(&self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        self.solve_with_bounds(model, None)
    }

    /// Solves `model` with its variable bounds optionally replaced.
    pub fn solve_with_bounds(
        &self,
        model: &LinearModel,
        bounds: Option<(&[f64], &[f64])>,
    ) -> Result<SolveOutcome, SolverError> {
        let m = model.rows.len();
        let n = model.vars.len();
        let slack_rows: Vec<usize> = (0..m).filter(|&r| model.rows[r].sense != RowSense::Eq).collect();
        let ns = slack_rows.len();
        let ncols = n + ns + m;
        let art0 = n + ns;

        // dense constraint matrix [A | S] (artificials handled separately)
        let mut a = vec![0.0; m * (n + ns)];
        let w = n + ns;
        for (r, row) in model.rows.iter().enumerate() {
            for &(v, coef) in &row.terms {
                a[r * w + v.0] += coef;
            }
        }
        let mut lower = vec![0.0; ncols];
        let mut upper = vec![f64::INFINITY; ncols];
        for (j, v) in model.vars.iter().enumerate() {
            let (lo, hi) = match bounds {
                Some((l, u)) => (l[j], u[j]),
                None => (v.lower, v.upper),
            };
            if lo > hi + self.feas_tol {
                return Ok(SolveOutcome::not_optimal(SolveStatus::Infeasible, SolveStats::default()));
            }
            lower[j] = lo;
            upper[j] = hi.max(lo);
        }
        for (s, &r) in slack_rows.iter().enumerate() {
            a[r * w + n + s] = 1.0;
            if model.rows[r].sense == RowSense::Ge {
                lower[n + s] = f64::NEG_INFINITY;
                upper[n + s] = 0.0;
            }
        }
        let mut x = vec![0.0; ncols];
        for j in 0..n + ns {
            x[j] = if lower[j].is_finite() {
                lower[j]
            } else if upper[j].is_finite() {
                upper[j]
            } else {
                0.0
            };
        }
        let mut sign = vec![1.0; m];
        let mut t = vec![0.0; m * ncols];
        for r in 0..m {
            let resid = model.rows[r].rhs - (0..w).map(|j| a[r * w + j] * x[j]).sum::<f64>();
            sign[r] = if resid < 0.0 { -1.0 } else { 1.0 };
            x[art0 + r] = resid.abs();
            for j in 0..w {
                t[r * ncols + j] = sign[r] * a[r * w + j];
            }
            t[r * ncols + art0 + r] = 1.0;
        }
        let basic: Vec<usize> = (art0..ncols).collect();
        let mut is_basic = vec![false; ncols];
        for &b in &basic {
            is_basic[b] = true;
        }
        let mut tab = Tableau {
            m,
            ncols,
            t,
            d: vec![0.0; ncols],
            basic,
            is_basic,
            x,
            lower,
            upper,
            iterations: 0,
        };

        // phase one
        let mut cost1 = vec![0.0; ncols];
        cost1[art0..].fill(1.0);
        tab.reset_costs(&cost1);
        if let Phase::Unbounded = tab.run(self)? {
            return Err(SolverError::Backend("phase one reported unbounded".into()));
        }
        let scale = model.rows.iter().fold(1.0f64, |s, r| s.max(r.rhs.abs()));
        let infeas: f64 = tab.x[art0..].iter().sum();
        let stats = |tab: &Tableau| SolveStats {
            iterations: tab.iterations,
            ..SolveStats::default()
        };
        if infeas > 1e-7 * scale {
            return Ok(SolveOutcome::not_optimal(SolveStatus::Infeasible, stats(&tab)));
        }
        for j in art0..ncols {
            tab.lower[j] = 0.0;
            tab.upper[j] = 0.0;
            if !tab.is_basic[j] {
                tab.x[j] = 0.0;
            }
        }

        // phase two (always minimize internally)
        let flip = if model.sense == ObjSense::Maximize { -1.0 } else { 1.0 };
        let mut cost2 = vec![0.0; ncols];
        for (j, c) in model.objective_dense().into_iter().enumerate() {
            cost2[j] = flip * c;
        }
        tab.reset_costs(&cost2);
        if let Phase::Unbounded = tab.run(self)? {
            return Ok(SolveOutcome::not_optimal(SolveStatus::Unbounded, stats(&tab)));
        }

        // refine basic values and compute duals from the final basis
        let column = |j: usize, r: usize| -> f64 {
            if j < w {
                a[r * w + j]
            } else {
                sign[j - art0] * if r == j - art0 { 1.0 } else { 0.0 }
            }
        };
        let mut bmat = vec![0.0; m * m];
        for r in 0..m {
            for (c, &j) in tab.basic.iter().enumerate() {
                bmat[r * m + c] = column(j, r);
            }
        }
        let mut rhs: Vec<f64> = model.rows.iter().map(|r| r.rhs).collect();
        for j in 0..ncols {
            if !tab.is_basic[j] && tab.x[j] != 0.0 {
                for (r, v) in rhs.iter_mut().enumerate() {
                    *v -= column(j, r) * tab.x[j];
                }
            }
        }
        let y = if m > 0 {
            if let Some(xb) = dense_solve(bmat.clone(), m, &rhs, false) {
                for (c, &j) in tab.basic.iter().enumerate() {
                    tab.x[j] = xb[c];
                }
            }
            let cb: Vec<f64> = tab.basic.iter().map(|&j| cost2[j]).collect();
            dense_solve(bmat, m, &cb, true).ok_or_else(|| SolverError::Backend("singular final basis".into()))?
        } else {
            Vec::new()
        };

        let values: Vec<f64> = tab.x[..n].to_vec();
        let mut reduced = vec![0.0; n];
        for j in 0..n {
            let mut rj = cost2[j];
            for r in 0..m {
                rj -= a[r * w + j] * y[r];
            }
            reduced[j] = flip * rj;
        }
        let row_duals: Vec<f64> = y.iter().map(|v| flip * v).collect();
        Ok(SolveOutcome {
            status: SolveStatus::Optimal,
            objective: model.objective_value(&values),
            values,
            row_duals: Some(row_duals),
            reduced_costs: Some(reduced),
            stats: stats(&tab),
        })
    }
}
