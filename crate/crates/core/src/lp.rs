//! Dense revised simplex for small linear programs
//!
//! ```text
//! minimize cᵀx  subject to  A x <= b,  l <= x <= u
//! ```
//!
//! Bounded variables are handled explicitly (nonbasic variables sit at a
//! bound), the basis inverse is kept dense and refactorized periodically.
//! Pricing is Dantzig's rule; after a run of degenerate pivots it falls back
//! to Bland's smallest-index rule until the objective moves again. All ties
//! are broken by smallest variable index, so solves are reproducible.

use nalgebra::DMatrix;

/// Larger bases are only updated by pivoting, never re-inverted.
const REINVERT_MAX_ROWS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub degenerate_before_bland: usize,
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_every: 64,
            degenerate_before_bland: 30,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// `y = c_Bᵀ B⁻¹`; non-positive for binding `<=` rows at a minimum.
    pub row_duals: Vec<f64>,
    /// `c_j - yᵀA_j` for the structural variables.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    start_upper: Vec<bool>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(cost.len(), lower.len());
        assert_eq!(cost.len(), upper.len());
        let n = cost.len();
        Self {
            cost,
            lower,
            upper,
            start_upper: vec![false; n],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds `Σ coeffs · x <= rhs` and returns its row index.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.cost.len()));
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Starts variable `j` at its upper bound instead of its lower bound.
    pub fn start_at_upper(&mut self, j: usize) {
        self.start_upper[j] = true;
    }

    pub fn solve(&self, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
        Simplex::build(self, opts).run()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

struct Simplex<'a> {
    opts: &'a SimplexOptions,
    m: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    artificials: Vec<usize>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn build(lp: &LinearProgram, opts: &'a SimplexOptions) -> Self {
        let m = lp.rows.len();
        let n = lp.cost.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in row {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        let mut x = vec![0.0; n];
        let mut status = vec![Status::Free; n];
        for j in 0..n {
            let (l, u) = (lp.lower[j], lp.upper[j]);
            if lp.start_upper[j] && u.is_finite() || !l.is_finite() && u.is_finite() {
                x[j] = u;
                status[j] = Status::AtUpper;
            } else if l.is_finite() {
                x[j] = l;
                status[j] = Status::AtLower;
            }
        }
        let mut residual = lp.rhs.clone();
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                residual[i] -= v * x[j];
            }
        }

        let mut cost = lp.cost.clone();
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut basis = Vec::with_capacity(m);
        let mut binv = vec![0.0; m * m];
        let mut artificials = Vec::new();
        // slacks n..n+m
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
            cost.push(0.0);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(residual[i].max(0.0));
            status.push(Status::AtLower);
        }
        for i in 0..m {
            let slack = n + i;
            if residual[i] >= 0.0 {
                status[slack] = Status::Basic(i);
                basis.push(slack);
                binv[i * m + i] = 1.0;
            } else {
                let art = cols.len();
                cols.push(vec![(i, -1.0)]);
                cost.push(0.0);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                x.push(-residual[i]);
                status.push(Status::Basic(i));
                basis.push(art);
                binv[i * m + i] = -1.0;
                artificials.push(art);
            }
        }
        Self {
            opts,
            m,
            n_struct: n,
            cols,
            cost,
            lower,
            upper,
            rhs: lp.rhs.clone(),
            x,
            status,
            basis,
            binv,
            artificials,
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn run(mut self) -> Result<LpSolution, LpError> {
        if !self.artificials.is_empty() {
            let real_cost = std::mem::replace(&mut self.cost, vec![0.0; self.cols.len()]);
            for &a in &self.artificials {
                self.cost[a] = 1.0;
            }
            self.optimize()?;
            let infeasibility: f64 = self.artificials.iter().map(|&a| self.x[a]).sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0_f64, |acc, b| acc.max(b.abs()));
            if infeasibility > self.opts.feasibility_tol * scale {
                return Err(LpError::Infeasible);
            }
            self.cost = real_cost;
            for &a in &self.artificials {
                self.upper[a] = 0.0;
                if !matches!(self.status[a], Status::Basic(_)) {
                    self.x[a] = 0.0;
                    self.status[a] = Status::AtLower;
                }
            }
        }
        self.optimize()?;
        Ok(self.solution())
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &b) in self.basis.iter().enumerate() {
            let c = self.cost[b];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, r) in y.iter_mut().zip(row) {
                    *yk += c * r;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(i, v)| y[i] * v).sum::<f64>()
    }

    fn optimize(&mut self) -> Result<(), LpError> {
        let limit = self
            .opts
            .max_iterations
            .unwrap_or(1000 + 50 * (self.m + self.cols.len()));
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= limit {
                return Err(LpError::IterationLimit);
            }
            let y = self.duals();
            let bland = degenerate_run >= self.opts.degenerate_before_bland;
            let Some((q, dir)) = self.price(&y, bland) else {
                return Ok(());
            };

            let alpha = self.column_in_basis(q);
            let (step, leaving) = self.ratio_test(q, dir, &alpha)?;
            self.iterations += 1;
            degenerate_run = if step <= 1e-12 { degenerate_run + 1 } else { 0 };

            self.x[q] += dir * step;
            for (i, &b) in self.basis.iter().enumerate() {
                self.x[b] -= dir * step * alpha[i];
            }
            match leaving {
                None => {
                    self.status[q] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    self.status[out] = if to_upper { Status::AtUpper } else { Status::AtLower };
                    self.basis[r] = q;
                    self.status[q] = Status::Basic(r);
                    self.pivot(r, &alpha);
                    self.since_refactor += 1;
                    if self.since_refactor >= self.opts.refactor_every {
                        self.refactor();
                    }
                }
            }
        }
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn price(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols.len() {
            let dir = match self.status[j] {
                Status::Basic(_) => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                status => {
                    let d = self.reduced_cost(j, y);
                    match status {
                        Status::AtLower if d < -tol => (1.0, -d),
                        Status::AtUpper if d > tol => (-1.0, d),
                        Status::Free if d.abs() > tol => (-d.signum(), d.abs()),
                        _ => continue,
                    }
                }
            };
            if bland {
                return Some((j, dir.0));
            }
            if best.is_none_or(|(_, _, score)| dir.1 > score) {
                best = Some((j, dir.0, dir.1));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn column_in_basis(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, v) in &self.cols[q] {
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[i * m + r] * v;
            }
        }
        alpha
    }

    /// Step length and, unless the entering variable just flips bounds,
    /// the leaving row and whether the leaving variable ends at its upper bound.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64]) -> Result<(f64, Option<(usize, bool)>), LpError> {
        let mut best_step = self.upper[q] - self.lower[q];
        let mut leaving: Option<(usize, bool)> = None;
        let mut leaving_var = usize::MAX;
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= self.opts.pivot_tol {
                continue;
            }
            let b = self.basis[i];
            let rate = dir * a;
            let (limit, to_upper) = if rate > 0.0 {
                if !self.lower[b].is_finite() {
                    continue;
                }
                ((self.x[b] - self.lower[b]) / rate, false)
            } else {
                if !self.upper[b].is_finite() {
                    continue;
                }
                ((self.upper[b] - self.x[b]) / -rate, true)
            };
            let limit = limit.max(0.0);
            let tie_tol = if best_step.is_finite() {
                1e-12 * (1.0 + best_step.abs())
            } else {
                0.0
            };
            let tie = (limit - best_step).abs() <= tie_tol;
            if limit < best_step - tie_tol || tie && leaving.is_some() && b < leaving_var {
                best_step = limit;
                leaving = Some((i, to_upper));
                leaving_var = b;
            }
        }
        if !best_step.is_finite() {
            return Err(LpError::Unbounded);
        }
        Ok((best_step, leaving))
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let inv = 1.0 / alpha[r];
        for k in 0..m {
            self.binv[r * m + k] *= inv;
        }
        let (head, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, tail) = rest.split_at_mut(m);
        for (i, row) in head.chunks_exact_mut(m).enumerate() {
            eliminate(row, pivot_row, alpha[i]);
        }
        for (off, row) in tail.chunks_exact_mut(m).enumerate() {
            eliminate(row, pivot_row, alpha[r + 1 + off]);
        }
    }

    /// Rebuilds `B⁻¹` from scratch (small bases only: the inversion is cubic)
    /// and recomputes the basic values.
    fn refactor(&mut self) {
        self.since_refactor = 0;
        let m = self.m;
        if m == 0 {
            return;
        }
        if m <= REINVERT_MAX_ROWS {
            self.reinvert();
        }
        let mut residual = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if matches!(self.status[j], Status::Basic(_)) {
                continue;
            }
            for &(i, v) in col {
                residual[i] -= v * self.x[j];
            }
        }
        for (pos, &var) in self.basis.iter().enumerate() {
            self.x[var] = (0..m).map(|k| self.binv[pos * m + k] * residual[k]).sum();
        }
    }

    fn reinvert(&mut self) {
        let m = self.m;
        let mut b = DMatrix::<f64>::zeros(m, m);
        for (pos, &var) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[var] {
                b[(i, pos)] = v;
            }
        }
        let Some(inv) = b.try_inverse() else {
            return;
        };
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = inv[(i, k)];
            }
        }
    }

    fn solution(mut self) -> LpSolution {
        self.refactor();
        let y = self.duals();
        let n = self.n_struct;
        let mut x: Vec<f64> = self.x[..n].to_vec();
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
        let reduced_costs = (0..n).map(|j| self.reduced_cost(j, &y)).collect();
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        LpSolution {
            x,
            objective,
            row_duals: y,
            reduced_costs,
            iterations: self.iterations,
        }
    }
}

fn eliminate(row: &mut [f64], pivot_row: &[f64], factor: f64) {
    if factor != 0.0 {
        for (a, p) in row.iter_mut().zip(pivot_row) {
            *a -= factor * p;
        }
    }
}
