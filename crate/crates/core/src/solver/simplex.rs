//! Dense revised simplex for bounded-variable linear programs.
//!
//! Solves
//!
//! ```text
//! minimize    c^T x
//! subject to  A x = b,   l <= x <= u
//! ```
//!
//! where bounds may be infinite (free variables are supported natively).
//! The basis inverse is kept explicitly and updated by elementary row
//! operations, with a fresh LU refactorization every [`REFACTOR_EVERY`]
//! pivots and at termination. Phase 1 starts from a crash basis made of
//! unit columns where possible and artificial variables elsewhere.
//!
//! Every step is deterministic: the same program and options produce the
//! same sequence of pivots and a bit-identical vertex.

use serde::{Deserialize, Serialize};

use crate::linalg::{Lu, Matrix};

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const DRIVE_OUT_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots after which Dantzig pricing falls back to
/// Bland's rule until progress resumes.
const STALL_LIMIT: usize = 50;
const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PivotRule {
    /// Smallest eligible index enters; ties in the ratio test go to the
    /// smallest basic index.
    #[default]
    Bland,
    /// Most negative reduced cost enters.
    Dantzig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    pub pivot_rule: PivotRule,
    /// Primal feasibility and reduced-cost tolerance.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            pivot_rule: PivotRule::Bland,
            tolerance: 1e-9,
            max_iterations: 200_000,
        }
    }
}

/// A linear program in bounded equality form, built column by column.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    n_rows: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(n_rows: usize) -> Self {
        Self {
            n_rows,
            rhs: vec![0.0; n_rows],
            ..Default::default()
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// Appends a column and returns its index. Zero entries are dropped.
    pub fn add_column(&mut self, entries: Vec<(usize, f64)>, cost: f64, lower: f64, upper: f64) -> usize {
        debug_assert!(lower <= upper);
        debug_assert!(entries.iter().all(|&(r, _)| r < self.n_rows));
        self.cols
            .push(entries.into_iter().filter(|&(_, v)| v != 0.0).collect());
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cols.len() - 1
    }

    pub fn set_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] = value;
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.lower[col] = lower;
        self.upper[col] = upper;
    }

    pub fn solve(&self, opts: &LpOptions) -> LpSolution {
        Simplex::new(self, opts).run()
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the structural columns.
    pub x: Vec<f64>,
    /// Row multipliers `y = B^{-T} c_B`; reduced costs are `c - A^T y`.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    opts: LpOptions,
    m: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    is_artificial: Vec<bool>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    MaxIter,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, opts: &LpOptions) -> Self {
        let m = lp.n_rows;
        let n = lp.cols.len();
        let x: Vec<f64> = (0..n)
            .map(|j| initial_value(lp.lower[j], lp.upper[j]))
            .collect();
        let mut s = Simplex {
            lp,
            opts: *opts,
            m,
            n_struct: n,
            cols: lp.cols.clone(),
            lower: lp.lower.clone(),
            upper: lp.upper.clone(),
            x,
            basis: vec![NONE; m],
            position: vec![NONE; n],
            binv: vec![0.0; m * m],
            iterations: 0,
            since_refactor: 0,
            is_artificial: vec![false; n],
        };
        s.crash();
        s
    }

    /// Residual `b - A x` over all current columns.
    fn residual(&self) -> Vec<f64> {
        let mut r = self.lp.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            for &(i, a) in col {
                r[i] -= a * xj;
            }
        }
        r
    }

    /// Chooses unit columns as initial basics where their implied value is
    /// within bounds; remaining rows get artificial columns.
    fn crash(&mut self) {
        let mut r = self.residual();
        for j in 0..self.n_struct {
            if self.cols[j].len() != 1 || self.lower[j] == self.upper[j] {
                continue;
            }
            let (row, a) = self.cols[j][0];
            if self.basis[row] != NONE {
                continue;
            }
            let value = self.x[j] + r[row] / a;
            let tol = self.opts.tolerance;
            if value >= self.lower[j] - tol && value <= self.upper[j] + tol {
                let value = value.clamp(self.lower[j], self.upper[j]);
                r[row] -= a * (value - self.x[j]);
                self.x[j] = value;
                self.basis[row] = j;
                self.position[j] = row;
            }
        }
        for row in 0..self.m {
            if self.basis[row] != NONE {
                continue;
            }
            let sgn = if r[row] >= 0.0 { 1.0 } else { -1.0 };
            let j = self.cols.len();
            self.cols.push(vec![(row, sgn)]);
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            self.x.push(r[row].abs());
            self.position.push(row);
            self.is_artificial.push(true);
            self.basis[row] = j;
        }
        self.refactor();
    }

    /// Rebuilds `B^{-1}` and recomputes the basic values from the nonbasic
    /// ones. Returns false when the basis matrix is numerically singular.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return true;
        }
        let mut b = Matrix::zeros(m, m);
        for (r, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                b.set(i, r, a);
            }
        }
        let Ok(lu) = Lu::factor(&b) else {
            return false;
        };
        let inv = lu.inverse();
        self.binv.copy_from_slice(inv.data());
        let mut rhs = self.lp.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.position[j] != NONE {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            for &(i, a) in col {
                rhs[i] -= a * xj;
            }
        }
        let mut xb = lu.solve(&rhs);
        // One refinement step against the basis matrix.
        let bx = b.matvec(&xb);
        let corr: Vec<f64> = rhs.iter().zip(&bx).map(|(u, v)| u - v).collect();
        let dx = lu.solve(&corr);
        for (v, d) in xb.iter_mut().zip(dx) {
            *v += d;
        }
        for (r, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[r];
        }
        true
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb == 0.0 {
                continue;
            }
            let row = &self.binv[r * m..(r + 1) * m];
            for (yi, &b) in y.iter_mut().zip(row) {
                *yi += cb * b;
            }
        }
        y
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(i, a) in &self.cols[j] {
            for (r, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[r * m + i] * a;
            }
        }
        alpha
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        cost[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
    }

    /// Direction (+1 increase, -1 decrease) in which nonbasic `j` improves
    /// the objective, if any.
    fn improving_direction(&self, j: usize, d: f64) -> Option<f64> {
        let (l, u, xj) = (self.lower[j], self.upper[j], self.x[j]);
        if l == u {
            return None;
        }
        let tol = self.opts.tolerance;
        let at_lower = l.is_finite() && xj <= l;
        let at_upper = u.is_finite() && xj >= u;
        if at_lower && d < -tol {
            Some(1.0)
        } else if at_upper && d > tol {
            Some(-1.0)
        } else if !at_lower && !at_upper && d.abs() > tol {
            Some(-d.signum())
        } else {
            None
        }
    }

    fn pivot(&mut self, row: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[row];
        let leaving = self.basis[row];
        {
            let prow = &mut self.binv[row * m..(row + 1) * m];
            prow.iter_mut().for_each(|v| *v /= piv);
        }
        let prow: Vec<f64> = self.binv[row * m..(row + 1) * m].to_vec();
        for (i, &f) in alpha.iter().enumerate() {
            if i == row || f == 0.0 {
                continue;
            }
            let dst = &mut self.binv[i * m..(i + 1) * m];
            for (d, &p) in dst.iter_mut().zip(&prow) {
                *d -= f * p;
            }
        }
        self.position[leaving] = NONE;
        self.position[entering] = row;
        self.basis[row] = entering;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn iterate(&mut self, cost: &[f64]) -> PhaseEnd {
        let tol = self.opts.tolerance;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return PhaseEnd::MaxIter;
            }
            let y = self.duals(cost);
            let use_bland = self.opts.pivot_rule == PivotRule::Bland || degenerate_run >= STALL_LIMIT;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.cols.len() {
                if self.position[j] != NONE {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &y);
                let Some(dir) = self.improving_direction(j, d) else {
                    continue;
                };
                if use_bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((j, dir)) = entering else {
                return PhaseEnd::Optimal;
            };
            self.iterations += 1;
            let alpha = self.ftran(j);

            // Harris two-pass ratio test.
            let mut relaxed = f64::INFINITY;
            for (r, &al) in alpha.iter().enumerate() {
                let rate = -dir * al;
                let b = self.basis[r];
                if let Some(t) = self.ratio(b, rate, tol) {
                    relaxed = relaxed.min(t);
                }
            }
            let flip = self.upper[j] - self.lower[j];
            let mut leave: Option<usize> = None;
            if relaxed.is_finite() {
                let mut best_rate = 0.0;
                let mut cands: Vec<(usize, f64)> = Vec::new();
                for (r, &al) in alpha.iter().enumerate() {
                    let rate = -dir * al;
                    let b = self.basis[r];
                    if let Some(t) = self.ratio(b, rate, 0.0) {
                        if t <= relaxed {
                            cands.push((r, rate.abs()));
                            best_rate = f64::max(best_rate, rate.abs());
                        }
                    }
                }
                leave = if use_bland {
                    cands
                        .iter()
                        .filter(|c| c.1 >= 1e-2 * best_rate)
                        .min_by_key(|c| self.basis[c.0])
                        .map(|c| c.0)
                } else {
                    cands
                        .iter()
                        .fold(None::<(usize, f64)>, |acc, &c| match acc {
                            Some(a) if a.1 >= c.1 => Some(a),
                            _ => Some(c),
                        })
                        .map(|c| c.0)
                };
            }
            let theta_pivot = leave.map(|r| {
                let rate = -dir * alpha[r];
                self.ratio(self.basis[r], rate, 0.0).unwrap_or(0.0).max(0.0)
            });
            match theta_pivot {
                Some(theta) if theta <= flip => {
                    let r = leave.expect("leaving row");
                    self.step(j, dir, theta, &alpha);
                    let rate = -dir * alpha[r];
                    let b = self.basis[r];
                    self.x[b] = if rate < 0.0 { self.lower[b] } else { self.upper[b] };
                    self.pivot(r, j, &alpha);
                    degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
                }
                _ if flip.is_finite() => {
                    self.step(j, dir, flip, &alpha);
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                    degenerate_run = 0;
                }
                _ => return PhaseEnd::Unbounded,
            }
        }
    }

    /// Step length at which basic variable `b` moving at `rate` per unit
    /// hits a bound, with bounds relaxed by `slack`.
    fn ratio(&self, b: usize, rate: f64, slack: f64) -> Option<f64> {
        if rate < -PIVOT_TOL && self.lower[b].is_finite() {
            Some(((self.x[b] - self.lower[b] + slack) / -rate).max(0.0))
        } else if rate > PIVOT_TOL && self.upper[b].is_finite() {
            Some(((self.upper[b] - self.x[b] + slack) / rate).max(0.0))
        } else {
            None
        }
    }

    fn step(&mut self, j: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[j] += dir * theta;
        for (r, &al) in alpha.iter().enumerate() {
            let b = self.basis[r];
            self.x[b] -= dir * al * theta;
        }
    }

    /// Pivots basic artificials (now fixed at zero) out of the basis where a
    /// structural replacement exists.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            let a = self.basis[r];
            if !self.is_artificial[a] {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_struct {
                if self.position[j] != NONE || self.lower[j] == self.upper[j] {
                    continue;
                }
                let rho: f64 = self.cols[j]
                    .iter()
                    .map(|&(i, v)| self.binv[r * m + i] * v)
                    .sum();
                if rho.abs() > DRIVE_OUT_TOL && best.map_or(true, |b| rho.abs() > b.1) {
                    best = Some((j, rho.abs()));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(j);
                self.x[a] = 0.0;
                self.pivot(r, j, &alpha);
            }
        }
        self.refactor();
    }

    fn run(mut self) -> LpSolution {
        let n_art = self.cols.len() - self.n_struct;
        if n_art > 0 {
            let mut phase1 = vec![0.0; self.cols.len()];
            for (j, c) in phase1.iter_mut().enumerate() {
                if self.is_artificial[j] {
                    *c = 1.0;
                }
            }
            match self.iterate(&phase1) {
                PhaseEnd::MaxIter => return self.finish(LpStatus::MaxIter),
                PhaseEnd::Unbounded => unreachable!("phase 1 objective is bounded below"),
                PhaseEnd::Optimal => {}
            }
            self.refactor();
            let infeas: f64 = (self.n_struct..self.cols.len()).map(|j| self.x[j].max(0.0)).sum();
            if infeas > self.phase1_threshold() {
                return self.finish(LpStatus::Infeasible);
            }
            for j in self.n_struct..self.cols.len() {
                self.upper[j] = 0.0;
                if self.position[j] == NONE {
                    self.x[j] = 0.0;
                }
            }
            self.drive_out_artificials();
        }
        let mut cost = self.lp.cost.clone();
        cost.resize(self.cols.len(), 0.0);
        let status = match self.iterate(&cost) {
            PhaseEnd::Optimal => LpStatus::Optimal,
            PhaseEnd::Unbounded => LpStatus::Unbounded,
            PhaseEnd::MaxIter => LpStatus::MaxIter,
        };
        self.finish(status)
    }

    fn phase1_threshold(&self) -> f64 {
        let mut scale = self.lp.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..self.n_struct {
            for b in [self.lower[j], self.upper[j]] {
                if b.is_finite() {
                    scale = scale.max(b.abs());
                }
            }
        }
        1e3 * self.opts.tolerance * (1.0 + scale)
    }

    fn finish(mut self, status: LpStatus) -> LpSolution {
        self.refactor();
        let mut cost = self.lp.cost.clone();
        cost.resize(self.cols.len(), 0.0);
        let duals = if self.m == 0 {
            Vec::new()
        } else {
            let mut b = Matrix::zeros(self.m, self.m);
            for (r, &j) in self.basis.iter().enumerate() {
                for &(i, a) in &self.cols[j] {
                    b.set(i, r, a);
                }
            }
            let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
            match Lu::factor(&b) {
                Ok(lu) => lu.solve_transpose(&cb),
                Err(_) => self.duals(&cost),
            }
        };
        let x: Vec<f64> = self.x[..self.n_struct].to_vec();
        let objective = x.iter().zip(&self.lp.cost).map(|(a, c)| a * c).sum();
        LpSolution {
            status,
            x,
            duals,
            objective,
            iterations: self.iterations,
        }
    }
}

fn initial_value(lower: f64, upper: f64) -> f64 {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => {
            if lower.abs() <= upper.abs() {
                lower
            } else {
                upper
            }
        }
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}
