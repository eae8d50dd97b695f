//! Convex solvers for basis pursuit, the `l_alpha`-constrained `l1`
//! problem, its dual, and the minimum-norm certificate program.
//!
//! Polyhedral cases go through the simplex in [`simplex`]; the `l2` and
//! general-exponent cases go through [`first_order`]. Every result carries
//! the residual of its optimality system computed by [`kkt`].

pub mod first_order;
pub mod kkt;
pub mod simplex;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, Matrix};
use crate::norm::NormIndex;

pub use kkt::{certificate_kkt_residual, kkt_residual, subgradient_distance};
pub use simplex::PivotRule;

use first_order::{FirstOrderOptions, Iterate, SignPattern};
use simplex::{LinearProgram, LpOptions, LpSolution, LpStatus};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub lp_pivot_rule: PivotRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 200_000,
            lp_pivot_rule: PivotRule::Bland,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_pivot_rule(mut self, rule: PivotRule) -> Self {
        self.lp_pivot_rule = rule;
        self
    }

    fn lp(&self) -> LpOptions {
        LpOptions {
            pivot_rule: self.lp_pivot_rule,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }

    fn first_order(&self) -> FirstOrderOptions {
        FirstOrderOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.tolerance > 0.0 && self.tolerance.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("solver tolerance must be positive, got {}", self.tolerance)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIter => "max_iter",
        };
        f.write_str(s)
    }
}

/// Primal and dual vectors of a solve with the residual of their
/// optimality system.
///
/// For the primal problems `primal` is `x` and `dual` is `p`. For the dual
/// and certificate problems `primal` is `p` and `dual` is the multiplier
/// (`x` for the dual problem, `v` for the certificate program).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub primal: Vec<f64>,
    pub dual: Option<Vec<f64>>,
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SolveResult {
    /// Single-line `key=value` summary.
    pub fn diagnostics(&self) -> String {
        format!(
            "status={} objective={:e} kkt_residual={:e} iterations={}",
            self.status, self.objective, self.kkt_residual, self.iterations
        )
    }

    fn from_iterate(it: Iterate, objective: f64, max_iterations: usize) -> Result<Self> {
        let status = if it.converged {
            SolveStatus::Optimal
        } else if it.iterations >= max_iterations {
            SolveStatus::MaxIter
        } else {
            return Err(Error::MaxIter {
                iterations: it.iterations,
                kkt_residual: it.kkt_residual,
            });
        };
        Ok(SolveResult {
            primal: it.primal,
            dual: Some(it.dual),
            objective,
            status,
            kkt_residual: it.kkt_residual,
            iterations: it.iterations,
        })
    }
}

fn check_shapes(phi: &Matrix, y: &[f64]) -> Result<()> {
    if y.len() != phi.rows() {
        return Err(Error::InvalidInput(format!(
            "observation length {} does not match matrix rows {}",
            y.len(),
            phi.rows()
        )));
    }
    if !phi.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite input".into()));
    }
    Ok(())
}

fn lp_failure(status: LpStatus, sol: &LpSolution) -> Option<Error> {
    match status {
        LpStatus::Optimal => None,
        LpStatus::Infeasible => Some(Error::Infeasible),
        LpStatus::Unbounded => Some(Error::Unbounded),
        LpStatus::MaxIter => Some(Error::MaxIter {
            iterations: sol.iterations,
            kkt_residual: f64::INFINITY,
        }),
    }
}

/// Adds the split `x = x+ - x-` of `n` unit-cost variables against the rows
/// of `phi` (row `i` of the LP is row `i` of `phi`).
fn add_split_columns(lp: &mut LinearProgram, phi: &Matrix) {
    let (m, n) = phi.shape();
    for j in 0..n {
        let col: Vec<(usize, f64)> = (0..m).map(|i| (i, phi.get(i, j))).collect();
        let neg: Vec<(usize, f64)> = col.iter().map(|&(i, v)| (i, -v)).collect();
        lp.add_column(col, 1.0, 0.0, f64::INFINITY);
        lp.add_column(neg, 1.0, 0.0, f64::INFINITY);
    }
}

fn merge_split(x: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|j| x[2 * j] - x[2 * j + 1]).collect()
}

/// `min ||x||_1 s.t. Phi x = y`.
pub fn solve_basis_pursuit(phi: &Matrix, y: &[f64], cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_shapes(phi, y)?;
    let (m, n) = phi.shape();
    let mut lp = LinearProgram::new(m);
    add_split_columns(&mut lp, phi);
    for (i, &v) in y.iter().enumerate() {
        lp.set_rhs(i, v);
    }
    let sol = lp.solve(&cfg.lp());
    if let Some(e) = lp_failure(sol.status, &sol) {
        return Err(e);
    }
    let x = merge_split(&sol.x, n);
    let p = sol.duals.clone();
    let kkt = kkt_residual(&x, &p, phi, y, NormIndex::Inf, 0.0);
    Ok(SolveResult {
        objective: x.iter().map(|v| v.abs()).sum(),
        primal: x,
        dual: Some(p),
        status: SolveStatus::Optimal,
        kkt_residual: kkt,
        iterations: sol.iterations,
    })
}

/// `min ||x||_1 s.t. ||Phi x - y||_alpha <= tau` for `alpha` in `{1, 2, inf}`.
///
/// `alpha` in `{1, inf}` is solved exactly by linear programming, `alpha = 2`
/// by [`solve_primal_first_order`].
pub fn solve_primal(phi: &Matrix, y: &[f64], alpha: NormIndex, tau: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_shapes(phi, y)?;
    check_tau(tau)?;
    match alpha {
        NormIndex::Inf | NormIndex::One => solve_primal_lp(phi, y, alpha, tau, cfg),
        NormIndex::Two => solve_primal_first_order(phi, y, alpha, tau, cfg),
        NormIndex::Other(_) => Err(Error::InvalidInput(format!("unsupported loss exponent {alpha}"))),
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("tau must be nonnegative and finite, got {tau}")))
    }
}

fn solve_primal_lp(phi: &Matrix, y: &[f64], alpha: NormIndex, tau: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    let (m, n) = phi.shape();
    let rows = if alpha == NormIndex::One { m + 1 } else { m };
    let mut lp = LinearProgram::new(rows);
    add_split_columns(&mut lp, phi);
    for (i, &v) in y.iter().enumerate() {
        lp.set_rhs(i, v);
    }
    match alpha {
        NormIndex::Inf => {
            for i in 0..m {
                lp.add_column(vec![(i, -1.0)], 0.0, -tau, tau);
            }
        }
        _ => {
            for i in 0..m {
                lp.add_column(vec![(i, -1.0), (m, 1.0)], 0.0, 0.0, f64::INFINITY);
                lp.add_column(vec![(i, 1.0), (m, 1.0)], 0.0, 0.0, f64::INFINITY);
            }
            lp.add_column(vec![(m, 1.0)], 0.0, 0.0, f64::INFINITY);
            lp.set_rhs(m, tau);
        }
    }
    let sol = lp.solve(&cfg.lp());
    if let Some(e) = lp_failure(sol.status, &sol) {
        return Err(e);
    }
    let x = merge_split(&sol.x[..2 * n], n);
    let p: Vec<f64> = sol.duals[..m].to_vec();
    let kkt = if tau > 0.0 {
        kkt_residual(&x, &p, phi, y, alpha, tau)
    } else {
        kkt_residual(&x, &p, phi, y, alpha, 0.0)
    };
    Ok(SolveResult {
        objective: x.iter().map(|v| v.abs()).sum(),
        primal: x,
        dual: Some(p),
        status: SolveStatus::Optimal,
        kkt_residual: kkt,
        iterations: sol.iterations,
    })
}

/// Chambolle-Pock route for the primal problem, available for every
/// `alpha` in `{1, 2, inf}`. Returns `MaxIter` status with the best iterate
/// when the residual does not reach the tolerance.
pub fn solve_primal_first_order(phi: &Matrix, y: &[f64], alpha: NormIndex, tau: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_shapes(phi, y)?;
    check_tau(tau)?;
    if tau == 0.0 || matches!(alpha, NormIndex::Other(_)) {
        return Err(Error::InvalidInput("first-order path needs tau > 0 and alpha in {1, 2, inf}".into()));
    }
    let it = first_order::primal_chambolle_pock(phi, y, alpha, tau, &cfg.first_order());
    let objective = it.primal.iter().map(|v| v.abs()).sum();
    SolveResult::from_iterate(it, objective, cfg.max_iterations)
}

/// `min -<y, p> + tau ||p||_beta s.t. ||Phi^T p||_inf <= 1`.
///
/// The returned `dual` is the primal solution `x` of the matching
/// `l_alpha`-constrained problem.
pub fn solve_dual(phi: &Matrix, y: &[f64], beta: NormIndex, tau: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_shapes(phi, y)?;
    check_tau(tau)?;
    let alpha = beta.conjugate();
    let dual_objective = |p: &[f64]| -dot(y, p) + tau * beta.norm(p);
    match beta {
        NormIndex::One | NormIndex::Inf => {
            let (lp, m) = dual_lp(phi, Some(y), tau, beta, None);
            let sol = lp.solve(&cfg.lp());
            if let Some(e) = lp_failure(sol.status, &sol) {
                return Err(e);
            }
            let p = recover_p(&sol.x, m, beta);
            let n = phi.cols();
            let x: Vec<f64> = sol.duals[..n].iter().map(|v| -v).collect();
            let kkt = if tau > 0.0 {
                kkt_residual(&x, &p, phi, y, alpha, tau)
            } else {
                kkt_residual(&x, &p, phi, y, alpha, 0.0)
            };
            Ok(SolveResult {
                objective: dual_objective(&p),
                primal: p,
                dual: Some(x),
                status: SolveStatus::Optimal,
                kkt_residual: kkt,
                iterations: sol.iterations,
            })
        }
        NormIndex::Two => {
            let it = first_order::primal_chambolle_pock(phi, y, alpha, tau, &cfg.first_order());
            let swapped = Iterate {
                primal: it.dual,
                dual: it.primal,
                ..it
            };
            let objective = dual_objective(&swapped.primal);
            SolveResult::from_iterate(swapped, objective, cfg.max_iterations)
        }
        NormIndex::Other(_) => Err(Error::InvalidInput(format!("unsupported dual exponent {beta}"))),
    }
}

/// Builds the LP for the dual problem (`y` given) or for the certificate
/// program (`fixed` gives the prescribed correlations on the support).
///
/// Rows `0..n` encode `Phi^T p - u = 0`; for `beta = inf` rows `n..n+m`
/// encode `|p_i| <= t`.
fn dual_lp(phi: &Matrix, y: Option<&[f64]>, tau: f64, beta: NormIndex, fixed: Option<(&[usize], &[f64])>) -> (LinearProgram, usize) {
    let (m, n) = phi.shape();
    let rows = if beta == NormIndex::Inf { n + m } else { n };
    let mut lp = LinearProgram::new(rows);
    let yi = |i: usize| y.map_or(0.0, |y| y[i]);
    for i in 0..m {
        let col: Vec<(usize, f64)> = (0..n).map(|j| (j, phi.get(i, j))).collect();
        let neg: Vec<(usize, f64)> = col.iter().map(|&(j, v)| (j, -v)).collect();
        match beta {
            NormIndex::One => {
                lp.add_column(col, -yi(i) + tau, 0.0, f64::INFINITY);
                lp.add_column(neg, yi(i) + tau, 0.0, f64::INFINITY);
            }
            _ => {
                let mut col = col;
                let mut neg = neg;
                col.push((n + i, 1.0));
                neg.push((n + i, 1.0));
                lp.add_column(col, -yi(i), 0.0, f64::INFINITY);
                lp.add_column(neg, yi(i), 0.0, f64::INFINITY);
            }
        }
    }
    let mut bounds = vec![(-1.0, 1.0); n];
    if let Some((support, signs)) = fixed {
        for (&i, &s) in support.iter().zip(signs) {
            bounds[i] = (s, s);
        }
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        lp.add_column(vec![(j, -1.0)], 0.0, lo, hi);
    }
    if beta == NormIndex::Inf {
        let col: Vec<(usize, f64)> = (0..m).map(|i| (n + i, -1.0)).collect();
        lp.add_column(col, tau, 0.0, f64::INFINITY);
        for i in 0..m {
            lp.add_column(vec![(n + i, 1.0)], 0.0, 0.0, f64::INFINITY);
        }
    }
    (lp, m)
}

fn recover_p(x: &[f64], m: usize, _beta: NormIndex) -> Vec<f64> {
    (0..m).map(|i| x[2 * i] - x[2 * i + 1]).collect()
}

fn validate_support(phi: &Matrix, support: &[usize], signs: &[f64]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::InvalidInput("support must be nonempty".into()));
    }
    if support.len() != signs.len() {
        return Err(Error::InvalidInput("support and sign vector differ in length".into()));
    }
    if support.iter().any(|&i| i >= phi.cols()) {
        return Err(Error::InvalidInput("support index out of range".into()));
    }
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("support must be strictly increasing".into()));
    }
    if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(Error::InvalidInput("signs must be +1 or -1".into()));
    }
    Ok(())
}

/// `min ||p||_beta s.t. Phi_I^T p = s_I, ||Phi^T p||_inf <= 1`.
///
/// Returns `Err(Infeasible)` exactly when no certificate exists. The
/// `dual` field holds the multiplier `v` with `Phi v` a subgradient of
/// `||.||_beta` at `p`, supported on the saturated correlations.
pub fn solve_min_norm_certificate(phi: &Matrix, support: &[usize], signs: &[f64], beta: NormIndex, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_min_norm_certificate_warm(phi, support, signs, beta, cfg, None)
}

/// As [`solve_min_norm_certificate`], with a sign pattern from a nearby
/// exponent used to seed the active set of the non-polyhedral path.
pub fn solve_min_norm_certificate_warm(
    phi: &Matrix,
    support: &[usize],
    signs: &[f64],
    beta: NormIndex,
    cfg: &SolverConfig,
    warm: Option<&SignPattern>,
) -> Result<SolveResult> {
    cfg.validate()?;
    if !phi.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix".into()));
    }
    validate_support(phi, support, signs)?;
    match beta {
        NormIndex::One | NormIndex::Inf => {
            let (lp, m) = dual_lp(phi, None, 1.0, beta, Some((support, signs)));
            let sol = lp.solve(&cfg.lp());
            if let Some(e) = lp_failure(sol.status, &sol) {
                return Err(e);
            }
            let p = recover_p(&sol.x, m, beta);
            let v: Vec<f64> = sol.duals[..phi.cols()].to_vec();
            let kkt = certificate_kkt_residual(&p, &v, phi, support, signs, beta);
            Ok(SolveResult {
                objective: beta.norm(&p),
                primal: p,
                dual: Some(v),
                status: SolveStatus::Optimal,
                kkt_residual: kkt,
                iterations: sol.iterations,
            })
        }
        _ => {
            let fast = first_order::certificate_active_set(phi, support, signs, beta, warm, cfg.tolerance);
            let it = match fast {
                Some(it) if it.converged => it,
                _ => {
                    if !certificate_exists(phi, support, signs, cfg)? {
                        return Err(Error::Infeasible);
                    }
                    first_order::certificate_chambolle_pock(phi, support, signs, beta, &cfg.first_order())
                }
            };
            let objective = beta.norm(&it.primal);
            SolveResult::from_iterate(it, objective, cfg.max_iterations)
        }
    }
}

/// A point of `{p : Phi_I^T p = s_I, ||Phi^T p||_inf <= 1}` found by
/// phase 1 of the simplex on a zero-cost program, or `None` when the set is
/// empty.
pub fn feasible_certificate(phi: &Matrix, support: &[usize], signs: &[f64], cfg: &SolverConfig) -> Result<Option<Vec<f64>>> {
    cfg.validate()?;
    validate_support(phi, support, signs)?;
    let (m, n) = phi.shape();
    let mut lp = LinearProgram::new(n);
    for i in 0..m {
        let col: Vec<(usize, f64)> = (0..n).map(|j| (j, phi.get(i, j))).collect();
        lp.add_column(col, 0.0, f64::NEG_INFINITY, f64::INFINITY);
    }
    let mut bounds = vec![(-1.0, 1.0); n];
    for (&i, &s) in support.iter().zip(signs) {
        bounds[i] = (s, s);
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        lp.add_column(vec![(j, -1.0)], 0.0, lo, hi);
    }
    let sol = lp.solve(&cfg.lp());
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.x[..m].to_vec())),
        LpStatus::Infeasible => Ok(None),
        _ => Err(lp_failure(sol.status, &sol).unwrap_or(Error::Infeasible)),
    }
}

/// `true` when a certificate exists.
pub fn certificate_exists(phi: &Matrix, support: &[usize], signs: &[f64], cfg: &SolverConfig) -> Result<bool> {
    Ok(feasible_certificate(phi, support, signs, cfg)?.is_some())
}

/// Primal objective `||x||_1` minus the negated dual objective at `p`;
/// nonnegative up to rounding for feasible pairs.
pub fn duality_gap(x: &[f64], p: &[f64], y: &[f64], beta: NormIndex, tau: f64) -> f64 {
    let primal: f64 = x.iter().map(|v| v.abs()).sum();
    primal - (dot(y, p) - tau * beta.norm(p))
}

/// `true` when `||Phi^T p||_inf <= 1 + tol`.
pub fn dual_feasible(phi: &Matrix, p: &[f64], tol: f64) -> bool {
    norm_inf(&phi.tr_matvec(p)) <= 1.0 + tol
}
