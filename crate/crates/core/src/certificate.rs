//! Identifiability and the combinatorial objects of a minimum-norm
//! certificate: extended support, support excess, and the support or
//! saturation set of the certificate itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, sign, Matrix};
use crate::norm::NormIndex;
use crate::solver::first_order::SignPattern;
use crate::solver::kkt::DUAL_SUPPORT_TOL;
use crate::solver::{self, PivotRule, SolveStatus, SolverConfig};

pub const DEFAULT_SAT_TOLERANCE: f64 = 1e-7;

/// A regression setup `y = Phi x0 (+ w)` with the support and signs of `x0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub phi: Matrix,
    pub x0: Vec<f64>,
    pub support: Vec<usize>,
    pub signs: Vec<f64>,
}

impl ProblemInstance {
    /// Builds an instance, reading the support as `{i : |x0_i| > support_tol}`.
    pub fn new(phi: Matrix, x0: Vec<f64>, support_tol: f64) -> Result<Self> {
        if x0.len() != phi.cols() {
            return Err(Error::InvalidInput(format!(
                "signal length {} does not match matrix columns {}",
                x0.len(),
                phi.cols()
            )));
        }
        if !phi.is_finite() || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite input".into()));
        }
        let supp = support(&x0, support_tol);
        if supp.is_empty() {
            return Err(Error::InvalidInput("signal has empty support".into()));
        }
        let signs = supp.iter().map(|&i| sign(x0[i])).collect();
        Ok(Self {
            phi,
            x0,
            support: supp,
            signs,
        })
    }

    pub fn measurements(&self) -> Vec<f64> {
        self.phi.matvec(&self.x0)
    }

    /// `min_{i in I} |x0_i|`.
    pub fn smallest_entry(&self) -> f64 {
        self.support
            .iter()
            .map(|&i| self.x0[i].abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// A minimum-norm certificate together with its extended support.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    /// Exponent of the norm that was minimized.
    pub beta: NormIndex,
    pub p: Vec<f64>,
    /// `Phi^T p`.
    pub correlations: Vec<f64>,
    /// Indices with `|(Phi^T p)_i| >= 1 - sat_tolerance`.
    pub extended_support: Vec<usize>,
    /// Extended support minus the support of `x0`.
    pub support_excess: Vec<usize>,
    /// `supp(p)`, recorded for `beta = 1`.
    pub dual_support: Option<Vec<usize>>,
    /// `sat(p)`, recorded for `beta = inf`.
    pub dual_saturation: Option<Vec<usize>>,
    pub sat_tolerance: f64,
    pub status: SolveStatus,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Multiplier returned by the solver (`Phi v` is a subgradient of the
    /// norm at `p`).
    pub solver_multiplier: Vec<f64>,
    /// Extended support of a second optimal certificate found with the
    /// other pivot rule, when it differs from `extended_support`.
    pub alternative_extended_support: Option<Vec<usize>>,
}

impl Certificate {
    /// Sign pattern of the support excess, usable as a warm start for a
    /// neighbouring exponent.
    pub fn sign_pattern(&self) -> SignPattern {
        self.support_excess
            .iter()
            .map(|&j| (j, -sign(self.correlations[j])))
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CertificateConfig {
    pub solver: SolverConfig,
    pub sat_tolerance: f64,
    /// Re-solve polyhedral cases with the other pivot rule and record a
    /// differing extended support.
    pub check_uniqueness: bool,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            sat_tolerance: DEFAULT_SAT_TOLERANCE,
            check_uniqueness: false,
        }
    }
}

/// `{i : |u_i| > tol}`.
pub fn support(u: &[f64], tol: f64) -> Vec<usize> {
    (0..u.len()).filter(|&i| u[i].abs() > tol).collect()
}

/// `{i : |u_i| >= ||u||_inf - tol}`, empty for the zero vector.
pub fn saturation_support(u: &[f64], tol: f64) -> Vec<usize> {
    let top = norm_inf(u);
    if top == 0.0 {
        return Vec::new();
    }
    (0..u.len()).filter(|&i| u[i].abs() >= top - tol).collect()
}

/// Decides whether `x0` solves basis pursuit from its own measurements by
/// testing feasibility of the certificate set. Returns a feasible
/// certificate when one exists.
pub fn is_identifiable(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<(bool, Option<Vec<f64>>)> {
    let p = solver::feasible_certificate(&inst.phi, &inst.support, &inst.signs, cfg)?;
    Ok((p.is_some(), p))
}

/// Minimum `l_beta`-norm certificate with `beta` the conjugate of `alpha`.
pub fn min_norm_certificate(inst: &ProblemInstance, alpha: NormIndex, cfg: &CertificateConfig) -> Result<Certificate> {
    min_norm_certificate_warm(inst, alpha, cfg, None)
}

/// As [`min_norm_certificate`], seeding non-polyhedral solves with the
/// sign pattern of a nearby certificate.
pub fn min_norm_certificate_warm(
    inst: &ProblemInstance,
    alpha: NormIndex,
    cfg: &CertificateConfig,
    warm: Option<&SignPattern>,
) -> Result<Certificate> {
    if !(cfg.sat_tolerance >= 0.0) {
        return Err(Error::InvalidInput("saturation tolerance must be nonnegative".into()));
    }
    let beta = alpha.conjugate();
    let res = solver::solve_min_norm_certificate_warm(&inst.phi, &inst.support, &inst.signs, beta, &cfg.solver, warm)
        .map_err(|e| match e {
            Error::Infeasible => Error::NotIdentifiable,
            other => other,
        })?;
    let mut cert = build_certificate(inst, beta, res, cfg.sat_tolerance);
    if cfg.check_uniqueness && beta.is_polyhedral() {
        let other = match cfg.solver.lp_pivot_rule {
            PivotRule::Bland => PivotRule::Dantzig,
            PivotRule::Dantzig => PivotRule::Bland,
        };
        let alt_cfg = cfg.solver.with_pivot_rule(other);
        if let Ok(res) = solver::solve_min_norm_certificate(&inst.phi, &inst.support, &inst.signs, beta, &alt_cfg) {
            let alt = build_certificate(inst, beta, res, cfg.sat_tolerance);
            if alt.extended_support != cert.extended_support {
                cert.alternative_extended_support = Some(alt.extended_support);
            }
        }
    }
    Ok(cert)
}

fn build_certificate(inst: &ProblemInstance, beta: NormIndex, res: solver::SolveResult, sat_tolerance: f64) -> Certificate {
    let p = res.primal;
    let correlations = inst.phi.tr_matvec(&p);
    let extended_support: Vec<usize> = (0..correlations.len())
        .filter(|&i| correlations[i].abs() >= 1.0 - sat_tolerance)
        .collect();
    let mut in_i = vec![false; correlations.len()];
    for &i in &inst.support {
        in_i[i] = true;
    }
    let support_excess = extended_support.iter().copied().filter(|&j| !in_i[j]).collect();
    let pmax = norm_inf(&p);
    let dual_support = (beta == NormIndex::One).then(|| support(&p, DUAL_SUPPORT_TOL * pmax.max(1.0)));
    let dual_saturation = (beta == NormIndex::Inf).then(|| saturation_support(&p, DUAL_SUPPORT_TOL * pmax));
    Certificate {
        beta,
        correlations,
        extended_support,
        support_excess,
        dual_support,
        dual_saturation,
        sat_tolerance,
        status: res.status,
        objective: res.objective,
        kkt_residual: res.kkt_residual,
        iterations: res.iterations,
        solver_multiplier: res.dual.unwrap_or_default(),
        alternative_extended_support: None,
        p,
    }
}

/// `|J \ I|`.
pub fn support_excess_size(cert: &Certificate) -> usize {
    cert.support_excess.len()
}
