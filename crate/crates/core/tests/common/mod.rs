//! Property checks shared by the proptest suites and the acceptance run.
//! Each check draws its instance from a seed and recomputes the claimed
//! relation from first principles rather than through library predicates.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use supstab::certificate::{self, CertificateConfig, ProblemInstance};
use supstab::experiments::rng::{gaussian_design, rademacher_signal, stream_rng, uniform_noise};
use supstab::experiments::{probability_curves, AlphaOutcome, TrialRecord};
use supstab::linalg::{pseudo_inverse, Matrix, DEFAULT_RANK_TOL};
use supstab::solver::first_order::certificate_active_set;
use supstab::solver::{self, SolverConfig};
use supstab::stability::StabilityAnalysis;
use supstab::{Error, NormIndex};

pub const LOSSES: [NormIndex; 3] = [NormIndex::One, NormIndex::Two, NormIndex::Inf];

/// `(seed, m, n, k)` with `1 <= k <= m / 2`, `m < n <= 2m`.
pub fn small_instance() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 4usize..=9).prop_flat_map(|(seed, m)| (Just(seed), Just(m), (m + 1)..=(2 * m), 1..=(m / 2)))
}

pub fn instance(seed: u64, m: usize, n: usize, k: usize) -> ProblemInstance {
    let phi = gaussian_design(m, n, &mut stream_rng(seed, 0));
    let x0 = rademacher_signal(n, k, &mut stream_rng(seed, 1));
    ProblemInstance::new(phi, x0, 0.0).unwrap()
}

fn col_dot(phi: &Matrix, j: usize, p: &[f64]) -> f64 {
    (0..phi.rows()).map(|i| phi.get(i, j) * p[i]).sum()
}

fn matvec(phi: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..phi.rows()).map(|i| (0..phi.cols()).map(|j| phi.get(i, j) * v[j]).sum()).collect()
}

/// The analysis of an admissible draw, `None` when the draw is not
/// identifiable or the closed form does not apply.
fn admissible(seed: u64, m: usize, n: usize, k: usize, alpha: NormIndex) -> Result<Option<StabilityAnalysis>, TestCaseError> {
    let inst = instance(seed, m, n, k);
    match StabilityAnalysis::analyze(&inst, alpha, &CertificateConfig::default()) {
        Ok(a) => Ok(Some(a)),
        Err(Error::NotIdentifiable | Error::NotInjective(_) | Error::MuDegenerate(_)) => Ok(None),
        Err(e) => Err(TestCaseError::fail(format!("analysis failed: {e}"))),
    }
}

/// `Phi v` lies in the subdifferential of `||.||_beta` at `p`, written out
/// per exponent: sign pattern on the support for `beta = 1`, saturation
/// pattern with unit `l_1` mass for `beta = inf`, `p / ||p||` for `beta = 2`.
pub fn check_subgradient(seed: u64, m: usize, n: usize, k: usize, alpha: NormIndex) -> Result<(), TestCaseError> {
    let Some(a) = admissible(seed, m, n, k, alpha)? else {
        return Ok(());
    };
    let p = &a.certificate.p;
    let g = matvec(&a.instance.phi, &a.v);
    let tol = 1e-6;
    let pmax = p.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    match alpha.conjugate() {
        NormIndex::One => {
            for (gi, pi) in g.iter().zip(p) {
                if pi.abs() > 1e-9 * pmax.max(1.0) {
                    prop_assert!((gi - pi.signum()).abs() <= tol, "g {gi} p {pi}");
                } else {
                    prop_assert!(gi.abs() <= 1.0 + tol, "g {gi} off support");
                }
            }
        }
        NormIndex::Inf => {
            let mass: f64 = g.iter().map(|x| x.abs()).sum();
            prop_assert!((mass - 1.0).abs() <= tol, "l1 mass {mass}");
            for (gi, pi) in g.iter().zip(p) {
                if gi.abs() > tol {
                    prop_assert!(pi.abs() >= pmax * (1.0 - 1e-6), "mass off the saturation set");
                    prop_assert!(gi.signum() == pi.signum(), "sign mismatch");
                }
            }
        }
        NormIndex::Two => {
            let nrm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (gi, pi) in g.iter().zip(p) {
                prop_assert!((gi - pi / nrm).abs() <= tol, "g {gi} vs {}", pi / nrm);
            }
        }
        NormIndex::Other(_) => unreachable!(),
    }
    Ok(())
}

/// `sign(v_j) = -(Phi^T p)_j` on the support excess, and `v` vanishes off
/// the extended support.
pub fn check_sign_relation(seed: u64, m: usize, n: usize, k: usize, alpha: NormIndex) -> Result<(), TestCaseError> {
    let Some(a) = admissible(seed, m, n, k, alpha)? else {
        return Ok(());
    };
    let phi = &a.instance.phi;
    let p = &a.certificate.p;
    let j_set = a.extended_support();
    for j in 0..phi.cols() {
        let corr = col_dot(phi, j, p);
        if j_set.contains(&j) {
            prop_assert!((corr.abs() - 1.0).abs() <= 1e-6, "|corr| {} on J", corr.abs());
        } else {
            prop_assert!(a.v[j] == 0.0, "v nonzero off J at {j}");
        }
    }
    for &j in a.support_excess() {
        let corr = col_dot(phi, j, p);
        prop_assert!(a.v[j] != 0.0, "v vanishes at excess index {j}");
        prop_assert!(a.v[j].signum() == -corr.signum(), "sign(v_{j}) = {} but corr {corr}", a.v[j].signum());
    }
    Ok(())
}

/// Nested events: `P(identifiable and excess <= s)` is nondecreasing in `s`
/// and bounded by the identifiability rate.
pub fn check_nested(seed: u64, trials: usize) -> Result<(), TestCaseError> {
    use rand::Rng;
    let mut rng = stream_rng(seed, 0);
    let grid = [0.0, 0.5, 1.0];
    let records: Vec<TrialRecord> = (0..trials)
        .map(|t| {
            let identifiable = rng.gen_bool(0.7);
            let k = [2, 4, 6][t % 3];
            TrialRecord {
                seed: t as u64,
                k,
                identifiable,
                outcomes: grid
                    .iter()
                    .map(|&inv| {
                        let failed = identifiable && rng.gen_bool(0.05);
                        AlphaOutcome {
                            inv_alpha: inv,
                            excess_size: (identifiable && !failed).then(|| rng.gen_range(0..8)),
                            injective: true,
                            mu: None,
                            error: failed.then(|| "failed".to_string()),
                        }
                    })
                    .collect(),
                error: None,
            }
        })
        .collect();
    let thresholds = [0usize, 1, 3, 7];
    let curves = probability_curves(&records, &thresholds);
    for &inv in &grid {
        for k in [2, 4, 6] {
            let at = |s: Option<usize>| {
                curves
                    .iter()
                    .find(|c| c.inv_alpha == inv && c.k == k && c.s_e == s)
                    .map(|c| c.probability)
                    .unwrap()
            };
            let mut prev = 0.0;
            for &s in &thresholds {
                let p = at(Some(s));
                prop_assert!(p >= prev, "curve decreases at s_e = {s}");
                prev = p;
            }
            let ident = records.iter().filter(|r| r.k == k && r.identifiable).count() as f64
                / records.iter().filter(|r| r.k == k).count() as f64;
            prop_assert!(prev <= at(None) && at(None) == ident);
        }
    }
    Ok(())
}

/// `||x||_1 >= <p, y> - tau ||p||_beta` for the solver's primal optimum `x`
/// and any `p` with `||Phi^T p||_inf <= 1`, with equality at the solver's
/// own dual.
pub fn check_weak_duality(seed: u64, m: usize, n: usize, alpha: NormIndex, tau_frac: f64) -> Result<(), TestCaseError> {
    let phi = gaussian_design(m, n, &mut stream_rng(seed, 0));
    let mut rng = stream_rng(seed, 1);
    let y = uniform_noise(m, 1.0, &mut rng);
    let tau = tau_frac * alpha.norm(&y);
    let beta = alpha.conjugate();
    let res = solver::solve_primal(&phi, &y, alpha, tau, &SolverConfig::default())
        .map_err(|e| TestCaseError::fail(format!("solve failed: {e}")))?;
    let x = &res.primal;
    let r: Vec<f64> = matvec(&phi, x).iter().zip(&y).map(|(a, b)| a - b).collect();
    prop_assert!(alpha.norm(&r) <= tau * (1.0 + 1e-7) + 1e-9, "primal infeasible");
    let primal: f64 = x.iter().map(|v| v.abs()).sum();
    let scale = 1.0 + primal.abs();
    for _ in 0..5 {
        let q = uniform_noise(m, 1.0, &mut rng);
        let top = (0..n).map(|j| col_dot(&phi, j, &q).abs()).fold(0.0f64, f64::max);
        let p: Vec<f64> = q.iter().map(|v| v / top).collect();
        let dual: f64 = y.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() - tau * beta.norm(&p);
        prop_assert!(primal >= dual - 1e-7 * scale, "primal {primal} < dual {dual}");
    }
    if let Some(p) = &res.dual {
        let top = (0..n).map(|j| col_dot(&phi, j, p).abs()).fold(0.0f64, f64::max);
        prop_assert!(top <= 1.0 + 1e-6, "solver dual infeasible: {top}");
        let dual: f64 = y.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - tau * beta.norm(p);
        prop_assert!((primal - dual).abs() <= 1e-6 * scale, "gap {}", primal - dual);
    }
    Ok(())
}

/// The four Penrose equations for a random matrix of prescribed rank.
pub fn check_moore_penrose(seed: u64, rows: usize, cols: usize, rank: usize) -> Result<(), TestCaseError> {
    let left = gaussian_design(rows, rank, &mut stream_rng(seed, 0));
    let right = gaussian_design(rank, cols, &mut stream_rng(seed, 1));
    let a = left.matmul(&right);
    let g = pseudo_inverse(&a, DEFAULT_RANK_TOL).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let close = |x: &Matrix, y: &Matrix, what: &str| -> Result<(), TestCaseError> {
        let scale = 1.0 + y.data().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let err = x.data().iter().zip(y.data()).fold(0.0f64, |acc, (u, v)| acc.max((u - v).abs()));
        prop_assert!(err <= 1e-8 * scale, "{what}: error {err:e}");
        Ok(())
    };
    let ag = a.matmul(&g);
    let ga = g.matmul(&a);
    close(&ag.matmul(&a), &a, "A G A = A")?;
    close(&ga.matmul(&g), &g, "G A G = G")?;
    close(&ag.transpose(), &ag, "(A G)^T = A G")?;
    close(&ga.transpose(), &ga, "(G A)^T = G A")?;
    Ok(())
}

/// The active set converges to a certificate with residual below tolerance
/// whose norm matches an independent first-order solve.
pub fn check_active_set(seed: u64, m: usize, n: usize, k: usize, beta_value: f64) -> Result<(), TestCaseError> {
    let inst = instance(seed, m, n, k);
    let (ok, _) = certificate::is_identifiable(&inst, &SolverConfig::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    if !ok {
        return Ok(());
    }
    let beta = NormIndex::from_value(beta_value).unwrap();
    let it = certificate_active_set(&inst.phi, &inst.support, &inst.signs, beta, None, 1e-7);
    let Some(it) = it else {
        return Err(TestCaseError::fail("active set gave up"));
    };
    prop_assert!(it.converged, "kkt residual {:e}", it.kkt_residual);
    let p = &it.primal;
    for (&i, &s) in inst.support.iter().zip(&inst.signs) {
        prop_assert!((col_dot(&inst.phi, i, p) - s).abs() <= 1e-7);
    }
    for j in 0..n {
        prop_assert!(col_dot(&inst.phi, j, p).abs() <= 1.0 + 1e-7);
    }
    let cp = solver::first_order::certificate_chambolle_pock(
        &inst.phi,
        &inst.support,
        &inst.signs,
        beta,
        &solver::first_order::FirstOrderOptions {
            tolerance: 1e-7,
            max_iterations: 20_000,
            check_every: 100,
        },
    );
    if cp.converged {
        let (fa, fc) = (beta.norm(p), beta.norm(&cp.primal));
        prop_assert!(fa <= fc * (1.0 + 1e-5), "active set {fa} worse than first-order {fc}");
    }
    Ok(())
}
