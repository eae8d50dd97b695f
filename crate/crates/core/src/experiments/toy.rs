//! Solution path of a single small instance under the `l_inf` loss as the
//! regularization level grows.

use serde::{Deserialize, Serialize};

use crate::certificate::{CertificateConfig, ProblemInstance};
use crate::error::{Error, Result};
use crate::experiments::rng;
use crate::norm::NormIndex;
use crate::solver::kkt::{relative_support, PRIMAL_SUPPORT_TOL};
use crate::solver::{self, SolverConfig};
use crate::stability::{self, StabilityAnalysis};

pub const TOY_N: usize = 20;
pub const TOY_M: usize = 10;
pub const TOY_K: usize = 4;
/// Noise half-width as a fraction of `c1 * min(tau)`.
pub const NOISE_FRACTION: f64 = 0.9;
/// Seeds tried after the requested one before giving up.
pub const MAX_REDRAWS: u64 = 1000;

const DESIGN_STREAM: u64 = 0;
const SIGNAL_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Regularization levels, either absolute or as fractions of `c2 * x_min`.
#[derive(Clone, Debug, PartialEq)]
pub enum TauList {
    Absolute(Vec<f64>),
    Relative(Vec<f64>),
}

impl TauList {
    fn values(&self) -> &[f64] {
        match self {
            TauList::Absolute(v) | TauList::Relative(v) => v,
        }
    }

    fn resolve(&self, tau_max: f64) -> Vec<f64> {
        match self {
            TauList::Absolute(v) => v.clone(),
            TauList::Relative(v) => v.iter().map(|f| f * tau_max).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToyPoint {
    pub tau: f64,
    pub solution: Vec<f64>,
    pub support: Vec<usize>,
    pub predicted: Vec<f64>,
    pub support_matches: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToyTrajectory {
    pub requested_seed: u64,
    /// Seed of the instance actually used.
    pub seed: u64,
    pub analysis: StabilityAnalysis,
    /// Half-width of the uniform noise.
    pub delta: f64,
    pub noise: Vec<f64>,
    pub points: Vec<ToyPoint>,
}

impl ToyTrajectory {
    /// `Phi^T p` of the minimum-norm certificate.
    pub fn correlations(&self) -> &[f64] {
        &self.analysis.certificate.correlations
    }
}

/// Draws the instance of `seed`: Gaussian design, `+-1` signal.
pub fn toy_instance(seed: u64) -> Result<ProblemInstance> {
    let phi = rng::gaussian_design(TOY_M, TOY_N, &mut rng::stream_rng(seed, DESIGN_STREAM));
    let x0 = rng::rademacher_signal(TOY_N, TOY_K, &mut rng::stream_rng(seed, SIGNAL_STREAM));
    ProblemInstance::new(phi, x0, 0.0)
}

/// First instance from `seed` onward that is identifiable and admits the
/// closed-form analysis, with its seed.
pub fn admissible_instance(seed: u64) -> Result<(u64, StabilityAnalysis)> {
    let cfg = CertificateConfig::default();
    for s in seed..seed.saturating_add(MAX_REDRAWS) {
        match StabilityAnalysis::analyze(&toy_instance(s)?, NormIndex::Inf, &cfg) {
            Ok(a) => return Ok((s, a)),
            Err(Error::NotIdentifiable | Error::NotInjective(_) | Error::MuDegenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NotIdentifiable)
}

/// Solves the `l_inf`-constrained problem for every `tau` with a common
/// noise vector of half-width `0.9 c1 min(tau)`.
pub fn toy_trajectory(seed: u64, taus: &TauList, cfg: &SolverConfig) -> Result<ToyTrajectory> {
    let raw = taus.values();
    if raw.is_empty() || raw.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidInput("tau values must be positive and finite".into()));
    }
    if raw.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("tau values must be increasing".into()));
    }
    let (used, analysis) = admissible_instance(seed)?;
    let tau_values = taus.resolve(analysis.tau_max());
    let delta = NOISE_FRACTION * analysis.constants.c1 * tau_values[0];
    let noise = rng::uniform_noise(TOY_M, delta, &mut rng::stream_rng(used, NOISE_STREAM));
    let inst = &analysis.instance;
    let y: Vec<f64> = inst.measurements().iter().zip(&noise).map(|(a, b)| a + b).collect();
    let mut points = Vec::with_capacity(tau_values.len());
    for &tau in &tau_values {
        let predicted = stability::predicted_noisy_solution(&analysis, &noise, tau, false)?;
        let solved = solver::solve_primal(&inst.phi, &y, NormIndex::Inf, tau, cfg)?;
        let support = relative_support(&solved.primal, PRIMAL_SUPPORT_TOL);
        points.push(ToyPoint {
            tau,
            support_matches: support == analysis.extended_support(),
            solution: solved.primal,
            support,
            predicted,
        });
    }
    Ok(ToyTrajectory {
        requested_seed: seed,
        seed: used,
        analysis,
        delta,
        noise,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supports_match_in_regime() {
        let taus = TauList::Relative(vec![0.2, 0.5, 1.0]);
        let t = toy_trajectory(1, &taus, &SolverConfig::default()).unwrap();
        assert!(t.delta > 0.0);
        assert!(t.noise.iter().all(|w| w.abs() <= t.delta));
        for p in &t.points {
            assert!(p.support_matches, "tau {} support {:?}", p.tau, p.support);
            let gap: f64 = p.solution.iter().map(|x| x.abs()).sum::<f64>() - p.predicted.iter().map(|x| x.abs()).sum::<f64>();
            assert!(gap.abs() < 1e-8);
        }
        let again = toy_trajectory(1, &taus, &SolverConfig::default()).unwrap();
        assert_eq!(again.seed, t.seed);
        assert_eq!(again.points[2].solution, t.points[2].solution);
    }

    #[test]
    fn rejects_bad_lists() {
        let cfg = SolverConfig::default();
        assert!(toy_trajectory(1, &TauList::Relative(vec![]), &cfg).is_err());
        assert!(toy_trajectory(1, &TauList::Relative(vec![0.5, 0.2]), &cfg).is_err());
        assert!(toy_trajectory(1, &TauList::Absolute(vec![-1.0]), &cfg).is_err());
    }

    #[test]
    fn oversized_tau_is_a_regime_violation() {
        let (_, a) = admissible_instance(1).unwrap();
        let r = toy_trajectory(1, &TauList::Absolute(vec![10.0 * a.tau_max()]), &SolverConfig::default());
        assert!(matches!(r, Err(Error::NoiseRegimeViolated(_))));
    }
}
