//! Seeded Monte-Carlo study of the support excess `|J \ I|` of minimum-norm
//! certificates as a function of the sparsity `k` and the loss exponent.
//!
//! Each `(trial, k)` pair is an independent job: the design is drawn from
//! the trial's stream and the signal from a stream keyed by the pair, so the
//! records do not depend on scheduling and one design is shared across all
//! sparsities of a trial.

pub mod output;
pub mod rng;
pub mod toy;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{self, Certificate, CertificateConfig, ProblemInstance};
use crate::error::{Error, Result};
use crate::norm::NormIndex;
use crate::solver::first_order::SignPattern;
use crate::solver::{PivotRule, SolverConfig};
use crate::stability;

/// Signal streams live above this offset so they never meet a design stream.
const SIGNAL_STREAM_BASE: u64 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub k_values: Vec<usize>,
    pub trials_per_k: usize,
    /// Values of `1/alpha` in `[0, 1]`, increasing.
    pub alpha_grid: Vec<f64>,
    pub s_e_values: Vec<usize>,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub jobs: usize,
    /// Saturation tolerance for `alpha` in `{1, inf}` (exact LP path).
    pub polyhedral_sat_tolerance: f64,
    /// Residual tolerance of the iterative certificate path.
    pub smooth_tolerance: f64,
    /// Saturation tolerance of the iterative certificate path.
    pub smooth_sat_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// `n = 100`, `m = 90`, `k = 2, 4, ..., 60`, 50 trials, 11 exponents.
    pub fn desk() -> Self {
        Self {
            n: 100,
            m: 90,
            k_values: (1..=30).map(|i| 2 * i).collect(),
            trials_per_k: 50,
            alpha_grid: linspace(11),
            s_e_values: vec![0, 5, 10],
            master_seed: 2024,
            output_path: None,
            jobs: 1,
            polyhedral_sat_tolerance: certificate::DEFAULT_SAT_TOLERANCE,
            smooth_tolerance: 1e-7,
            smooth_sat_tolerance: 1e-5,
        }
    }

    /// `n = 1000`, `m = 900`, `k = 10, 20, ..., 600`, 200 trials, 41
    /// exponents.
    pub fn paper_scale() -> Self {
        Self {
            n: 1000,
            m: 900,
            k_values: (1..=60).map(|i| 10 * i).collect(),
            trials_per_k: 200,
            alpha_grid: linspace(41),
            s_e_values: vec![0, 10, 20, 50],
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper_scale" => Some(Self::paper_scale()),
            _ => None,
        }
    }

    /// Reads `key = value` lines; `#` starts a comment. A `preset` key, if
    /// present, is applied before every other key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("line {}: expected key=value", lineno + 1)))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let mut cfg = match pairs.iter().find(|(k, _)| k == "preset") {
            Some((_, name)) => Self::preset(name).ok_or_else(|| Error::InvalidInput(format!("unknown preset {name}")))?,
            None => Self::desk(),
        };
        for (key, value) in &pairs {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidInput(format!("{key}: invalid {what} '{value}'"));
        match key {
            "preset" => {}
            "n" => self.n = value.parse().map_err(|_| bad("integer"))?,
            "m" => self.m = value.parse().map_err(|_| bad("integer"))?,
            "k_values" => self.k_values = parse_usize_list(value).ok_or_else(|| bad("list"))?,
            "trials_per_k" => self.trials_per_k = value.parse().map_err(|_| bad("integer"))?,
            "alpha_grid" => self.alpha_grid = parse_grid(value).ok_or_else(|| bad("grid"))?,
            "alpha_points" => {
                let points: usize = value.parse().map_err(|_| bad("integer"))?;
                if points < 2 {
                    return Err(bad("point count"));
                }
                self.alpha_grid = linspace(points);
            }
            "s_e_values" => self.s_e_values = parse_usize_list(value).ok_or_else(|| bad("list"))?,
            "master_seed" => self.master_seed = value.parse().map_err(|_| bad("integer"))?,
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            "jobs" => self.jobs = value.parse().map_err(|_| bad("integer"))?,
            "polyhedral_sat_tolerance" => self.polyhedral_sat_tolerance = value.parse().map_err(|_| bad("number"))?,
            "smooth_tolerance" => self.smooth_tolerance = value.parse().map_err(|_| bad("number"))?,
            "smooth_sat_tolerance" => self.smooth_sat_tolerance = value.parse().map_err(|_| bad("number"))?,
            _ => return Err(Error::InvalidInput(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInput(msg));
        if self.m == 0 || self.m > self.n {
            return fail(format!("need 0 < m <= n, got m = {}, n = {}", self.m, self.n));
        }
        if self.k_values.is_empty() || self.k_values.iter().any(|&k| k == 0 || k > self.n) {
            return fail("k values must lie in [1, n]".into());
        }
        if self.trials_per_k == 0 {
            return fail("trials_per_k must be at least 1".into());
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return fail("alpha grid values must lie in [0, 1]".into());
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail("alpha grid must be strictly increasing".into());
        }
        if self.jobs == 0 {
            return fail("jobs must be at least 1".into());
        }
        for t in [self.polyhedral_sat_tolerance, self.smooth_tolerance, self.smooth_sat_tolerance] {
            if !(t > 0.0 && t < 1.0) {
                return fail(format!("tolerances must lie in (0, 1), got {t}"));
            }
        }
        Ok(())
    }

    /// One-line summary used in output headers.
    pub fn describe(&self) -> String {
        format!(
            "n={} m={} k_values={} trials_per_k={} alpha_grid={} s_e_values={} master_seed={} polyhedral_sat_tolerance={:e} smooth_tolerance={:e} smooth_sat_tolerance={:e}",
            self.n,
            self.m,
            join(&self.k_values),
            self.trials_per_k,
            join(&self.alpha_grid),
            join(&self.s_e_values),
            self.master_seed,
            self.polyhedral_sat_tolerance,
            self.smooth_tolerance,
            self.smooth_sat_tolerance
        )
    }

    fn certificate_config(&self, alpha: NormIndex) -> CertificateConfig {
        if alpha.conjugate().is_polyhedral() {
            CertificateConfig {
                solver: SolverConfig::default().with_pivot_rule(PivotRule::Dantzig),
                sat_tolerance: self.polyhedral_sat_tolerance,
                check_uniqueness: false,
            }
        } else {
            CertificateConfig {
                solver: SolverConfig::default().with_tolerance(self.smooth_tolerance),
                sat_tolerance: self.smooth_sat_tolerance,
                check_uniqueness: false,
            }
        }
    }
}

/// `points` equispaced values on `[0, 1]`.
pub fn linspace(points: usize) -> Vec<f64> {
    let last = (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|i| i as f64 / last).collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// `a,b,c` or `start:end:step` (inclusive).
fn parse_usize_list(text: &str) -> Option<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let (start, end, step): (usize, usize, usize) = (parts[0].parse().ok()?, parts[1].parse().ok()?, parts[2].parse().ok()?);
        if step == 0 || start > end {
            return None;
        }
        return Some((start..=end).step_by(step).collect());
    }
    text.split(',').map(|s| s.trim().parse().ok()).collect()
}

/// `a,b,c` or `linspace:N`.
fn parse_grid(text: &str) -> Option<Vec<f64>> {
    if let Some(points) = text.strip_prefix("linspace:") {
        let points: usize = points.trim().parse().ok()?;
        return (points >= 2).then(|| linspace(points));
    }
    text.split(',').map(|s| s.trim().parse().ok()).collect()
}

/// Outcome of one loss exponent on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaOutcome {
    pub inv_alpha: f64,
    /// `|J \ I|`; `None` when `x0` is not identifiable or the solve failed.
    pub excess_size: Option<usize>,
    pub injective: bool,
    /// Recorded for `alpha = inf` when restricted injectivity holds.
    pub mu: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Trial index; the design stream of the trial.
    pub seed: u64,
    pub k: usize,
    pub identifiable: bool,
    pub outcomes: Vec<AlphaOutcome>,
    pub error: Option<String>,
}

/// The instance of trial `trial` at sparsity `k_values[k_index]`.
pub fn draw_instance(cfg: &ExperimentConfig, trial: usize, k_index: usize) -> Result<ProblemInstance> {
    let phi = rng::gaussian_design(cfg.m, cfg.n, &mut rng::stream_rng(cfg.master_seed, trial as u64));
    let stream = SIGNAL_STREAM_BASE + (trial as u64) * (cfg.k_values.len() as u64) + k_index as u64;
    let x0 = rng::rademacher_signal(cfg.n, cfg.k_values[k_index], &mut rng::stream_rng(cfg.master_seed, stream));
    ProblemInstance::new(phi, x0, 0.0)
}

/// Visiting order of the grid: outward from the point closest to
/// `1/alpha = 1/2`, each smooth exponent warm-started by its inner neighbour.
fn grid_order(grid: &[f64]) -> Vec<(usize, Option<usize>)> {
    let centre = (0..grid.len())
        .min_by(|&a, &b| (grid[a] - 0.5).abs().total_cmp(&(grid[b] - 0.5).abs()))
        .unwrap_or(0);
    let mut order = vec![(centre, None)];
    let (mut lo, mut hi) = (centre, centre);
    while lo > 0 || hi + 1 < grid.len() {
        if lo > 0 {
            order.push((lo - 1, Some(lo)));
            lo -= 1;
        }
        if hi + 1 < grid.len() {
            order.push((hi + 1, Some(hi)));
            hi += 1;
        }
    }
    order
}

/// Runs one `(trial, k)` job. Failures are captured in the record.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize, k_index: usize) -> TrialRecord {
    let k = cfg.k_values[k_index];
    let empty = |inv: f64, error: Option<String>| AlphaOutcome {
        inv_alpha: inv,
        excess_size: None,
        injective: false,
        mu: None,
        error,
    };
    let mut rec = TrialRecord {
        seed: trial as u64,
        k,
        identifiable: false,
        outcomes: cfg.alpha_grid.iter().map(|&inv| empty(inv, None)).collect(),
        error: None,
    };
    let inst = match draw_instance(cfg, trial, k_index) {
        Ok(inst) => inst,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    match certificate::is_identifiable(&inst, &SolverConfig::default().with_pivot_rule(PivotRule::Dantzig)) {
        Ok((ok, _)) => rec.identifiable = ok,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    }
    if !rec.identifiable {
        return rec;
    }
    let mut patterns: Vec<Option<SignPattern>> = vec![None; cfg.alpha_grid.len()];
    for (gi, warm_from) in grid_order(&cfg.alpha_grid) {
        let inv = cfg.alpha_grid[gi];
        let Some(alpha) = NormIndex::from_inverse(inv) else {
            rec.outcomes[gi] = empty(inv, Some(format!("invalid 1/alpha {inv}")));
            continue;
        };
        let warm = warm_from.and_then(|w| patterns[w].as_ref());
        match certificate::min_norm_certificate_warm(&inst, alpha, &cfg.certificate_config(alpha), warm) {
            Ok(cert) => {
                if !alpha.is_polyhedral() {
                    patterns[gi] = Some(cert.sign_pattern());
                }
                rec.outcomes[gi] = outcome(&inst, alpha, inv, &cert);
            }
            Err(e) => rec.outcomes[gi] = empty(inv, Some(e.to_string())),
        }
    }
    rec
}

fn outcome(inst: &ProblemInstance, alpha: NormIndex, inv: f64, cert: &Certificate) -> AlphaOutcome {
    let mut out = AlphaOutcome {
        inv_alpha: inv,
        excess_size: Some(certificate::support_excess_size(cert)),
        injective: false,
        mu: None,
        error: None,
    };
    if let Ok(inj) = stability::injectivity_check(&inst.phi, cert) {
        out.injective = true;
        if alpha == NormIndex::Inf {
            match stability::multipliers(&inst.phi, cert, &inj) {
                Ok(v) => out.mu = Some(stability::dual_margin_mu(&inst.phi, cert, &inj, &v)),
                Err(e) => out.error = Some(e.to_string()),
            }
        }
    }
    out
}

/// Runs every `(trial, k)` job on `cfg.jobs` worker threads. Records are
/// ordered by `(k, trial)` whatever the schedule.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.k_values.len())
        .flat_map(|ki| (0..cfg.trials_per_k).map(move |t| (t, ki)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(|&(t, ki)| run_trial(cfg, t, ki)).collect()))
}

/// Wilson score interval for `successes` out of `trials` at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let centre = (p + Z * Z / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + Z * Z / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Empirical probability of `identifiable and |J \ I| <= s_e` at one
/// `(1/alpha, s_e, k)`. `s_e = None` stands for `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub inv_alpha: f64,
    pub s_e: Option<usize>,
    pub k: usize,
    pub trials: usize,
    pub successes: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn point(records: &[TrialRecord], gi: usize, inv: f64, s_e: Option<usize>, k: usize) -> CurvePoint {
    let mut trials = 0;
    let mut successes = 0;
    for r in records.iter().filter(|r| r.k == k) {
        trials += 1;
        let ok = r.identifiable
            && match s_e {
                None => true,
                Some(s) => r.outcomes.get(gi).and_then(|o| o.excess_size).is_some_and(|e| e <= s),
            };
        successes += ok as usize;
    }
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    CurvePoint {
        inv_alpha: inv,
        s_e,
        k,
        trials,
        successes,
        probability: if trials > 0 { successes as f64 / trials as f64 } else { 0.0 },
        ci_low,
        ci_high,
    }
}

fn distinct_k(records: &[TrialRecord]) -> Vec<usize> {
    let mut ks: Vec<usize> = records.iter().map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

fn grid_of(records: &[TrialRecord]) -> Vec<f64> {
    records
        .first()
        .map(|r| r.outcomes.iter().map(|o| o.inv_alpha).collect())
        .unwrap_or_default()
}

/// Probability curves for every exponent of the grid, every threshold in
/// `s_e_values` and the identifiability curve (`s_e = inf`).
pub fn probability_curves(records: &[TrialRecord], s_e_values: &[usize]) -> Vec<CurvePoint> {
    let ks = distinct_k(records);
    let mut thresholds: Vec<Option<usize>> = s_e_values.iter().map(|&s| Some(s)).collect();
    thresholds.push(None);
    let mut out = Vec::new();
    for (gi, inv) in grid_of(records).into_iter().enumerate() {
        for &s_e in &thresholds {
            for &k in &ks {
                out.push(point(records, gi, inv, s_e, k));
            }
        }
    }
    out
}

/// Probability grid indexed by `(1/alpha, k)` at one threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub s_e: usize,
    pub inv_alpha: Vec<f64>,
    pub k_values: Vec<usize>,
    /// `probability[row][col]` for `inv_alpha[row]`, `k_values[col]`.
    pub probability: Vec<Vec<f64>>,
}

pub fn alpha_heatmap(records: &[TrialRecord], s_e: usize) -> Heatmap {
    let ks = distinct_k(records);
    let grid = grid_of(records);
    let probability = grid
        .iter()
        .enumerate()
        .map(|(gi, &inv)| ks.iter().map(|&k| point(records, gi, inv, Some(s_e), k).probability).collect())
        .collect();
    Heatmap {
        s_e,
        inv_alpha: grid,
        k_values: ks,
        probability,
    }
}

/// Largest `k` of the row such that the probability is at least `1/2` at
/// every `k' <= k`; `None` when it already starts below `1/2`.
pub fn transition_k(k_values: &[usize], row: &[f64]) -> Option<usize> {
    let mut last = None;
    for (&k, &p) in k_values.iter().zip(row) {
        if p < 0.5 {
            break;
        }
        last = Some(k);
    }
    last
}

impl Heatmap {
    /// Transition sparsity of each row.
    pub fn transitions(&self) -> Vec<Option<usize>> {
        self.probability.iter().map(|row| transition_k(&self.k_values, row)).collect()
    }
}
