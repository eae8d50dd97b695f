//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Criterion 7 repeats criteria 1-6 and compares their CSV output
//! byte for byte.

mod common;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestRunner};

use supstab::certificate::{self, CertificateConfig, ProblemInstance};
use supstab::experiments::rng::{gaussian_design, rademacher_signal, stream_rng, uniform_noise};
use supstab::experiments::{self, output, ExperimentConfig, TrialRecord};
use supstab::linalg::Matrix;
use supstab::solver::{self, SolverConfig};
use supstab::stability::{self, StabilityAnalysis};
use supstab::{Error, NormIndex};

const OPTIMALITY_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-12;
const STABLE_RATE_LIMIT: f64 = 0.05;
const TOY_INSTANCES: usize = 100;
const SEED_LIMIT: u64 = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
    csv: String,
}

fn report(id: &str, name: &str, o: &Outcome, elapsed: Duration) -> bool {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {id} [{verdict}] {name}: {} ({:.1}s)", o.detail, elapsed.as_secs_f64());
    o.pass
}

fn toy_instance(seed: u64) -> ProblemInstance {
    let phi = gaussian_design(10, 20, &mut stream_rng(seed, 0));
    let x0 = rademacher_signal(20, 4, &mut stream_rng(seed, 1));
    ProblemInstance::new(phi, x0, 0.0).unwrap()
}

/// The first `count` seeds whose instance admits the closed-form analysis
/// for `alpha`, with the number of seeds skipped.
fn admissible_analyses(alpha: NormIndex, count: usize) -> (Vec<(u64, StabilityAnalysis)>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut seed = 0;
    while out.len() < count && seed < SEED_LIMIT {
        match StabilityAnalysis::analyze(&toy_instance(seed), alpha, &CertificateConfig::default()) {
            Ok(a) => out.push((seed, a)),
            Err(Error::NotIdentifiable | Error::NotInjective(_) | Error::MuDegenerate(_)) => skipped += 1,
            Err(e) => panic!("seed {seed}: analysis failed: {e}"),
        }
        seed += 1;
    }
    (out, skipped)
}

fn residual(phi: &Matrix, x: &[f64], y: &[f64]) -> Vec<f64> {
    phi.matvec(x).iter().zip(y).map(|(a, b)| a - b).collect()
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Noiseless closed form against the LP optimum of the constrained problem.
fn criterion_1() -> Outcome {
    let fractions = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut csv = String::from("alpha,seed,tau,closed_form_objective,lp_objective,kkt_residual\n");
    let mut worst_gap = 0.0f64;
    let mut worst_kkt = 0.0f64;
    let mut infeasible = 0;
    let mut checked = 0;
    let mut skipped_total = 0;
    for alpha in [NormIndex::One, NormIndex::Inf] {
        let (analyses, skipped) = admissible_analyses(alpha, TOY_INSTANCES);
        skipped_total += skipped;
        for (seed, a) in &analyses {
            let inst = &a.instance;
            let y = inst.measurements();
            for f in fractions {
                let tau = f * a.tau_max_noiseless;
                let x = stability::noiseless_solution(a, tau).unwrap();
                let lp = solver::solve_primal(&inst.phi, &y, alpha, tau, &SolverConfig::default()).unwrap();
                let kkt = solver::kkt_residual(&x, &a.certificate.p, &inst.phi, &y, alpha, tau);
                let obj = l1(&x);
                if alpha.norm(&residual(&inst.phi, &x, &y)) > tau * (1.0 + OPTIMALITY_TOL) {
                    infeasible += 1;
                }
                worst_gap = worst_gap.max((obj - lp.objective).abs());
                worst_kkt = worst_kkt.max(kkt);
                checked += 1;
                writeln!(csv, "{alpha},{seed},{tau},{obj},{},{kkt}", lp.objective).unwrap();
            }
        }
    }
    let pass = checked == 2 * TOY_INSTANCES * fractions.len()
        && worst_gap <= OPTIMALITY_TOL
        && worst_kkt <= OPTIMALITY_TOL
        && infeasible == 0;
    Outcome {
        pass,
        detail: format!(
            "{checked} (instance, tau) pairs, {skipped_total} inadmissible draws skipped, max objective gap {worst_gap:.2e}, max kkt {worst_kkt:.2e}, infeasible {infeasible} (tol {OPTIMALITY_TOL:e})"
        ),
        csv,
    }
}

/// Noisy prediction inside the small-noise regime.
fn criterion_2() -> Outcome {
    let mut csv = String::from("alpha,seed,tau,noise_norm,kkt_residual,objective_gap,support_matches\n");
    let mut worst_kkt = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut mismatches = 0;
    let mut checked = 0;
    let mut lines = Vec::new();
    for alpha in [NormIndex::One, NormIndex::Inf, NormIndex::Two] {
        let (analyses, _) = admissible_analyses(alpha, TOY_INSTANCES);
        let mut alpha_kkt = 0.0f64;
        let mut alpha_mismatch = 0;
        for (seed, a) in &analyses {
            let tau = 0.5 * a.tau_max();
            let u = uniform_noise(a.instance.phi.rows(), 1.0, &mut stream_rng(*seed, 2));
            let scale = 0.5 * a.constants.c1 * tau / alpha.norm(&u);
            let w: Vec<f64> = u.iter().map(|v| v * scale).collect();
            let r = stability::verify_theorem(a, &w, tau, &SolverConfig::default()).unwrap();
            let ok = r.predicted_support_matches;
            alpha_kkt = alpha_kkt.max(r.kkt_residual);
            if !ok {
                alpha_mismatch += 1;
            }
            if alpha != NormIndex::Two {
                worst_gap = worst_gap.max(r.objective_gap);
            }
            checked += 1;
            writeln!(csv, "{alpha},{seed},{tau},{},{},{},{ok}", r.noise_norm, r.kkt_residual, r.objective_gap).unwrap();
        }
        worst_kkt = worst_kkt.max(alpha_kkt);
        mismatches += alpha_mismatch;
        lines.push(format!("alpha={alpha}: max kkt {alpha_kkt:.2e}, support mismatches {alpha_mismatch}"));
    }
    Outcome {
        pass: checked == 3 * TOY_INSTANCES && worst_kkt <= OPTIMALITY_TOL && worst_gap <= OPTIMALITY_TOL && mismatches == 0,
        detail: format!("{}; max LP objective gap {worst_gap:.2e} (tol {OPTIMALITY_TOL:e})", lines.join("; ")),
        csv,
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Identity design under the l_inf loss.
fn criterion_3() -> Outcome {
    let x0 = vec![3.0, 0.0, -2.0, 0.0, 1.5, 0.0];
    let inst = ProblemInstance::new(Matrix::identity(6), x0.clone(), 0.0).unwrap();
    let a = StabilityAnalysis::analyze(&inst, NormIndex::Inf, &CertificateConfig::default()).unwrap();
    let c = &a.constants;
    let constants_ok = c.a == 0.0 && c.mu == Some(0.0) && c.b == 1.0 && c.nu == 1.0 && c.c1 == 1.0 && c.c2 == 0.5;
    let mut csv = format!("a,mu,b,nu,c1,c2\n{},{:?},{},{},{},{}\ntau,index,predicted,soft_threshold\n", c.a, c.mu, c.b, c.nu, c.c1, c.c2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (case, tau) in [0.1, 0.3, 0.5, 0.75].into_iter().enumerate() {
        let w = uniform_noise(6, 0.9 * tau, &mut stream_rng(case as u64, 3));
        let x = stability::predicted_noisy_solution(&a, &w, tau, false).unwrap();
        for i in 0..6 {
            let st = soft_threshold(x0[i] + w[i], tau);
            worst = worst.max((x[i] - st).abs());
            writeln!(csv, "{tau},{i},{},{st}", x[i]).unwrap();
        }
        cases += 1;
    }
    Outcome {
        pass: constants_ok && worst <= IDENTITY_TOL,
        detail: format!(
            "a={} mu={:?} b={} nu={} c1={} c2={}; {cases} noisy cases, max deviation from soft-thresholding {worst:.1e} (tol {IDENTITY_TOL:e})",
            c.a, c.mu, c.b, c.nu, c.c1, c.c2
        ),
        csv,
    }
}

/// Certificate feasibility against direct basis-pursuit optimality of x0.
fn criterion_4() -> Outcome {
    let (m, n) = (6, 10);
    let mut csv = String::from("seed,k,certificate_exists,x0_norm,bp_objective\n");
    let mut agree = 0;
    let mut positives = 0;
    let total = 200;
    for seed in 0..total as u64 {
        let k = 1 + (seed % 4) as usize;
        let phi = gaussian_design(m, n, &mut stream_rng(seed, 10));
        let x0 = rademacher_signal(n, k, &mut stream_rng(seed, 11));
        let inst = ProblemInstance::new(phi, x0, 0.0).unwrap();
        let (feasible, _) = certificate::is_identifiable(&inst, &SolverConfig::default()).unwrap();
        let bp = solver::solve_basis_pursuit(&inst.phi, &inst.measurements(), &SolverConfig::default()).unwrap();
        let norm = l1(&inst.x0);
        let optimal = norm <= bp.objective + 1e-9 * (1.0 + norm);
        agree += (feasible == optimal) as usize;
        positives += feasible as usize;
        writeln!(csv, "{seed},{k},{feasible},{norm},{}", bp.objective).unwrap();
    }
    Outcome {
        pass: agree == total,
        detail: format!("{agree}/{total} agree ({positives} identifiable)"),
        csv,
    }
}

/// `mu < 1` for every Gaussian draw passing injectivity under the l_inf loss.
fn criterion_5(sweep: &[TrialRecord]) -> Outcome {
    let mut csv = String::from("source,seed,k,mu\n");
    let mut total = 0;
    let mut below = 0;
    let mut worst = 0.0f64;
    let (analyses, _) = admissible_analyses(NormIndex::Inf, TOY_INSTANCES);
    for (seed, a) in &analyses {
        let mu = a.constants.mu.unwrap();
        total += 1;
        below += (mu < 1.0) as usize;
        worst = worst.max(mu);
        writeln!(csv, "toy,{seed},4,{mu}").unwrap();
    }
    for r in sweep {
        for o in r.outcomes.iter().filter(|o| o.inv_alpha == 0.0 && o.injective) {
            let Some(mu) = o.mu else { continue };
            total += 1;
            below += (mu < 1.0) as usize;
            worst = worst.max(mu);
            writeln!(csv, "sweep,{},{},{mu}", r.seed, r.k).unwrap();
        }
    }
    Outcome {
        pass: total > 0 && below == total,
        detail: format!("{below}/{total} injective draws with mu < 1, max mu {worst:.6}"),
        csv,
    }
}

fn sweep_config(jobs: usize) -> ExperimentConfig {
    ExperimentConfig {
        jobs,
        ..ExperimentConfig::desk()
    }
}

fn sweep_csv(cfg: &ExperimentConfig, records: &[TrialRecord]) -> String {
    let mut buf = Vec::new();
    output::write_records(&mut buf, cfg, records).unwrap();
    let curves = experiments::probability_curves(records, &cfg.s_e_values);
    output::write_curve_points(&mut buf, cfg, &curves).unwrap();
    for &s in &cfg.s_e_values {
        output::write_heatmap(&mut buf, cfg, &experiments::alpha_heatmap(records, s)).unwrap();
    }
    String::from_utf8(buf).unwrap()
}

/// Desk-scale orderings of the support-excess curves and heatmaps.
fn criterion_6(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Outcome {
    let csv = sweep_csv(cfg, records);
    let curves = experiments::probability_curves(records, &cfg.s_e_values);
    let point = |inv: f64, s_e: usize, k: usize| {
        curves
            .iter()
            .find(|c| c.inv_alpha == inv && c.s_e == Some(s_e) && c.k == k)
            .expect("curve point")
    };
    let k_min = cfg.k_values[0];
    let stable_inf = point(0.0, 0, k_min).probability;
    let part_i = stable_inf <= STABLE_RATE_LIMIT;

    let mut violations = Vec::new();
    for &k in &cfg.k_values {
        let two = point(0.5, 0, k);
        for other in [0.0, 1.0] {
            let o = point(other, 0, k);
            if o.ci_low > two.ci_high {
                violations.push(format!("k={k} 1/alpha={other}"));
            }
        }
    }
    let part_ii = violations.is_empty();

    let mut part_iii = true;
    let mut transitions = Vec::new();
    for &s in &cfg.s_e_values {
        let h = experiments::alpha_heatmap(records, s);
        let t = h.transitions();
        let row2 = h.inv_alpha.iter().position(|&v| v == 0.5).expect("alpha = 2 row");
        if t.iter().any(|other| *other > t[row2]) {
            part_iii = false;
        }
        let show: Vec<String> = t.iter().map(|v| v.map_or("-".into(), |k| k.to_string())).collect();
        transitions.push(format!("s_e={s}: [{}]", show.join(" ")));
    }
    let failures: usize = records.iter().map(|r| r.outcomes.iter().filter(|o| o.error.is_some()).count()).sum();
    Outcome {
        pass: part_i && part_ii && part_iii,
        detail: format!(
            "(i) P(stable, alpha=inf, k={k_min}) = {stable_inf:.3} [{}]; (ii) CI violations {:?} [{}]; (iii) transition k by 1/alpha {} [{}]; failed solves {failures}",
            if part_i { "ok" } else { "fail" },
            violations,
            if part_ii { "ok" } else { "fail" },
            transitions.join("; "),
            if part_iii { "ok" } else { "fail" }
        ),
        csv,
    }
}

/// Property suites on a fixed-seed runner: 1000 cases in total.
fn criterion_8() -> Outcome {
    use common::*;
    use proptest::prelude::*;
    let runner = |cases: u32| TestRunner::new(Config { cases, failure_persistence: None, rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha, ..Config::default() });
    let mut results = Vec::new();
    let mut total = 0u32;
    let mut run = |name: &str, cases: u32, outcome: Result<(), String>| {
        total += cases;
        results.push((name.to_string(), outcome));
    };
    let mut r = runner(200);
    run(
        "subgradient membership",
        200,
        r.run(&(small_instance(), 0usize..3), |((s, m, n, k), l)| check_subgradient(s, m, n, k, LOSSES[l]))
            .map_err(|e| e.to_string()),
    );
    let mut r = runner(200);
    run(
        "sign relation",
        200,
        r.run(&(small_instance(), 0usize..3), |((s, m, n, k), l)| check_sign_relation(s, m, n, k, LOSSES[l]))
            .map_err(|e| e.to_string()),
    );
    let mut r = runner(200);
    run(
        "nested events",
        200,
        r.run(&(any::<u64>(), 3usize..60), |(s, t)| check_nested(s, t)).map_err(|e| e.to_string()),
    );
    let mut r = runner(200);
    run(
        "weak duality",
        200,
        r.run(&(any::<u64>(), 3usize..8, 1usize..8, 0usize..3, 0.05f64..0.95), |(s, m, e, l, f)| {
            check_weak_duality(s, m, m + e, LOSSES[l], f)
        })
        .map_err(|e| e.to_string()),
    );
    let mut r = runner(200);
    run(
        "Moore-Penrose identities",
        200,
        r.run(&(any::<u64>(), 1usize..9, 1usize..9, 1usize..9), |(s, a, b, k)| check_moore_penrose(s, a, b, k.min(a).min(b)))
            .map_err(|e| e.to_string()),
    );
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| n.as_str()).collect();
    Outcome {
        pass: failed.is_empty() && total >= 1000,
        detail: format!("{total} cases over {}; failures {:?}", names.join(", "), failed),
        csv: String::new(),
    }
}

fn main() {
    let mut all = true;
    let mut first = Vec::new();

    let t = Instant::now();
    let o = criterion_1();
    all &= report("1", "noiseless closed form equals LP optimum", &o, t.elapsed()) && t.elapsed() <= Duration::from_secs(120);
    first.push(o.csv);

    let t = Instant::now();
    let o = criterion_2();
    all &= report("2", "noisy prediction in the small-noise regime", &o, t.elapsed()) && t.elapsed() <= Duration::from_secs(180);
    first.push(o.csv);

    let t = Instant::now();
    let o = criterion_3();
    all &= report("3", "identity design analytic check", &o, t.elapsed());
    first.push(o.csv);

    let t = Instant::now();
    let o = criterion_4();
    all &= report("4", "identifiability equivalence", &o, t.elapsed());
    first.push(o.csv);

    let t = Instant::now();
    let cfg = sweep_config(4);
    let records = experiments::run_sweep(&cfg).unwrap();
    let sweep_time = t.elapsed();

    let t = Instant::now();
    let o = criterion_5(&records);
    all &= report("5", "dual margin below one", &o, t.elapsed());
    first.push(o.csv);

    let o = criterion_6(&cfg, &records);
    let within = sweep_time <= Duration::from_secs(1800);
    all &= report("6", "desk-scale support stability orderings", &o, sweep_time) && within;
    first.push(o.csv);

    let t = Instant::now();
    let cfg_again = sweep_config(1);
    let records_again = experiments::run_sweep(&cfg_again).unwrap();
    let again = [
        criterion_1().csv,
        criterion_2().csv,
        criterion_3().csv,
        criterion_4().csv,
        criterion_5(&records_again).csv,
        // the worker count is not part of the header, so 4 and 1 workers compare directly
        criterion_6(&cfg, &records_again).csv,
    ];
    let differing: Vec<usize> = (0..6).filter(|&i| first[i] != again[i]).map(|i| i + 1).collect();
    let o = Outcome {
        pass: differing.is_empty(),
        detail: format!(
            "criteria 1-6 repeated (sweep with 1 worker vs 4): {} bytes compared, differing criteria {:?}",
            first.iter().map(String::len).sum::<usize>(),
            differing
        ),
        csv: String::new(),
    };
    all &= report("7", "determinism", &o, t.elapsed());

    let t = Instant::now();
    let o = criterion_8();
    all &= report("8", "property suites", &o, t.elapsed()) && t.elapsed() <= Duration::from_secs(300);

    println!("acceptance: {}", if all { "all criteria pass" } else { "FAILURES" });
    if !all {
        std::process::exit(1);
    }
}
