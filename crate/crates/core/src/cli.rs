//! Command-line front end.
//!
//! Exit codes: 0 success, 1 negative result, 2 input error, 3 injectivity
//! failure, 4 regime violation, 5 solver failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::certificate::{self, CertificateConfig, ProblemInstance};
use crate::error::{Error, Result};
use crate::experiments::toy::{self, TauList};
use crate::experiments::{self, output, rng, ExperimentConfig};
use crate::linalg::{self, Matrix};
use crate::norm::NormIndex;
use crate::solver::{PivotRule, SolverConfig};
use crate::stability::{self, StabilityAnalysis};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INJECTIVITY: i32 = 3;
pub const EXIT_REGIME: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "supstab", version, about = "Support stability certificates for l1-regularized regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide whether x0 is recovered by basis pursuit from its own measurements.
    Certify(InstanceArgs),
    /// Minimum-norm certificate, multiplier and noise constants for one loss.
    Analyze {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Loss exponent: 1, 2 or inf.
        #[arg(long)]
        alpha: NormIndex,
        /// Write the analysis record (JSON) here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Saturation tolerance for the extended support.
        #[arg(long, default_value_t = certificate::DEFAULT_SAT_TOLERANCE)]
        sat_tol: f64,
        /// Pivot rule of the simplex solver.
        #[arg(long, default_value = "bland", value_parser = parse_pivot)]
        pivot: PivotRule,
    },
    /// Closed-form solution supported on the extended support.
    Predict {
        #[command(flatten)]
        problem: NoisyArgs,
        /// Write the predicted solution (vector text format) here.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Skip the regime check.
        #[arg(long)]
        force: bool,
    },
    /// Check the prediction against the optimality system and a solver.
    Verify {
        #[command(flatten)]
        problem: NoisyArgs,
        /// Bound on the residual and the objective gap.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Solution path of a seeded 20 x 10 instance under the l_inf loss.
    Toy {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Increasing regularization levels, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        tau_list: Vec<f64>,
        /// Read the levels as fractions of c2 * x_min.
        #[arg(long)]
        relative: bool,
        /// CSV output file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo sweep over sparsities and loss exponents.
    Sweep {
        /// Config file (key=value lines) or a preset name: desk, paper_scale.
        #[arg(long, default_value = "desk")]
        config: String,
        /// Override the grid of 1/alpha values, comma separated.
        #[arg(long, value_delimiter = ',')]
        inv_alpha: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory; defaults to the config's output_path, then `sweep_out`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct InstanceArgs {
    /// Design matrix in text format.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Signal x0 in vector text format.
    #[arg(long)]
    pub signal: PathBuf,
    /// Entries of x0 with magnitude at most this are treated as zero.
    #[arg(long, default_value_t = 0.0)]
    pub support_tol: f64,
}

#[derive(Args, Debug)]
pub struct NoisyArgs {
    /// Analysis record written by `analyze`.
    #[arg(long)]
    pub analysis: PathBuf,
    #[arg(long)]
    pub tau: f64,
    /// Noise vector in vector text format.
    #[arg(long, conflicts_with = "noise_uniform")]
    pub noise_file: Option<PathBuf>,
    /// Half-width of i.i.d. uniform noise.
    #[arg(long)]
    pub noise_uniform: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_pivot(s: &str) -> std::result::Result<PivotRule, String> {
    match s.to_ascii_lowercase().as_str() {
        "bland" => Ok(PivotRule::Bland),
        "dantzig" => Ok(PivotRule::Dantzig),
        _ => Err(format!("unknown pivot rule '{s}'")),
    }
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotIdentifiable => EXIT_NEGATIVE,
        Error::NotInjective(_) => EXIT_INJECTIVITY,
        Error::NoiseRegimeViolated(_) | Error::TauOutOfRange { .. } | Error::MuDegenerate(_) => EXIT_REGIME,
        Error::Linalg(_) | Error::InvalidInput(_) | Error::Io(_) | Error::SignSnap(_) | Error::TooLarge(_) => EXIT_INPUT,
        Error::Infeasible | Error::Unbounded | Error::MaxIter { .. } | Error::Postcondition(_) => EXIT_SOLVER,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn load_instance(args: &InstanceArgs) -> Result<ProblemInstance> {
    let phi = Matrix::from_text(&read(&args.matrix)?)?;
    let x0 = linalg::vector_from_text(&read(&args.signal)?)?;
    ProblemInstance::new(phi, x0, args.support_tol)
}

fn load_noisy(args: &NoisyArgs) -> Result<(StabilityAnalysis, Vec<f64>)> {
    let analysis = StabilityAnalysis::from_json(&read(&args.analysis)?)?;
    let m = analysis.instance.phi.rows();
    let w = match (&args.noise_file, args.noise_uniform) {
        (Some(path), _) => linalg::vector_from_text(&read(path)?)?,
        (None, Some(delta)) => {
            if !(delta >= 0.0 && delta.is_finite()) {
                return Err(Error::InvalidInput(format!("noise half-width must be nonnegative, got {delta}")));
            }
            rng::uniform_noise(m, delta, &mut rng::stream_rng(args.seed, 0))
        }
        (None, None) => vec![0.0; m],
    };
    if w.len() != m {
        return Err(Error::InvalidInput(format!("noise has length {}, expected {m}", w.len())));
    }
    if !(args.tau > 0.0 && args.tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {}", args.tau)));
    }
    Ok((analysis, w))
}

fn list<T: std::fmt::Display>(v: &[T]) -> String {
    let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn opt(v: Option<f64>) -> String {
    v.map_or("inf".into(), |x| format!("{x:e}"))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Certify(args) => {
            let inst = load_instance(&args)?;
            let (ok, _) = certificate::is_identifiable(&inst, &SolverConfig::default())?;
            writeln!(out, "identifiable: {ok}")?;
            Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Analyze {
            instance,
            alpha,
            output,
            sat_tol,
            pivot,
        } => {
            let inst = load_instance(&instance)?;
            let cfg = CertificateConfig {
                solver: SolverConfig::default().with_pivot_rule(pivot),
                sat_tolerance: sat_tol,
                check_uniqueness: true,
            };
            let a = StabilityAnalysis::analyze(&inst, alpha, &cfg)?;
            report_analysis(&a, out)?;
            match output {
                Some(path) => fs::write(path, a.to_json())?,
                None => writeln!(out, "{}", a.to_json())?,
            }
            Ok(EXIT_OK)
        }
        Command::Predict { problem, output, force } => {
            let (a, w) = load_noisy(&problem)?;
            let x = stability::predicted_noisy_solution(&a, &w, problem.tau, force)?;
            let support = certificate::support(&x, 0.0);
            writeln!(out, "tau: {}", problem.tau)?;
            writeln!(out, "noise norm: {:e}", a.alpha.norm(&w))?;
            writeln!(out, "support: {}", list(&support))?;
            writeln!(out, "support equals extended support: {}", support == a.extended_support())?;
            match output {
                Some(path) => fs::write(path, linalg::vector_to_text(&x))?,
                None => write!(out, "{}", linalg::vector_to_text(&x))?,
            }
            Ok(EXIT_OK)
        }
        Command::Verify { problem, tolerance } => {
            let (a, w) = load_noisy(&problem)?;
            let r = stability::verify_theorem(&a, &w, problem.tau, &SolverConfig::default())?;
            writeln!(out, "tau: {}", r.tau)?;
            writeln!(out, "noise norm: {:e}", r.noise_norm)?;
            writeln!(out, "kkt residual: {:e}", r.kkt_residual)?;
            writeln!(out, "objective gap: {:e}", r.objective_gap)?;
            writeln!(out, "predicted support: {}", list(&r.predicted_support))?;
            writeln!(out, "solver support: {}", list(&r.solver_support))?;
            writeln!(out, "predicted support equals extended support: {}", r.predicted_support_matches)?;
            writeln!(out, "solver status: {}", r.solver_status)?;
            let pass = r.passes(tolerance);
            writeln!(out, "pass: {pass}")?;
            Ok(if pass { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Toy {
            seed,
            tau_list,
            relative,
            output,
        } => {
            let taus = if relative { TauList::Relative(tau_list) } else { TauList::Absolute(tau_list) };
            let t = toy::toy_trajectory(seed, &taus, &SolverConfig::default())?;
            writeln!(out, "seed: {} (requested {})", t.seed, t.requested_seed)?;
            writeln!(out, "support: {}", list(&t.analysis.instance.support))?;
            writeln!(out, "extended support: {}", list(t.analysis.extended_support()))?;
            writeln!(out, "noise half-width: {:e}", t.delta)?;
            for p in &t.points {
                writeln!(out, "tau {:e}: support {} matches {}", p.tau, list(&p.support), p.support_matches)?;
            }
            if let Some(path) = output {
                output::write_toy(fs::File::create(path)?, &t)?;
            }
            Ok(EXIT_OK)
        }
        Command::Sweep {
            config,
            inv_alpha,
            seed,
            trials,
            jobs,
            output,
        } => {
            let mut cfg = match ExperimentConfig::preset(&config) {
                Some(cfg) if !Path::new(&config).exists() => cfg,
                _ => ExperimentConfig::parse(&read(Path::new(&config))?)?,
            };
            if let Some(grid) = inv_alpha {
                cfg.alpha_grid = grid;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(t) = trials {
                cfg.trials_per_k = t;
            }
            cfg.jobs = jobs;
            cfg.validate()?;
            let dir = output.or(cfg.output_path.clone()).unwrap_or_else(|| PathBuf::from("sweep_out"));
            fs::create_dir_all(&dir)?;
            let records = experiments::run_sweep(&cfg)?;
            write_sweep(&dir, &cfg, &records)?;
            let failures: usize = records
                .iter()
                .map(|r| r.error.is_some() as usize + r.outcomes.iter().filter(|o| o.error.is_some()).count())
                .sum();
            writeln!(out, "records: {}", records.len())?;
            writeln!(out, "failed solves: {failures}")?;
            writeln!(out, "output: {}", dir.display())?;
            Ok(EXIT_OK)
        }
    }
}

/// Writes every CSV of a sweep into `dir`.
pub fn write_sweep(dir: &Path, cfg: &ExperimentConfig, records: &[experiments::TrialRecord]) -> Result<()> {
    output::write_records(fs::File::create(dir.join("records.csv"))?, cfg, records)?;
    output::write_failures(fs::File::create(dir.join("failures.csv"))?, cfg, records)?;
    let curves = experiments::probability_curves(records, &cfg.s_e_values);
    output::write_curves(fs::File::create(dir.join("curves.csv"))?, cfg, &curves)?;
    output::write_curve_points(fs::File::create(dir.join("curve_points.csv"))?, cfg, &curves)?;
    for &s_e in &cfg.s_e_values {
        let h = experiments::alpha_heatmap(records, s_e);
        output::write_heatmap(fs::File::create(dir.join(format!("heatmap_se{s_e}.csv")))?, cfg, &h)?;
    }
    Ok(())
}

fn report_analysis(a: &StabilityAnalysis, out: &mut dyn Write) -> Result<()> {
    let c = &a.constants;
    let cert = &a.certificate;
    writeln!(out, "alpha: {}", a.alpha)?;
    writeln!(out, "support: {}", list(&a.instance.support))?;
    writeln!(out, "extended support: {}", list(a.extended_support()))?;
    writeln!(out, "support excess: {}", list(a.support_excess()))?;
    writeln!(out, "certificate norm: {:e}", cert.objective)?;
    if let Some(alt) = &cert.alternative_extended_support {
        writeln!(out, "alternative optimal certificate has extended support {}", list(alt))?;
    }
    writeln!(out, "dual index set: {}", list(&a.dual_set))?;
    writeln!(out, "a: {:e}", c.a)?;
    writeln!(out, "b: {:e}", c.b)?;
    writeln!(out, "nu: {:e}", c.nu)?;
    if let Some(mu) = c.mu {
        writeln!(out, "mu: {mu:e}")?;
    }
    writeln!(out, "v_min: {}", opt(c.v_min))?;
    if let Some(z) = c.z_min {
        writeln!(out, "z_min: {z:e}")?;
    }
    if let Some(d) = c.margin {
        writeln!(out, "margin: {d:e}")?;
    }
    writeln!(out, "c1: {:e}", c.c1)?;
    writeln!(out, "c2: {:e}", c.c2)?;
    writeln!(out, "x_min: {:e}", a.x_min)?;
    writeln!(out, "tau_max: {:e}", a.tau_max())?;
    if c.derived {
        writeln!(out, "constants: derived")?;
    }
    if let Some(note) = &c.note {
        writeln!(out, "note: {note}")?;
    }
    Ok(())
}
