//! `mplab`: spectral analysis, semigroup certificates and limit-theorem
//! experiments for stochastic max-plus systems.
//!
//! Exit status: 0 on success, 1 when a plan threshold fails, 2 on errors.

mod output;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use maxplus_lab::exec::Streams;
use maxplus_lab::limit::{estimate_gamma, parse_plan, render_csv, run_plan, simulate, InitialCondition, Row, TOOL, VERSION};
use maxplus_lab::maxplus::{parse_matrix, MaxPlus, TopicalFunctional, DEFAULT_TOL};
use maxplus_lab::semigroup::{explore_law, GammaSource, Verdicts, DEFAULT_PRODUCT_CAP};
use maxplus_lab::spectral::analyze;
use maxplus_lab::stochastic::{
    default_invariant_depth, detect_coupling, parse_law, sample_invariant_many, InvariantSample, OperatorLaw,
};

/// Horizon and trials of the pilot run that estimates γ for `certify`.
const GAMMA_PILOT_N: usize = 1000;
const GAMMA_PILOT_TRIALS: usize = 1000;

#[derive(Parser)]
#[command(name = "mplab", version, about = "Stochastic max-plus dynamics lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Directory receiving the output files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// ρ_max, critical graph, cyclicity and ultimate periodicity of a matrix.
    Spectral {
        matrix: PathBuf,
        /// Tolerance for float entries.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Number of powers examined by the periodicity check.
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Explores the semigroup of a finite-support law: memory-loss witness,
    /// degeneracy and arithmeticity verdicts.
    Certify {
        law: PathBuf,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Lyapunov exponent used by the verdicts (e.g. `1/2`).
        #[arg(long)]
        gamma: Option<String>,
        /// Seed of the pilot run estimating γ when `--gamma` is absent.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Maximum number of distinct products.
        #[arg(long, default_value_t = DEFAULT_PRODUCT_CAP)]
        cap: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Runs an experiment plan and writes one CSV per statistic family.
    Run {
        plan: PathBuf,
        /// Overrides the plan seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the plan γ.
        #[arg(long)]
        gamma: Option<String>,
        /// Overrides the certificate depth.
        #[arg(long)]
        depth: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact draws from the invariant measure by backward coupling.
    SampleInvariant {
        law: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Maximum number of factors; chosen from a pilot coupling run by default.
        #[arg(long)]
        depth: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Coupling frequency of forward products by depth.
    Coupling {
        law: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 50)]
        depth: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Text shown on stdout, files to write, and whether thresholds passed.
struct Outcome {
    report: String,
    files: Vec<(String, String)>,
    passed: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_law(path: &Path) -> Result<OperatorLaw> {
    parse_law(&read(path)?).with_context(|| format!("in law file {}", path.display()))
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| anyhow!("{what} is stochastic and needs a master seed (--seed)"))
}

fn parse_gamma(text: &str) -> Result<MaxPlus> {
    text.parse::<MaxPlus>()
        .ok()
        .filter(|g| g.is_finite())
        .ok_or_else(|| anyhow!("--gamma must be a finite number or fraction, got `{text}`"))
}

fn header(seed: u64) -> String {
    format!("# tool={TOOL} version={VERSION} seed={seed}\n")
}

fn spectral(matrix: &Path, tol: f64, horizon: Option<usize>) -> Result<Outcome> {
    let a = parse_matrix(&read(matrix)?).with_context(|| format!("in matrix file {}", matrix.display()))?;
    a.check_operator()
        .with_context(|| format!("{} is not a valid max-plus operator", matrix.display()))?;
    let report = analyze(&a, horizon, tol)?.to_text();
    Ok(Outcome {
        files: vec![("spectral.txt".into(), report.clone())],
        report,
        passed: true,
    })
}

#[allow(clippy::too_many_arguments)]
fn certify(
    law_path: &Path,
    depth: usize,
    gamma: Option<&str>,
    seed: Option<u64>,
    tol: f64,
    cap: usize,
    threads: usize,
) -> Result<Outcome> {
    let law = load_law(law_path)?;
    if !law.is_finite_support() {
        bail!(
            "certify explores the semigroup generated by the support, so the law must have \
             finite support; {} is parametric",
            law_path.display()
        );
    }
    let cert = explore_law(&law, depth, cap, threads)?;
    let (gamma, tol) = match (gamma, seed) {
        (Some(g), _) => (Some((parse_gamma(g)?, GammaSource::Supplied)), tol),
        (None, Some(seed)) => {
            let s = simulate(
                &law,
                TopicalFunctional::Max,
                &InitialCondition::zero(law.dim()),
                &[GAMMA_PILOT_N],
                GAMMA_PILOT_TRIALS,
                1,
                Streams::new(seed),
                threads,
            )?;
            let g = estimate_gamma(&s)?;
            (
                Some((MaxPlus::real(g.gamma_hat), GammaSource::Estimated { ci: g.ci })),
                tol.max(4.0 * g.ci),
            )
        }
        (None, None) => (None, tol),
    };
    let verdicts = Verdicts::compute(&cert, gamma, tol)?;
    let mut report = format!("law = {}\n", law_path.display());
    report.push_str(&cert.to_text());
    report.push_str(&verdicts.to_text(&cert));
    if verdicts.gamma.is_none() {
        report.push_str("note = pass --gamma or --seed to obtain the degeneracy verdict\n");
    }
    Ok(Outcome {
        files: vec![("certificate.txt".into(), report.clone())],
        report,
        passed: true,
    })
}

fn run(plan_path: &Path, seed: Option<u64>, gamma: Option<&str>, depth: Option<usize>, threads: usize) -> Result<Outcome> {
    let base = plan_path.parent().unwrap_or(Path::new("."));
    let mut plan = parse_plan(&read(plan_path)?, base).with_context(|| format!("in plan {}", plan_path.display()))?;
    if let Some(s) = seed {
        plan.seed = Some(s);
    }
    if let Some(g) = gamma {
        plan.gamma = Some(parse_gamma(g)?);
    }
    if let Some(d) = depth {
        plan.certify_depth = d;
    }
    plan.threads = threads;
    require_seed(plan.seed, "run")?;
    let out = run_plan(&plan)?;
    let passed = out.passed();
    let mut files = out.files;
    files.push(("summary.txt".into(), out.summary.clone()));
    Ok(Outcome {
        report: out.summary,
        files,
        passed,
    })
}

fn sample_invariant(law_path: &Path, seed: Option<u64>, samples: usize, depth: Option<usize>, threads: usize) -> Result<Outcome> {
    let seed = require_seed(seed, "sample-invariant")?;
    if samples == 0 {
        bail!("--samples must be positive");
    }
    let law = load_law(law_path)?;
    let streams = Streams::new(seed);
    let depth = match depth {
        Some(d) => d,
        None => default_invariant_depth(&law, 1000, 1000, streams.derive(1), threads)?.ok_or_else(|| {
            anyhow!("no coupling within 1000 steps in the pilot run; the law may lack memory loss (pass --depth to force)")
        })?,
    };
    let draws = sample_invariant_many(&law, depth, samples, streams, threads);
    let d = law.dim();
    let mut csv = header(seed);
    let coords: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let _ = writeln!(csv, "index,status,depth,{}", coords.join(","));
    let mut censored = 0;
    for (i, s) in draws.iter().enumerate() {
        match s {
            InvariantSample::Exact { point, depth } => {
                let xs: Vec<String> = point.rep().iter().map(|v| v.to_string()).collect();
                let _ = writeln!(csv, "{i},exact,{depth},{}", xs.join(","));
            }
            InvariantSample::Censored { depth } => {
                censored += 1;
                let _ = writeln!(csv, "{i},censored,{depth},{}", vec![""; d].join(","));
            }
        }
    }
    let report = format!(
        "{}law = {}\nsamples = {samples}\ndepth = {depth}\nexact = {}\ncensored = {censored}\n",
        header(seed),
        law_path.display(),
        samples - censored
    );
    Ok(Outcome {
        report,
        files: vec![("invariant.csv".into(), csv)],
        passed: true,
    })
}

fn coupling(law_path: &Path, seed: Option<u64>, depth: usize, trials: usize, threads: usize) -> Result<Outcome> {
    let seed = require_seed(seed, "coupling")?;
    let law = load_law(law_path)?;
    let stats = detect_coupling(&law, depth, trials, Streams::new(seed), threads)?;
    let t = trials as f64;
    let rows: Vec<Row> = (1..=depth)
        .map(|n| {
            let p = stats.coupling_frequency(n);
            let hw = 1.96 * (p * (1.0 - p) / t).sqrt();
            Row {
                n,
                stat: "coupling_freq".into(),
                value: p,
                ci: Some((p - hw, p + hw)),
                trials,
            }
        })
        .collect();
    let mean = stats
        .mean_time()
        .map_or_else(|| "none".to_string(), |m| m.to_string());
    let report = format!(
        "{}law = {}\ntrials = {trials}\ndepth = {depth}\ncoupled = {}\ncensored = {}\nmean_coupling_time = {mean}\n",
        header(seed),
        law_path.display(),
        stats.coupled(),
        stats.censored()
    );
    Ok(Outcome {
        report,
        files: vec![("coupling.csv".into(), render_csv(&rows, seed))],
        passed: true,
    })
}

fn execute(cli: Cli) -> Result<bool> {
    let (outcome, common) = match cli.command {
        Command::Spectral { matrix, tol, horizon, common } => (spectral(&matrix, tol, horizon)?, common),
        Command::Certify { law, depth, gamma, seed, tol, cap, common } => (
            certify(&law, depth, gamma.as_deref(), seed, tol, cap, common.threads)?,
            common,
        ),
        Command::Run { plan, seed, gamma, depth, common } => {
            let out = common
                .out
                .as_ref()
                .ok_or_else(|| anyhow!("run writes a CSV set and needs --out <dir>"))?;
            // fail on conflicting targets before spending time on the run
            output::check_targets(out, &["summary.txt"], common.force)?;
            (run(&plan, seed, gamma.as_deref(), depth, common.threads)?, common)
        }
        Command::SampleInvariant { law, seed, samples, depth, common } => {
            (sample_invariant(&law, seed, samples, depth, common.threads)?, common)
        }
        Command::Coupling { law, seed, depth, trials, common } => {
            (coupling(&law, seed, depth, trials, common.threads)?, common)
        }
    };
    if let Some(dir) = &common.out {
        output::write_all(dir, &outcome.files, common.force)?;
    }
    print!("{}", outcome.report);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
