//! Runs a plan end to end: certificate, estimators, CSV tables and a
//! pass/fail summary against the plan thresholds. Everything is computed
//! in memory; writing files is left to the caller.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::Streams;
use crate::maxplus::DEFAULT_TOL;
use crate::semigroup::{explore_law, DegeneracyVerdict, GammaSource, LatticeFit, SemigroupCert, Verdicts};

use super::estimators::{
    berry_esseen_fit, clt_test, estimate_gamma, estimate_sigma2, matrix_form_applies, sigma2_matrix_form,
};
use super::ldp::{ldp_rate, LdpConfig, LdpValue};
use super::local::{llt_box_estimate, renewal_sum, window_mass};
use super::plan::{ExperimentPlan, Stat};
use super::sim::{simulate, InitialCondition};

pub const TOOL: &str = "mplab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Product cap for the certificate computed alongside a run.
pub const RUN_PRODUCT_CAP: usize = 100_000;

const TAG_NU0: u64 = 0x5eed_0001;
const TAG_RENEWAL: u64 = 0x5eed_0002;
const TAG_LDP: u64 = 0x5eed_0003;

/// One CSV line: `n,stat,value,ci_low,ci_high,trials,seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub n: usize,
    pub stat: String,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
    pub trials: usize,
}

impl Row {
    fn new(n: usize, stat: impl Into<String>, value: f64, trials: usize) -> Self {
        Row {
            n,
            stat: stat.into(),
            value,
            ci: None,
            trials,
        }
    }

    fn with_half_width(mut self, hw: f64) -> Self {
        self.ci = Some((self.value - hw, self.value + hw));
        self
    }
}

pub fn csv_header(seed: u64) -> String {
    format!("# tool={TOOL} version={VERSION} seed={seed}\nn,stat,value,ci_low,ci_high,trials,seed\n")
}

pub fn render_csv(rows: &[Row], seed: u64) -> String {
    let mut s = csv_header(seed);
    for r in rows {
        let (lo, hi) = match r.ci {
            Some((lo, hi)) => (lo.to_string(), hi.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.n, r.stat, r.value, lo, hi, r.trials, seed);
    }
    s
}

/// One threshold from the plan and its outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub stat: String,
    pub lo: f64,
    pub hi: f64,
    /// Values of every row carrying the statistic; empty if none was produced.
    pub values: Vec<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub seed: u64,
    /// `(file name, CSV contents)` per statistic family.
    pub files: Vec<(String, String)>,
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
    pub summary: String,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Value of the first row with the given statistic name.
    pub fn value(&self, stat: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.stat == stat).map(|r| r.value)
    }
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v}");
    s.trim_end_matches(".0").to_string()
}

struct Certification {
    cert: SemigroupCert,
    verdicts: Verdicts,
}

impl Certification {
    fn lattice(&self) -> Option<&LatticeFit> {
        match &self.verdicts.shift_lattice {
            Some(Some(fit)) => Some(fit),
            _ => None,
        }
    }
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<RunOutput> {
    plan.validate()?;
    let seed = plan
        .seed
        .ok_or_else(|| Error::InvalidPlan("a master seed is required".into()))?;
    let streams = Streams::new(seed);
    let threads = plan.threads;
    let mut summary = String::new();
    let _ = writeln!(summary, "# tool={TOOL} version={VERSION} seed={seed}");
    if let Some(p) = &plan.law_path {
        let _ = writeln!(summary, "law = {}", p.display());
    }
    let horizons: Vec<String> = plan.horizons.iter().map(|h| h.to_string()).collect();
    let _ = writeln!(summary, "phi = {}", plan.phi);
    let _ = writeln!(summary, "horizons = {}", horizons.join(", "));
    let _ = writeln!(summary, "trials = {}", plan.trials);

    let samples = simulate(
        &plan.law,
        plan.phi,
        &plan.x0,
        &plan.horizons,
        plan.trials,
        plan.burn_in,
        streams,
        threads,
    )?;
    let n_max = samples.last().n;
    let trials = plan.trials;
    let g = estimate_gamma(&samples)?;
    let (gamma, gamma_source) = match plan.gamma {
        Some(v) => (v.to_f64(), GammaSource::Supplied),
        None => (g.gamma_hat, GammaSource::Estimated { ci: g.ci }),
    };
    let _ = writeln!(
        summary,
        "gamma_used = {} ({})",
        fmt_num(gamma),
        if plan.gamma.is_some() { "supplied" } else { "estimated" }
    );

    let certification = if plan.law.is_finite_support() {
        let cert = explore_law(&plan.law, plan.certify_depth, RUN_PRODUCT_CAP, threads)?;
        let (gv, tol) = match plan.gamma {
            Some(v) => (v, DEFAULT_TOL),
            None => (crate::maxplus::MaxPlus::real(g.gamma_hat), DEFAULT_TOL.max(4.0 * g.ci)),
        };
        let verdicts = Verdicts::compute(&cert, Some((gv, gamma_source.clone())), tol)?;
        let _ = write!(summary, "{}", cert.to_text());
        let _ = write!(summary, "{}", verdicts.to_text(&cert));
        Some(Certification { cert, verdicts })
    } else {
        let _ = writeln!(summary, "certificate = not applicable (parametric law)");
        None
    };

    let mut families: Vec<(Stat, Vec<Row>)> = Vec::new();

    if plan.wants(Stat::Gamma) {
        families.push((
            Stat::Gamma,
            vec![
                Row::new(n_max, "gamma_hat", g.gamma_hat, trials).with_half_width(g.ci),
                Row::new(n_max, "gamma_upper", g.upper, trials).with_half_width(g.upper_ci),
                Row::new(n_max, "gamma_lower", g.lower, trials).with_half_width(g.lower_ci),
            ],
        ));
    }

    let needs_sigma = [Stat::Sigma2, Stat::Clt, Stat::BerryEsseen, Stat::Llt]
        .iter()
        .any(|s| plan.wants(*s));
    let sigma = needs_sigma.then(|| estimate_sigma2(&samples, gamma));
    let sigma2 = plan.sigma2.or(sigma.as_ref().map(|s| s.sigma2));
    if let Some(s) = &sigma {
        let _ = writeln!(
            summary,
            "sigma2_used = {} ({})",
            fmt_num(sigma2.unwrap_or(0.0)),
            if plan.sigma2.is_some() { "supplied" } else { "estimated" }
        );
        if plan.wants(Stat::Sigma2) {
            let mut rows = vec![Row::new(n_max, "sigma2", s.sigma2, trials).with_half_width(s.ci)];
            if let (Some(b), Some(ci)) = (s.batch_means, s.batch_ci) {
                rows.push(Row::new(n_max, "sigma2_batch", b, trials).with_half_width(ci));
            }
            if matrix_form_applies(&samples, &plan.x0) {
                let m = sigma2_matrix_form(&plan.law, n_max, trials, gamma, streams, threads)?;
                rows.push(Row::new(n_max, "sigma2_matrix", m, trials));
                rows.push(Row::new(n_max, "sigma2_forms_agree", f64::from(u8::from(m == s.sigma2)), trials));
            }
            families.push((Stat::Sigma2, rows));
        }
    }

    let degenerate = |sigma2: f64| -> Option<Error> {
        let verdict = certification.as_ref().and_then(|c| c.verdicts.degeneracy.clone());
        let cert_says = matches!(verdict, Some(DegeneracyVerdict::Degenerate));
        if sigma2 > 0.0 && !cert_says {
            return None;
        }
        let reason = match (&certification, cert_says) {
            (Some(c), true) => format!(
                "the semigroup certificate is degenerate (rho_set = {{{}}} at depth {}), so σ = 0",
                c.cert
                    .rho_set()
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
                c.cert.explored_depth
            ),
            _ => format!("σ̂² = {sigma2}"),
        };
        Some(Error::Degenerate(format!(
            "CLT-type statistics need σ > 0, but {reason}"
        )))
    };

    if plan.wants(Stat::Clt) || plan.wants(Stat::BerryEsseen) {
        let s2 = sigma2.unwrap_or(0.0);
        if let Some(e) = degenerate(s2) {
            return Err(e);
        }
        let clt = clt_test(&samples, gamma, s2)?;
        if plan.wants(Stat::Clt) {
            let mut rows = Vec::new();
            for r in &clt {
                rows.push(Row::new(r.n, "clt_ks", r.ks, trials));
                rows.push(Row::new(r.n, "clt_ks_vector", r.ks_vector, trials));
                rows.push(Row::new(r.n, "spread_q99", r.spread_q99, trials));
            }
            families.push((Stat::Clt, rows));
        }
        if plan.wants(Stat::BerryEsseen) {
            let be = berry_esseen_fit(&clt, plan.moment_order)?;
            families.push((
                Stat::BerryEsseen,
                vec![
                    Row::new(n_max, "be_slope", be.slope, trials).with_half_width(be.ci),
                    Row::new(n_max, "be_vector_slope", be.vector_slope, trials).with_half_width(be.vector_ci),
                    Row::new(n_max, "be_vector_exponent", be.vector_exponent, trials),
                    Row::new(n_max, "be_stuck", f64::from(u8::from(be.stuck)), trials),
                ],
            ));
        }
    }

    let lattice = certification.as_ref().and_then(|c| c.lattice());
    let nu0 = if plan.wants(Stat::Llt) || plan.wants(Stat::Renewal) {
        if let Some(fit) = lattice {
            return Err(Error::Arithmetic {
                offset: fit.offset.to_string(),
                step: fit.step.to_string(),
            });
        }
        let (m, ci) = window_mass(
            &plan.law,
            &plan.llt.window,
            plan.llt.nu0_samples,
            plan.llt.nu0_depth,
            streams.derive(TAG_NU0),
            threads,
        )?;
        let _ = writeln!(summary, "nu0_window = {} ± {}", fmt_num(m), fmt_num(ci));
        m
    } else {
        1.0
    };

    if plan.wants(Stat::Llt) {
        let s2 = sigma2.unwrap_or(0.0);
        if let Some(e) = degenerate(s2) {
            return Err(e);
        }
        let rows = llt_box_estimate(
            &samples,
            gamma,
            s2,
            &plan.llt.tents,
            &plan.llt.window,
            nu0,
            &plan.llt.u,
            lattice,
        )?;
        let mut out = Vec::new();
        for r in rows {
            let tag = format!("t{}_u{}", r.tent, fmt_num(r.u));
            out.push(Row::new(r.n, format!("llt_{tag}"), r.value, trials).with_half_width(r.ci));
            out.push(Row::new(r.n, format!("llt_limit_{tag}"), r.limit, trials));
            out.push(Row::new(r.n, format!("llt_relerr_{tag}"), r.relative_error(), trials));
        }
        families.push((Stat::Llt, out));
    }

    if plan.wants(Stat::Renewal) {
        let spec = plan.renewal.as_ref().expect("validated");
        let rt = spec.trials.unwrap_or(trials);
        let rows = renewal_sum(
            &plan.law,
            plan.phi,
            &plan.x0,
            spec.tent,
            &plan.llt.window,
            nu0,
            gamma,
            &spec.a,
            rt,
            streams.derive(TAG_RENEWAL),
            threads,
            lattice,
        )?;
        let mut out = Vec::new();
        for r in rows {
            let tag = format!("a{}", fmt_num(r.a));
            out.push(Row::new(r.horizon, format!("renewal_{tag}"), r.value, rt).with_half_width(r.ci));
            out.push(Row::new(r.horizon, format!("renewal_limit_{tag}"), r.limit, rt));
            out.push(Row::new(
                r.horizon,
                format!("renewal_relerr_{tag}"),
                (r.value - r.limit).abs() / r.limit,
                rt,
            ));
            out.push(Row::new(r.horizon, format!("renewal_tail_{tag}"), r.tail_fraction, rt));
        }
        families.push((Stat::Renewal, out));
    }

    if plan.wants(Stat::Ldp) {
        let spec = plan.ldp.as_ref().expect("validated");
        let InitialCondition::Fixed(x0) = &plan.x0 else {
            unreachable!("validated")
        };
        let n = spec.n.unwrap_or(n_max);
        let mut cfg = LdpConfig::new(n, spec.base_trials.unwrap_or(trials));
        if let Some(m) = spec.max_trials {
            cfg.max_trials = m.max(cfg.base_trials);
        }
        let curve = ldp_rate(
            &plan.law,
            plan.phi,
            x0,
            gamma,
            &spec.eps,
            &cfg,
            streams.derive(TAG_LDP),
            threads,
        )?;
        let mut out = Vec::new();
        for p in &curve.points {
            let tag = format!("eps{}", fmt_num(p.eps));
            match p.value {
                LdpValue::Value { rate, ci } => {
                    out.push(Row::new(n, format!("ldp_rate_{tag}"), rate, p.trials).with_half_width(ci))
                }
                LdpValue::Censored { lower_bound } => {
                    out.push(Row::new(n, format!("ldp_lower_bound_{tag}"), lower_bound, p.trials))
                }
            }
        }
        out.push(Row::new(n, "ldp_monotone", f64::from(u8::from(curve.monotone)), cfg.base_trials));
        out.push(Row::new(n, "ldp_convex", f64::from(u8::from(curve.convex)), cfg.base_trials));
        families.push((Stat::Ldp, out));
    }

    let rows: Vec<Row> = families.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let files = families
        .iter()
        .map(|(s, r)| (format!("{}.csv", s.name()), render_csv(r, seed)))
        .collect();

    let checks: Vec<Check> = plan
        .expect
        .iter()
        .map(|(stat, &(lo, hi))| {
            let values: Vec<f64> = rows.iter().filter(|r| &r.stat == stat).map(|r| r.value).collect();
            let passed = !values.is_empty() && values.iter().all(|v| lo <= *v && *v <= hi);
            Check {
                stat: stat.clone(),
                lo,
                hi,
                values,
                passed,
            }
        })
        .collect();
    for c in &checks {
        let shown = if c.values.is_empty() {
            "not produced".to_string()
        } else {
            c.values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(
            summary,
            "check {} in [{}, {}]: {} {}",
            c.stat,
            fmt_num(c.lo),
            fmt_num(c.hi),
            shown,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    let all = checks.iter().all(|c| c.passed);
    let _ = writeln!(summary, "result = {}", if all { "PASS" } else { "FAIL" });

    Ok(RunOutput {
        seed,
        files,
        rows,
        checks,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxplus::{MaxPlus, MpMatrix};
    use crate::stochastic::OperatorLaw;

    fn coin() -> OperatorLaw {
        OperatorLaw::uniform(vec![
            ("zero", MpMatrix::constant(2, MaxPlus::int(0))),
            ("one", MpMatrix::constant(2, MaxPlus::int(1))),
        ])
        .unwrap()
    }

    #[test]
    fn csv_layout() {
        let rows = vec![Row::new(10, "gamma_hat", 0.5, 100).with_half_width(0.25), Row::new(10, "x", 1.0, 100)];
        assert_eq!(
            render_csv(&rows, 9),
            format!(
                "# tool=mplab version={VERSION} seed=9\nn,stat,value,ci_low,ci_high,trials,seed\n\
                 10,gamma_hat,0.5,0.25,0.75,100,9\n10,x,1,,,100,9\n"
            )
        );
    }

    #[test]
    fn coin_plan_passes_and_is_reproducible() {
        let mut plan = ExperimentPlan::new(coin(), vec![50, 200], 2000, 4).with_stats(&[Stat::Gamma, Stat::Sigma2, Stat::Clt]);
        plan.expect.insert("gamma_hat".into(), (0.45, 0.55));
        plan.expect.insert("missing".into(), (0.0, 1.0));
        plan.threads = 1;
        let a = run_plan(&plan).unwrap();
        plan.threads = 3;
        let b = run_plan(&plan).unwrap();
        assert_eq!(a.files, b.files);
        assert_eq!(a.files.len(), 3);
        assert!(a.checks[0].passed);
        assert!(!a.checks[1].passed);
        assert!(!a.passed());
        assert!(a.summary.contains("result = FAIL"));
        assert!(a.summary.contains("arithmetic = lattice (0, 1)"));
    }

    #[test]
    fn degenerate_clt_names_the_certificate() {
        let law = OperatorLaw::uniform(vec![
            ("Z", MpMatrix::constant(2, MaxPlus::int(0))),
            ("P", crate::maxplus::parse_matrix("2\n-inf 0\n0 -inf\n").unwrap()),
        ])
        .unwrap();
        let mut plan = ExperimentPlan::new(law, vec![20], 100, 1).with_stats(&[Stat::Clt]);
        plan.gamma = Some(MaxPlus::int(0));
        match run_plan(&plan) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("certificate is degenerate"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_is_required() {
        let mut plan = ExperimentPlan::new(coin(), vec![5], 100, 0);
        plan.seed = None;
        assert!(run_plan(&plan).is_err());
    }
}
