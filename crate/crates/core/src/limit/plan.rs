//! Experiment plans: which statistics to estimate on which law, and the
//! thresholds the results must meet.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::maxplus::{project, MaxPlus, TopicalFunctional};
use crate::stochastic::{parse_law, Noise, OperatorLaw};

use super::local::{Tent, Window};
use super::sim::{check_horizons, InitialCondition};

/// Smallest trial count a plan may request.
pub const MIN_TRIALS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stat {
    Gamma,
    Sigma2,
    Clt,
    BerryEsseen,
    Llt,
    Renewal,
    Ldp,
}

impl Stat {
    pub fn name(self) -> &'static str {
        match self {
            Stat::Gamma => "gamma",
            Stat::Sigma2 => "sigma2",
            Stat::Clt => "clt",
            Stat::BerryEsseen => "berry_esseen",
            Stat::Llt => "llt",
            Stat::Renewal => "renewal",
            Stat::Ldp => "ldp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "gamma" => Stat::Gamma,
            "sigma2" => Stat::Sigma2,
            "clt" => Stat::Clt,
            "berry_esseen" => Stat::BerryEsseen,
            "llt" => Stat::Llt,
            "renewal" => Stat::Renewal,
            "ldp" => Stat::Ldp,
            other => return Err(Error::InvalidPlan(format!("unknown statistic `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LltSpec {
    pub tents: Vec<Tent>,
    pub u: Vec<f64>,
    pub window: Window,
    /// Exact `ν₀` draws used to estimate `ν₀(g)`.
    pub nu0_samples: usize,
    pub nu0_depth: usize,
}

impl Default for LltSpec {
    fn default() -> Self {
        LltSpec {
            tents: vec![Tent {
                center: 0.0,
                half_width: 1.0,
            }],
            u: vec![0.0],
            window: Window::One,
            nu0_samples: 10_000,
            nu0_depth: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenewalSpec {
    pub a: Vec<f64>,
    pub tent: Tent,
    pub trials: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdpSpec {
    pub eps: Vec<f64>,
    /// Horizon; the largest plan horizon by default.
    pub n: Option<usize>,
    pub base_trials: Option<usize>,
    pub max_trials: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub law: OperatorLaw,
    pub law_path: Option<PathBuf>,
    pub phi: TopicalFunctional,
    pub horizons: Vec<usize>,
    pub trials: usize,
    pub seed: Option<u64>,
    pub threads: usize,
    pub x0: InitialCondition,
    pub burn_in: usize,
    /// Exact `γ`; estimated when absent.
    pub gamma: Option<MaxPlus>,
    /// `σ²`; estimated when absent.
    pub sigma2: Option<f64>,
    /// Moment order `l` of a random `X⁰` (rate exponent of the vector CLT).
    pub moment_order: Option<f64>,
    pub stats: Vec<Stat>,
    pub certify_depth: usize,
    pub llt: LltSpec,
    pub renewal: Option<RenewalSpec>,
    pub ldp: Option<LdpSpec>,
    /// `stat -> [lo, hi]`.
    pub expect: BTreeMap<String, (f64, f64)>,
}

impl ExperimentPlan {
    /// Plan with defaults: `φ = max`, `x0 = 0`, burn-in 1, no statistics.
    pub fn new(law: OperatorLaw, horizons: Vec<usize>, trials: usize, seed: u64) -> Self {
        let dim = law.dim();
        ExperimentPlan {
            law,
            law_path: None,
            phi: TopicalFunctional::Max,
            horizons,
            trials,
            seed: Some(seed),
            threads: 0,
            x0: InitialCondition::zero(dim),
            burn_in: 1,
            gamma: None,
            sigma2: None,
            moment_order: None,
            stats: Vec::new(),
            certify_depth: 8,
            llt: LltSpec::default(),
            renewal: None,
            ldp: None,
            expect: BTreeMap::new(),
        }
    }

    pub fn with_stats(mut self, stats: &[Stat]) -> Self {
        self.stats = stats.to_vec();
        self
    }

    pub fn wants(&self, s: Stat) -> bool {
        self.stats.contains(&s)
    }

    pub fn validate(&self) -> Result<()> {
        check_horizons(&self.horizons)?;
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidPlan(format!(
                "trials must be at least {MIN_TRIALS}, got {}",
                self.trials
            )));
        }
        self.phi.check_dim(self.law.dim())?;
        self.x0.check_dim(self.law.dim())?;
        if self.wants(Stat::Renewal) && self.renewal.is_none() {
            return Err(Error::InvalidPlan("renewal requested without a [renewal] table".into()));
        }
        if self.wants(Stat::Ldp) && self.ldp.is_none() {
            return Err(Error::InvalidPlan("ldp requested without an [ldp] table".into()));
        }
        if self.wants(Stat::Ldp) && matches!(self.x0, InitialCondition::Random(_)) {
            return Err(Error::InvalidPlan("ldp needs a fixed initial condition".into()));
        }
        for (k, (lo, hi)) in &self.expect {
            if !(lo <= hi) {
                return Err(Error::InvalidPlan(format!("threshold `{k}` has lo > hi")));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    fn scalar(&self) -> Result<MaxPlus> {
        match self {
            Num::Int(v) => Ok(MaxPlus::int(*v)),
            Num::Float(v) => MaxPlus::try_real(*v),
            Num::Text(t) => t.parse(),
        }
    }

    fn real(&self) -> Result<f64> {
        let v = self.scalar()?;
        if !v.is_finite() {
            return Err(Error::InvalidPlan("expected a finite number".into()));
        }
        Ok(v.to_f64())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WindowField {
    Name(String),
    Tent { center: Vec<f64>, radius: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LltFile {
    tents: Option<Vec<[f64; 2]>>,
    u: Option<Vec<f64>>,
    window: Option<WindowField>,
    nu0_samples: Option<usize>,
    nu0_depth: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RenewalFile {
    a: Vec<f64>,
    tent: Option<[f64; 2]>,
    trials: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LdpFile {
    eps: Vec<f64>,
    n: Option<usize>,
    base_trials: Option<usize>,
    max_trials: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    law: String,
    phi: Option<String>,
    horizons: Vec<usize>,
    trials: usize,
    seed: Option<u64>,
    threads: Option<usize>,
    x0: Option<Vec<Num>>,
    x0_noise: Option<String>,
    moment_order: Option<f64>,
    burn_in: Option<usize>,
    gamma: Option<Num>,
    sigma2: Option<Num>,
    stats: Vec<String>,
    certify_depth: Option<usize>,
    llt: Option<LltFile>,
    renewal: Option<RenewalFile>,
    ldp: Option<LdpFile>,
    #[serde(default)]
    expect: BTreeMap<String, [f64; 2]>,
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let (line, column) = e
        .span()
        .map(|s| {
            let before = &text[..s.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
            (line, column)
        })
        .unwrap_or((0, 0));
    Error::Parse {
        line,
        column,
        message: e.message().to_string(),
    }
}

/// Reads a plan; the `law` path is resolved against `base_dir`.
///
/// ```toml
/// law = "coin.toml"
/// horizons = [100, 400]
/// trials = 10000
/// seed = 7
/// stats = ["gamma", "sigma2", "clt"]
///
/// [expect]
/// gamma_hat = [0.49, 0.51]
/// ```
pub fn parse_plan(text: &str, base_dir: &Path) -> Result<ExperimentPlan> {
    let file: PlanFile = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let law_path = base_dir.join(&file.law);
    let law_text = std::fs::read_to_string(&law_path)
        .map_err(|e| Error::Io(format!("cannot read law file {}: {e}", law_path.display())))?;
    let law = parse_law(&law_text)?;
    let dim = law.dim();
    let mut plan = ExperimentPlan::new(law, file.horizons, file.trials, 0);
    plan.law_path = Some(law_path);
    plan.seed = file.seed;
    if let Some(phi) = file.phi {
        plan.phi = phi.parse()?;
    }
    plan.threads = file.threads.unwrap_or(0);
    plan.x0 = match (file.x0, file.x0_noise) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidPlan("give either `x0` or `x0_noise`, not both".into()))
        }
        (Some(x), None) => InitialCondition::Fixed(x.iter().map(Num::real).collect::<Result<_>>()?),
        (None, Some(noise)) => InitialCondition::Random(noise.parse::<Noise>()?),
        (None, None) => InitialCondition::zero(dim),
    };
    plan.moment_order = file.moment_order;
    plan.burn_in = file.burn_in.unwrap_or(1);
    plan.gamma = file.gamma.as_ref().map(Num::scalar).transpose()?;
    plan.sigma2 = file.sigma2.as_ref().map(Num::real).transpose()?;
    plan.stats = file.stats.iter().map(|s| Stat::parse(s)).collect::<Result<_>>()?;
    plan.stats.sort();
    plan.stats.dedup();
    if let Some(d) = file.certify_depth {
        plan.certify_depth = d;
    }
    if let Some(l) = file.llt {
        let defaults = LltSpec::default();
        plan.llt = LltSpec {
            tents: match l.tents {
                Some(ts) => ts.iter().map(|t| Tent::new(t[0], t[1])).collect::<Result<_>>()?,
                None => defaults.tents,
            },
            u: l.u.unwrap_or(defaults.u),
            window: match l.window {
                None => Window::One,
                Some(WindowField::Name(n)) if n == "one" => Window::One,
                Some(WindowField::Name(n)) => {
                    return Err(Error::InvalidPlan(format!("unknown window `{n}`")))
                }
                Some(WindowField::Tent { center, radius }) => {
                    if !(radius > 0.0) {
                        return Err(Error::InvalidPlan("window radius must be positive".into()));
                    }
                    Window::Tent {
                        center: project(&center)?,
                        radius,
                    }
                }
            },
            nu0_samples: l.nu0_samples.unwrap_or(defaults.nu0_samples),
            nu0_depth: l.nu0_depth.unwrap_or(defaults.nu0_depth),
        };
    }
    if let Some(r) = file.renewal {
        let t = r.tent.unwrap_or([0.0, 1.0]);
        plan.renewal = Some(RenewalSpec {
            a: r.a,
            tent: Tent::new(t[0], t[1])?,
            trials: r.trials,
        });
    }
    if let Some(l) = file.ldp {
        plan.ldp = Some(LdpSpec {
            eps: l.eps,
            n: l.n,
            base_trials: l.base_trials,
            max_trials: l.max_trials,
        });
    }
    plan.expect = file.expect.into_iter().map(|(k, v)| (k, (v[0], v[1]))).collect();
    plan.validate()?;
    Ok(plan)
}
