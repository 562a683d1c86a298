//! Empirical large deviation rate `ĉ(ε) = −(1/n)·log P[S_n − nγ > nε]`
//! (lower tail `< nε` for negative `ε`).
//!
//! Tails with at least [`MIN_HITS`] direct hits are estimated by plain
//! Monte Carlo. Deeper tails of finite-support laws switch to a
//! state-dependent exponential tilt: at state `x̄`, atom `k` is drawn with
//! probability `∝ p_k·exp(t·ξ_k(x̄))`, and a path is reweighted by
//! `exp(−t·S_n)·Π Z(x̄(j))`. Other laws report a censored lower bound.

use crate::error::{Error, Result};
use crate::exec::{open_unit, par_map_indexed, Streams};
use crate::maxplus::{MpMatrix, TopicalFunctional};
use crate::stochastic::{OperatorLaw, Walker};

/// Fewest tail hits for which an empirical probability is reported.
pub const MIN_HITS: usize = 5;

const TAG_DIRECT: u64 = 0x1d9;
const TAG_PILOT: u64 = 0x1da;
const TAG_TILT: u64 = 0x1db;

#[derive(Clone, Debug, PartialEq)]
pub struct LdpConfig {
    pub n: usize,
    /// Trials of the direct run and of each tilted batch.
    pub base_trials: usize,
    /// Budget of tilted trials per `ε`.
    pub max_trials: usize,
    /// Tilted batches stop once the relative standard error of `P̂` is
    /// below this.
    pub target_rel_err: f64,
    pub pilot_paths: usize,
    pub pilot_len: usize,
}

impl LdpConfig {
    pub fn new(n: usize, base_trials: usize) -> Self {
        LdpConfig {
            n,
            base_trials,
            max_trials: 16 * base_trials,
            target_rel_err: 0.02,
            pilot_paths: 32,
            pilot_len: n.min(256),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LdpMethod {
    Direct,
    Tilted { t: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum LdpValue {
    Value { rate: f64, ci: f64 },
    /// Fewer than `MIN_HITS` hits: only `ĉ >= lower_bound` is known.
    Censored { lower_bound: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdpPoint {
    pub eps: f64,
    pub n: usize,
    pub method: LdpMethod,
    pub value: LdpValue,
    pub trials: usize,
    pub hits: usize,
}

impl LdpPoint {
    pub fn rate(&self) -> Option<f64> {
        match self.value {
            LdpValue::Value { rate, .. } => Some(rate),
            LdpValue::Censored { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdpCurve {
    pub points: Vec<LdpPoint>,
    /// Uncensored rates are nondecreasing in `|ε|` on each side.
    pub monotone: bool,
    /// Uncensored rates on `ε >= 0` have nonnegative second differences
    /// (on the grid spacing).
    pub convex: bool,
}

fn in_tail(s: f64, n: usize, gamma: f64, eps: f64) -> bool {
    let dev = s - n as f64 * gamma;
    if eps >= 0.0 {
        dev > n as f64 * eps
    } else {
        dev < n as f64 * eps
    }
}

fn censored_bound(trials: usize, n: usize) -> f64 {
    -((MIN_HITS as f64 / trials as f64).ln()) / n as f64
}

#[allow(clippy::too_many_arguments)]
pub fn ldp_rate(
    law: &OperatorLaw,
    phi: TopicalFunctional,
    x0: &[f64],
    gamma: f64,
    eps_grid: &[f64],
    cfg: &LdpConfig,
    streams: Streams,
    threads: usize,
) -> Result<LdpCurve> {
    if cfg.n == 0 {
        return Err(Error::InvalidPlan("LDP horizon must be positive".into()));
    }
    if cfg.base_trials == 0 {
        return Err(Error::NoTrials);
    }
    phi.check_dim(law.dim())?;
    let phi0 = phi.apply(x0)?;
    let direct_streams = streams.derive(TAG_DIRECT);
    let direct: Vec<f64> = par_map_indexed(cfg.base_trials, threads, |i| -> Result<f64> {
        let mut w = Walker::new(law, x0, direct_streams.stream(i))?;
        for _ in 0..cfg.n {
            w.step();
        }
        Ok(w.value(phi) - phi0)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(eps_grid.len());
    for (k, &eps) in eps_grid.iter().enumerate() {
        let hits = direct.iter().filter(|s| in_tail(**s, cfg.n, gamma, eps)).count();
        let point = if hits >= MIN_HITS {
            let t = cfg.base_trials as f64;
            let p = hits as f64 / t;
            LdpPoint {
                eps,
                n: cfg.n,
                method: LdpMethod::Direct,
                value: LdpValue::Value {
                    rate: -p.ln() / cfg.n as f64,
                    ci: 1.96 * ((1.0 - p) / (p * t)).sqrt() / cfg.n as f64,
                },
                trials: cfg.base_trials,
                hits,
            }
        } else if let Some(support) = law.support() {
            let atoms: Vec<(&MpMatrix, f64)> = support.iter().map(|p| (&p.matrix, p.prob)).collect();
            tilted_point(&atoms, phi, x0, gamma, eps, cfg, streams.derive(TAG_TILT + k as u64), streams, threads)
        } else {
            LdpPoint {
                eps,
                n: cfg.n,
                method: LdpMethod::Direct,
                value: LdpValue::Censored {
                    lower_bound: censored_bound(cfg.base_trials, cfg.n),
                },
                trials: cfg.base_trials,
                hits,
            }
        };
        points.push(point);
    }
    let (monotone, convex) = shape_diagnostics(&points);
    Ok(LdpCurve {
        points,
        monotone,
        convex,
    })
}

fn shape_diagnostics(points: &[LdpPoint]) -> (bool, bool) {
    let side = |positive: bool| {
        let mut v: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| (p.eps >= 0.0) == positive)
            .filter_map(|p| p.rate().map(|r| (p.eps.abs(), r)))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let pos = side(true);
    let neg = side(false);
    let monotone = [&pos, &neg]
        .iter()
        .all(|v| v.windows(2).all(|w| w[1].1 >= w[0].1));
    let convex = pos.windows(3).all(|w| {
        let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
        s2 >= s1
    });
    (monotone, convex)
}

/// One tilted step from `rep`: fills `xi` and `ys` for every atom and
/// returns `ln Z`.
fn tilt_weights(
    atoms: &[(&MpMatrix, f64)],
    phi: TopicalFunctional,
    rep: &[f64],
    t: f64,
    ys: &mut [Vec<f64>],
    xi: &mut [f64],
    q: &mut [f64],
) -> f64 {
    let base = phi.eval(rep);
    for (k, (a, _)) in atoms.iter().enumerate() {
        a.apply_into(rep, &mut ys[k]);
        xi[k] = phi.eval(&ys[k]) - base;
    }
    let top = xi.iter().map(|x| t * x).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (k, (_, p)) in atoms.iter().enumerate() {
        q[k] = p * (t * xi[k] - top).exp();
        z += q[k];
    }
    for v in q.iter_mut() {
        *v /= z;
    }
    z.ln() + top
}

struct TiltPath {
    dim: usize,
    rep: Vec<f64>,
    ys: Vec<Vec<f64>>,
    xi: Vec<f64>,
    q: Vec<f64>,
}

impl TiltPath {
    fn new(x0: &[f64], atoms: usize) -> Self {
        let m = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        TiltPath {
            dim: x0.len(),
            rep: x0.iter().map(|v| v - m).collect(),
            ys: vec![vec![0.0; x0.len()]; atoms],
            xi: vec![0.0; atoms],
            q: vec![0.0; atoms],
        }
    }

    fn choose(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, q) in self.q.iter().enumerate() {
            acc += q;
            if u < acc {
                return k;
            }
        }
        self.q.len() - 1
    }

    fn advance(&mut self, k: usize) {
        let y = &self.ys[k];
        let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..self.dim {
            self.rep[i] = y[i] - m;
        }
    }
}

/// Average conditional drift `Σ_k q_k ξ_k` of the tilted chain along
/// pilot paths.
fn pilot_drift(
    atoms: &[(&MpMatrix, f64)],
    phi: TopicalFunctional,
    x0: &[f64],
    t: f64,
    cfg: &LdpConfig,
    streams: Streams,
) -> f64 {
    let mut total = 0.0;
    for i in 0..cfg.pilot_paths {
        let mut rng = streams.stream(i as u64);
        let mut path = TiltPath::new(x0, atoms.len());
        for _ in 0..cfg.pilot_len {
            tilt_weights(atoms, phi, &path.rep, t, &mut path.ys, &mut path.xi, &mut path.q);
            total += path.q.iter().zip(&path.xi).map(|(q, x)| q * x).sum::<f64>();
            let k = path.choose(open_unit(&mut rng));
            path.advance(k);
        }
    }
    total / (cfg.pilot_paths * cfg.pilot_len) as f64
}

/// Tilt parameter whose pilot drift reaches `target`, by bracketing and
/// bisection. `None` when no finite tilt gets there.
fn solve_tilt(
    atoms: &[(&MpMatrix, f64)],
    phi: TopicalFunctional,
    x0: &[f64],
    target: f64,
    cfg: &LdpConfig,
    streams: Streams,
) -> Option<f64> {
    let drift = |t| pilot_drift(atoms, phi, x0, t, cfg, streams);
    let d0 = drift(0.0);
    let sign = if target >= d0 { 1.0 } else { -1.0 };
    let mut lo = 0.0;
    let mut hi = sign;
    let reached = |d: f64| if sign > 0.0 { d >= target } else { d <= target };
    while !reached(drift(hi)) {
        lo = hi;
        hi *= 2.0;
        if hi.abs() > 256.0 {
            return None;
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if reached(drift(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[allow(clippy::too_many_arguments)]
fn tilted_point(
    atoms: &[(&MpMatrix, f64)],
    phi: TopicalFunctional,
    x0: &[f64],
    gamma: f64,
    eps: f64,
    cfg: &LdpConfig,
    tilt_streams: Streams,
    streams: Streams,
    threads: usize,
) -> LdpPoint {
    let n = cfg.n;
    let censored = |trials: usize, hits: usize, method: LdpMethod| LdpPoint {
        eps,
        n,
        method,
        value: LdpValue::Censored {
            lower_bound: censored_bound(trials, n),
        },
        trials,
        hits,
    };
    let Some(t) = solve_tilt(atoms, phi, x0, gamma + eps, cfg, streams.derive(TAG_PILOT)) else {
        return censored(cfg.base_trials, 0, LdpMethod::Tilted { t: f64::INFINITY });
    };
    // log-weights of tail paths, `None` outside the tail
    let mut log_w: Vec<Option<f64>> = Vec::new();
    loop {
        let start = log_w.len();
        let batch = par_map_indexed(cfg.base_trials, threads, |i| {
            let mut rng = tilt_streams.stream((start as u64) + i);
            let mut path = TiltPath::new(x0, atoms.len());
            let mut s = 0.0;
            let mut log_lr = 0.0;
            for _ in 0..n {
                let ln_z = tilt_weights(atoms, phi, &path.rep, t, &mut path.ys, &mut path.xi, &mut path.q);
                let k = path.choose(open_unit(&mut rng));
                s += path.xi[k];
                log_lr += ln_z - t * path.xi[k];
                path.advance(k);
            }
            in_tail(s, n, gamma, eps).then_some(log_lr)
        });
        log_w.extend(batch);
        let trials = log_w.len();
        let hits: Vec<f64> = log_w.iter().flatten().copied().collect();
        if hits.len() >= MIN_HITS {
            let top = hits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scaled: Vec<f64> = hits.iter().map(|l| (l - top).exp()).collect();
            let sum: f64 = scaled.iter().sum();
            let sum_sq: f64 = scaled.iter().map(|v| v * v).sum();
            let m = sum / trials as f64;
            let var = (sum_sq / trials as f64 - m * m).max(0.0);
            let rel = (var / trials as f64).sqrt() / m;
            if rel <= cfg.target_rel_err || trials >= cfg.max_trials {
                let log_p = top + m.ln();
                return LdpPoint {
                    eps,
                    n,
                    method: LdpMethod::Tilted { t },
                    value: LdpValue::Value {
                        rate: -log_p / n as f64,
                        ci: 1.96 * rel / n as f64,
                    },
                    trials,
                    hits: hits.len(),
                };
            }
        } else if trials >= cfg.max_trials {
            return censored(trials, hits.len(), LdpMethod::Tilted { t });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxplus::MaxPlus;

    fn coin() -> OperatorLaw {
        OperatorLaw::uniform(vec![
            ("zero", MpMatrix::constant(2, MaxPlus::int(0))),
            ("one", MpMatrix::constant(2, MaxPlus::int(1))),
        ])
        .unwrap()
    }

    fn cramer(a: f64) -> f64 {
        a * (2.0 * a).ln() + (1.0 - a) * (2.0 * (1.0 - a)).ln()
    }

    #[test]
    fn coin_rate_matches_cramer() {
        let cfg = LdpConfig::new(400, 2000);
        let curve = ldp_rate(
            &coin(),
            TopicalFunctional::Max,
            &[0.0, 0.0],
            0.5,
            &[0.0, 0.1, 0.2, -0.2],
            &cfg,
            Streams::new(3),
            0,
        )
        .unwrap();
        assert_eq!(curve.points[0].method, LdpMethod::Direct);
        assert!(curve.points[0].rate().unwrap() < 0.005);
        for p in &curve.points[2..] {
            assert!(matches!(p.method, LdpMethod::Tilted { .. }), "{p:?}");
            // finite-n correction of order log(n)/n
            let r = p.rate().unwrap();
            assert!((r - cramer(0.5 + p.eps.abs())).abs() < 0.015, "{p:?}");
        }
        assert!(curve.monotone);
    }

    #[test]
    fn unreachable_tail_is_censored() {
        let cfg = LdpConfig::new(50, 200);
        let curve = ldp_rate(
            &coin(),
            TopicalFunctional::Max,
            &[0.0, 0.0],
            0.5,
            &[0.6],
            &cfg,
            Streams::new(3),
            1,
        )
        .unwrap();
        assert!(matches!(curve.points[0].value, LdpValue::Censored { .. }));
    }

    #[test]
    fn tilt_solves_bernoulli_mean() {
        let law = coin();
        let atoms: Vec<(&MpMatrix, f64)> = law.support().unwrap().iter().map(|p| (&p.matrix, p.prob)).collect();
        let cfg = LdpConfig::new(100, 10);
        let t = solve_tilt(&atoms, TopicalFunctional::Max, &[0.0, 0.0], 0.7, &cfg, Streams::new(1)).unwrap();
        assert!((t - (7.0f64 / 3.0).ln()).abs() < 1e-6, "{t}");
    }
}
