//! Lyapunov exponent, asymptotic variance, CLT distances and the
//! Berry–Esseen slope.

use crate::error::{Error, Result};
use crate::exec::{par_map_indexed, Streams};
use crate::stats::{ci_half_width, ks_normal, linear_fit, mean, quantile, variance};
use crate::stochastic::OperatorLaw;

use super::sim::{InitialCondition, Samples, BATCHES};

#[derive(Clone, Debug, PartialEq)]
pub struct GammaEstimate {
    pub n: usize,
    pub trials: usize,
    /// Mean of `(S_n − S_b)/(n − b)` over trials, `b` the burn-in.
    pub gamma_hat: f64,
    pub ci: f64,
    /// Mean of `max_i x_i(n) / n`.
    pub upper: f64,
    pub upper_ci: f64,
    /// Mean of `min_i x_i(n) / n`.
    pub lower: f64,
    pub lower_ci: f64,
}

/// Estimates `γ` at the largest recorded horizon.
pub fn estimate_gamma(samples: &Samples) -> Result<GammaEstimate> {
    if samples.trials() == 0 {
        return Err(Error::NoTrials);
    }
    let h = samples.last();
    let n = h.n;
    let b = if samples.burn_in < n { samples.burn_in } else { 0 };
    let per_trial: Vec<f64> = h
        .cocycle
        .iter()
        .zip(&samples.burn)
        .map(|(s, sb)| {
            let sb = if b == 0 { 0.0 } else { *sb };
            (s - sb) / (n - b) as f64
        })
        .collect();
    let upper: Vec<f64> = h.max.iter().map(|m| m / n as f64).collect();
    let lower: Vec<f64> = h.min.iter().map(|m| m / n as f64).collect();
    Ok(GammaEstimate {
        n,
        trials: samples.trials(),
        gamma_hat: mean(&per_trial),
        ci: ci_half_width(&per_trial),
        upper: mean(&upper),
        upper_ci: ci_half_width(&upper),
        lower: mean(&lower),
        lower_ci: ci_half_width(&lower),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaEstimate {
    pub n: usize,
    pub gamma: f64,
    /// `(1/n)·mean((S_n − nγ)²)`.
    pub sigma2: f64,
    pub ci: f64,
    /// Batch means over `BATCHES` consecutive blocks of each orbit.
    pub batch_means: Option<f64>,
    pub batch_ci: Option<f64>,
}

pub fn estimate_sigma2(samples: &Samples, gamma: f64) -> SigmaEstimate {
    let h = samples.last();
    let n = h.n as f64;
    let sq: Vec<f64> = h
        .cocycle
        .iter()
        .map(|s| {
            let c = s - n * gamma;
            c * c / n
        })
        .collect();
    let (batch_means, batch_ci) = if samples.batch_len > 0 {
        let m = samples.batch_len as f64;
        let per_trial: Vec<f64> = samples
            .checkpoints
            .iter()
            .map(|cp| {
                let ys: Vec<f64> = cp.windows(2).map(|w| w[1] - w[0]).collect();
                variance(&ys) / m
            })
            .collect();
        (Some(mean(&per_trial)), Some(ci_half_width(&per_trial)))
    } else {
        (None, None)
    };
    debug_assert!(samples.checkpoints.iter().all(|c| c.len() == BATCHES + 1));
    SigmaEstimate {
        n: h.n,
        gamma,
        sigma2: mean(&sq),
        ci: ci_half_width(&sq),
        batch_means,
        batch_ci,
    }
}

fn product_max(law: &OperatorLaw, n: usize, rng: &mut crate::exec::StreamRng) -> f64 {
    let d = law.dim();
    let mut p = law.sample(rng).approx().to_vec();
    let mut next = vec![f64::NEG_INFINITY; d * d];
    for _ in 1..n {
        let a = law.sample(rng);
        let a = a.approx();
        for i in 0..d {
            for j in 0..d {
                let mut best = f64::NEG_INFINITY;
                for k in 0..d {
                    best = best.max(a[i * d + k] + p[k * d + j]);
                }
                next[i * d + j] = best;
            }
        }
        std::mem::swap(&mut p, &mut next);
    }
    p.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `(1/n)·mean((max_ij A(n)⋯A(1) − nγ)²)` with the draws of trial `i`
/// taken from `streams.stream(i)`. On the streams of a zero-start
/// simulation with `φ = max` this is the same random variable as the
/// cocycle form.
pub fn sigma2_matrix_form(
    law: &OperatorLaw,
    n: usize,
    trials: usize,
    gamma: f64,
    streams: Streams,
    threads: usize,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    if n == 0 {
        return Err(Error::InvalidPlan("horizon must be positive".into()));
    }
    let vals = par_map_indexed(trials, threads, |i| {
        let c = product_max(law, n, &mut streams.stream(i)) - n as f64 * gamma;
        c * c / n as f64
    });
    Ok(mean(&vals))
}

/// Whether the cocycle and matrix forms describe the same variable.
pub fn matrix_form_applies(samples: &Samples, x0: &InitialCondition) -> bool {
    samples.phi == crate::maxplus::TopicalFunctional::Max
        && matches!(x0, InitialCondition::Fixed(x) if x.iter().all(|v| *v == 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CltRow {
    pub n: usize,
    /// KS distance of `(S_n − nγ)/(σ√n)` to `N(0,1)`.
    pub ks: f64,
    /// KS distance of the worse of the max and min coordinates, centred
    /// the same way.
    pub ks_vector: f64,
    /// 99th percentile of `|x̄(n)|_P / √n`.
    pub spread_q99: f64,
}

pub fn clt_test(samples: &Samples, gamma: f64, sigma2: f64) -> Result<Vec<CltRow>> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Degenerate(format!(
            "σ² = {sigma2}: the normalised cocycle has no Gaussian limit"
        )));
    }
    let sigma = sigma2.sqrt();
    Ok(samples
        .horizons
        .iter()
        .map(|h| {
            let n = h.n as f64;
            let scale = sigma * n.sqrt();
            let z: Vec<f64> = h.cocycle.iter().map(|s| (s - n * gamma) / scale).collect();
            let zmax: Vec<f64> = h
                .max
                .iter()
                .zip(&samples.phi0)
                .map(|(m, p)| (m - p - n * gamma) / scale)
                .collect();
            let zmin: Vec<f64> = h
                .min
                .iter()
                .zip(&samples.phi0)
                .map(|(m, p)| (m - p - n * gamma) / scale)
                .collect();
            let spread: Vec<f64> = (0..h.cocycle.len()).map(|t| h.spread(t) / n.sqrt()).collect();
            CltRow {
                n: h.n,
                ks: ks_normal(&z),
                ks_vector: ks_normal(&zmax).max(ks_normal(&zmin)),
                spread_q99: quantile(&spread, 0.99),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeReport {
    pub slope: f64,
    pub ci: f64,
    pub vector_slope: f64,
    pub vector_ci: f64,
    /// Rate exponent `l/(2(l+1))` for the full vector, `1/2` for bounded `X⁰`.
    pub vector_exponent: f64,
    /// Every KS distance is (almost) 1: the normalisation is wrong.
    pub stuck: bool,
}

/// Least-squares slope of `log KS` against `log n`.
pub fn berry_esseen_fit(rows: &[CltRow], moment_order: Option<f64>) -> Result<SlopeReport> {
    if rows.len() < 4 {
        return Err(Error::InsufficientHorizons {
            needed: 4,
            got: rows.len(),
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ln = |v: f64| v.max(1e-12).ln();
    let fit = linear_fit(&x, &rows.iter().map(|r| ln(r.ks)).collect::<Vec<_>>());
    let vfit = linear_fit(&x, &rows.iter().map(|r| ln(r.ks_vector)).collect::<Vec<_>>());
    Ok(SlopeReport {
        slope: fit.slope,
        ci: fit.slope_ci,
        vector_slope: vfit.slope,
        vector_ci: vfit.slope_ci,
        vector_exponent: moment_order.map_or(0.5, |l| l / (2.0 * (l + 1.0))),
        stuck: rows.iter().all(|r| r.ks > 0.999),
    })
}
