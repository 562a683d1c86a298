//! Local limit and renewal estimates for product test functions
//! `h(x) = f(φ(x))·g(x̄)` with a tent-shaped `f`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::{par_map_indexed, Streams};
use crate::maxplus::{vec_metric, ProjVec, TopicalFunctional};
use crate::semigroup::LatticeFit;
use crate::stats::{ci_half_width, mean};
use crate::stochastic::{sample_invariant_many, OperatorLaw, Walker};

use super::sim::{InitialCondition, Samples};

/// `f(t) = max(0, 1 − |t − center| / half_width)`; integral `half_width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tent {
    pub center: f64,
    pub half_width: f64,
}

impl Tent {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !center.is_finite() || !half_width.is_finite() {
            return Err(Error::InvalidPlan("tent needs a finite center and positive width".into()));
        }
        Ok(Tent { center, half_width })
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (1.0 - (t - self.center).abs() / self.half_width).max(0.0)
    }

    pub fn integral(&self) -> f64 {
        self.half_width
    }
}

/// Projective factor `g(x̄)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Window {
    One,
    /// `max(0, 1 − δ(x̄, center)/radius)`.
    Tent { center: ProjVec, radius: f64 },
}

impl Window {
    pub fn eval(&self, rep: &[f64]) -> f64 {
        match self {
            Window::One => 1.0,
            Window::Tent { center, radius } => {
                let d = vec_metric(rep, center.rep()).unwrap_or(f64::INFINITY);
                (1.0 - d / radius).max(0.0)
            }
        }
    }
}

/// `ν₀(g)` with its CI half-width; exact for `g ≡ 1`.
pub fn window_mass(
    law: &OperatorLaw,
    window: &Window,
    samples: usize,
    max_depth: usize,
    streams: Streams,
    threads: usize,
) -> Result<(f64, f64)> {
    if *window == Window::One {
        return Ok((1.0, 0.0));
    }
    let vals: Vec<f64> = sample_invariant_many(law, max_depth, samples, streams, threads)
        .iter()
        .filter_map(|s| s.point().map(|p| window.eval(p.rep())))
        .collect();
    if vals.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok((mean(&vals), ci_half_width(&vals)))
}

fn refuse_lattice(lattice: Option<&LatticeFit>) -> Result<()> {
    match lattice {
        Some(fit) => Err(Error::Arithmetic {
            offset: fit.offset.to_string(),
            step: fit.step.to_string(),
        }),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LltRow {
    pub n: usize,
    pub tent: usize,
    pub u: f64,
    /// `σ√(2πn)·Ê[f(φ(x(n)) − nγ − u)·g(x̄(n))]`.
    pub value: f64,
    pub ci: f64,
    /// `E[exp(−(u + c − φ(X⁰))²/(2nσ²))]·ν₀(g)·Leb(f)`, `c` the tent center.
    pub limit: f64,
}

impl LltRow {
    pub fn relative_error(&self) -> f64 {
        (self.value - self.limit).abs() / self.limit
    }
}

/// Local limit estimates at every recorded horizon. `lattice` is the
/// certificate's shift-value lattice; a lattice refuses the estimate.
#[allow(clippy::too_many_arguments)]
pub fn llt_box_estimate(
    samples: &Samples,
    gamma: f64,
    sigma2: f64,
    tents: &[Tent],
    window: &Window,
    nu0_g: f64,
    u_grid: &[f64],
    lattice: Option<&LatticeFit>,
) -> Result<Vec<LltRow>> {
    refuse_lattice(lattice)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Degenerate(format!("σ² = {sigma2}: no local limit")));
    }
    let sigma = sigma2.sqrt();
    let mut rows = Vec::new();
    for h in &samples.horizons {
        let n = h.n as f64;
        let g: Vec<f64> = (0..samples.trials()).map(|t| window.eval(h.rep(t))).collect();
        for (ti, tent) in tents.iter().enumerate() {
            for &u in u_grid {
                let scale = sigma * (2.0 * PI * n).sqrt();
                let vals: Vec<f64> = h
                    .cocycle
                    .iter()
                    .zip(&samples.phi0)
                    .zip(&g)
                    .map(|((s, p), gv)| scale * tent.eval(p + s - n * gamma - u) * gv)
                    .collect();
                let gauss: Vec<f64> = samples
                    .phi0
                    .iter()
                    .map(|p| {
                        let z = u + tent.center - p;
                        (-z * z / (2.0 * n * sigma2)).exp()
                    })
                    .collect();
                rows.push(LltRow {
                    n: h.n,
                    tent: ti,
                    u,
                    value: mean(&vals),
                    ci: ci_half_width(&vals),
                    limit: mean(&gauss) * nu0_g * tent.integral(),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenewalRow {
    pub a: f64,
    /// Truncation `N(a) = ⌈4|a|/γ⌉`.
    pub horizon: usize,
    /// `Σ_{n=1}^{N} Ê[f(φ(x(n)) − a)·g(x̄(n))]`.
    pub value: f64,
    pub ci: f64,
    /// `ν₀(g)·Leb(f)/γ`.
    pub limit: f64,
    /// Fraction of trials with `φ(x(N)) − a` still left of the tent's
    /// right end, i.e. that could still contribute past the truncation.
    pub tail_fraction: f64,
}

pub fn renewal_horizon(a: f64, gamma: f64) -> usize {
    ((4.0 * a.abs() / gamma).ceil() as usize).max(1)
}

/// Truncated renewal sums for every `a` in `a_grid`, all read off one
/// orbit per trial.
#[allow(clippy::too_many_arguments)]
pub fn renewal_sum(
    law: &OperatorLaw,
    phi: TopicalFunctional,
    x0: &InitialCondition,
    tent: Tent,
    window: &Window,
    nu0_g: f64,
    gamma: f64,
    a_grid: &[f64],
    trials: usize,
    streams: Streams,
    threads: usize,
    lattice: Option<&LatticeFit>,
) -> Result<Vec<RenewalRow>> {
    refuse_lattice(lattice)?;
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveDrift(gamma));
    }
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    phi.check_dim(law.dim())?;
    x0.check_dim(law.dim())?;
    let horizons: Vec<usize> = a_grid.iter().map(|&a| renewal_horizon(a, gamma)).collect();
    let n_max = horizons.iter().copied().max().unwrap_or(0);
    let right = tent.center + tent.half_width;
    let per_trial = par_map_indexed(trials, threads, |i| -> Result<Vec<(f64, bool)>> {
        let mut rng = streams.stream(i);
        let start = x0.draw(law.dim(), &mut rng);
        let mut w = Walker::new(law, &start, rng)?;
        let mut sums = vec![0.0; a_grid.len()];
        let mut out = vec![(0.0, false); a_grid.len()];
        for step in 1..=n_max {
            w.step();
            let v = w.value(phi);
            let g = window.eval(w.rep());
            for (k, &a) in a_grid.iter().enumerate() {
                if step <= horizons[k] {
                    sums[k] += tent.eval(v - a) * g;
                    if step == horizons[k] {
                        out[k] = (sums[k], v - a < right);
                    }
                }
            }
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(a_grid
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let vals: Vec<f64> = per_trial.iter().map(|t| t[k].0).collect();
            let open = per_trial.iter().filter(|t| t[k].1).count();
            RenewalRow {
                a,
                horizon: horizons[k],
                value: mean(&vals),
                ci: ci_half_width(&vals),
                limit: nu0_g * tent.integral() / gamma,
                tail_fraction: open as f64 / trials as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::sim::simulate;
    use crate::maxplus::{MaxPlus, MpMatrix};

    fn constant_law(values: &[MaxPlus]) -> OperatorLaw {
        OperatorLaw::uniform(
            values
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("c{i}"), MpMatrix::constant(2, *v)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn tent_shape() {
        let t = Tent::new(1.0, 2.0).unwrap();
        assert_eq!(t.eval(1.0), 1.0);
        assert_eq!(t.eval(0.0), 0.5);
        assert_eq!(t.eval(3.5), 0.0);
        assert_eq!(t.integral(), 2.0);
        assert!(Tent::new(0.0, 0.0).is_err());
    }

    #[test]
    fn window_values() {
        assert_eq!(Window::One.eval(&[0.0, -3.0]), 1.0);
        let w = Window::Tent {
            center: ProjVec::origin(2),
            radius: 2.0,
        };
        assert_eq!(w.eval(&[0.0, -1.0]), 0.5);
        assert_eq!(w.eval(&[0.0, -5.0]), 0.0);
    }

    #[test]
    fn lattice_refuses() {
        let law = constant_law(&[MaxPlus::int(0), MaxPlus::int(1)]);
        let s = simulate(&law, TopicalFunctional::Max, &InitialCondition::zero(2), &[10], 100, 1, Streams::new(1), 1)
            .unwrap();
        let fit = LatticeFit {
            offset: MaxPlus::int(0),
            step: MaxPlus::int(1),
            exact: true,
        };
        let tents = [Tent::new(0.0, 1.0).unwrap()];
        let err = llt_box_estimate(&s, 0.5, 0.25, &tents, &Window::One, 1.0, &[0.0], Some(&fit)).unwrap_err();
        assert_eq!(
            err,
            Error::Arithmetic {
                offset: "0".into(),
                step: "1".into()
            }
        );
    }

    #[test]
    fn renewal_far_negative_box_is_empty() {
        let law = constant_law(&[MaxPlus::int(1), MaxPlus::real(2f64.sqrt())]);
        let gamma = (1.0 + 2f64.sqrt()) / 2.0;
        let rows = renewal_sum(
            &law,
            TopicalFunctional::Max,
            &InitialCondition::zero(2),
            Tent::new(0.0, 1.0).unwrap(),
            &Window::One,
            1.0,
            gamma,
            &[-100.0, 20.0],
            500,
            Streams::new(2),
            0,
            None,
        )
        .unwrap();
        assert_eq!(rows[0].value, 0.0);
        assert_eq!(rows[0].horizon, 332);
        assert!((rows[1].value - 1.0 / gamma).abs() < 0.15, "{rows:?}");
        assert_eq!(rows[1].tail_fraction, 0.0);
    }

    #[test]
    fn renewal_needs_positive_drift() {
        let law = constant_law(&[MaxPlus::int(0)]);
        let r = renewal_sum(
            &law,
            TopicalFunctional::Max,
            &InitialCondition::zero(2),
            Tent::new(0.0, 1.0).unwrap(),
            &Window::One,
            1.0,
            0.0,
            &[1.0],
            10,
            Streams::new(0),
            1,
            None,
        );
        assert_eq!(r, Err(Error::NonPositiveDrift(0.0)));
    }

    #[test]
    fn renewal_is_linear_in_the_tent_height() {
        let law = constant_law(&[MaxPlus::int(1), MaxPlus::real(2f64.sqrt())]);
        let go = |w: f64| {
            renewal_sum(
                &law,
                TopicalFunctional::Max,
                &InitialCondition::zero(2),
                Tent::new(0.0, w).unwrap(),
                &Window::One,
                1.0,
                1.2,
                &[30.0],
                200,
                Streams::new(5),
                1,
                None,
            )
            .unwrap()[0]
                .limit
        };
        assert_eq!(go(2.0), 2.0 * go(1.0));
    }
}
