//! The recursion `x(n) = A(n) x(n-1)` with projective normalisation.

use crate::error::{Error, Result};
use crate::exec::{StreamRng, Streams};
use crate::maxplus::{project_unchecked, psi_inv, MpMatrix, ProjVec, TopicalFunctional};

use super::law::OperatorLaw;

/// Running state of one orbit. The state is kept as a canonical
/// representative (max coordinate `0`) plus a scalar shift, so coordinate
/// magnitudes do not grow with `n`.
pub struct Walker<'a> {
    law: &'a OperatorLaw,
    rng: StreamRng,
    rep: Vec<f64>,
    shift: f64,
    buf: Vec<f64>,
    steps: usize,
}

impl<'a> Walker<'a> {
    pub fn new(law: &'a OperatorLaw, x0: &[f64], rng: StreamRng) -> Result<Self> {
        if x0.len() != law.dim() {
            return Err(Error::DimensionMismatch {
                expected: law.dim(),
                found: x0.len(),
            });
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVector);
        }
        let p = project_unchecked(x0);
        let shift = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Walker {
            law,
            rng,
            rep: p.into_rep(),
            shift,
            buf: vec![0.0; x0.len()],
            steps: 0,
        })
    }

    /// Applies one fresh draw.
    #[inline]
    pub fn step(&mut self) {
        let a = self.law.sample(&mut self.rng);
        a.apply_into(&self.rep, &mut self.buf);
        self.renormalize();
    }

    /// Applies one fresh draw and hands it to `observe` before moving on.
    pub fn step_observe(&mut self, observe: impl FnOnce(&MpMatrix)) {
        let a = self.law.sample(&mut self.rng);
        a.apply_into(&self.rep, &mut self.buf);
        observe(&a);
        drop(a);
        self.renormalize();
    }

    #[inline]
    fn renormalize(&mut self) {
        let m = self.buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (r, b) in self.rep.iter_mut().zip(&self.buf) {
            *r = b - m;
        }
        self.shift += m;
        self.steps += 1;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Canonical representative of `x̄(n)`.
    pub fn rep(&self) -> &[f64] {
        &self.rep
    }

    pub fn projective(&self) -> ProjVec {
        project_unchecked(&self.rep)
    }

    /// `max_i x_i(n)`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `φ(x(n))`.
    #[inline]
    pub fn value(&self, phi: TopicalFunctional) -> f64 {
        self.shift + phi.eval(&self.rep)
    }

    /// `x(n)` itself.
    pub fn state(&self) -> Vec<f64> {
        self.rep.iter().map(|r| r + self.shift).collect()
    }

    pub fn rng_mut(&mut self) -> &mut StreamRng {
        &mut self.rng
    }
}

/// Recorded orbit of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub x0: Vec<f64>,
    pub functionals: Vec<TopicalFunctional>,
    /// `x̄(k)` for `k = 0..=n`.
    pub projective: Vec<ProjVec>,
    /// `cocycles[f][k] = φ_f(x(k)) - φ_f(x0)`.
    pub cocycles: Vec<Vec<f64>>,
    pub master_seed: u64,
    pub stream: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.projective.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `x(k)` rebuilt from the splitting through functional `f`.
    pub fn reconstruct(&self, k: usize, f: usize) -> Result<Vec<f64>> {
        let phi = self.functionals[f];
        let t = self.cocycles[f][k] + phi.apply(&self.x0)?;
        psi_inv(t, &self.projective[k], phi)
    }
}

/// Runs `n` steps from `x0` on stream `(master seed, stream)`.
pub fn iterate(
    law: &OperatorLaw,
    x0: &[f64],
    n: usize,
    functionals: &[TopicalFunctional],
    streams: Streams,
    stream: u64,
) -> Result<Trajectory> {
    for phi in functionals {
        phi.check_dim(law.dim())?;
    }
    let mut w = Walker::new(law, x0, streams.stream(stream))?;
    let base: Vec<f64> = functionals.iter().map(|phi| phi.eval(x0)).collect();
    let mut projective = Vec::with_capacity(n + 1);
    let mut cocycles = vec![Vec::with_capacity(n + 1); functionals.len()];
    let record = |w: &Walker<'_>, projective: &mut Vec<ProjVec>, cocycles: &mut [Vec<f64>]| {
        projective.push(w.projective());
        for ((phi, b), s) in functionals.iter().zip(&base).zip(cocycles.iter_mut()) {
            s.push(w.value(*phi) - b);
        }
    };
    record(&w, &mut projective, &mut cocycles);
    for _ in 0..n {
        w.step();
        record(&w, &mut projective, &mut cocycles);
    }
    Ok(Trajectory {
        x0: x0.to_vec(),
        functionals: functionals.to_vec(),
        projective,
        cocycles,
        master_seed: streams.master_seed(),
        stream,
    })
}
