//! Batch simulation of independent orbits, recorded at a list of horizons.

use crate::error::{Error, Result};
use crate::exec::{par_map_indexed, StreamRng, Streams};
use crate::maxplus::TopicalFunctional;
use crate::stochastic::{Noise, OperatorLaw, Walker};

/// Number of batches used by the batch-means variance estimate.
pub const BATCHES: usize = 10;

/// Initial condition `X⁰` of every trial.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Fixed(Vec<f64>),
    /// i.i.d. coordinates drawn from the given noise at the start of each
    /// trial stream.
    Random(Noise),
}

impl InitialCondition {
    pub fn zero(dim: usize) -> Self {
        InitialCondition::Fixed(vec![0.0; dim])
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            InitialCondition::Fixed(x) if x.len() != dim => Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            }),
            InitialCondition::Fixed(x) if x.iter().any(|v| !v.is_finite()) => {
                Err(Error::NonFiniteVector)
            }
            _ => Ok(()),
        }
    }

    pub fn draw(&self, dim: usize, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            InitialCondition::Fixed(x) => x.clone(),
            InitialCondition::Random(noise) => (0..dim).map(|_| noise.sample(rng).to_f64()).collect(),
        }
    }
}

/// All trials observed at one horizon `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonSample {
    pub n: usize,
    /// `S_n = φ(x(n)) − φ(x0)` per trial.
    pub cocycle: Vec<f64>,
    /// `max_i x_i(n)` per trial.
    pub max: Vec<f64>,
    /// `min_i x_i(n)` per trial.
    pub min: Vec<f64>,
    reps: Vec<f64>,
    dim: usize,
}

impl HorizonSample {
    /// Canonical representative of `x̄(n)` for one trial.
    pub fn rep(&self, trial: usize) -> &[f64] {
        &self.reps[trial * self.dim..(trial + 1) * self.dim]
    }

    /// `|x̄(n)|_P` for one trial.
    pub fn spread(&self, trial: usize) -> f64 {
        self.max[trial] - self.min[trial]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub phi: TopicalFunctional,
    pub dim: usize,
    pub seed: u64,
    /// `φ(x0)` per trial.
    pub phi0: Vec<f64>,
    /// Steps discarded by the increment estimator of `γ`.
    pub burn_in: usize,
    /// `S_b` per trial, `b = burn_in`.
    pub burn: Vec<f64>,
    pub horizons: Vec<HorizonSample>,
    /// Batch length at the largest horizon; `0` when too short for batches.
    pub batch_len: usize,
    /// Per trial, `S` at multiples of `batch_len` (`BATCHES + 1` values).
    pub checkpoints: Vec<Vec<f64>>,
}

impl Samples {
    pub fn trials(&self) -> usize {
        self.phi0.len()
    }

    pub fn last(&self) -> &HorizonSample {
        self.horizons.last().expect("at least one horizon")
    }
}

struct TrialRecord {
    phi0: f64,
    burn: f64,
    cocycle: Vec<f64>,
    max: Vec<f64>,
    min: Vec<f64>,
    reps: Vec<f64>,
    checkpoints: Vec<f64>,
}

pub(crate) fn check_horizons(horizons: &[usize]) -> Result<()> {
    if horizons.is_empty() || horizons[0] == 0 {
        return Err(Error::InvalidPlan("horizons must be positive and non-empty".into()));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPlan("horizons must be strictly increasing".into()));
    }
    Ok(())
}

/// Runs `trials` orbits to the largest horizon; trial `i` uses
/// `streams.stream(i)`, drawing `X⁰` first when it is random.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    law: &OperatorLaw,
    phi: TopicalFunctional,
    x0: &InitialCondition,
    horizons: &[usize],
    trials: usize,
    burn_in: usize,
    streams: Streams,
    threads: usize,
) -> Result<Samples> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    check_horizons(horizons)?;
    phi.check_dim(law.dim())?;
    x0.check_dim(law.dim())?;
    let dim = law.dim();
    let n_max = *horizons.last().expect("checked");
    let batch_len = if n_max >= 2 * BATCHES { n_max / BATCHES } else { 0 };

    let records = par_map_indexed(trials, threads, |i| -> Result<TrialRecord> {
        let mut rng = streams.stream(i);
        let start = x0.draw(dim, &mut rng);
        let phi0 = phi.apply(&start)?;
        let mut w = Walker::new(law, &start, rng)?;
        let mut rec = TrialRecord {
            phi0,
            burn: 0.0,
            cocycle: Vec::with_capacity(horizons.len()),
            max: Vec::with_capacity(horizons.len()),
            min: Vec::with_capacity(horizons.len()),
            reps: Vec::with_capacity(horizons.len() * dim),
            checkpoints: Vec::with_capacity(if batch_len > 0 { BATCHES + 1 } else { 0 }),
        };
        if batch_len > 0 {
            rec.checkpoints.push(0.0);
        }
        let mut next = 0;
        for step in 1..=n_max {
            w.step();
            if step == burn_in {
                rec.burn = w.value(phi) - phi0;
            }
            if batch_len > 0 && step % batch_len == 0 && rec.checkpoints.len() <= BATCHES {
                rec.checkpoints.push(w.value(phi) - phi0);
            }
            if step == horizons[next] {
                rec.cocycle.push(w.value(phi) - phi0);
                rec.max.push(w.shift());
                rec.min.push(w.shift() + w.rep().iter().copied().fold(f64::INFINITY, f64::min));
                rec.reps.extend_from_slice(w.rep());
                next += 1;
            }
        }
        Ok(rec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut hs: Vec<HorizonSample> = horizons
        .iter()
        .map(|&n| HorizonSample {
            n,
            cocycle: Vec::with_capacity(trials),
            max: Vec::with_capacity(trials),
            min: Vec::with_capacity(trials),
            reps: Vec::with_capacity(trials * dim),
            dim,
        })
        .collect();
    let mut phi0 = Vec::with_capacity(trials);
    let mut burn = Vec::with_capacity(trials);
    let mut checkpoints = Vec::with_capacity(if batch_len > 0 { trials } else { 0 });
    for rec in records {
        phi0.push(rec.phi0);
        burn.push(rec.burn);
        for (k, h) in hs.iter_mut().enumerate() {
            h.cocycle.push(rec.cocycle[k]);
            h.max.push(rec.max[k]);
            h.min.push(rec.min[k]);
            h.reps.extend_from_slice(&rec.reps[k * dim..(k + 1) * dim]);
        }
        if batch_len > 0 {
            checkpoints.push(rec.checkpoints);
        }
    }
    Ok(Samples {
        phi,
        dim,
        seed: streams.master_seed(),
        phi0,
        burn_in: burn_in.min(n_max),
        burn,
        horizons: hs,
        batch_len,
        checkpoints,
    })
}
