//! Memory-loss detection: first time the forward product `A(n)⋯A(1)`
//! becomes rank 1.

use crate::error::{Error, Result};
use crate::exec::{par_map_indexed, StreamRng, Streams};
use crate::maxplus::{MpMatrix, DEFAULT_TOL};

use super::law::OperatorLaw;

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingStats {
    pub max_n: usize,
    /// Per trial, the first `n` with a rank-1 product; `None` when censored.
    pub times: Vec<Option<usize>>,
    /// `non_coupling[n]` = fraction of trials not coupled after `n` steps.
    pub non_coupling: Vec<f64>,
}

impl CouplingStats {
    fn from_times(times: Vec<Option<usize>>, max_n: usize) -> Self {
        let trials = times.len() as f64;
        let mut counts = vec![0usize; max_n + 2];
        for t in &times {
            counts[t.unwrap_or(max_n + 1)] += 1;
        }
        let mut remaining = times.len();
        let mut non_coupling = Vec::with_capacity(max_n + 1);
        for c in counts.iter().take(max_n + 1) {
            remaining -= c;
            non_coupling.push(remaining as f64 / trials);
        }
        CouplingStats {
            max_n,
            times,
            non_coupling,
        }
    }

    pub fn trials(&self) -> usize {
        self.times.len()
    }

    pub fn coupled(&self) -> usize {
        self.times.iter().filter(|t| t.is_some()).count()
    }

    pub fn censored(&self) -> usize {
        self.trials() - self.coupled()
    }

    /// Fraction of trials coupled within `n` steps.
    pub fn coupling_frequency(&self, n: usize) -> f64 {
        1.0 - self.non_coupling[n.min(self.max_n)]
    }

    /// Mean coupling time over uncensored trials.
    pub fn mean_time(&self) -> Option<f64> {
        let coupled: Vec<usize> = self.times.iter().flatten().copied().collect();
        (!coupled.is_empty()).then(|| coupled.iter().sum::<usize>() as f64 / coupled.len() as f64)
    }
}

/// First `n <= max_n` at which the product of the draws is rank 1.
pub fn coupling_time(law: &OperatorLaw, max_n: usize, rng: &mut StreamRng) -> Option<usize> {
    let mut product: Option<MpMatrix> = None;
    for n in 1..=max_n {
        let a = law.sample(rng);
        let next = match &product {
            None => a.into_owned(),
            Some(p) => a.mul(p).expect("law matrices share a dimension"),
        };
        if next.is_rank_one(DEFAULT_TOL) {
            return Some(n);
        }
        product = Some(next);
    }
    None
}

/// Runs `trials` independent products, trial `i` on stream `i`.
pub fn detect_coupling(
    law: &OperatorLaw,
    max_n: usize,
    trials: usize,
    streams: Streams,
    threads: usize,
) -> Result<CouplingStats> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let times = par_map_indexed(trials, threads, |i| {
        coupling_time(law, max_n, &mut streams.stream(i))
    });
    Ok(CouplingStats::from_times(times, max_n))
}
