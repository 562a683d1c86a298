//! Exact sampling of the invariant measure `ν₀` of the projective chain by
//! backward products: `A(1)A(2)⋯A(m)` is extended on the right until it has
//! rank 1, and its (constant) projective image is returned.

use crate::error::{Error, Result};
use crate::exec::{par_map_indexed, StreamRng, Streams};
use crate::maxplus::{project_unchecked, MpMatrix, ProjVec, DEFAULT_TOL};
use crate::stats::{ks_two_sample, ks_two_sample_pvalue};

use super::coupling::detect_coupling;
use super::law::OperatorLaw;
use super::trajectory::Walker;

#[derive(Clone, Debug, PartialEq)]
pub enum InvariantSample {
    /// Exact draw from `ν₀`, obtained after `depth` factors.
    Exact { point: ProjVec, depth: usize },
    /// No rank-1 product within the depth budget.
    Censored { depth: usize },
}

impl InvariantSample {
    pub fn point(&self) -> Option<&ProjVec> {
        match self {
            InvariantSample::Exact { point, .. } => Some(point),
            InvariantSample::Censored { .. } => None,
        }
    }
}

pub fn sample_invariant(law: &OperatorLaw, max_depth: usize, rng: &mut StreamRng) -> InvariantSample {
    let mut product: Option<MpMatrix> = None;
    for depth in 1..=max_depth {
        let a = law.sample(rng);
        let next = match &product {
            None => a.into_owned(),
            Some(p) => p.mul(&a).expect("law matrices share a dimension"),
        };
        if next.is_rank_one(DEFAULT_TOL) {
            let image = next.apply(&vec![0.0; law.dim()]).expect("operator-valid product");
            return InvariantSample::Exact {
                point: project_unchecked(&image),
                depth,
            };
        }
        product = Some(next);
    }
    InvariantSample::Censored { depth: max_depth }
}

/// `count` independent draws, draw `i` on stream `i`.
pub fn sample_invariant_many(
    law: &OperatorLaw,
    max_depth: usize,
    count: usize,
    streams: Streams,
    threads: usize,
) -> Vec<InvariantSample> {
    par_map_indexed(count, threads, |i| {
        sample_invariant(law, max_depth, &mut streams.stream(i))
    })
}

/// Depth budget `64 × mean coupling time` from a pilot coupling run
/// (at least 64). `None` when the pilot never couples.
pub fn default_invariant_depth(
    law: &OperatorLaw,
    pilot_trials: usize,
    pilot_max: usize,
    streams: Streams,
    threads: usize,
) -> Result<Option<usize>> {
    let stats = detect_coupling(law, pilot_max, pilot_trials, streams, threads)?;
    Ok(stats
        .mean_time()
        .map(|m| ((64.0 * m).ceil() as usize).max(64)))
}

/// Two-sample comparison of `ν₀` draws with draws pushed one more step.
#[derive(Clone, Debug, PartialEq)]
pub struct StationarityReport {
    pub samples: usize,
    pub censored: usize,
    /// Per coordinate of the canonical representative: `(D, p-value)`.
    pub coordinates: Vec<(f64, f64)>,
}

impl StationarityReport {
    pub fn min_pvalue(&self) -> f64 {
        self.coordinates
            .iter()
            .map(|c| c.1)
            .fold(1.0, f64::min)
    }
}

/// Draws `samples` points of `ν₀` and, independently, `samples` points of
/// `ν₀` each moved by one extra draw of `A`; compares coordinates with the
/// two-sample KS test.
pub fn stationarity_test(
    law: &OperatorLaw,
    samples: usize,
    max_depth: usize,
    streams: Streams,
    threads: usize,
) -> Result<StationarityReport> {
    if samples == 0 {
        return Err(Error::NoTrials);
    }
    let base_streams = streams.derive(1);
    let moved_streams = streams.derive(2);
    let base = sample_invariant_many(law, max_depth, samples, base_streams, threads);
    let moved = par_map_indexed(samples, threads, |i| {
        let mut rng = moved_streams.stream(i);
        match sample_invariant(law, max_depth, &mut rng) {
            InvariantSample::Exact { point, .. } => {
                let mut w = Walker::new(law, point.rep(), rng).expect("valid point");
                w.step();
                Some(w.projective())
            }
            InvariantSample::Censored { .. } => None,
        }
    });
    let base: Vec<ProjVec> = base.into_iter().filter_map(|s| s.point().cloned()).collect();
    let moved: Vec<ProjVec> = moved.into_iter().flatten().collect();
    let censored = 2 * samples - base.len() - moved.len();
    if base.is_empty() || moved.is_empty() {
        return Err(Error::EmptySample);
    }
    let coordinates = (0..law.dim())
        .map(|i| {
            let a: Vec<f64> = base.iter().map(|p| p.rep()[i]).collect();
            let b: Vec<f64> = moved.iter().map(|p| p.rep()[i]).collect();
            let d = ks_two_sample(&a, &b);
            (d, ks_two_sample_pvalue(d, a.len(), b.len()))
        })
        .collect();
    Ok(StationarityReport {
        samples,
        censored,
        coordinates,
    })
}

/// Largest per-coordinate KS distance between `x̄(n, x0)` (forward orbits)
/// and exact `ν₀` draws.
pub fn forward_distance_to_invariant(
    law: &OperatorLaw,
    x0: &[f64],
    n: usize,
    samples: usize,
    max_depth: usize,
    streams: Streams,
    threads: usize,
) -> Result<f64> {
    let forward_streams = streams.derive(3);
    let forward = par_map_indexed(samples, threads, |i| -> Result<ProjVec> {
        let mut w = Walker::new(law, x0, forward_streams.stream(i))?;
        for _ in 0..n {
            w.step();
        }
        Ok(w.projective())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let invariant: Vec<ProjVec> =
        sample_invariant_many(law, max_depth, samples, streams.derive(4), threads)
            .into_iter()
            .filter_map(|s| s.point().cloned())
            .collect();
    if invariant.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok((0..law.dim())
        .map(|i| {
            let a: Vec<f64> = forward.iter().map(|p| p.rep()[i]).collect();
            let b: Vec<f64> = invariant.iter().map(|p| p.rep()[i]).collect();
            ks_two_sample(&a, &b)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxplus::{parse_matrix, MaxPlus};

    fn zp() -> OperatorLaw {
        OperatorLaw::uniform(vec![
            ("Z", MpMatrix::constant(2, MaxPlus::ONE)),
            ("P", parse_matrix("2\n-inf 0\n0 -inf\n").unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn point_mass_rank_one() {
        let law = OperatorLaw::point_mass("Z", MpMatrix::constant(3, MaxPlus::ONE)).unwrap();
        let s = sample_invariant(&law, 10, &mut Streams::new(0).stream(0));
        assert_eq!(
            s,
            InvariantSample::Exact {
                point: ProjVec::origin(3),
                depth: 1
            }
        );
    }

    #[test]
    fn zp_truncates_at_first_z() {
        let draws = sample_invariant_many(&zp(), 200, 500, Streams::new(5), 2);
        for d in &draws {
            match d {
                InvariantSample::Exact { point, .. } => assert_eq!(point, &ProjVec::origin(2)),
                InvariantSample::Censored { .. } => panic!("censored"),
            }
        }
    }

    #[test]
    fn identity_is_censored() {
        let law = OperatorLaw::point_mass("E", MpMatrix::identity(2)).unwrap();
        let s = sample_invariant(&law, 17, &mut Streams::new(0).stream(0));
        assert_eq!(s, InvariantSample::Censored { depth: 17 });
    }

    #[test]
    fn deeper_budget_keeps_uncensored_results() {
        let law = OperatorLaw::uniform(vec![
            ("a", parse_matrix("2\n0 -1\n2 -inf\n").unwrap()),
            ("b", parse_matrix("2\n-1 0\n0 1/2\n").unwrap()),
            ("c", parse_matrix("2\n-inf 0\n0 -3\n").unwrap()),
        ])
        .unwrap();
        let s = Streams::new(21);
        for i in 0..200 {
            let short = sample_invariant(&law, 4, &mut s.stream(i));
            let long = sample_invariant(&law, 400, &mut s.stream(i));
            if let InvariantSample::Exact { .. } = short {
                assert_eq!(short, long);
            }
        }
    }

    #[test]
    fn default_depth_from_pilot() {
        let d = default_invariant_depth(&zp(), 2000, 100, Streams::new(1), 2)
            .unwrap()
            .unwrap();
        // mean coupling time 2 for {Z, P}
        assert!((100..=160).contains(&d), "{d}");
        let law = OperatorLaw::point_mass("E", MpMatrix::identity(2)).unwrap();
        assert_eq!(default_invariant_depth(&law, 10, 10, Streams::new(1), 1).unwrap(), None);
    }

    #[test]
    fn forward_law_approaches_invariant() {
        // ν₀ = δ_0; the orbit of (0, 3) has left it only while uncoupled
        let law = OperatorLaw::uniform(vec![
            ("M0", MpMatrix::constant(2, MaxPlus::ONE)),
            ("M1", parse_matrix("2\n-1 0\n0 -1\n").unwrap()),
        ])
        .unwrap();
        let d: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&n| forward_distance_to_invariant(&law, &[0.0, 3.0], n, 4000, 100, Streams::new(8), 2).unwrap())
            .collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0]), "{d:?}");
        assert!((d[0] - 0.5).abs() < 0.05 && d[3] < 0.02, "{d:?}");
    }
}
