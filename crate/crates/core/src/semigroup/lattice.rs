//! Smallest arithmetic progression `a + bZ` containing a set of values.

use std::fmt;

use num_rational::Rational64;
use num_traits::{CheckedMul, CheckedSub, Signed, Zero};

use crate::error::{Error, Result};
use crate::maxplus::{rational_gcd, MaxPlus};

/// Largest ratio `max|difference| / b` accepted for a float fit; beyond
/// it the differences are treated as rationally independent.
pub const MAX_LATTICE_INDEX: f64 = 1e6;

/// `offset + step·Z`, with `0 <= offset < step` (or `step = 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeFit {
    pub offset: MaxPlus,
    pub step: MaxPlus,
    /// Computed by exact rational arithmetic.
    pub exact: bool,
}

impl LatticeFit {
    pub fn contains(&self, v: MaxPlus, tol: f64) -> bool {
        let Some(diff) = v.minus(self.offset) else {
            return false;
        };
        if self.step.is_zero_value() {
            return diff.approx_eq(&MaxPlus::int(0), tol);
        }
        match (diff.as_rational(), self.step.as_rational()) {
            (Some(d), Some(b)) => (d / b).is_integer(),
            _ => {
                let q = diff.to_f64() / self.step.to_f64();
                (q - q.round()).abs() * self.step.to_f64() <= tol
            }
        }
    }
}

impl fmt::Display for LatticeFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.offset, self.step)
    }
}

/// Fits `a + bZ` to `values`. `Ok(None)` when no lattice of index at most
/// [`MAX_LATTICE_INDEX`] contains them within `tol`.
pub fn arithmetic_lattice_test(values: &[MaxPlus], tol: f64) -> Result<Option<LatticeFit>> {
    let Some(&first) = values.first() else {
        return Err(Error::EmptyValues);
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidScalar("-inf in lattice input".into()));
    }
    let rationals: Option<Vec<Rational64>> = values.iter().map(|v| v.as_rational()).collect();
    if let Some(rs) = rationals {
        if let Some(fit) = exact_fit(&rs) {
            return Ok(Some(fit));
        }
    }
    Ok(float_fit(values, first, tol))
}

fn exact_fit(rs: &[Rational64]) -> Option<LatticeFit> {
    let base = rs[0];
    let mut step = Rational64::zero();
    for r in &rs[1..] {
        let d = r.checked_sub(&base)?.abs();
        step = rational_gcd(step, d)?;
    }
    let offset = if step.is_zero() {
        base
    } else {
        let k = (base / step).floor();
        base.checked_sub(&k.checked_mul(&step)?)?
    };
    Some(LatticeFit {
        offset: MaxPlus::Rat(offset),
        step: MaxPlus::Rat(step),
        exact: true,
    })
}

/// Euclid on floats, treating remainders within `tol` of `0` or of the
/// divisor as exact.
fn tolerant_gcd(mut x: f64, mut y: f64, tol: f64) -> f64 {
    if x < y {
        std::mem::swap(&mut x, &mut y);
    }
    while y > tol {
        let r = x % y;
        let r = if r <= tol || y - r <= tol { 0.0 } else { r };
        x = y;
        y = r;
    }
    x
}

fn float_fit(values: &[MaxPlus], first: MaxPlus, tol: f64) -> Option<LatticeFit> {
    let base = first.to_f64();
    let diffs: Vec<f64> = values
        .iter()
        .map(|v| (v.to_f64() - base).abs())
        .filter(|d| *d > tol)
        .collect();
    let Some(&widest) = diffs.iter().max_by(|a, b| a.total_cmp(b)) else {
        return Some(LatticeFit {
            offset: first,
            step: MaxPlus::real(0.0),
            exact: false,
        });
    };
    let step = diffs.iter().fold(0.0, |g, d| tolerant_gcd(g, *d, tol));
    if step <= tol || widest / step > MAX_LATTICE_INDEX {
        return None;
    }
    let offset = base - (base / step).floor() * step;
    let fit = LatticeFit {
        offset: MaxPlus::real(offset),
        step: MaxPlus::real(step),
        exact: false,
    };
    values.iter().all(|v| fit.contains(*v, tol)).then_some(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_values() {
        let vals = [MaxPlus::rat(1, 2), MaxPlus::rat(3, 2), MaxPlus::rat(7, 2)];
        let fit = arithmetic_lattice_test(&vals, 1e-9).unwrap().unwrap();
        assert_eq!(fit.offset, MaxPlus::rat(1, 2));
        assert_eq!(fit.step, MaxPlus::int(1));
        assert!(fit.exact);
    }

    #[test]
    fn negative_offset_is_reduced() {
        let vals = [MaxPlus::rat(-7, 3), MaxPlus::rat(1, 3)];
        let fit = arithmetic_lattice_test(&vals, 0.0).unwrap().unwrap();
        assert_eq!(fit.step, MaxPlus::rat(8, 3));
        assert_eq!(fit.offset, MaxPlus::rat(1, 3));
        let vals = [MaxPlus::rat(1, 6), MaxPlus::rat(1, 4), MaxPlus::int(-1)];
        let fit = arithmetic_lattice_test(&vals, 0.0).unwrap().unwrap();
        assert_eq!(fit.step, MaxPlus::rat(1, 12));
        assert_eq!(fit.offset, MaxPlus::int(0));
    }

    #[test]
    fn irrational_ratio_has_no_lattice() {
        let vals = [MaxPlus::int(0), MaxPlus::int(1), MaxPlus::real(2f64.sqrt())];
        assert_eq!(arithmetic_lattice_test(&vals, 1e-9).unwrap(), None);
    }

    #[test]
    fn singleton_is_degenerate_lattice() {
        let fit = arithmetic_lattice_test(&[MaxPlus::rat(5, 7)], 1e-9).unwrap().unwrap();
        assert_eq!(fit.offset, MaxPlus::rat(5, 7));
        assert_eq!(fit.step, MaxPlus::int(0));
        let fit = arithmetic_lattice_test(&[MaxPlus::real(0.25)], 1e-9).unwrap().unwrap();
        assert_eq!(fit.offset, MaxPlus::real(0.25));
        assert!(fit.step.is_zero_value());
    }

    #[test]
    fn float_values_on_a_lattice() {
        let vals = [MaxPlus::real(0.3), MaxPlus::real(0.1), MaxPlus::real(0.7)];
        let fit = arithmetic_lattice_test(&vals, 1e-9).unwrap().unwrap();
        assert!((fit.step.to_f64() - 0.2).abs() < 1e-9);
        assert!((fit.offset.to_f64() - 0.1).abs() < 1e-9);
        assert!(!fit.exact);
        for v in vals {
            assert!(fit.contains(v, 1e-9));
        }
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(arithmetic_lattice_test(&[], 1e-9), Err(Error::EmptyValues));
    }
}
