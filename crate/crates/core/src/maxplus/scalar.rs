//! Elements of the max-plus semiring `R ∪ {-∞}`.
//!
//! Finite values carry either an exact rational or a binary float. Arithmetic
//! between two rationals stays exact (falling back to a float only on `i64`
//! overflow); anything touching a float is computed in `f64`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A max-plus scalar. `NegInf` is the semiring zero; `Rat(0)` is the unit.
///
/// NaN and `+∞` are never stored; constructors reject them.
#[derive(Clone, Copy, Debug)]
pub enum MaxPlus {
    NegInf,
    Rat(Rational64),
    Real(f64),
}

impl MaxPlus {
    pub const ZERO: MaxPlus = MaxPlus::NegInf;
    pub const ONE: MaxPlus = MaxPlus::Rat(Rational64::new_raw(0, 1));

    pub fn int(v: i64) -> Self {
        MaxPlus::Rat(Rational64::from_integer(v))
    }

    /// Exact rational `num/den`. Panics if `den == 0`.
    pub fn rat(num: i64, den: i64) -> Self {
        MaxPlus::Rat(Rational64::new(num, den))
    }

    /// Float value; `-inf` maps to the bottom element.
    pub fn real(v: f64) -> Self {
        Self::try_real(v).expect("max-plus scalar must be finite or -inf")
    }

    pub fn try_real(v: f64) -> Result<Self> {
        if v == f64::NEG_INFINITY {
            Ok(MaxPlus::NegInf)
        } else if v.is_finite() {
            Ok(MaxPlus::Real(v))
        } else {
            Err(Error::InvalidScalar(v.to_string()))
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, MaxPlus::NegInf)
    }

    pub fn is_neg_inf(&self) -> bool {
        matches!(self, MaxPlus::NegInf)
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, MaxPlus::Rat(_))
    }

    pub fn as_rational(&self) -> Option<Rational64> {
        match self {
            MaxPlus::Rat(r) => Some(*r),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            MaxPlus::NegInf => f64::NEG_INFINITY,
            MaxPlus::Rat(r) => rat_to_f64(*r),
            MaxPlus::Real(x) => *x,
        }
    }

    /// `a ⊕ b = max(a, b)`.
    pub fn oplus(self, rhs: Self) -> Self {
        if rhs > self {
            rhs
        } else {
            self
        }
    }

    /// `a ⊗ b = a + b`, with `-∞` absorbing.
    pub fn otimes(self, rhs: Self) -> Self {
        match (self, rhs) {
            (MaxPlus::NegInf, _) | (_, MaxPlus::NegInf) => MaxPlus::NegInf,
            (MaxPlus::Rat(a), MaxPlus::Rat(b)) => match a.checked_add(&b) {
                Some(s) => MaxPlus::Rat(s),
                None => MaxPlus::Real(rat_to_f64(a) + rat_to_f64(b)),
            },
            (a, b) => MaxPlus::Real(a.to_f64() + b.to_f64()),
        }
    }

    /// Ordinary difference of two finite values. `None` if either is `-∞`.
    pub fn minus(self, rhs: Self) -> Option<Self> {
        match (self, rhs) {
            (MaxPlus::NegInf, _) | (_, MaxPlus::NegInf) => None,
            (MaxPlus::Rat(a), MaxPlus::Rat(b)) => Some(match a.checked_sub(&b) {
                Some(s) => MaxPlus::Rat(s),
                None => MaxPlus::Real(rat_to_f64(a) - rat_to_f64(b)),
            }),
            (a, b) => Some(MaxPlus::Real(a.to_f64() - b.to_f64())),
        }
    }

    /// Ordinary negation of a finite value.
    pub fn neg(self) -> Option<Self> {
        match self {
            MaxPlus::NegInf => None,
            MaxPlus::Rat(r) => Some(MaxPlus::Rat(-r)),
            MaxPlus::Real(x) => Some(MaxPlus::Real(-x)),
        }
    }

    /// Division of a finite value by a positive integer (circuit means).
    pub fn div_int(self, k: usize) -> Self {
        assert!(k > 0, "division by zero length");
        match self {
            MaxPlus::NegInf => MaxPlus::NegInf,
            MaxPlus::Rat(r) => match i64::try_from(k) {
                Ok(k) => MaxPlus::Rat(r / k),
                Err(_) => MaxPlus::Real(rat_to_f64(r) / k as f64),
            },
            MaxPlus::Real(x) => MaxPlus::Real(x / k as f64),
        }
    }

    /// Multiplication of a finite value by an integer (ordinary product).
    pub fn mul_int(self, k: i64) -> Self {
        match self {
            MaxPlus::NegInf => MaxPlus::NegInf,
            MaxPlus::Rat(r) => match r.checked_mul(&Rational64::from_integer(k)) {
                Some(p) => MaxPlus::Rat(p),
                None => MaxPlus::Real(rat_to_f64(r) * k as f64),
            },
            MaxPlus::Real(x) => MaxPlus::Real(x * k as f64),
        }
    }

    pub fn abs(self) -> Self {
        match self {
            MaxPlus::NegInf => MaxPlus::NegInf,
            MaxPlus::Rat(r) => MaxPlus::Rat(r.abs()),
            MaxPlus::Real(x) => MaxPlus::Real(x.abs()),
        }
    }

    pub fn is_zero_value(&self) -> bool {
        match self {
            MaxPlus::NegInf => false,
            MaxPlus::Rat(r) => r.is_zero(),
            MaxPlus::Real(x) => *x == 0.0,
        }
    }

    /// Equality that is exact when both sides are rational and within `tol`
    /// otherwise. `-∞` only matches `-∞`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        match (self, other) {
            (MaxPlus::NegInf, MaxPlus::NegInf) => true,
            (MaxPlus::NegInf, _) | (_, MaxPlus::NegInf) => false,
            (MaxPlus::Rat(a), MaxPlus::Rat(b)) => a == b,
            (a, b) => (a.to_f64() - b.to_f64()).abs() <= tol,
        }
    }
}

pub(crate) fn rat_to_f64(r: Rational64) -> f64 {
    r.to_f64().unwrap_or_else(|| *r.numer() as f64 / *r.denom() as f64)
}

impl From<i64> for MaxPlus {
    fn from(v: i64) -> Self {
        MaxPlus::int(v)
    }
}

impl From<Rational64> for MaxPlus {
    fn from(r: Rational64) -> Self {
        MaxPlus::Rat(r)
    }
}

impl PartialEq for MaxPlus {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for MaxPlus {}

impl PartialOrd for MaxPlus {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MaxPlus {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (MaxPlus::NegInf, MaxPlus::NegInf) => Ordering::Equal,
            (MaxPlus::NegInf, _) => Ordering::Less,
            (_, MaxPlus::NegInf) => Ordering::Greater,
            (MaxPlus::Rat(a), MaxPlus::Rat(b)) => a.cmp(b),
            (a, b) => a.to_f64().total_cmp(&b.to_f64()),
        }
    }
}

impl fmt::Display for MaxPlus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxPlus::NegInf => f.write_str("-inf"),
            MaxPlus::Rat(r) if r.is_integer() => write!(f, "{}", r.numer()),
            MaxPlus::Rat(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            // Rust's float Display is the shortest string that round-trips.
            MaxPlus::Real(x) => {
                if x.fract() == 0.0 && x.abs() < 1e15 {
                    write!(f, "{x:.1}")
                } else if x.fract() == 0.0 {
                    // keep integral floats from re-parsing as integers
                    write!(f, "{x:e}")
                } else {
                    write!(f, "{x}")
                }
            }
        }
    }
}

impl FromStr for MaxPlus {
    type Err = Error;

    /// Tokens: `-inf`, integers and `p/q` (exact), decimals (float).
    fn from_str(s: &str) -> Result<Self> {
        let tok = s.trim();
        let bad = || Error::InvalidScalar(tok.to_string());
        if tok.eq_ignore_ascii_case("-inf") {
            return Ok(MaxPlus::NegInf);
        }
        if let Some((p, q)) = tok.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            return Ok(MaxPlus::Rat(Rational64::new(p, q)));
        }
        if let Ok(i) = tok.parse::<i64>() {
            return Ok(MaxPlus::int(i));
        }
        let x: f64 = tok.parse().map_err(|_| bad())?;
        if !x.is_finite() {
            return Err(bad());
        }
        Ok(MaxPlus::Real(x))
    }
}

/// Greatest common divisor of two non-negative rationals, `None` on overflow.
pub(crate) fn rational_gcd(a: Rational64, b: Rational64) -> Option<Rational64> {
    let (an, ad) = (*a.numer(), *a.denom());
    let (bn, bd) = (*b.numer(), *b.denom());
    let num = an.gcd(&bn);
    let den = ad.checked_mul(bd / ad.gcd(&bd))?;
    Some(Rational64::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bottom_is_absorbing_and_neutral() {
        let a = MaxPlus::rat(3, 4);
        assert!(MaxPlus::NegInf.otimes(a).is_neg_inf());
        assert_eq!(MaxPlus::NegInf.oplus(a), a);
        assert_eq!(a.oplus(MaxPlus::NegInf), a);
        assert_eq!(MaxPlus::ONE.otimes(a), a);
    }

    #[test]
    fn rational_arithmetic_is_exact() {
        let s = MaxPlus::rat(1, 3).otimes(MaxPlus::rat(1, 6));
        assert_eq!(s.as_rational(), Some(Rational64::new(1, 2)));
        assert_eq!(MaxPlus::rat(5, 3).div_int(5), MaxPlus::rat(1, 3));
    }

    #[test]
    fn overflow_falls_back_to_float() {
        let big = MaxPlus::int(i64::MAX);
        let s = big.otimes(MaxPlus::int(1));
        assert!(matches!(s, MaxPlus::Real(_)));
    }

    #[test]
    fn parse_tokens() {
        assert!("-inf".parse::<MaxPlus>().unwrap().is_neg_inf());
        assert_eq!("1/3".parse::<MaxPlus>().unwrap(), MaxPlus::rat(1, 3));
        assert_eq!("-7".parse::<MaxPlus>().unwrap(), MaxPlus::int(-7));
        assert!(matches!("0.25".parse::<MaxPlus>().unwrap(), MaxPlus::Real(_)));
        assert!("1/0".parse::<MaxPlus>().is_err());
        assert!("nan".parse::<MaxPlus>().is_err());
        assert!("inf".parse::<MaxPlus>().is_err());
        assert!("abc".parse::<MaxPlus>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for v in [
            MaxPlus::NegInf,
            MaxPlus::rat(-22, 7),
            MaxPlus::int(4),
            MaxPlus::real(0.1),
            MaxPlus::real(2f64.sqrt()),
            MaxPlus::real(3.0),
            MaxPlus::real(-1e-300),
        ] {
            let back: MaxPlus = v.to_string().parse().unwrap();
            assert_eq!(back, v);
            assert_eq!(back.is_rational(), v.is_rational());
            if let (MaxPlus::Real(a), MaxPlus::Real(b)) = (v, back) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn gcd_of_rationals() {
        let g = rational_gcd(Rational64::new(1, 2), Rational64::new(3, 4)).unwrap();
        assert_eq!(g, Rational64::new(1, 4));
        let g = rational_gcd(Rational64::new(0, 1), Rational64::new(3, 2)).unwrap();
        assert_eq!(g, Rational64::new(3, 2));
    }
}
