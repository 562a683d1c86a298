//! Projective quotient of `R^d` by the diagonal, the Hilbert-type metric on
//! it, topical functionals and the splitting `x ↦ (φ(x), x̄)`.

use std::fmt;

use super::matrix::MpMatrix;
use crate::error::{Error, Result};

/// Canonical representative of `x + R·1`: the vector shifted so that its
/// largest coordinate is `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjVec {
    rep: Vec<f64>,
}

impl ProjVec {
    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    pub fn rep(&self) -> &[f64] {
        &self.rep
    }

    pub fn into_rep(self) -> Vec<f64> {
        self.rep
    }

    /// The class of `0` (every vector proportional to `1`).
    pub fn origin(dim: usize) -> Self {
        ProjVec { rep: vec![0.0; dim] }
    }

    /// Projective norm `max_i rep_i - min_i rep_i`.
    pub fn norm(&self) -> f64 {
        -self.rep.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for ProjVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.rep.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteVector)
    }
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn project(x: &[f64]) -> Result<ProjVec> {
    check_finite(x)?;
    Ok(project_unchecked(x))
}

pub(crate) fn project_unchecked(x: &[f64]) -> ProjVec {
    let m = max_of(x);
    ProjVec {
        rep: x.iter().map(|v| v - m).collect(),
    }
}

/// `δ(x̄, ȳ) = max_i (x_i - y_i) + max_i (y_i - x_i)`.
pub fn proj_metric(p: &ProjVec, q: &ProjVec) -> Result<f64> {
    vec_metric(&p.rep, &q.rep)
}

/// The same distance evaluated on arbitrary representatives.
pub fn vec_metric(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut up = f64::NEG_INFINITY;
    let mut down = f64::NEG_INFINITY;
    for (a, b) in x.iter().zip(y) {
        up = up.max(a - b);
        down = down.max(b - a);
    }
    Ok(up + down)
}

/// `|x|_P = δ(x, 0) = max_i x_i - min_i x_i`.
pub fn proj_norm(x: &[f64]) -> Result<f64> {
    check_finite(x)?;
    Ok(max_of(x) - min_of(x))
}

/// Scalar topical maps `R^d → R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TopicalFunctional {
    Max,
    Min,
    /// 0-based coordinate.
    Coord(usize),
}

impl TopicalFunctional {
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match *self {
            TopicalFunctional::Coord(index) if index >= dim => {
                Err(Error::IndexOutOfRange { index, dim })
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        check_finite(x)?;
        Ok(self.eval(x))
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TopicalFunctional::Max => max_of(x),
            TopicalFunctional::Min => min_of(x),
            TopicalFunctional::Coord(i) => x[i],
        }
    }
}

impl fmt::Display for TopicalFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopicalFunctional::Max => f.write_str("max"),
            TopicalFunctional::Min => f.write_str("min"),
            TopicalFunctional::Coord(i) => write!(f, "coord({})", i + 1),
        }
    }
}

impl std::str::FromStr for TopicalFunctional {
    type Err = Error;

    /// `max`, `min` or `coord(i)` with a 1-based index.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "max" => return Ok(TopicalFunctional::Max),
            "min" => return Ok(TopicalFunctional::Min),
            _ => {}
        }
        let bad = || Error::InvalidPlan(format!("unknown functional `{s}`"));
        let inner = s
            .strip_prefix("coord(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let i: usize = inner.trim().parse().map_err(|_| bad())?;
        if i == 0 {
            return Err(bad());
        }
        Ok(TopicalFunctional::Coord(i - 1))
    }
}

/// Cocycle increment `ξ(A, x̄) = φ(Ax) - φ(x)`, independent of the
/// representative of `x̄`.
pub fn cocycle_xi(phi: TopicalFunctional, a: &MpMatrix, p: &ProjVec) -> Result<f64> {
    phi.check_dim(a.dim())?;
    let ax = a.apply(p.rep())?;
    Ok(phi.eval(&ax) - phi.eval(p.rep()))
}

/// Splitting `x ↦ (φ(x), x̄)`.
pub fn psi(x: &[f64], phi: TopicalFunctional) -> Result<(f64, ProjVec)> {
    let t = phi.apply(x)?;
    Ok((t, project_unchecked(x)))
}

/// Inverse splitting: the unique `x` in class `p` with `φ(x) = t`.
pub fn psi_inv(t: f64, p: &ProjVec, phi: TopicalFunctional) -> Result<Vec<f64>> {
    phi.check_dim(p.dim())?;
    let shift = t - phi.eval(&p.rep);
    Ok(p.rep.iter().map(|v| v + shift).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxplus::MaxPlus;

    #[test]
    fn metric_examples() {
        let a = project(&[0.0, 1.0]).unwrap();
        let b = project(&[0.0, 0.0]).unwrap();
        assert_eq!(proj_metric(&a, &b).unwrap(), 1.0);
        let x = [0.5, -2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| v + 7.25).collect();
        assert_eq!(vec_metric(&x, &y).unwrap(), 0.0);
        assert_eq!(proj_norm(&[3.0, 1.0]).unwrap(), 2.0);
        assert_eq!(project(&[3.0, 1.0]).unwrap().norm(), 2.0);
    }

    #[test]
    fn projection_is_shift_invariant() {
        let x = [1.5, -0.25, 4.0];
        let y: Vec<f64> = x.iter().map(|v| v - 10.0).collect();
        assert_eq!(project(&x).unwrap(), project(&y).unwrap());
        assert_eq!(project(&x).unwrap().rep(), &[-2.5, -4.25, 0.0]);
    }

    #[test]
    fn dimension_errors() {
        let a = ProjVec::origin(2);
        let b = ProjVec::origin(3);
        assert!(proj_metric(&a, &b).is_err());
        assert!(project(&[f64::NAN]).is_err());
        assert_eq!(
            TopicalFunctional::Coord(4).apply(&[0.0, 1.0]),
            Err(Error::IndexOutOfRange { index: 4, dim: 2 })
        );
    }

    #[test]
    fn cocycle_examples() {
        let a = MpMatrix::from_rows(vec![
            vec![MaxPlus::int(1), MaxPlus::int(3)],
            vec![MaxPlus::int(0), MaxPlus::int(2)],
        ])
        .unwrap();
        let origin = ProjVec::origin(2);
        assert_eq!(cocycle_xi(TopicalFunctional::Max, &a, &origin).unwrap(), 3.0);

        let c = MpMatrix::constant(3, MaxPlus::rat(7, 4));
        let p = project(&[0.0, -1.5, -0.5]).unwrap();
        assert_eq!(cocycle_xi(TopicalFunctional::Max, &c, &p).unwrap(), 1.75);

        let e = MpMatrix::identity(3);
        for phi in [
            TopicalFunctional::Max,
            TopicalFunctional::Min,
            TopicalFunctional::Coord(1),
        ] {
            assert_eq!(cocycle_xi(phi, &e, &p).unwrap(), 0.0);
        }
        assert!(cocycle_xi(TopicalFunctional::Coord(3), &e, &p).is_err());
    }

    #[test]
    fn psi_examples() {
        let (t, p) = psi(&[3.0, 1.0], TopicalFunctional::Max).unwrap();
        assert_eq!(t, 3.0);
        assert_eq!(p.rep(), &[0.0, -2.0]);
        let x = psi_inv(3.0, &p, TopicalFunctional::Max).unwrap();
        assert_eq!(x, vec![3.0, 1.0]);
        let (t, p) = psi(&[-4.5; 3], TopicalFunctional::Max).unwrap();
        assert_eq!(t, -4.5);
        assert_eq!(p, ProjVec::origin(3));
    }

    #[test]
    fn functional_parsing() {
        assert_eq!("max".parse::<TopicalFunctional>().unwrap(), TopicalFunctional::Max);
        assert_eq!(
            "coord(2)".parse::<TopicalFunctional>().unwrap(),
            TopicalFunctional::Coord(1)
        );
        assert!("coord(0)".parse::<TopicalFunctional>().is_err());
        assert!("mean".parse::<TopicalFunctional>().is_err());
        for phi in [TopicalFunctional::Min, TopicalFunctional::Coord(3)] {
            assert_eq!(phi.to_string().parse::<TopicalFunctional>().unwrap(), phi);
        }
    }
}
