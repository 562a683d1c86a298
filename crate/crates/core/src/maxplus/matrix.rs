//! Dense square max-plus matrices and the operators they define.

use std::fmt;

use num_rational::Rational64;
use num_traits::CheckedAdd;

use super::scalar::MaxPlus;
use crate::error::{Error, Result};

/// Default tolerance for float comparisons (rank-1 spread, critical arcs).
pub const DEFAULT_TOL: f64 = 1e-9;

/// A `d × d` matrix over `R ∪ {-∞}`, stored row-major.
///
/// A float image of the entries is cached so that the operator action on
/// real vectors does not branch on the scalar representation.
#[derive(Clone, Debug)]
pub struct MpMatrix {
    dim: usize,
    entries: Vec<MaxPlus>,
    approx: Vec<f64>,
}

impl PartialEq for MpMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries
    }
}

impl MpMatrix {
    pub fn new(dim: usize, entries: Vec<MaxPlus>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let approx = entries.iter().map(MaxPlus::to_f64).collect();
        Ok(MpMatrix {
            dim,
            entries,
            approx,
        })
    }

    pub fn from_rows(rows: Vec<Vec<MaxPlus>>) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend(row);
        }
        Self::new(dim, entries)
    }

    /// Float rows, `f64::NEG_INFINITY` standing for `-∞`.
    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&v| MaxPlus::try_real(v)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Self::from_rows(rows)
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> MaxPlus) -> Result<Self> {
        let entries = (0..dim * dim).map(|k| f(k / dim, k % dim)).collect();
        Self::new(dim, entries)
    }

    /// Max-plus identity: `0` on the diagonal, `-∞` elsewhere.
    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { MaxPlus::ONE } else { MaxPlus::NegInf })
            .expect("positive dimension")
    }

    /// Matrix with every entry equal to `c`.
    pub fn constant(dim: usize, c: MaxPlus) -> Self {
        Self::from_fn(dim, |_, _| c).expect("positive dimension")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> MaxPlus {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[MaxPlus] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[MaxPlus] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn approx(&self) -> &[f64] {
        &self.approx
    }

    pub fn is_all_rational(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.is_neg_inf() || e.is_rational())
    }

    pub fn is_all_finite(&self) -> bool {
        self.entries.iter().all(MaxPlus::is_finite)
    }

    /// Fails on the first row made only of `-∞`.
    pub fn check_operator(&self) -> Result<()> {
        match (0..self.dim).find(|&i| self.row(i).iter().all(MaxPlus::is_neg_inf)) {
            Some(row) => Err(Error::InvalidOperator { row }),
            None => Ok(()),
        }
    }

    pub fn is_operator(&self) -> bool {
        self.check_operator().is_ok()
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            })
        }
    }

    /// `(AB)_ij = max_p A_ip + B_pj`.
    pub fn mul(&self, rhs: &MpMatrix) -> Result<MpMatrix> {
        self.check_dim(rhs.dim)?;
        let d = self.dim;
        let mut out = vec![MaxPlus::NegInf; d * d];
        for i in 0..d {
            for p in 0..d {
                let a = self.entries[i * d + p];
                if a.is_neg_inf() {
                    continue;
                }
                for j in 0..d {
                    let v = a.otimes(rhs.entries[p * d + j]);
                    let slot = &mut out[i * d + j];
                    *slot = slot.oplus(v);
                }
            }
        }
        MpMatrix::new(d, out)
    }

    /// `n`-th max-plus power, `n >= 1`.
    pub fn power(&self, n: usize) -> MpMatrix {
        assert!(n >= 1, "power must be positive");
        let mut acc = self.clone();
        for _ in 1..n {
            acc = self.mul(&acc).expect("same dimension");
        }
        acc
    }

    /// Operator action `(Ax)_i = max_j A_ij + x_j` on a finite vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        self.check_operator()?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVector);
        }
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked action; caller guarantees dimensions and operator validity.
    #[inline]
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.approx[i * d..(i + 1) * d];
            let mut m = f64::NEG_INFINITY;
            for (a, xj) in row.iter().zip(x) {
                let v = a + xj;
                if v > m {
                    m = v;
                }
            }
            *o = m;
        }
    }

    /// Exact action on a rational vector; needs rational entries.
    pub fn apply_exact(&self, x: &[Rational64]) -> Result<Vec<Rational64>> {
        self.check_dim(x.len())?;
        self.check_operator()?;
        let d = self.dim;
        let mut out = Vec::with_capacity(d);
        for i in 0..d {
            let mut best: Option<Rational64> = None;
            for (a, xj) in self.row(i).iter().zip(x) {
                let a = match a {
                    MaxPlus::NegInf => continue,
                    MaxPlus::Rat(r) => r,
                    MaxPlus::Real(_) => return Err(Error::NotRational),
                };
                let v = a.checked_add(xj).ok_or(Error::NotRational)?;
                if best.is_none_or(|b| v > b) {
                    best = Some(v);
                }
            }
            out.push(best.expect("operator-valid row"));
        }
        Ok(out)
    }

    /// Adds `c` to every finite entry (`-∞` stays).
    pub fn shifted(&self, c: MaxPlus) -> MpMatrix {
        let entries = self
            .entries
            .iter()
            .map(|e| if e.is_finite() { e.otimes(c) } else { *e })
            .collect();
        MpMatrix::new(self.dim, entries).expect("same shape")
    }

    pub fn max_entry(&self) -> MaxPlus {
        self.entries
            .iter()
            .copied()
            .fold(MaxPlus::NegInf, MaxPlus::oplus)
    }

    /// Whether the operator maps all of `R^d` to a single projective point.
    ///
    /// Requires every entry finite and every column to differ from the first
    /// by a constant: exact on rational matrices, spread `<= tol` otherwise.
    pub fn is_rank_one(&self, tol: f64) -> bool {
        if !self.is_all_finite() {
            return false;
        }
        let d = self.dim;
        if self.is_all_rational() {
            for j in 1..d {
                let offset = self.get(0, j).minus(self.get(0, 0));
                for i in 1..d {
                    if self.get(i, j).minus(self.get(i, 0)) != offset {
                        return false;
                    }
                }
            }
            return true;
        }
        let a = &self.approx;
        for j in 1..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..d {
                let diff = a[i * d + j] - a[i * d];
                lo = lo.min(diff);
                hi = hi.max(diff);
            }
            if hi - lo > tol {
                return false;
            }
        }
        true
    }

    /// Entrywise comparison, exact on rationals and within `tol` on floats.
    pub fn approx_eq(&self, other: &MpMatrix, tol: f64) -> bool {
        self.dim == other.dim
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.approx_eq(b, tol))
    }

    /// Hashable key: exact for rational entries, float entries snapped to a
    /// grid of width `tol`.
    pub fn canonical_key(&self, tol: f64) -> Vec<EntryKey> {
        self.entries
            .iter()
            .map(|e| match e {
                MaxPlus::NegInf => EntryKey::NegInf,
                MaxPlus::Rat(r) => EntryKey::Exact(*r.numer(), *r.denom()),
                MaxPlus::Real(x) => EntryKey::Grid((x / tol).round() as i64),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntryKey {
    NegInf,
    Exact(i64, i64),
    Grid(i64),
}

impl fmt::Display for MpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for i in 0..self.dim {
            if i > 0 {
                f.write_str("; ")?;
            }
            for (j, e) in self.row(i).iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{e}")?;
            }
        }
        f.write_str("]")
    }
}
