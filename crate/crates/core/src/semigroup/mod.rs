//! Breadth-first exploration of the semigroup generated by a finite support,
//! and the certificates read off it: memory loss (a rank-1 product),
//! degeneracy of the variance, and lattice structure of the shift values.
//!
//! Words are written with the leftmost letter applied last, so the word
//! `a·b` stands for the matrix product `A_a A_b`.

mod lattice;

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::par_map_indexed;
use crate::maxplus::{EntryKey, MaxPlus, MpMatrix, DEFAULT_TOL};
use crate::spectral::{is_strongly_connected, max_cycle_mean};
use crate::stochastic::OperatorLaw;

pub use lattice::{arithmetic_lattice_test, LatticeFit, MAX_LATTICE_INDEX};

pub const DEFAULT_PRODUCT_CAP: usize = 1_000_000;

/// One distinct element of the explored slice, with its shortest
/// (then lexicographically smallest) word.
#[derive(Clone, Debug, PartialEq)]
pub struct Product {
    pub word: Vec<usize>,
    pub matrix: MpMatrix,
    pub rho: MaxPlus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemigroupCert {
    pub names: Vec<String>,
    pub support: Vec<MpMatrix>,
    /// Requested word length.
    pub depth: usize,
    /// Longest word length fully processed.
    pub explored_depth: usize,
    /// Distinct products in BFS order.
    pub products: Vec<Product>,
    /// Index into `products` of the first rank-1 element.
    pub witness: Option<usize>,
    /// Exploration hit the product cap.
    pub capped: bool,
    /// No new products appeared at the last level: the slice is all of `T_A`.
    pub closed: bool,
    /// Every support entry is rational, so dedup and verdicts are exact.
    pub exact: bool,
}

/// Explores all products of word length `<= depth` of `support`, with
/// generic names `A1, A2, …`.
pub fn explore(support: &[MpMatrix], depth: usize) -> Result<SemigroupCert> {
    let names = (1..=support.len()).map(|i| format!("A{i}")).collect();
    explore_named(names, support.to_vec(), depth, DEFAULT_PRODUCT_CAP, 0)
}

/// Explores the support of a finite law, keeping its atom names.
pub fn explore_law(law: &OperatorLaw, depth: usize, cap: usize, threads: usize) -> Result<SemigroupCert> {
    let support = law.finite_support()?;
    explore_named(
        support.iter().map(|p| p.name.clone()).collect(),
        support.iter().map(|p| p.matrix.clone()).collect(),
        depth,
        cap,
        threads,
    )
}

pub fn explore_named(
    names: Vec<String>,
    support: Vec<MpMatrix>,
    depth: usize,
    cap: usize,
    threads: usize,
) -> Result<SemigroupCert> {
    let Some(first) = support.first() else {
        return Err(Error::InvalidLaw("empty support".into()));
    };
    if depth == 0 {
        return Err(Error::InvalidPlan("exploration depth must be at least 1".into()));
    }
    let dim = first.dim();
    for m in &support {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
        m.check_operator()?;
    }
    let exact = support.iter().all(MpMatrix::is_all_rational);
    let mut cert = SemigroupCert {
        names,
        support,
        depth,
        explored_depth: 0,
        products: Vec::new(),
        witness: None,
        capped: false,
        closed: false,
        exact,
    };
    let mut seen: HashMap<Vec<EntryKey>, usize> = HashMap::new();

    // Level 1 is the support itself; later levels prepend each letter to
    // every product found at the previous level.
    let mut candidates: Vec<(Vec<usize>, MpMatrix)> = cert
        .support
        .iter()
        .enumerate()
        .map(|(i, m)| (vec![i], m.clone()))
        .collect();
    for level in 1..=depth {
        let mut frontier = Vec::new();
        for (word, matrix) in candidates {
            let key = matrix.canonical_key(DEFAULT_TOL);
            if seen.contains_key(&key) {
                continue;
            }
            if cert.products.len() >= cap {
                cert.capped = true;
                return Ok(cert);
            }
            let index = cert.products.len();
            seen.insert(key, index);
            if cert.witness.is_none() && matrix.is_rank_one(DEFAULT_TOL) {
                cert.witness = Some(index);
            }
            let rho = max_cycle_mean(&matrix).expect("operator-valid matrices have circuits");
            cert.products.push(Product { word, matrix, rho });
            frontier.push(index);
        }
        cert.explored_depth = level;
        if frontier.is_empty() {
            cert.closed = true;
            return Ok(cert);
        }
        if level == depth {
            break;
        }
        let k = cert.support.len();
        let products = &cert.products;
        let support = &cert.support;
        candidates = par_map_indexed(k * frontier.len(), threads, |t| {
            let t = t as usize;
            let (letter, p) = (t / frontier.len(), &products[frontier[t % frontier.len()]]);
            let mut word = Vec::with_capacity(p.word.len() + 1);
            word.push(letter);
            word.extend_from_slice(&p.word);
            let m = support[letter].mul(&p.matrix).expect("dimensions checked");
            (word, m)
        });
    }
    Ok(cert)
}

impl SemigroupCert {
    pub fn word_text(&self, word: &[usize]) -> String {
        word.iter()
            .map(|&l| self.names[l].as_str())
            .collect::<Vec<_>>()
            .join("·")
    }

    /// Re-multiplies a word over the support.
    pub fn word_matrix(&self, word: &[usize]) -> Result<MpMatrix> {
        let (&last, rest) = word.split_last().ok_or(Error::EmptyMatrix)?;
        let mut m = self.support.get(last).ok_or(Error::IndexOutOfRange {
            index: last,
            dim: self.support.len(),
        })?;
        let mut acc = m.clone();
        for &l in rest.iter().rev() {
            m = self.support.get(l).ok_or(Error::IndexOutOfRange {
                index: l,
                dim: self.support.len(),
            })?;
            acc = m.mul(&acc)?;
        }
        Ok(acc)
    }

    pub fn witness(&self) -> Option<&Product> {
        self.witness.map(|i| &self.products[i])
    }

    pub fn rank_one(&self) -> impl Iterator<Item = &Product> {
        self.products
            .iter()
            .filter(|p| p.matrix.is_rank_one(DEFAULT_TOL))
    }

    /// Distinct `ρ_max` values over the explored products, ascending.
    pub fn rho_set(&self) -> Vec<MaxPlus> {
        distinct(self.products.iter().map(|p| p.rho))
    }

    /// Distinct `ρ_max` values of support matrices with strongly connected
    /// graph, ascending.
    pub fn sc_support_rho_set(&self) -> Vec<MaxPlus> {
        distinct(
            self.support
                .iter()
                .filter(|m| is_strongly_connected(m))
                .filter_map(max_cycle_mean),
        )
    }

    /// `θAθ' − θθ'` for the first witness `θ`, every support letter `A` and
    /// every explored rank-1 `θ'`. Each is a constant matrix; its common
    /// value is returned, or an error if it is not constant.
    pub fn shift_values(&self) -> Result<Vec<MaxPlus>> {
        let theta = self.witness().ok_or(Error::NoRankOne)?;
        let mut out = Vec::new();
        for a in &self.support {
            let theta_a = theta.matrix.mul(a)?;
            for tp in self.rank_one() {
                let lhs = theta_a.mul(&tp.matrix)?;
                let rhs = theta.matrix.mul(&tp.matrix)?;
                out.push(constant_difference(&lhs, &rhs)?);
            }
        }
        Ok(distinct(out.into_iter()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "support = {}", self.names.join(", "));
        let _ = writeln!(s, "depth = {}", self.depth);
        let _ = writeln!(s, "explored_depth = {}", self.explored_depth);
        let _ = writeln!(s, "products = {}", self.products.len());
        let _ = writeln!(s, "capped = {}", self.capped);
        let _ = writeln!(s, "closed = {}", self.closed);
        let _ = writeln!(s, "exact = {}", self.exact);
        match self.witness() {
            Some(w) => {
                let _ = writeln!(s, "mlp = yes");
                let _ = writeln!(s, "witness = {}", self.word_text(&w.word));
                let _ = writeln!(s, "witness_length = {}", w.word.len());
            }
            None if self.closed => {
                let _ = writeln!(s, "mlp = no (semigroup closed without rank-1 element)");
            }
            None => {
                let _ = writeln!(s, "mlp = no witness at depth {}", self.explored_depth);
            }
        }
        let _ = writeln!(s, "rho_set = {}", set_text(&self.rho_set()));
        let _ = writeln!(s, "sc_support_rho_set = {}", set_text(&self.sc_support_rho_set()));
        s
    }
}

fn distinct(values: impl Iterator<Item = MaxPlus>) -> Vec<MaxPlus> {
    let mut v: Vec<MaxPlus> = values.collect();
    v.sort();
    v.dedup_by(|a, b| a.approx_eq(b, DEFAULT_TOL));
    v
}

fn set_text(values: &[MaxPlus]) -> String {
    let items: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

fn constant_difference(lhs: &MpMatrix, rhs: &MpMatrix) -> Result<MaxPlus> {
    let diff = |k: usize| {
        lhs.entries()[k]
            .minus(rhs.entries()[k])
            .ok_or(Error::NotRational)
    };
    let c = diff(0)?;
    for k in 1..lhs.entries().len() {
        if !diff(k)?.approx_eq(&c, DEFAULT_TOL) {
            return Err(Error::Degenerate("shift θAθ' − θθ' is not constant".into()));
        }
    }
    Ok(c)
}

/// Whether the generalised variance vanishes.
#[derive(Clone, Debug, PartialEq)]
pub enum DegeneracyVerdict {
    Degenerate,
    /// `ρ_max(B) − γ·|B| = excess ≠ 0` for the product at `witness`.
    Nondegenerate { witness: usize, excess: MaxPlus },
    /// Exploration was capped before a witness appeared.
    Unknown,
}

/// Tests `ρ_max(B) = γ·|B|` over every explored product `B`, within
/// `tol·|B|` (exact when `γ` and the support are rational).
///
/// A witness settles the question even on a capped exploration.
pub fn degeneracy_test(cert: &SemigroupCert, gamma: MaxPlus, tol: f64) -> DegeneracyVerdict {
    for (i, p) in cert.products.iter().enumerate() {
        let len = p.word.len();
        let excess = p
            .rho
            .minus(gamma.mul_int(len as i64))
            .expect("finite cycle means");
        if !excess.approx_eq(&MaxPlus::int(0), tol * len as f64) {
            return DegeneracyVerdict::Nondegenerate { witness: i, excess };
        }
    }
    if cert.capped {
        DegeneracyVerdict::Unknown
    } else {
        DegeneracyVerdict::Degenerate
    }
}

/// Whether `θAθ' = θθ' + γ·1` for the first witness `θ`, every support
/// `A` and every explored rank-1 `θ'`.
pub fn theta_shift_test(cert: &SemigroupCert, gamma: MaxPlus, tol: f64) -> Result<bool> {
    Ok(cert
        .shift_values()?
        .iter()
        .all(|c| c.approx_eq(&gamma, tol)))
}

/// Where the value of `γ` used by the verdicts came from.
#[derive(Clone, Debug, PartialEq)]
pub enum GammaSource {
    Supplied,
    Estimated { ci: f64 },
}

/// Verdicts derived from a certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdicts {
    pub gamma: Option<(MaxPlus, GammaSource)>,
    pub degeneracy: Option<DegeneracyVerdict>,
    pub theta_shift: Option<bool>,
    /// Lattice fit of the shift values; `None` inside when there is none,
    /// outer `None` without a rank-1 witness.
    pub shift_lattice: Option<Option<LatticeFit>>,
    /// Lattice fit of the strongly connected support cycle means.
    pub sc_rho_lattice: Option<Option<LatticeFit>>,
}

impl Verdicts {
    /// `tol` applies to the comparisons with `γ`; with an estimated `γ`
    /// callers pass a tolerance scaled to its CI.
    pub fn compute(cert: &SemigroupCert, gamma: Option<(MaxPlus, GammaSource)>, tol: f64) -> Result<Self> {
        let degeneracy = gamma.as_ref().map(|(g, _)| degeneracy_test(cert, *g, tol));
        let theta_shift = match (&gamma, cert.witness) {
            (Some((g, _)), Some(_)) => Some(theta_shift_test(cert, *g, tol)?),
            _ => None,
        };
        let shift_lattice = match cert.witness {
            Some(_) => Some(arithmetic_lattice_test(&cert.shift_values()?, DEFAULT_TOL)?),
            None => None,
        };
        let sc = cert.sc_support_rho_set();
        let sc_rho_lattice = if sc.is_empty() {
            None
        } else {
            Some(arithmetic_lattice_test(&sc, DEFAULT_TOL)?)
        };
        Ok(Verdicts {
            gamma,
            degeneracy,
            theta_shift,
            shift_lattice,
            sc_rho_lattice,
        })
    }

    /// A lattice containing the shift values was found.
    pub fn is_arithmetic(&self) -> bool {
        matches!(self.shift_lattice, Some(Some(_)))
    }

    pub fn to_text(&self, cert: &SemigroupCert) -> String {
        let mut s = String::new();
        match &self.gamma {
            Some((g, GammaSource::Supplied)) => {
                let _ = writeln!(s, "gamma = {g}\ngamma_source = supplied");
            }
            Some((g, GammaSource::Estimated { ci })) => {
                let _ = writeln!(s, "gamma = {g}\ngamma_source = estimated (ci {ci:.3e})");
            }
            None => {
                let _ = writeln!(s, "gamma = none");
            }
        }
        let deg = match &self.degeneracy {
            None => "skipped (no gamma)".to_string(),
            Some(DegeneracyVerdict::Degenerate) => "degenerate".to_string(),
            Some(DegeneracyVerdict::Unknown) => "unknown (exploration capped)".to_string(),
            Some(DegeneracyVerdict::Nondegenerate { witness, excess }) => {
                let p = &cert.products[*witness];
                format!(
                    "nondegenerate (rho_max({}) - {}*gamma = {excess})",
                    cert.word_text(&p.word),
                    p.word.len()
                )
            }
        };
        let _ = writeln!(s, "degeneracy = {deg}");
        if let Some(t) = self.theta_shift {
            let _ = writeln!(s, "theta_shift = {t}");
        }
        let basis = if cert.exact { "exact" } else { "evidence" };
        match &self.shift_lattice {
            None => {
                let _ = writeln!(s, "arithmetic = not applicable (no rank-1 witness)");
            }
            Some(Some(fit)) => {
                let _ = writeln!(s, "arithmetic = lattice {fit}\narithmetic_basis = {basis}");
            }
            Some(None) => {
                let _ = writeln!(s, "arithmetic = none\narithmetic_basis = {basis}");
            }
        }
        match &self.sc_rho_lattice {
            None => {
                let _ = writeln!(s, "sc_rho_lattice = not applicable");
            }
            Some(Some(fit)) => {
                let _ = writeln!(s, "sc_rho_lattice = {fit}");
            }
            Some(None) => {
                let _ = writeln!(s, "sc_rho_lattice = none");
            }
        }
        s
    }
}
