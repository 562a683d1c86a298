//! Laws of the i.i.d. operators `A(n)`.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec::{open_unit, StreamRng};
use crate::maxplus::{format_matrix, parse_matrix_at, MaxPlus, MpMatrix};

const PROB_TOL: f64 = 1e-9;

/// Per-entry perturbation of a parametric law, sampled by inverse CDF from
/// one uniform per finite entry.
#[derive(Clone, Debug, PartialEq)]
pub enum Noise {
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sigma: f64 },
    /// Finitely many values with probabilities; exact values stay exact.
    Discrete(Vec<(MaxPlus, f64)>),
}

impl Noise {
    pub fn quantile(&self, u: f64) -> MaxPlus {
        match self {
            Noise::Uniform { lo, hi } => MaxPlus::Real(lo + (hi - lo) * u),
            Noise::Normal { mu, sigma } => {
                let z = Normal::standard().inverse_cdf(u);
                MaxPlus::Real(mu + sigma * z)
            }
            Noise::Discrete(points) => {
                let mut acc = 0.0;
                for (v, p) in points {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                points.last().expect("non-empty").0
            }
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> MaxPlus {
        self.quantile(open_unit(rng))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidLaw(m.to_string()));
        match self {
            Noise::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                bad("uniform noise needs finite lo <= hi")
            }
            Noise::Normal { mu, sigma } if !(mu.is_finite() && sigma.is_finite() && *sigma >= 0.0) => {
                bad("normal noise needs finite mu and sigma >= 0")
            }
            Noise::Discrete(points) => {
                if points.is_empty() {
                    return bad("discrete noise needs at least one value");
                }
                if points.iter().any(|(v, p)| !v.is_finite() || !(*p > 0.0)) {
                    return bad("discrete noise needs finite values with positive probabilities");
                }
                check_total(points.iter().map(|p| p.1))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Noise::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            Noise::Normal { mu, sigma } => write!(f, "normal({mu}, {sigma})"),
            Noise::Discrete(points) => {
                let inner: Vec<String> = points.iter().map(|(v, p)| format!("{v}:{p}")).collect();
                write!(f, "discrete{{{}}}", inner.join(", "))
            }
        }
    }
}

/// Parses probabilities and weights given as decimals or `p/q`.
pub fn parse_probability(tok: &str) -> Result<f64> {
    let v: MaxPlus = tok
        .parse()
        .map_err(|_| Error::InvalidLaw(format!("invalid probability `{}`", tok.trim())))?;
    Ok(v.to_f64())
}

impl FromStr for Noise {
    type Err = Error;

    /// `uniform(a,b)`, `normal(mu,sigma)` or `discrete{v:p, ...}`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidLaw(format!("unrecognised noise `{s}`"));
        let args = |inner: &str| -> Result<Vec<f64>> {
            inner
                .split(',')
                .map(|t| parse_probability(t).map_err(|_| bad()))
                .collect()
        };
        let noise = if let Some(inner) = s.strip_prefix("uniform(").and_then(|r| r.strip_suffix(')')) {
            match args(inner)?[..] {
                [lo, hi] => Noise::Uniform { lo, hi },
                _ => return Err(bad()),
            }
        } else if let Some(inner) = s.strip_prefix("normal(").and_then(|r| r.strip_suffix(')')) {
            match args(inner)?[..] {
                [mu, sigma] => Noise::Normal { mu, sigma },
                _ => return Err(bad()),
            }
        } else if let Some(inner) = s.strip_prefix("discrete{").and_then(|r| r.strip_suffix('}')) {
            let points = inner
                .split(',')
                .map(|pair| {
                    let (v, p) = pair.split_once(':').ok_or_else(bad)?;
                    let v: MaxPlus = v.trim().parse().map_err(|_| bad())?;
                    Ok((v, parse_probability(p)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Noise::Discrete(points)
        } else {
            return Err(bad());
        };
        noise.validate()?;
        Ok(noise)
    }
}

fn check_total(probs: impl Iterator<Item = f64>) -> Result<()> {
    let total: f64 = probs.sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidLaw(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// One atom of a finite-support law.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportPoint {
    pub name: String,
    pub matrix: MpMatrix,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum LawKind {
    Finite {
        support: Vec<SupportPoint>,
        cumulative: Vec<f64>,
    },
    Parametric {
        pattern: MpMatrix,
        noise: Noise,
    },
}

/// Law of `A(1)`: a finite table of matrices or a pattern with i.i.d. noise
/// added to its finite entries. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorLaw {
    dim: usize,
    kind: LawKind,
}

impl OperatorLaw {
    pub fn finite(points: Vec<SupportPoint>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidLaw("empty support".into()))?;
        let dim = first.matrix.dim();
        for p in &points {
            if p.matrix.dim() != dim {
                return Err(Error::InvalidLaw(format!(
                    "support matrix `{}` has dimension {}, expected {dim}",
                    p.name,
                    p.matrix.dim()
                )));
            }
            p.matrix.check_operator().map_err(|e| {
                Error::InvalidLaw(format!("support matrix `{}`: {e}", p.name))
            })?;
            if !(p.prob > 0.0) {
                return Err(Error::InvalidLaw(format!(
                    "support matrix `{}` needs a positive probability",
                    p.name
                )));
            }
        }
        check_total(points.iter().map(|p| p.prob))?;
        let mut acc = 0.0;
        let cumulative = points
            .iter()
            .map(|p| {
                acc += p.prob;
                acc
            })
            .collect();
        Ok(OperatorLaw {
            dim,
            kind: LawKind::Finite {
                support: points,
                cumulative,
            },
        })
    }

    /// Equally likely named matrices.
    pub fn uniform<S: Into<String>>(matrices: Vec<(S, MpMatrix)>) -> Result<Self> {
        let p = 1.0 / matrices.len().max(1) as f64;
        Self::finite(
            matrices
                .into_iter()
                .map(|(name, matrix)| SupportPoint {
                    name: name.into(),
                    matrix,
                    prob: p,
                })
                .collect(),
        )
    }

    /// Unnamed support with given probabilities; names default to `A1, A2, …`.
    pub fn weighted(matrices: Vec<(MpMatrix, f64)>) -> Result<Self> {
        Self::finite(
            matrices
                .into_iter()
                .enumerate()
                .map(|(i, (matrix, prob))| SupportPoint {
                    name: format!("A{}", i + 1),
                    matrix,
                    prob,
                })
                .collect(),
        )
    }

    pub fn point_mass(name: &str, matrix: MpMatrix) -> Result<Self> {
        Self::uniform(vec![(name.to_string(), matrix)])
    }

    pub fn parametric(pattern: MpMatrix, noise: Noise) -> Result<Self> {
        pattern
            .check_operator()
            .map_err(|e| Error::InvalidLaw(format!("pattern: {e}")))?;
        noise.validate()?;
        Ok(OperatorLaw {
            dim: pattern.dim(),
            kind: LawKind::Parametric { pattern, noise },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> Option<&[SupportPoint]> {
        match &self.kind {
            LawKind::Finite { support, .. } => Some(support),
            LawKind::Parametric { .. } => None,
        }
    }

    pub fn finite_support(&self) -> Result<&[SupportPoint]> {
        self.support().ok_or(Error::NotFiniteSupport)
    }

    pub fn is_finite_support(&self) -> bool {
        self.support().is_some()
    }

    /// Index of the support point selected by the uniform `u`.
    fn atom_for(cumulative: &[f64], u: f64) -> usize {
        let idx = cumulative.partition_point(|&c| c <= u);
        idx.min(cumulative.len() - 1)
    }

    /// Draws `A(n)`. Finite laws consume one uniform; parametric laws one
    /// per finite pattern entry, in row-major order.
    pub fn sample(&self, rng: &mut StreamRng) -> Cow<'_, MpMatrix> {
        match &self.kind {
            LawKind::Finite {
                support,
                cumulative,
            } => Cow::Borrowed(&support[Self::atom_for(cumulative, open_unit(rng))].matrix),
            LawKind::Parametric { pattern, noise } => {
                let entries = pattern
                    .entries()
                    .iter()
                    .map(|e| {
                        if e.is_finite() {
                            e.otimes(noise.sample(rng))
                        } else {
                            *e
                        }
                    })
                    .collect();
                Cow::Owned(MpMatrix::new(self.dim, entries).expect("pattern shape"))
            }
        }
    }

    /// Index of the drawn atom for finite laws.
    pub fn sample_index(&self, rng: &mut StreamRng) -> Result<usize> {
        match &self.kind {
            LawKind::Finite { cumulative, .. } => Ok(Self::atom_for(cumulative, open_unit(rng))),
            LawKind::Parametric { .. } => Err(Error::NotFiniteSupport),
        }
    }

    /// Adds `c` to every finite entry of every matrix the law can produce.
    pub fn shifted(&self, c: MaxPlus) -> OperatorLaw {
        let kind = match &self.kind {
            LawKind::Finite {
                support,
                cumulative,
            } => LawKind::Finite {
                support: support
                    .iter()
                    .map(|p| SupportPoint {
                        name: p.name.clone(),
                        matrix: p.matrix.shifted(c),
                        prob: p.prob,
                    })
                    .collect(),
                cumulative: cumulative.clone(),
            },
            LawKind::Parametric { pattern, noise } => LawKind::Parametric {
                pattern: pattern.shifted(c),
                noise: noise.clone(),
            },
        };
        OperatorLaw { dim: self.dim, kind }
    }

    /// Serialises to the law file format read by [`parse_law`].
    pub fn to_law_file(&self) -> String {
        let mut s = format!("dim = {}\n", self.dim);
        match &self.kind {
            LawKind::Finite { support, .. } => {
                s.push_str("type = \"finite\"\n");
                for p in support {
                    s.push_str(&format!(
                        "\n[[support]]\nname = \"{}\"\nprob = {:?}\nmatrix = \"\"\"\n{}\"\"\"\n",
                        p.name,
                        p.prob,
                        format_matrix(&p.matrix)
                    ));
                }
            }
            LawKind::Parametric { pattern, noise } => {
                s.push_str("type = \"parametric\"\n");
                s.push_str(&format!("noise = \"{noise}\"\n"));
                s.push_str(&format!("pattern = \"\"\"\n{}\"\"\"\n", format_matrix(pattern)));
            }
        }
        s
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProbField {
    Num(f64),
    Text(String),
}

impl ProbField {
    fn value(&self) -> Result<f64> {
        match self {
            ProbField::Num(v) => Ok(*v),
            ProbField::Text(t) => parse_probability(t),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportEntry {
    name: Option<String>,
    prob: ProbField,
    matrix: toml::Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LawFile {
    dim: usize,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    support: Vec<SupportEntry>,
    pattern: Option<toml::Spanned<String>>,
    noise: Option<String>,
}

/// Line (0-based) on which the content of a multi-line string starts.
fn line_offset(text: &str, span: std::ops::Range<usize>) -> usize {
    let start = span.start.min(text.len());
    let before = &text[..start];
    let mut offset = before.matches('\n').count();
    // `"""` followed by a newline: the string content starts on the next line
    if text[start..].starts_with("\"\"\"\n") || text[start..].starts_with("\"\"\"\r\n") {
        offset += 1;
    }
    offset
}

fn parse_embedded(text: &str, field: &toml::Spanned<String>) -> Result<MpMatrix> {
    parse_matrix_at(field.get_ref(), line_offset(text, field.span()))
}

/// Reads a law file:
///
/// ```toml
/// dim = 2
/// type = "finite"
///
/// [[support]]
/// name = "Z"
/// prob = "1/2"
/// matrix = """
/// 2
/// 0 0
/// 0 0
/// """
/// ```
///
/// Parametric laws use `type = "parametric"`, a `pattern` matrix and
/// `noise = "uniform(a,b)" | "normal(mu,sigma)" | "discrete{v:p,...}"`.
pub fn parse_law(text: &str) -> Result<OperatorLaw> {
    let file: LawFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| {
                let before = &text[..s.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
                (line, column)
            })
            .unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let law = match file.kind.as_str() {
        "finite" => {
            if file.pattern.is_some() || file.noise.is_some() {
                return Err(Error::InvalidLaw(
                    "finite laws take `support` entries, not `pattern`/`noise`".into(),
                ));
            }
            let points = file
                .support
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    Ok(SupportPoint {
                        name: s.name.clone().unwrap_or_else(|| format!("A{}", i + 1)),
                        matrix: parse_embedded(text, &s.matrix)?,
                        prob: s.prob.value()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            OperatorLaw::finite(points)?
        }
        "parametric" => {
            if !file.support.is_empty() {
                return Err(Error::InvalidLaw(
                    "parametric laws take `pattern` and `noise`, not `support`".into(),
                ));
            }
            let pattern = file
                .pattern
                .as_ref()
                .ok_or_else(|| Error::InvalidLaw("missing `pattern`".into()))?;
            let noise: Noise = file
                .noise
                .as_deref()
                .ok_or_else(|| Error::InvalidLaw("missing `noise`".into()))?
                .parse()?;
            OperatorLaw::parametric(parse_embedded(text, pattern)?, noise)?
        }
        other => {
            return Err(Error::InvalidLaw(format!(
                "type must be `finite` or `parametric`, got `{other}`"
            )))
        }
    };
    if law.dim() != file.dim {
        return Err(Error::InvalidLaw(format!(
            "declared dim {} but matrices have dimension {}",
            file.dim,
            law.dim()
        )));
    }
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Streams;
    use crate::maxplus::parse_matrix;

    const ZP: &str = r#"
dim = 2
type = "finite"

[[support]]
name = "Z"
prob = "1/2"
matrix = """
2
0 0
0 0
"""

[[support]]
name = "P"
prob = 0.5
matrix = """
2
-inf 0
0 -inf
"""
"#;

    #[test]
    fn parses_finite_law() {
        let law = parse_law(ZP).unwrap();
        let s = law.support().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name, "Z");
        assert_eq!(s[0].prob, 0.5);
        assert!(s[1].matrix.get(0, 0).is_neg_inf());
        let again = parse_law(&law.to_law_file()).unwrap();
        assert_eq!(again, law);
    }

    #[test]
    fn parses_parametric_law() {
        let text = "dim = 2\ntype = \"parametric\"\nnoise = \"uniform(0, 1)\"\npattern = \"\"\"\n2\n0 0\n0 -inf\n\"\"\"\n";
        let law = parse_law(text).unwrap();
        assert!(!law.is_finite_support());
        let mut rng = Streams::new(3).stream(0);
        for _ in 0..1000 {
            let a = law.sample(&mut rng);
            assert!(a.get(1, 1).is_neg_inf());
            for e in [a.get(0, 0), a.get(0, 1), a.get(1, 0)] {
                let v = e.to_f64();
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert_eq!(parse_law(&law.to_law_file()).unwrap(), law);
    }

    #[test]
    fn matrix_errors_point_into_the_file() {
        let text = "dim = 2\ntype = \"finite\"\n[[support]]\nprob = 1\nmatrix = \"\"\"\n2\n0 0\n0 zz\n\"\"\"\n";
        match parse_law(text).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (8, 3)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rejects_malformed_laws() {
        let bad_sum = ZP.replace("prob = 0.5", "prob = 0.25");
        assert!(matches!(parse_law(&bad_sum), Err(Error::InvalidLaw(_))));
        let bad_row = ZP.replace("-inf 0\n0 -inf", "-inf -inf\n0 0");
        assert!(matches!(parse_law(&bad_row), Err(Error::InvalidLaw(_))));
        let bad_dim = ZP.replace("dim = 2", "dim = 3");
        assert!(matches!(parse_law(&bad_dim), Err(Error::InvalidLaw(_))));
        let bad_type = ZP.replace("\"finite\"", "\"markov\"");
        assert!(matches!(parse_law(&bad_type), Err(Error::InvalidLaw(_))));
        assert!(matches!(parse_law("dim = "), Err(Error::Parse { .. })));
        assert!(OperatorLaw::finite(vec![]).is_err());
    }

    #[test]
    fn noise_parsing() {
        assert_eq!(
            "uniform(0, 1)".parse::<Noise>().unwrap(),
            Noise::Uniform { lo: 0.0, hi: 1.0 }
        );
        assert_eq!(
            "normal(1/2, 2)".parse::<Noise>().unwrap(),
            Noise::Normal { mu: 0.5, sigma: 2.0 }
        );
        let d: Noise = "discrete{0:1/2, 1/3:0.5}".parse().unwrap();
        assert_eq!(
            d,
            Noise::Discrete(vec![(MaxPlus::ONE, 0.5), (MaxPlus::rat(1, 3), 0.5)])
        );
        assert_eq!(d.to_string().parse::<Noise>().unwrap(), d);
        assert!("uniform(1, 0)".parse::<Noise>().is_err());
        assert!("discrete{0:0.3}".parse::<Noise>().is_err());
        assert!("cauchy(0,1)".parse::<Noise>().is_err());
    }

    #[test]
    fn point_mass_always_returns_its_matrix() {
        let z = MpMatrix::constant(2, MaxPlus::ONE);
        let law = OperatorLaw::point_mass("Z", z.clone()).unwrap();
        let mut rng = Streams::new(0).stream(0);
        for _ in 0..100 {
            assert_eq!(*law.sample(&mut rng), z);
        }
    }

    #[test]
    fn same_stream_same_draws() {
        let law = OperatorLaw::parametric(
            parse_matrix("2\n0 0\n0 0\n").unwrap(),
            Noise::Normal { mu: 0.0, sigma: 1.0 },
        )
        .unwrap();
        let s = Streams::new(11);
        let a = law.sample(&mut s.stream(5)).into_owned();
        let b = law.sample(&mut s.stream(5)).into_owned();
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert_eq!(x.to_f64().to_bits(), y.to_f64().to_bits());
        }
    }

    #[test]
    fn discrete_noise_keeps_exact_entries() {
        let law = OperatorLaw::parametric(
            parse_matrix("1\n1/2\n").unwrap(),
            "discrete{1/3:1}".parse().unwrap(),
        )
        .unwrap();
        let a = law.sample(&mut Streams::new(0).stream(0));
        assert_eq!(a.get(0, 0), MaxPlus::rat(5, 6));
    }
}
