//! Spectral analysis of a single max-plus matrix through its precedence
//! graph: maximal circuit mean (Karp, per strongly connected component),
//! critical graph, cyclicity and ultimate periodicity of powers.

use std::fmt::{self, Write as _};

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::maxplus::{MaxPlus, MpMatrix, DEFAULT_TOL};

/// Precedence graph: arc `(i, j)` iff `A_ij > -∞`, weighted by `A_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedDigraph {
    dim: usize,
    arcs: Vec<(usize, usize, MaxPlus)>,
}

impl WeightedDigraph {
    pub fn of_matrix(a: &MpMatrix) -> Self {
        let d = a.dim();
        let arcs = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let w = a.get(i, j);
                w.is_finite().then_some((i, j, w))
            })
            .collect();
        WeightedDigraph { dim: d, arcs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Arcs `(from, to, weight)` with 0-based nodes, in row-major order.
    pub fn arcs(&self) -> &[(usize, usize, MaxPlus)] {
        &self.arcs
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.arcs.iter().any(|&(a, b, _)| a == i && b == j)
    }

    /// Nodes touched by at least one arc.
    pub fn nodes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.dim];
        for &(i, j, _) in &self.arcs {
            seen[i] = true;
            seen[j] = true;
        }
        (0..self.dim).filter(|&v| seen[v]).collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.dim];
        for &(i, j, _) in &self.arcs {
            adj[i].push(j);
        }
        adj
    }
}

/// Strongly connected components (Tarjan), each sorted, ordered by their
/// smallest node.
fn tarjan(dim: usize, adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }

    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for k in 0..s.adj[v].len() {
            let w = s.adj[v][k];
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().expect("non-empty stack");
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.out.push(comp);
        }
    }

    let mut s = State {
        adj,
        index: vec![None; dim],
        low: vec![0; dim],
        on_stack: vec![false; dim],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..dim {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out.sort_by_key(|c| c[0]);
    s.out
}

pub fn strongly_connected_components(a: &MpMatrix) -> Vec<Vec<usize>> {
    let g = WeightedDigraph::of_matrix(a);
    tarjan(g.dim, &g.adjacency())
}

/// Whether `G(A)` is strongly connected and carries at least one circuit.
pub fn is_strongly_connected(a: &MpMatrix) -> bool {
    let comps = strongly_connected_components(a);
    comps.len() == 1 && (a.dim() > 1 || a.get(0, 0).is_finite())
}

/// Karp's maximal cycle mean restricted to one strongly connected component.
fn karp_component(a: &MpMatrix, comp: &[usize]) -> Option<MaxPlus> {
    let k = comp.len();
    if k == 1 {
        let v = comp[0];
        let w = a.get(v, v);
        return w.is_finite().then_some(w);
    }
    // walks[m][v]: heaviest walk of exactly m arcs from comp[0] to comp[v]
    let mut walks = vec![vec![MaxPlus::NegInf; k]; k + 1];
    walks[0][0] = MaxPlus::ONE;
    for m in 1..=k {
        for (vi, &v) in comp.iter().enumerate() {
            let mut best = MaxPlus::NegInf;
            for (ui, &u) in comp.iter().enumerate() {
                let w = a.get(u, v);
                if w.is_finite() {
                    best = best.oplus(walks[m - 1][ui].otimes(w));
                }
            }
            walks[m][vi] = best;
        }
    }
    let mut rho = MaxPlus::NegInf;
    for vi in 0..k {
        let full = walks[k][vi];
        if full.is_neg_inf() {
            continue;
        }
        let mut worst: Option<MaxPlus> = None;
        for m in 0..k {
            if let Some(diff) = full.minus(walks[m][vi]) {
                let mean = diff.div_int(k - m);
                if worst.is_none_or(|w| mean < w) {
                    worst = Some(mean);
                }
            }
        }
        if let Some(w) = worst {
            rho = rho.oplus(w);
        }
    }
    rho.is_finite().then_some(rho)
}

/// `ρ_max(A)`: the largest mean weight over elementary circuits of `G(A)`,
/// `None` when the graph is acyclic. Exact on rational matrices.
pub fn max_cycle_mean(a: &MpMatrix) -> Option<MaxPlus> {
    strongly_connected_components(a)
        .iter()
        .filter_map(|c| karp_component(a, c))
        .max()
}

/// An elementary circuit, listed from its smallest node without repeating it.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub nodes: Vec<usize>,
    pub mean: MaxPlus,
}

impl Circuit {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // closed form, first node repeated at the end: (1,2,1)
        let closed: Vec<String> = self
            .nodes
            .iter()
            .chain(self.nodes.first())
            .map(|v| (v + 1).to_string())
            .collect();
        write!(f, "({})", closed.join(","))
    }
}

/// Every elementary circuit of length `<= max_len`, with exact mean weights.
/// Brute force; intended for small dimensions.
pub fn enumerate_circuits(a: &MpMatrix, max_len: usize) -> Result<Vec<Circuit>> {
    if max_len < 1 {
        return Err(Error::InvalidCircuitLength);
    }
    let d = a.dim();
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(max_len);
    let mut on_path = vec![false; d];

    #[allow(clippy::too_many_arguments)]
    fn extend(
        a: &MpMatrix,
        start: usize,
        max_len: usize,
        weight: MaxPlus,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<Circuit>,
    ) {
        let last = *path.last().expect("non-empty path");
        let close = a.get(last, start);
        if close.is_finite() {
            out.push(Circuit {
                nodes: path.clone(),
                mean: weight.otimes(close).div_int(path.len()),
            });
        }
        if path.len() == max_len {
            return;
        }
        for next in start + 1..a.dim() {
            let w = a.get(last, next);
            if on_path[next] || w.is_neg_inf() {
                continue;
            }
            on_path[next] = true;
            path.push(next);
            extend(a, start, max_len, weight.otimes(w), path, on_path, out);
            path.pop();
            on_path[next] = false;
        }
    }

    for start in 0..d {
        path.push(start);
        on_path[start] = true;
        extend(a, start, max_len, MaxPlus::ONE, &mut path, &mut on_path, &mut out);
        on_path[start] = false;
        path.pop();
    }
    Ok(out)
}

/// Max-plus Kleene plus `A⁺ = A ⊕ A² ⊕ …`, valid when no circuit is
/// positive.
fn kleene_plus(a: &MpMatrix) -> Vec<MaxPlus> {
    let d = a.dim();
    let mut p = a.entries().to_vec();
    for k in 0..d {
        for i in 0..d {
            let ik = p[i * d + k];
            if ik.is_neg_inf() {
                continue;
            }
            for j in 0..d {
                let via = ik.otimes(p[k * d + j]);
                if via > p[i * d + j] {
                    p[i * d + j] = via;
                }
            }
        }
    }
    p
}

/// Subgraph of arcs lying on circuits of mean exactly `ρ_max(A)`
/// (within `tol` for float entries).
pub fn critical_graph_with_tol(a: &MpMatrix, tol: f64) -> Result<WeightedDigraph> {
    let rho = max_cycle_mean(a).ok_or(Error::Acyclic)?;
    let normalized = a.shifted(rho.neg().expect("finite"));
    let plus = kleene_plus(&normalized);
    let d = a.dim();
    let zero = MaxPlus::ONE;
    let arcs = WeightedDigraph::of_matrix(a)
        .arcs
        .into_iter()
        .filter(|&(i, j, _)| {
            let w = normalized.get(i, j);
            let closing = if i == j { w } else { w.otimes(plus[j * d + i]) };
            closing.approx_eq(&zero, tol)
        })
        .collect();
    Ok(WeightedDigraph { dim: d, arcs })
}

pub fn critical_graph(a: &MpMatrix) -> Result<WeightedDigraph> {
    critical_graph_with_tol(a, DEFAULT_TOL)
}

/// Strongly connected components of a critical graph.
fn critical_components(g: &WeightedDigraph) -> Vec<Vec<usize>> {
    let nodes = g.nodes();
    tarjan(g.dim, &g.adjacency())
        .into_iter()
        .filter(|c| c.iter().all(|v| nodes.contains(v)))
        .collect()
}

/// gcd of circuit lengths inside one strongly connected component, from BFS
/// levels: every arc `(u, v)` contributes `level(u) + 1 - level(v)`.
fn component_period(g: &WeightedDigraph, comp: &[usize]) -> usize {
    let adj = g.adjacency();
    let mut level = vec![None; g.dim];
    let root = comp[0];
    level[root] = Some(0i64);
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if comp.contains(&v) && level[v].is_none() {
                level[v] = Some(level[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    let mut g_acc = 0i64;
    for &u in comp {
        for &v in &adj[u] {
            if comp.contains(&v) {
                let diff = level[u].unwrap() + 1 - level[v].unwrap();
                g_acc = g_acc.gcd(&diff);
            }
        }
    }
    g_acc.unsigned_abs() as usize
}

/// lcm over critical components of the gcd of their circuit lengths.
pub fn cyclicity_with_tol(a: &MpMatrix, tol: f64) -> Result<usize> {
    let g = critical_graph_with_tol(a, tol)?;
    Ok(critical_components(&g)
        .iter()
        .map(|c| component_period(&g, c))
        .fold(1usize, |acc, p| acc.lcm(&p)))
}

pub fn cyclicity(a: &MpMatrix) -> Result<usize> {
    cyclicity_with_tol(a, DEFAULT_TOL)
}

/// Outcome of [`ultimate_period_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodCheck {
    /// First power from which `Ã^{n+period} = Ã^n`.
    pub n0: usize,
    pub period: usize,
    /// `ρ_max(A)`, the growth rate removed before comparing powers.
    pub rho: MaxPlus,
    pub cyclicity: usize,
    pub horizon: usize,
}

impl PeriodCheck {
    pub fn matches_cyclicity(&self) -> bool {
        self.period == self.cyclicity
    }
}

/// Default number of powers examined: `4 d² + 2 c`.
pub fn default_horizon(dim: usize, cyclicity: usize) -> usize {
    4 * dim * dim + 2 * cyclicity
}

/// Looks for the transient and period of the powers of `Ã = A - ρ_max(A)`
/// among `Ã^1 … Ã^horizon`. Returns `None` when no repetition shows up
/// inside the horizon.
pub fn ultimate_period_check(a: &MpMatrix, horizon: Option<usize>) -> Result<Option<PeriodCheck>> {
    ultimate_period_check_with_tol(a, horizon, DEFAULT_TOL)
}

pub fn ultimate_period_check_with_tol(
    a: &MpMatrix,
    horizon: Option<usize>,
    tol: f64,
) -> Result<Option<PeriodCheck>> {
    if !is_strongly_connected(a) {
        return Err(Error::NotStronglyConnected);
    }
    let rho = max_cycle_mean(a).ok_or(Error::Acyclic)?;
    let cyc = cyclicity_with_tol(a, tol)?;
    let horizon = horizon.unwrap_or_else(|| default_horizon(a.dim(), cyc));
    let normalized = a.shifted(rho.neg().expect("finite"));

    // powers[k] = Ã^{k+1}
    let mut powers: Vec<MpMatrix> = Vec::with_capacity(horizon);
    powers.push(normalized.clone());
    for k in 1..horizon {
        let next = normalized.mul(&powers[k - 1])?;
        // The powers follow a deterministic recursion, so the first repeat
        // fixes both the transient and the minimal period.
        if let Some(first) = powers.iter().position(|p| p.approx_eq(&next, tol)) {
            let n0 = first + 1;
            let period = k - first;
            let check = PeriodCheck {
                n0,
                period,
                rho,
                cyclicity: cyc,
                horizon,
            };
            powers.push(next);
            // re-verify on the explored window (matters for float entries)
            let window_ok = (n0..=powers.len() - period)
                .all(|n| powers[n - 1 + period].approx_eq(&powers[n - 1], tol));
            return Ok(window_ok.then_some(check));
        }
        powers.push(next);
    }
    Ok(None)
}

/// Status of the periodicity check in a [`SpectralReport`].
#[derive(Clone, Debug, PartialEq)]
pub enum PeriodStatus {
    Found(PeriodCheck),
    /// No repetition inside the horizon.
    Censored { horizon: usize },
    /// Graph not strongly connected; check not applicable.
    Skipped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub dim: usize,
    pub rho_max: Option<MaxPlus>,
    pub critical: Option<WeightedDigraph>,
    pub cyclicity: Option<usize>,
    pub scc_partition: Vec<Vec<usize>>,
    pub strongly_connected: bool,
    pub period: PeriodStatus,
}

pub fn analyze(a: &MpMatrix, horizon: Option<usize>, tol: f64) -> Result<SpectralReport> {
    let rho_max = max_cycle_mean(a);
    let scc_partition = strongly_connected_components(a);
    let strongly_connected = is_strongly_connected(a);
    let (critical, cyclicity) = match rho_max {
        Some(_) => (
            Some(critical_graph_with_tol(a, tol)?),
            Some(cyclicity_with_tol(a, tol)?),
        ),
        None => (None, None),
    };
    let period = if strongly_connected {
        match ultimate_period_check_with_tol(a, horizon, tol)? {
            Some(c) => PeriodStatus::Found(c),
            None => PeriodStatus::Censored {
                horizon: horizon
                    .unwrap_or_else(|| default_horizon(a.dim(), cyclicity.unwrap_or(1))),
            },
        }
    } else {
        PeriodStatus::Skipped
    };
    Ok(SpectralReport {
        dim: a.dim(),
        rho_max,
        critical,
        cyclicity,
        scc_partition,
        strongly_connected,
        period,
    })
}

impl SpectralReport {
    /// Flat `key = value` block; nodes are 1-based.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let none = || "none".to_string();
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(
            s,
            "rho_max = {}",
            self.rho_max.map_or_else(none, |r| r.to_string())
        );
        let _ = writeln!(
            s,
            "cyclicity = {}",
            self.cyclicity.map_or_else(none, |c| c.to_string())
        );
        let (nodes, arcs) = match &self.critical {
            Some(g) => (
                g.nodes()
                    .iter()
                    .map(|v| (v + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
                g.arcs()
                    .iter()
                    .map(|(i, j, _)| format!("({},{})", i + 1, j + 1))
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            None => (none(), none()),
        };
        let _ = writeln!(s, "critical_nodes = {nodes}");
        let _ = writeln!(s, "critical_arcs = {arcs}");
        let sccs = self
            .scc_partition
            .iter()
            .map(|c| {
                let inner: Vec<String> = c.iter().map(|v| (v + 1).to_string()).collect();
                format!("{{{}}}", inner.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(s, "scc_partition = {sccs}");
        let _ = writeln!(s, "strongly_connected = {}", self.strongly_connected);
        match &self.period {
            PeriodStatus::Found(c) => {
                let _ = writeln!(s, "period_check = found");
                let _ = writeln!(s, "transient_n0 = {}", c.n0);
                let _ = writeln!(s, "ultimate_period = {}", c.period);
                let _ = writeln!(s, "period_matches_cyclicity = {}", c.matches_cyclicity());
                let _ = writeln!(s, "period_horizon = {}", c.horizon);
            }
            PeriodStatus::Censored { horizon } => {
                let _ = writeln!(s, "period_check = censored");
                let _ = writeln!(s, "period_horizon = {horizon}");
            }
            PeriodStatus::Skipped => {
                let _ = writeln!(s, "period_check = skipped (not strongly connected)");
            }
        }
        s
    }
}
