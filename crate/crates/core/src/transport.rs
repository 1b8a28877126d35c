//! Transport-work, depth, and edge-support lower bounds for a reduction of a
//! discrete measure onto a single sink.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{self, manhattan, Distance, GridGraph, NodeId};
use crate::{Error, Result};

/// Tolerance on `Σ a_i = 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Largest terminal set the exact Steiner solver accepts.
pub const STEINER_EXACT_MAX_TERMINALS: usize = 12;

/// Weighted source atoms plus the sink they reduce onto.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteMeasure {
    atoms: Vec<(NodeId, f64)>,
    sink: NodeId,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(NodeId, f64)>, sink: NodeId) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "measure needs at least one atom"));
        }
        let mut seen = BTreeSet::new();
        let mut total = 0.0;
        for &(node, mass) in &atoms {
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(Error::invalid("masses", "every mass must be positive and finite"));
            }
            if !seen.insert(node) {
                return Err(Error::invalid("atoms", "atom nodes must be distinct"));
            }
            total += mass;
        }
        if libm::fabs(total - 1.0) > MASS_TOLERANCE {
            return Err(Error::invalid(
                "masses",
                format!("masses sum to {total}, expected 1 within {MASS_TOLERANCE:e}"),
            ));
        }
        Ok(DiscreteMeasure { atoms, sink })
    }

    /// Equal mass on each node.
    pub fn uniform(nodes: &[NodeId], sink: NodeId) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::invalid("atoms", "measure needs at least one atom"));
        }
        let mass = 1.0 / n as f64;
        Self::new(nodes.iter().map(|&v| (v, mass)).collect(), sink)
    }

    /// The Dirac mass at the sink.
    pub fn dirac(sink: NodeId) -> Self {
        DiscreteMeasure {
            atoms: vec![(sink, 1.0)],
            sink,
        }
    }

    pub fn atoms(&self) -> &[(NodeId, f64)] {
        &self.atoms
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn support(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.atoms.iter().map(|&(v, _)| v)
    }

    pub fn check_within(&self, g: &GridGraph) -> Result<()> {
        if !g.contains(self.sink) {
            return Err(Error::invalid("sink", "outside the grid"));
        }
        if self.support().any(|v| !g.contains(v)) {
            return Err(Error::invalid("atoms", "atom outside the grid"));
        }
        Ok(())
    }
}

/// Hop-count metric between grid nodes.
pub trait Metric {
    fn distance(&self, a: NodeId, b: NodeId) -> u32;
}

/// `d₁` on the bare grid.
#[derive(Debug, Clone, Copy, Default)]
pub struct Manhattan;

impl Metric for Manhattan {
    fn distance(&self, a: NodeId, b: NodeId) -> u32 {
        manhattan(a, b)
    }
}

/// Graph metric by BFS; works on small-world graphs.
pub struct GraphMetric<'g> {
    graph: &'g GridGraph,
    table: Vec<Vec<u32>>,
}

impl<'g> GraphMetric<'g> {
    pub fn new(graph: &'g GridGraph) -> Self {
        GraphMetric {
            graph,
            table: grid::all_pairs(graph),
        }
    }
}

impl Metric for GraphMetric<'_> {
    fn distance(&self, a: NodeId, b: NodeId) -> u32 {
        self.table[self.graph.index(a) as usize][self.graph.index(b) as usize]
    }
}

/// A metric multiplied by a constant factor.
pub struct Scaled<M>(pub u32, pub M);

impl<M: Metric> Metric for Scaled<M> {
    fn distance(&self, a: NodeId, b: NodeId) -> u32 {
        self.0 * self.1.distance(a, b)
    }
}

/// `W1(μ, δ_sink) = Σ a_i d(x_i, sink)`; the coupling onto a Dirac target is
/// unique, so this is the Kantorovich optimum.
pub fn w1_to_dirac<M: Metric>(m: &DiscreteMeasure, metric: &M) -> f64 {
    m.atoms
        .iter()
        .map(|&(v, a)| a * metric.distance(v, m.sink) as f64)
        .sum()
}

/// `r_μ`: the largest sink distance over the support.
pub fn support_radius<M: Metric>(m: &DiscreteMeasure, metric: &M) -> u32 {
    m.support()
        .map(|v| metric.distance(v, m.sink))
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SteinerCost {
    /// Exact minimum, absent in heuristic-only mode.
    pub exact: Option<u32>,
    /// Weight of a minimum spanning tree on the terminals' metric closure,
    /// at most twice the optimum.
    pub mst_upper: u32,
}

impl SteinerCost {
    /// The exact value when known, otherwise the 2-approximation.
    pub fn best(&self) -> u32 {
        self.exact.unwrap_or(self.mst_upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteinerMode {
    #[default]
    Exact,
    HeuristicOnly,
}

fn check_terminals(g: &GridGraph, terminals: &[NodeId]) -> Result<Vec<NodeId>> {
    let set: BTreeSet<NodeId> = terminals.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::invalid("terminals", "at least one terminal required"));
    }
    if set.iter().any(|&v| !g.contains(v)) {
        return Err(Error::invalid("terminals", "terminal outside the grid"));
    }
    Ok(set.into_iter().collect())
}

fn terminal_distances(g: &GridGraph, terminals: &[NodeId]) -> Result<Vec<Vec<u32>>> {
    terminals
        .iter()
        .map(|&t| {
            let f = grid::bfs_distances(g, t, None)?;
            f.iter()
                .map(|(_, d)| match d {
                    Distance::Finite(d) => Ok(d),
                    Distance::Unreachable => {
                        Err(Error::invalid("graph", "graph is not connected"))
                    }
                })
                .collect()
        })
        .collect()
}

/// Prim's algorithm over the metric closure of the terminals.
fn mst_closure(g: &GridGraph, terminals: &[NodeId], from_terminal: &[Vec<u32>]) -> u32 {
    let k = terminals.len();
    let mut in_tree = vec![false; k];
    let mut best = vec![u32::MAX; k];
    best[0] = 0;
    let mut total = 0;
    for _ in 0..k {
        let next = (0..k)
            .filter(|&i| !in_tree[i])
            .min_by_key(|&i| best[i])
            .expect("a terminal remains outside the tree");
        in_tree[next] = true;
        total += best[next];
        for j in 0..k {
            if !in_tree[j] {
                let d = from_terminal[next][g.index(terminals[j]) as usize];
                best[j] = best[j].min(d);
            }
        }
    }
    total
}

/// Minimum edge count of a connected subgraph spanning `terminals`.
///
/// The exact value comes from the Dreyfus–Wagner dynamic program over
/// subsets of terminals, which is exponential in `|terminals|`; above
/// [`STEINER_EXACT_MAX_TERMINALS`] this returns a budget error unless
/// `mode` is [`SteinerMode::HeuristicOnly`].
pub fn steiner_cost(g: &GridGraph, terminals: &[NodeId], mode: SteinerMode) -> Result<SteinerCost> {
    let terminals = check_terminals(g, terminals)?;
    let k = terminals.len();
    if mode == SteinerMode::Exact && k > STEINER_EXACT_MAX_TERMINALS {
        return Err(Error::Budget {
            what: "steiner terminals",
            size: k,
            limit: STEINER_EXACT_MAX_TERMINALS,
        });
    }
    let from_terminal = terminal_distances(g, &terminals)?;
    let mst_upper = mst_closure(g, &terminals, &from_terminal);
    let exact = match mode {
        SteinerMode::HeuristicOnly => None,
        SteinerMode::Exact if k == 1 => Some(0),
        SteinerMode::Exact => Some(dreyfus_wagner(g, &terminals, &from_terminal)),
    };
    Ok(SteinerCost { exact, mst_upper })
}

fn dreyfus_wagner(g: &GridGraph, terminals: &[NodeId], from_terminal: &[Vec<u32>]) -> u32 {
    let n = g.node_count();
    let apsp = grid::all_pairs(g);
    // The last terminal is the root; subsets range over the others.
    let k = terminals.len() - 1;
    let full = (1usize << k) - 1;
    let mut dp = vec![vec![u32::MAX; n]; full + 1];
    for (i, row) in from_terminal.iter().take(k).enumerate() {
        dp[1 << i].copy_from_slice(row);
    }
    let mut merged = vec![u32::MAX; n];
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        merged.fill(u32::MAX);
        // Enumerate splits {sub, mask∖sub} once each by keeping the lowest bit in sub.
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut s = rest;
        loop {
            let sub = s | low;
            if sub != mask {
                let other = mask ^ sub;
                for v in 0..n {
                    let a = dp[sub][v];
                    let b = dp[other][v];
                    if a != u32::MAX && b != u32::MAX {
                        merged[v] = merged[v].min(a + b);
                    }
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & rest;
        }
        let row = &mut dp[mask];
        for v in 0..n {
            let mut best = u32::MAX;
            for (u, &m) in merged.iter().enumerate() {
                if m != u32::MAX {
                    best = best.min(m + apsp[u][v]);
                }
            }
            row[v] = best;
        }
    }
    dp[full][g.index(terminals[k]) as usize]
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundsReport {
    pub w1: f64,
    pub r_mu: u32,
    pub steiner: u32,
    /// False when `steiner` is only the metric-closure MST upper bound.
    pub steiner_exact: bool,
    pub wallclock_lower_seconds: f64,
}

/// All three lower bounds plus the wall-clock floor `r_μ·t_edge·t_cycle`.
/// Distances come from the graph metric, so small-world graphs are handled.
pub fn bounds_report(
    m: &DiscreteMeasure,
    g: &GridGraph,
    t_edge: f64,
    t_cycle: f64,
    mode: SteinerMode,
) -> Result<BoundsReport> {
    if !(t_edge >= 0.0) {
        return Err(Error::invalid("t_edge", "must be non-negative"));
    }
    if !(t_cycle > 0.0) {
        return Err(Error::invalid("t_cycle", "must be positive"));
    }
    m.check_within(g)?;
    let field = grid::bfs_distances(g, m.sink, None)?;
    let sink_metric = SinkDistances(&field);
    let w1 = w1_to_dirac(m, &sink_metric);
    let r_mu = support_radius(m, &sink_metric);
    let mut terminals: Vec<NodeId> = m.support().collect();
    terminals.push(m.sink);
    let st = steiner_cost(g, &terminals, mode)?;
    Ok(BoundsReport {
        w1,
        r_mu,
        steiner: st.best(),
        steiner_exact: st.exact.is_some(),
        wallclock_lower_seconds: r_mu as f64 * t_edge * t_cycle,
    })
}

/// Distances to a fixed sink read from one BFS field.
struct SinkDistances<'a>(&'a grid::DistanceField);

impl Metric for SinkDistances<'_> {
    fn distance(&self, a: NodeId, b: NodeId) -> u32 {
        debug_assert_eq!(b, self.0.source);
        self.0.get(a).finite().unwrap_or(u32::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn three_atoms() -> DiscreteMeasure {
        let nodes = [NodeId::new(3, 3), NodeId::new(2, 3), NodeId::new(3, 1)];
        DiscreteMeasure::uniform(&nodes, NodeId::new(0, 0)).unwrap()
    }

    #[test]
    fn dirac_has_zero_bounds() {
        let g = build_grid(4).unwrap();
        let m = DiscreteMeasure::dirac(NodeId::new(0, 0));
        assert_eq!(w1_to_dirac(&m, &Manhattan), 0.0);
        assert_eq!(support_radius(&m, &Manhattan), 0);
        let r = bounds_report(&m, &g, 1.0, 1e-9, SteinerMode::Exact).unwrap();
        assert_eq!((r.w1, r.r_mu, r.steiner, r.wallclock_lower_seconds), (0.0, 0, 0, 0.0));
    }

    #[test]
    fn three_atom_example() {
        let m = three_atoms();
        assert!((w1_to_dirac(&m, &Manhattan) - 5.0).abs() < 1e-12);
        assert_eq!(support_radius(&m, &Manhattan), 6);
        assert!((w1_to_dirac(&m, &Scaled(2, Manhattan)) - 10.0).abs() < 1e-12);
        let g = build_grid(4).unwrap();
        let r = bounds_report(&m, &g, 1.0, 1e-9, SteinerMode::Exact).unwrap();
        assert!((r.wallclock_lower_seconds - 6e-9).abs() < 1e-21);
        assert!(r.r_mu as f64 >= r.w1);
        assert!(r.steiner >= r.r_mu);
    }

    #[test]
    fn measure_validation() {
        let s = NodeId::new(0, 0);
        let a = NodeId::new(1, 0);
        assert!(DiscreteMeasure::new(vec![(a, 0.5), (s, 0.5 + 1e-11)], s).is_err());
        assert!(DiscreteMeasure::new(vec![(a, 0.5), (a, 0.5)], s).is_err());
        assert!(DiscreteMeasure::new(vec![(a, 1.0), (s, 0.0)], s).is_err());
        assert!(DiscreteMeasure::new(vec![(a, 0.5), (s, 0.5 + 1e-13)], s).is_ok());
    }

    #[test]
    fn steiner_small_cases() {
        let g = build_grid(4).unwrap();
        let o = NodeId::new(0, 0);
        assert_eq!(steiner_cost(&g, &[o], SteinerMode::Exact).unwrap().exact, Some(0));
        let v = NodeId::new(2, 3);
        assert_eq!(steiner_cost(&g, &[o, v], SteinerMode::Exact).unwrap().exact, Some(5));
        let terms = [o, NodeId::new(3, 3), NodeId::new(2, 3), NodeId::new(3, 1)];
        let st = steiner_cost(&g, &terms, SteinerMode::Exact).unwrap();
        // Bottom row then right column, one step to (2,3): 7 edges, matching
        // the lower bound d((0,0),(3,3)) + 1.
        assert_eq!(st.exact, Some(7));
        assert!(st.exact.unwrap() <= st.mst_upper);
    }

    #[test]
    fn steiner_budget() {
        let g = build_grid(5).unwrap();
        let terms: Vec<NodeId> = g.nodes().take(13).collect();
        assert!(matches!(
            steiner_cost(&g, &terms, SteinerMode::Exact),
            Err(Error::Budget { .. })
        ));
        let h = steiner_cost(&g, &terms, SteinerMode::HeuristicOnly).unwrap();
        assert_eq!(h.exact, None);
        assert!(h.mst_upper >= 12);
    }
}
