//! Dimension-order routes, per-edge loads, and deflection around failures.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{manhattan, Direction, GridGraph, NodeId};
use crate::percolation::FailureField;
use crate::{Error, Result};

/// A directed grid edge `(tail, head)`.
pub type Edge = (NodeId, NodeId);

/// A walk through the graph, stored as its node sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Route {
    nodes: Vec<NodeId>,
}

impl Route {
    /// Wraps a node sequence; consecutive nodes must be distinct.
    pub fn from_nodes(nodes: Vec<NodeId>) -> Result<Route> {
        if nodes.is_empty() {
            return Err(Error::invalid("route", "route needs a source node"));
        }
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("route", "repeated consecutive node"));
        }
        Ok(Route { nodes })
    }

    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dest(&self) -> NodeId {
        *self.nodes.last().expect("route is never empty")
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Number of edges traversed.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Horizontal leg to the destination column, then the vertical leg.
pub fn xy_route(g: &GridGraph, source: NodeId, dest: NodeId) -> Result<Route> {
    if !g.contains(source) {
        return Err(Error::invalid("source", "outside the grid"));
    }
    if !g.contains(dest) {
        return Err(Error::invalid("dest", "outside the grid"));
    }
    Ok(Route {
        nodes: xy_nodes(source, dest),
    })
}

fn xy_nodes(source: NodeId, dest: NodeId) -> Vec<NodeId> {
    let mut nodes = Vec::with_capacity(manhattan(source, dest) as usize + 1);
    let mut cur = source;
    nodes.push(cur);
    while cur.x != dest.x {
        cur.x = if dest.x > cur.x { cur.x + 1 } else { cur.x - 1 };
        nodes.push(cur);
    }
    while cur.y != dest.y {
        cur.y = if dest.y > cur.y { cur.y + 1 } else { cur.y - 1 };
        nodes.push(cur);
    }
    nodes
}

/// Position of `w` along the XY route from `s` to `d`, if it lies on it.
fn xy_position(s: NodeId, d: NodeId, w: NodeId) -> Option<u32> {
    let within = |v: u32, a: u32, b: u32| a.min(b) <= v && v <= a.max(b);
    if w.y == s.y && within(w.x, s.x, d.x) {
        Some(w.x.abs_diff(s.x))
    } else if w.x == d.x && within(w.y, s.y, d.y) {
        Some(s.x.abs_diff(d.x) + w.y.abs_diff(s.y))
    } else {
        None
    }
}

/// Number of routes using each directed edge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeLoadMap {
    load: BTreeMap<Edge, u32>,
}

impl EdgeLoadMap {
    pub fn get(&self, e: Edge) -> u32 {
        self.load.get(&e).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Edge, u32)> + '_ {
        self.load.iter().map(|(&e, &l)| (e, l))
    }

    pub fn total(&self) -> u64 {
        self.load.values().map(|&l| l as u64).sum()
    }

    pub fn add_route(&mut self, r: &Route) {
        for e in r.edges() {
            *self.load.entry(e).or_insert(0) += 1;
        }
    }

    /// Order-independent merge.
    pub fn merge(&mut self, other: &EdgeLoadMap) {
        for (&e, &l) in &other.load {
            *self.load.entry(e).or_insert(0) += l;
        }
    }

    /// Largest load and the first edge (in edge order) attaining it.
    pub fn max(&self) -> Option<(Edge, u32)> {
        let mut best: Option<(Edge, u32)> = None;
        for (&e, &l) in &self.load {
            if best.is_none_or(|(_, b)| l > b) {
                best = Some((e, l));
            }
        }
        best
    }
}

/// Exact per-edge counts and the maximum congestion `N_max`.
pub fn edge_congestion(routes: &[Route]) -> (EdgeLoadMap, u32) {
    let mut loads = EdgeLoadMap::default();
    for r in routes {
        loads.add_route(r);
    }
    let n_max = loads.max().map_or(0, |(_, l)| l);
    (loads, n_max)
}

/// The sink-column edge `e_j = ((0, j), (0, j−1))`.
pub fn trunk_edge(j: u32) -> Edge {
    (NodeId::new(0, j), NodeId::new(0, j - 1))
}

/// Loads `(j, Λ_{e_j})` on the sink-column edges when every node other than
/// the corner sink `(0,0)` sends one XY route to it.
pub fn sink_trunk_loads(g: &GridGraph, sink: NodeId) -> Result<Vec<(u32, u32)>> {
    if sink != NodeId::new(0, 0) {
        return Err(Error::Unsupported(format!(
            "sink-trunk loads are defined for the corner sink (0,0), got ({},{})",
            sink.x, sink.y
        )));
    }
    let routes: Vec<Route> = g
        .nodes()
        .filter(|&v| v != sink)
        .map(|v| xy_route(g, v, sink))
        .collect::<Result<_>>()?;
    let (loads, _) = edge_congestion(&routes);
    Ok((1..g.side()).map(|j| (j, loads.get(trunk_edge(j)))).collect())
}

/// Closed form `n·(n−j)` for the all-active trunk load on an `n × n` grid.
pub fn trunk_load_closed_form(n: u32, j: u32) -> u32 {
    n * (n - j)
}

/// Outcome of one deflected route.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetourRecord {
    pub nominal_len: u32,
    pub actual_len: u32,
    /// Distinct failure clusters met by the nominal route (`m`).
    pub clusters_hit: u32,
    /// Failed nodes on the nominal route (`K_Γ`).
    pub failed_on_route: u32,
    /// Sizes of the clusters counted in `clusters_hit`.
    pub hit_cluster_sizes: Vec<u32>,
    /// Perimeters of the same clusters, in the same order.
    pub hit_cluster_perimeters: Vec<u32>,
}

impl DetourRecord {
    pub fn detour(&self) -> u32 {
        self.actual_len - self.nominal_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hand {
    Left,
    Right,
}

impl Hand {
    fn toward(self, d: Direction) -> Direction {
        match self {
            Hand::Left => d.left(),
            Hand::Right => d.right(),
        }
    }
}

/// XY route that walks around failure clusters.
///
/// The packet follows the nominal XY route. When the next node has failed it
/// sidesteps (north first for horizontal legs, east first for vertical legs,
/// the opposite side when that node is unavailable) and then follows the
/// healthy boundary of the obstacle, keeping the obstacle on the hand facing
/// the blocked direction. It rejoins the nominal route at the first node
/// further along than the point where it was blocked. If the boundary walk
/// closes on itself first, the destination is unreachable.
pub fn deflect_route(
    g: &GridGraph,
    source: NodeId,
    dest: NodeId,
    failures: &FailureField,
) -> Result<(Route, DetourRecord)> {
    let nominal = xy_route(g, source, dest)?;
    if failures.side() != g.side() {
        return Err(Error::invalid("failures", "failure field and graph differ in size"));
    }
    if failures.is_failed(source) {
        return Err(Error::invalid("source", "source node has failed"));
    }
    if failures.is_failed(dest) {
        return Err(Error::invalid("dest", "destination node has failed"));
    }
    let free = |v: Option<NodeId>| v.filter(|&w| !failures.is_failed(w));
    let nominal_nodes = nominal.nodes();
    let mut path = vec![source];
    let mut pos = source;
    let mut at = 0usize;
    while pos != dest {
        let next = nominal_nodes[at + 1];
        if !failures.is_failed(next) {
            pos = next;
            at += 1;
            path.push(pos);
            continue;
        }
        let blocked = Direction::between(pos, next).expect("XY routes take unit steps");
        let primary = if blocked.is_horizontal() {
            Direction::North
        } else {
            Direction::East
        };
        let side = if free(g.step(pos, primary)).is_some() {
            primary
        } else if free(g.step(pos, primary.reverse())).is_some() {
            primary.reverse()
        } else {
            primary
        };
        let hand = if side.left() == blocked {
            Hand::Left
        } else {
            Hand::Right
        };
        let mut heading = side;
        let mut seen = BTreeSet::new();
        loop {
            let candidates = [
                hand.toward(heading),
                heading,
                hand.toward(heading).reverse(),
                heading.reverse(),
            ];
            let (dir, w) = candidates
                .into_iter()
                .find_map(|d| free(g.step(pos, d)).map(|w| (d, w)))
                .ok_or(Error::NoRoute {
                    from: source,
                    to: dest,
                })?;
            heading = dir;
            pos = w;
            path.push(pos);
            if let Some(j) = xy_position(source, dest, pos) {
                if j as usize > at {
                    at = j as usize;
                    break;
                }
            }
            if !seen.insert((g.index(pos), heading)) {
                return Err(Error::NoRoute {
                    from: source,
                    to: dest,
                });
            }
        }
    }

    let failed_on_route: Vec<NodeId> = nominal_nodes
        .iter()
        .copied()
        .filter(|&v| failures.is_failed(v))
        .collect();
    let mut assigned = BTreeSet::new();
    let mut hit_cluster_sizes = Vec::new();
    let mut hit_cluster_perimeters = Vec::new();
    for &v in &failed_on_route {
        if assigned.contains(&v) {
            continue;
        }
        let cluster = failures.cluster_of(v);
        hit_cluster_sizes.push(cluster.len() as u32);
        hit_cluster_perimeters.push(failures.perimeter(&cluster));
        assigned.extend(cluster);
    }
    let record = DetourRecord {
        nominal_len: nominal.len() as u32,
        actual_len: (path.len() - 1) as u32,
        clusters_hit: hit_cluster_sizes.len() as u32,
        failed_on_route: failed_on_route.len() as u32,
        hit_cluster_sizes,
        hit_cluster_perimeters,
    };
    Ok((Route { nodes: path }, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{bfs_distances, build_grid};

    fn n(x: u32, y: u32) -> NodeId {
        NodeId::new(x, y)
    }

    #[test]
    fn xy_examples() {
        let g = build_grid(6).unwrap();
        let r = xy_route(&g, n(5, 3), n(0, 3)).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r.edges().all(|(a, b)| a.y == b.y));
        assert!(xy_route(&g, n(2, 2), n(2, 2)).unwrap().is_empty());
        let r = xy_route(&g, n(3, 4), n(0, 0)).unwrap();
        assert_eq!(r.len(), 7);
        assert!(r.edges().take(3).all(|(a, b)| a.y == b.y));
        assert!(r.edges().skip(3).all(|(a, b)| a.x == b.x));
    }

    #[test]
    fn xy_position_matches_route() {
        let g = build_grid(5).unwrap();
        for s in g.nodes() {
            for d in g.nodes() {
                let r = xy_route(&g, s, d).unwrap();
                for w in g.nodes() {
                    let expected = r.nodes().iter().position(|&v| v == w).map(|p| p as u32);
                    assert_eq!(xy_position(s, d, w), expected);
                }
            }
        }
    }

    #[test]
    fn trunk_loads() {
        for (l, j, expected) in [(6, 1, 30), (6, 5, 6), (2, 1, 2)] {
            let g = build_grid(l).unwrap();
            let loads = sink_trunk_loads(&g, n(0, 0)).unwrap();
            assert_eq!(loads[(j - 1) as usize], (j, expected));
            assert_eq!(trunk_load_closed_form(l, j), expected);
        }
        let g = build_grid(4).unwrap();
        assert!(matches!(sink_trunk_loads(&g, n(3, 0)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn congestion_examples() {
        let g = build_grid(6).unwrap();
        let routes: Vec<Route> = g
            .nodes()
            .filter(|&v| v != n(0, 0))
            .map(|v| xy_route(&g, v, n(0, 0)).unwrap())
            .collect();
        let (loads, n_max) = edge_congestion(&routes);
        assert_eq!(n_max, 30);
        assert_eq!(loads.max().unwrap().0, trunk_edge(1));
        let total: u64 = routes.iter().map(|r| r.len() as u64).sum();
        assert_eq!(loads.total(), total);

        let one = [xy_route(&g, n(0, 0), n(3, 0)).unwrap()];
        assert_eq!(edge_congestion(&one).1, 1);
        let two = [
            xy_route(&g, n(0, 0), n(3, 0)).unwrap(),
            xy_route(&g, n(0, 5), n(3, 5)).unwrap(),
        ];
        assert_eq!(edge_congestion(&two).1, 1);
    }

    #[test]
    fn single_dead_node_costs_two_hops() {
        let g = build_grid(6).unwrap();
        let f = FailureField::from_failed(6, [n(3, 3)]).unwrap();
        let (route, rec) = deflect_route(&g, n(5, 3), n(0, 3), &f).unwrap();
        assert_eq!(rec.nominal_len, 5);
        assert_eq!(rec.actual_len, 7);
        assert_eq!((rec.clusters_hit, rec.failed_on_route), (1, 1));
        assert_eq!(
            route.nodes(),
            &[n(5, 3), n(4, 3), n(4, 4), n(3, 4), n(2, 4), n(2, 3), n(1, 3), n(0, 3)]
        );
    }

    #[test]
    fn untouched_routes_keep_nominal_length() {
        let g = build_grid(6).unwrap();
        let none = FailureField::from_failed(6, []).unwrap();
        let (_, rec) = deflect_route(&g, n(5, 3), n(0, 3), &none).unwrap();
        assert_eq!((rec.actual_len, rec.failed_on_route), (5, 0));
        let off = FailureField::from_failed(6, [n(3, 0)]).unwrap();
        let (_, rec) = deflect_route(&g, n(5, 3), n(0, 3), &off).unwrap();
        assert_eq!(rec.actual_len, rec.nominal_len);
    }

    #[test]
    fn walled_off_destination_is_no_route() {
        let g = build_grid(5).unwrap();
        let f = FailureField::from_failed(5, [n(3, 4), n(4, 3)]).unwrap();
        assert!(matches!(
            deflect_route(&g, n(0, 0), n(4, 4), &f),
            Err(Error::NoRoute { .. })
        ));
    }

    #[test]
    fn boundary_row_falls_back_south() {
        let g = build_grid(6).unwrap();
        let f = FailureField::from_failed(6, [n(2, 5)]).unwrap();
        let (route, rec) = deflect_route(&g, n(4, 5), n(0, 5), &f).unwrap();
        assert_eq!(rec.actual_len, rec.nominal_len + 2);
        assert!(route.nodes().contains(&n(2, 4)));
    }

    #[test]
    fn deflected_routes_are_admissible_walks() {
        let g = build_grid(7).unwrap();
        for seed in 0..40 {
            let f = FailureField::sample(7, 0.25, seed).unwrap();
            for s in g.nodes().filter(|&v| !f.is_failed(v)) {
                for d in g.nodes().filter(|&v| !f.is_failed(v)).step_by(5) {
                    let blocked = |v: NodeId| f.is_failed(v);
                    let bfs = bfs_distances(&g, s, Some(&blocked)).unwrap();
                    match deflect_route(&g, s, d, &f) {
                        Ok((route, rec)) => {
                            assert_eq!(route.source(), s);
                            assert_eq!(route.dest(), d);
                            assert!(route.edges().all(|(a, b)| g.is_grid_edge(a, b)));
                            assert!(route.nodes().iter().all(|&v| !f.is_failed(v)));
                            assert!(rec.actual_len >= bfs.get(d).finite().unwrap());
                            assert!(rec.actual_len >= rec.nominal_len);
                            assert!(rec.clusters_hit <= rec.failed_on_route);
                        }
                        Err(Error::NoRoute { .. }) => {
                            assert!(bfs.get(d).finite().is_none(), "seed {seed} {s:?}->{d:?}");
                        }
                        Err(e) => panic!("unexpected error {e}"),
                    }
                }
            }
        }
    }
}
