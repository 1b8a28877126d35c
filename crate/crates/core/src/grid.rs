//! Grid graphs, small-world augmentation, and BFS metrics.
//!
//! Nodes are indexed row-major (`y·L + x`). Grid adjacency is implicit; the
//! only stored edges are long-range shortcuts, kept undirected, deduplicated
//! and disjoint from the grid edge set.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeId {
    pub x: u32,
    pub y: u32,
}

impl NodeId {
    pub const fn new(x: u32, y: u32) -> Self {
        NodeId { x, y }
    }
}

impl From<(u32, u32)> for NodeId {
    fn from((x, y): (u32, u32)) -> Self {
        NodeId { x, y }
    }
}

/// `|Δx| + |Δy|`.
pub fn manhattan(u: NodeId, v: NodeId) -> u32 {
    u.x.abs_diff(v.x) + u.y.abs_diff(v.y)
}

/// Hop count to a node, or `Unreachable` when no path exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(u32),
    Unreachable,
}

impl Distance {
    pub fn finite(self) -> Option<u32> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Unreachable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridGraph {
    side: u32,
    shortcuts: Vec<(NodeId, NodeId)>,
    /// Shortcut partners per node index, sorted.
    shortcut_adj: Vec<Vec<u32>>,
    shortcuts_per_node: u32,
    seed: u64,
}

/// Builds the bare `L × L` grid.
pub fn build_grid(side: u32) -> Result<GridGraph> {
    if side == 0 {
        return Err(Error::invalid("L", "grid side must be at least 1"));
    }
    if side > 1 << 15 {
        return Err(Error::invalid("L", "grid side must be at most 32768"));
    }
    let p = (side * side) as usize;
    Ok(GridGraph {
        side,
        shortcuts: Vec::new(),
        shortcut_adj: vec![Vec::new(); p],
        shortcuts_per_node: 0,
        seed: 0,
    })
}

/// Adds `k` uniformly sampled long-range partners per node.
///
/// Every node `v` draws `k` partners uniformly from `V∖{v}`. Draws that
/// coincide with a grid edge, an existing shortcut, or another draw collapse
/// into one edge, so the realized count is at most `k·P`.
pub fn augment_smallworld(g: &GridGraph, k: u32, seed: u64) -> Result<GridGraph> {
    if k == 0 {
        return Err(Error::invalid("k", "shortcuts per node must be at least 1"));
    }
    let p = g.node_count() as u32;
    let mut out = g.clone();
    out.shortcuts_per_node = g.shortcuts_per_node + k;
    out.seed = seed;
    if p < 2 {
        return Ok(out);
    }
    let mut rng = rng::seeded(seed);
    let mut edges: BTreeSet<(u32, u32)> = g
        .shortcuts
        .iter()
        .map(|&(a, b)| ordered(g.index(a), g.index(b)))
        .collect();
    for v in 0..p {
        for _ in 0..k {
            // Uniform over V∖{v}: draw from P−1 slots and skip over v.
            let mut u = rng.gen_range(0..p - 1);
            if u >= v {
                u += 1;
            }
            let (a, b) = ordered(v, u);
            if g.is_grid_edge(g.node(a), g.node(b)) {
                continue;
            }
            edges.insert((a, b));
        }
    }
    let pairs: Vec<(NodeId, NodeId)> = edges.into_iter().map(|(a, b)| (g.node(a), g.node(b))).collect();
    out.set_shortcuts(pairs);
    Ok(out)
}

fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl GridGraph {
    /// Rebuilds a graph from its persisted form. Pairs are validated and
    /// kept in the given order.
    pub fn from_parts(
        side: u32,
        shortcuts_per_node: u32,
        seed: u64,
        shortcuts: Vec<(NodeId, NodeId)>,
    ) -> Result<GridGraph> {
        let mut g = build_grid(side)?;
        g.shortcuts_per_node = shortcuts_per_node;
        g.seed = seed;
        let mut seen = BTreeSet::new();
        for &(a, b) in &shortcuts {
            if !g.contains(a) || !g.contains(b) {
                return Err(Error::invalid("shortcut", "endpoint outside the grid"));
            }
            if a == b {
                return Err(Error::invalid("shortcut", "self-loop"));
            }
            if g.is_grid_edge(a, b) {
                return Err(Error::invalid("shortcut", "duplicates a grid edge"));
            }
            if !seen.insert(ordered(g.index(a), g.index(b))) {
                return Err(Error::invalid("shortcut", "duplicate pair"));
            }
        }
        g.set_shortcuts(shortcuts);
        Ok(g)
    }

    fn set_shortcuts<I: IntoIterator<Item = (NodeId, NodeId)>>(&mut self, pairs: I) {
        self.shortcuts = pairs.into_iter().collect();
        let mut adj = vec![Vec::new(); self.node_count()];
        for &(a, b) in &self.shortcuts {
            let (ia, ib) = (self.index(a), self.index(b));
            adj[ia as usize].push(ib);
            adj[ib as usize].push(ia);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        self.shortcut_adj = adj;
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn node_count(&self) -> usize {
        (self.side as usize) * (self.side as usize)
    }

    pub fn grid_edge_count(&self) -> usize {
        2 * self.side as usize * (self.side as usize - 1)
    }

    pub fn edge_count(&self) -> usize {
        self.grid_edge_count() + self.shortcuts.len()
    }

    pub fn shortcuts(&self) -> &[(NodeId, NodeId)] {
        &self.shortcuts
    }

    pub fn shortcuts_per_node(&self) -> u32 {
        self.shortcuts_per_node
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.x < self.side && v.y < self.side
    }

    pub fn index(&self, v: NodeId) -> u32 {
        v.y * self.side + v.x
    }

    pub fn node(&self, index: u32) -> NodeId {
        NodeId::new(index % self.side, index / self.side)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count() as u32).map(move |i| self.node(i))
    }

    pub fn is_grid_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.contains(a) && self.contains(b) && manhattan(a, b) == 1
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.is_grid_edge(a, b)
            || (self.contains(a)
                && self.contains(b)
                && self.shortcut_adj[self.index(a) as usize]
                    .binary_search(&self.index(b))
                    .is_ok())
    }

    /// Grid neighbours in the fixed order east, north, west, south.
    pub fn grid_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        Direction::ALL
            .into_iter()
            .filter_map(move |d| self.step(v, d))
    }

    /// Grid neighbours followed by shortcut partners.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let extra = &self.shortcut_adj[self.index(v) as usize];
        self.grid_neighbors(v)
            .chain(extra.iter().map(move |&i| self.node(i)))
    }

    /// Neighbour one grid step away in direction `d`, if inside the grid.
    pub fn step(&self, v: NodeId, d: Direction) -> Option<NodeId> {
        let (dx, dy) = d.delta();
        let x = v.x as i64 + dx as i64;
        let y = v.y as i64 + dy as i64;
        if x < 0 || y < 0 || x >= self.side as i64 || y >= self.side as i64 {
            None
        } else {
            Some(NodeId::new(x as u32, y as u32))
        }
    }
}

/// Unit grid direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    East,
    North,
    West,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::North,
        Direction::West,
        Direction::South,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::East => (1, 0),
            Direction::North => (0, 1),
            Direction::West => (-1, 0),
            Direction::South => (0, -1),
        }
    }

    pub fn left(self) -> Direction {
        match self {
            Direction::East => Direction::North,
            Direction::North => Direction::West,
            Direction::West => Direction::South,
            Direction::South => Direction::East,
        }
    }

    pub fn right(self) -> Direction {
        self.left().reverse()
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::East => Direction::West,
            Direction::North => Direction::South,
            Direction::West => Direction::East,
            Direction::South => Direction::North,
        }
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Direction::East | Direction::West)
    }

    /// Direction of a single grid step from `a` to `b`.
    pub fn between(a: NodeId, b: NodeId) -> Option<Direction> {
        match (b.x as i64 - a.x as i64, b.y as i64 - a.y as i64) {
            (1, 0) => Some(Direction::East),
            (-1, 0) => Some(Direction::West),
            (0, 1) => Some(Direction::North),
            (0, -1) => Some(Direction::South),
            _ => None,
        }
    }
}

/// Hop distances from one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    pub source: NodeId,
    side: u32,
    dist: Vec<Distance>,
}

impl DistanceField {
    pub fn get(&self, v: NodeId) -> Distance {
        self.dist[(v.y * self.side + v.x) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Distance)> + '_ {
        self.dist.iter().enumerate().map(move |(i, &d)| {
            let i = i as u32;
            (NodeId::new(i % self.side, i / self.side), d)
        })
    }

    /// Largest finite distance.
    pub fn max_finite(&self) -> u32 {
        self.dist.iter().filter_map(|d| d.finite()).max().unwrap_or(0)
    }

    pub fn all_reachable(&self) -> bool {
        self.dist.iter().all(|d| *d != Distance::Unreachable)
    }
}

/// Exact hop distances in the graph induced on `V∖blocked`.
pub fn bfs_distances(
    g: &GridGraph,
    source: NodeId,
    blocked: Option<&dyn Fn(NodeId) -> bool>,
) -> Result<DistanceField> {
    if !g.contains(source) {
        return Err(Error::invalid("source", "outside the grid"));
    }
    let is_blocked = |v: NodeId| blocked.is_some_and(|f| f(v));
    if is_blocked(source) {
        return Err(Error::invalid("source", "source node is blocked"));
    }
    let mut dist = vec![Distance::Unreachable; g.node_count()];
    let mut queue = VecDeque::new();
    dist[g.index(source) as usize] = Distance::Finite(0);
    queue.push_back((source, 0u32));
    while let Some((v, d)) = queue.pop_front() {
        for w in g.neighbors(v) {
            let slot = &mut dist[g.index(w) as usize];
            if *slot == Distance::Unreachable && !is_blocked(w) {
                *slot = Distance::Finite(d + 1);
                queue.push_back((w, d + 1));
            }
        }
    }
    Ok(DistanceField {
        source,
        side: g.side,
        dist,
    })
}

/// BFS parent pointers from `root`, breaking ties among equal-depth parents
/// by the order produced by `order` (a permutation key per node index).
pub(crate) fn bfs_tree(g: &GridGraph, root: NodeId, order: Option<&[u64]>) -> (Vec<u32>, Vec<Option<u32>>) {
    let n = g.node_count();
    let mut depth = vec![u32::MAX; n];
    let mut parent = vec![None; n];
    let r = g.index(root) as usize;
    depth[r] = 0;
    let mut frontier = vec![r as u32];
    while !frontier.is_empty() {
        let mut next: BTreeMap<u32, u32> = BTreeMap::new();
        for &v in &frontier {
            for w in g.neighbors(g.node(v)) {
                let wi = g.index(w);
                if depth[wi as usize] != u32::MAX {
                    continue;
                }
                let better = match next.get(&wi) {
                    None => true,
                    Some(&cur) => match order {
                        Some(key) => key[v as usize] < key[cur as usize],
                        None => false,
                    },
                };
                if better {
                    next.insert(wi, v);
                }
            }
        }
        let d = depth[frontier[0] as usize] + 1;
        frontier.clear();
        for (w, p) in next {
            depth[w as usize] = d;
            parent[w as usize] = Some(p);
            frontier.push(w);
        }
    }
    (depth, parent)
}

/// Largest hop distance from `v`. Unreachable nodes are an error.
pub fn eccentricity(g: &GridGraph, v: NodeId) -> Result<u32> {
    let field = bfs_distances(g, v, None)?;
    if !field.all_reachable() {
        return Err(Error::invalid("graph", "graph is not connected"));
    }
    Ok(field.max_finite())
}

pub fn diameter(g: &GridGraph) -> Result<u32> {
    let mut best = 0;
    for v in g.nodes() {
        best = best.max(eccentricity(g, v)?);
    }
    Ok(best)
}

pub fn radius(g: &GridGraph) -> Result<u32> {
    let mut best = u32::MAX;
    for v in g.nodes() {
        best = best.min(eccentricity(g, v)?);
    }
    Ok(best)
}

/// All-pairs hop distances by repeated BFS, indexed `[u][v]` by node index.
pub fn all_pairs(g: &GridGraph) -> Vec<Vec<u32>> {
    g.nodes()
        .map(|v| {
            let f = bfs_distances(g, v, None).expect("source is inside the grid");
            f.dist
                .iter()
                .map(|d| d.finite().unwrap_or(u32::MAX))
                .collect()
        })
        .collect()
}
