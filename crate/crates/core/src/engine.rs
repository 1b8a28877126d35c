//! Synchronous cycle-level execution of payload schedules.
//!
//! Time advances in hop-rounds of `t_edge` cycles. In
//! [`Contention::NonCongesting`] mode every payload advances each round; in
//! [`Contention::CapacityOne`] mode each directed edge carries at most one
//! payload per round and waiting payloads are served FIFO, ties going to the
//! lower source index.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use rand::seq::SliceRandom;

use crate::grid::{self, GridGraph, NodeId};
use crate::monoid::{self, MonoidSpec};
use crate::routing::{self, Edge};
use crate::transport::{self, BoundsReport, DiscreteMeasure, SteinerMode, STEINER_EXACT_MAX_TERMINALS};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Contention {
    #[default]
    NonCongesting,
    CapacityOne,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EngineConfig {
    pub contention: Contention,
    pub t_edge: u64,
    pub t_merge: u64,
    /// Seconds per cycle.
    pub t_cycle: f64,
    pub k_arch: u64,
    /// Local compute cycles per node index before it can forward; empty means all zero.
    pub t_local: Vec<u64>,
    /// Samples for the law check that precedes every tree fold.
    pub law_samples: u64,
    pub record_trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            contention: Contention::NonCongesting,
            t_edge: 1,
            t_merge: 0,
            t_cycle: 1e-9,
            k_arch: 0,
            t_local: Vec::new(),
            law_samples: 256,
            record_trace: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_cycle > 0.0 && self.t_cycle.is_finite()) {
            return Err(Error::invalid("t_cycle", "must be positive and finite"));
        }
        Ok(())
    }

    fn local(&self, index: usize) -> u64 {
        self.t_local.get(index).copied().unwrap_or(0)
    }

    pub fn max_local(&self) -> u64 {
        self.t_local.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Move {
    pub payload: u32,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MergeEvent {
    pub cycle: u64,
    pub node: NodeId,
    pub payloads: Vec<u32>,
}

/// One trace line: everything that started or finished at `cycle`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleRecord {
    pub cycle: u64,
    pub moves: Vec<Move>,
    pub merges: Vec<MergeEvent>,
}

/// Final engine state after a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EngineState {
    pub cycle: u64,
    pub payload_positions: Vec<NodeId>,
    /// Directed edges in use, one entry per hop-round.
    pub edge_occupancy: Vec<Vec<Edge>>,
    pub merge_log: Vec<MergeEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Completion time `D` in cycles.
    pub completion_cycles: u64,
    pub wallclock_seconds: f64,
    /// Path of each payload, in atom order.
    pub routes: Vec<Vec<NodeId>>,
    /// Hops taken by each payload, in atom order.
    pub per_payload_hops: Vec<u32>,
    /// `Σ a_i ℓ_i`.
    pub transport_work: f64,
    pub rounds: u64,
    pub state: EngineState,
    pub trace: Option<Vec<CycleRecord>>,
}

/// Shortest paths toward the sink: dimension-order on a bare grid, BFS
/// parent pointers when shortcuts are present.
fn shortest_paths(m: &DiscreteMeasure, g: &GridGraph) -> Result<Vec<Vec<NodeId>>> {
    let sink = m.sink();
    if g.shortcuts().is_empty() {
        return m
            .atoms()
            .iter()
            .map(|&(v, _)| Ok(routing::xy_route(g, v, sink)?.nodes().to_vec()))
            .collect();
    }
    let (depth, parent) = grid::bfs_tree(g, sink, None);
    m.atoms()
        .iter()
        .map(|&(v, _)| {
            let mut path = vec![v];
            let mut cur = g.index(v) as usize;
            if depth[cur] == u32::MAX {
                return Err(Error::NoRoute { from: v, to: sink });
            }
            while let Some(p) = parent[cur] {
                path.push(g.node(p));
                cur = p as usize;
            }
            Ok(path)
        })
        .collect()
}

/// Every atom sends its payload to the sink along its own shortest path.
pub fn run_parallel_shortest(m: &DiscreteMeasure, g: &GridGraph, cfg: &EngineConfig) -> Result<RunResult> {
    cfg.validate()?;
    m.check_within(g)?;
    let paths = shortest_paths(m, g)?;
    let n = paths.len();
    let mut hop = vec![0usize; n];
    // Round in which each payload reached its current node.
    let mut arrived = vec![0u64; n];
    let mut occupancy = Vec::new();
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut round = 0u64;
    loop {
        let waiting: Vec<usize> = (0..n).filter(|&i| hop[i] + 1 < paths[i].len()).collect();
        if waiting.is_empty() {
            break;
        }
        let movers: Vec<usize> = match cfg.contention {
            Contention::NonCongesting => waiting,
            Contention::CapacityOne => {
                let mut winner: BTreeMap<Edge, usize> = BTreeMap::new();
                for i in waiting {
                    let e = (paths[i][hop[i]], paths[i][hop[i] + 1]);
                    let cur = winner.entry(e).or_insert(i);
                    if (arrived[i], i) < (arrived[*cur], *cur) {
                        *cur = i;
                    }
                }
                let mut w: Vec<usize> = winner.into_values().collect();
                w.sort_unstable();
                w
            }
        };
        let edges: Vec<Edge> = movers.iter().map(|&i| (paths[i][hop[i]], paths[i][hop[i] + 1])).collect();
        if cfg.contention == Contention::CapacityOne {
            let mut sorted = edges.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), edges.len(), "capacity-one edge carried two payloads");
        }
        if let Some(t) = trace.as_mut() {
            t.push(CycleRecord {
                cycle: round * cfg.t_edge,
                moves: movers
                    .iter()
                    .zip(&edges)
                    .map(|(&i, &(from, to))| Move {
                        payload: i as u32,
                        from,
                        to,
                    })
                    .collect(),
                merges: Vec::new(),
            });
        }
        round += 1;
        for &i in &movers {
            hop[i] += 1;
            arrived[i] = round;
        }
        occupancy.push(edges);
    }
    let per_payload_hops: Vec<u32> = paths.iter().map(|p| (p.len() - 1) as u32).collect();
    let transport_work = m
        .atoms()
        .iter()
        .zip(&per_payload_hops)
        .map(|(&(_, a), &l)| a * l as f64)
        .sum();
    let completion_cycles = round * cfg.t_edge;
    Ok(RunResult {
        completion_cycles,
        wallclock_seconds: (completion_cycles + cfg.k_arch) as f64 * cfg.t_cycle,
        per_payload_hops,
        transport_work,
        rounds: round,
        state: EngineState {
            cycle: completion_cycles,
            payload_positions: paths.iter().map(|p| *p.last().unwrap()).collect(),
            edge_occupancy: occupancy,
            merge_log: Vec::new(),
        },
        routes: paths,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreefoldResult<T> {
    pub value: T,
    /// Wavefront depth, equal to the eccentricity of the origin.
    pub depth: u32,
    pub completion_cycles: u64,
    pub wallclock_seconds: f64,
    /// `(diam·(t_edge+t_merge) + max_local)·t_cycle`.
    pub wallclock_bound_seconds: f64,
    /// Tree edges whose subtree holds at least one non-identity value.
    pub used_edges: usize,
    pub merge_log: Vec<MergeEvent>,
    pub trace: Option<Vec<CycleRecord>>,
}

/// Reduces one value per node (row-major order) toward `origin` along a
/// breadth-first wavefront tree.
///
/// A node forwards once its local work is done and all children have
/// delivered: `f(v) = max(t_local(v), max_c f(c) + t_edge + t_merge)`.
/// `tie_seed` randomizes both the choice among equal-depth parents and the
/// order in which children are merged.
pub fn run_treefold<T: Clone + PartialEq + Debug>(
    g: &GridGraph,
    origin: NodeId,
    m: &MonoidSpec<T>,
    values: &[T],
    cfg: &EngineConfig,
    tie_seed: Option<u64>,
) -> Result<TreefoldResult<T>> {
    cfg.validate()?;
    if !g.contains(origin) {
        return Err(Error::invalid("origin", "outside the grid"));
    }
    let n = g.node_count();
    if values.len() != n {
        return Err(Error::invalid("values", format!("expected {n} values, got {}", values.len())));
    }
    monoid::require_laws(m, cfg.law_samples, tie_seed.unwrap_or(0))?;

    let keys = tie_seed.map(|s| {
        let mut r = rng::seeded(s);
        let mut k: Vec<u64> = (0..n as u64).collect();
        k.shuffle(&mut r);
        k
    });
    let (depth, parent) = grid::bfs_tree(g, origin, keys.as_deref());
    if depth.contains(&u32::MAX) {
        return Err(Error::invalid("graph", "not connected"));
    }
    let max_depth = depth.iter().copied().max().unwrap_or(0);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p as usize].push(v);
        }
    }
    if let Some(k) = &keys {
        for c in &mut children {
            c.sort_by_key(|&v| k[v]);
        }
    }

    let mut finish = vec![0u64; n];
    let mut acc: Vec<T> = values.to_vec();
    let mut active: Vec<bool> = values.iter().map(|v| *v != m.identity).collect();
    let mut merges: Vec<MergeEvent> = Vec::new();
    let mut moves: BTreeMap<u64, Vec<Move>> = BTreeMap::new();
    let hop = cfg.t_edge + cfg.t_merge;
    // Deepest level first so every child is final before its parent.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (core::cmp::Reverse(depth[v]), v));
    for &v in &order {
        let mut f = cfg.local(v);
        let mut by_arrival: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for &c in &children[v] {
            let ready = finish[c] + hop;
            f = f.max(ready);
            by_arrival.entry(ready).or_default().push(c as u32);
            moves.entry(finish[c]).or_default().push(Move {
                payload: c as u32,
                from: g.node(c as u32),
                to: g.node(v as u32),
            });
            let ab = m.combine(&acc[v], &acc[c]);
            let ba = m.combine(&acc[c], &acc[v]);
            if ab != ba {
                let w = monoid::Witness::Commutativity {
                    a: acc[v].clone(),
                    b: acc[c].clone(),
                    ab,
                    ba,
                };
                return Err(Error::LawViolation(format!("{}: {}", m.name, w.describe())));
            }
            acc[v] = ab;
            active[v] |= active[c];
        }
        for (cycle, payloads) in by_arrival {
            merges.push(MergeEvent {
                cycle,
                node: g.node(v as u32),
                payloads,
            });
        }
        finish[v] = f;
    }
    merges.sort_by_key(|e| (e.cycle, g.index(e.node)));
    let used_edges = (0..n).filter(|&v| parent[v].is_some() && active[v]).count();
    let o = g.index(origin) as usize;
    let completion_cycles = finish[o];
    let diam = grid::diameter(g)? as u64;
    let trace = cfg.record_trace.then(|| {
        let mut records: BTreeMap<u64, CycleRecord> = BTreeMap::new();
        for (cycle, mv) in moves {
            records
                .entry(cycle)
                .or_insert_with(|| CycleRecord {
                    cycle,
                    moves: Vec::new(),
                    merges: Vec::new(),
                })
                .moves = mv;
        }
        for e in &merges {
            records
                .entry(e.cycle)
                .or_insert_with(|| CycleRecord {
                    cycle: e.cycle,
                    moves: Vec::new(),
                    merges: Vec::new(),
                })
                .merges
                .push(e.clone());
        }
        records.into_values().collect()
    });
    Ok(TreefoldResult {
        value: acc.swap_remove(o),
        depth: max_depth,
        completion_cycles,
        wallclock_seconds: completion_cycles as f64 * cfg.t_cycle,
        wallclock_bound_seconds: (diam * hop + cfg.max_local()) as f64 * cfg.t_cycle,
        used_edges,
        merge_log: merges,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttainmentReport {
    pub bounds: BoundsReport,
    pub run: RunResult,
    /// `transport_work / W1`; `None` when both are zero.
    pub work_ratio: Option<f64>,
    /// Work equals W1 bit for bit.
    pub work_attains_w1: bool,
    /// `D − r_μ·t_edge` in cycles.
    pub depth_slack_cycles: u64,
}

/// Runs the parallel shortest-path schedule and compares it with the bounds.
pub fn measure_attainment(m: &DiscreteMeasure, g: &GridGraph, cfg: &EngineConfig) -> Result<AttainmentReport> {
    let run = run_parallel_shortest(m, g, cfg)?;
    let mode = if m.atoms().len() < STEINER_EXACT_MAX_TERMINALS {
        SteinerMode::Exact
    } else {
        SteinerMode::HeuristicOnly
    };
    let bounds = transport::bounds_report(m, g, cfg.t_edge as f64, cfg.t_cycle, mode)?;
    let work_ratio = (bounds.w1 > 0.0 || run.transport_work > 0.0).then(|| run.transport_work / bounds.w1);
    let floor = bounds.r_mu as u64 * cfg.t_edge;
    Ok(AttainmentReport {
        work_attains_w1: run.transport_work == bounds.w1,
        depth_slack_cycles: run.completion_cycles.saturating_sub(floor),
        work_ratio,
        bounds,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::monoid::catalog;

    fn example() -> (GridGraph, DiscreteMeasure) {
        let g = build_grid(4).unwrap();
        let nodes = [NodeId::new(3, 3), NodeId::new(2, 3), NodeId::new(3, 1)];
        let m = DiscreteMeasure::uniform(&nodes, NodeId::new(0, 0)).unwrap();
        (g, m)
    }

    #[test]
    fn example_completes_in_r_mu_rounds() {
        let (g, m) = example();
        for t_edge in [1, 3] {
            let cfg = EngineConfig {
                t_edge,
                k_arch: 5,
                t_cycle: 2.0,
                ..Default::default()
            };
            let r = run_parallel_shortest(&m, &g, &cfg).unwrap();
            assert_eq!(r.completion_cycles, 6 * t_edge);
            assert_eq!(r.wallclock_seconds, (6 * t_edge + 5) as f64 * 2.0);
            assert!(libm::fabs(r.transport_work - 5.0) < 1e-12);
            assert_eq!(r.per_payload_hops, vec![6, 5, 4]);
        }
    }

    #[test]
    fn adjacent_atom_takes_one_cycle() {
        let g = build_grid(3).unwrap();
        let m = DiscreteMeasure::new(vec![(NodeId::new(1, 0), 1.0)], NodeId::new(0, 0)).unwrap();
        let r = run_parallel_shortest(&m, &g, &EngineConfig::default()).unwrap();
        assert_eq!(r.completion_cycles, 1);
    }

    #[test]
    fn dirac_is_empty_motion() {
        let g = build_grid(4).unwrap();
        let m = DiscreteMeasure::dirac(NodeId::new(2, 1));
        let a = measure_attainment(&m, &g, &EngineConfig::default()).unwrap();
        assert_eq!(a.run.completion_cycles, 0);
        assert_eq!(a.run.transport_work, 0.0);
        assert_eq!(a.work_ratio, None);
        assert!(a.work_attains_w1);
    }

    fn all_to_one(g: &GridGraph) -> DiscreteMeasure {
        let nodes: Vec<NodeId> = g.nodes().filter(|v| *v != NodeId::new(0, 0)).collect();
        DiscreteMeasure::uniform(&nodes, NodeId::new(0, 0)).unwrap()
    }

    #[test]
    fn capacity_one_contends_on_trunk() {
        let g = build_grid(4).unwrap();
        let m = all_to_one(&g);
        let free = run_parallel_shortest(&m, &g, &EngineConfig::default()).unwrap();
        let cfg = EngineConfig {
            contention: Contention::CapacityOne,
            record_trace: true,
            ..Default::default()
        };
        let busy = run_parallel_shortest(&m, &g, &cfg).unwrap();
        assert_eq!(free.completion_cycles, 6);
        assert!(busy.completion_cycles > free.completion_cycles);
        assert_eq!(busy.transport_work, free.transport_work);
        for round in &busy.state.edge_occupancy {
            let mut e = round.clone();
            e.sort_unstable();
            e.dedup();
            assert_eq!(e.len(), round.len());
        }
        // The sink has two incoming edges, so 15 payloads need at least 8 rounds.
        assert!(busy.completion_cycles >= 8);
        let a = measure_attainment(&m, &g, &cfg).unwrap();
        assert!(a.work_attains_w1);
        assert!(a.depth_slack_cycles > 0);
        let again = run_parallel_shortest(&m, &g, &cfg).unwrap();
        assert_eq!(again.trace, busy.trace);
    }

    #[test]
    fn shortcut_graph_uses_shortest_paths() {
        let g = grid::augment_smallworld(&build_grid(6).unwrap(), 1, 4).unwrap();
        let m = all_to_one(&g);
        let a = measure_attainment(&m, &g, &EngineConfig::default()).unwrap();
        assert!(a.work_attains_w1);
        assert_eq!(a.run.completion_cycles, a.bounds.r_mu as u64);
    }

    #[test]
    fn treefold_sum_on_3x3() {
        let g = build_grid(3).unwrap();
        let values: Vec<i64> = (1..=9).collect();
        let cfg = EngineConfig {
            t_edge: 2,
            t_merge: 1,
            record_trace: true,
            ..Default::default()
        };
        let r = run_treefold(&g, NodeId::new(1, 1), &catalog::sum_i64(), &values, &cfg, None).unwrap();
        assert_eq!(r.value, 45);
        assert_eq!(r.depth, 2);
        assert_eq!(r.completion_cycles, 6);
        assert_eq!(r.used_edges, 8);
        assert!(r.wallclock_seconds <= r.wallclock_bound_seconds);
        for seed in 0..20 {
            let s = run_treefold(&g, NodeId::new(1, 1), &catalog::sum_i64(), &values, &cfg, Some(seed)).unwrap();
            assert_eq!(s.value, 45);
        }
    }

    #[test]
    fn treefold_single_node_and_max() {
        let g = build_grid(1).unwrap();
        let r = run_treefold(&g, NodeId::new(0, 0), &catalog::sum_i64(), &[7], &EngineConfig::default(), None).unwrap();
        assert_eq!((r.value, r.depth, r.used_edges), (7, 0, 0));
        let g = build_grid(4).unwrap();
        for seed in 0..5 {
            let r = run_treefold(&g, NodeId::new(3, 0), &catalog::max_i64(), &[9; 16], &EngineConfig::default(), Some(seed)).unwrap();
            assert_eq!(r.value, 9);
        }
    }

    #[test]
    fn treefold_rejects_unlawful_merge() {
        let g = build_grid(2).unwrap();
        let err = run_treefold(&g, NodeId::new(0, 0), &catalog::difference_i64(), &[1, 2, 3, 4], &EngineConfig::default(), None);
        assert!(matches!(err, Err(Error::LawViolation(_))));
    }

    #[test]
    fn treefold_counts_only_active_edges() {
        let g = build_grid(4).unwrap();
        let mut values = vec![0i64; 16];
        values[g.index(NodeId::new(3, 0)) as usize] = 4;
        let r = run_treefold(&g, NodeId::new(0, 0), &catalog::sum_i64(), &values, &EngineConfig::default(), Some(1)).unwrap();
        assert_eq!(r.value, 4);
        assert_eq!(r.used_edges, 3);
    }

    #[test]
    fn local_work_delays_completion() {
        let g = build_grid(3).unwrap();
        let mut local = vec![0u64; 9];
        local[0] = 50;
        let cfg = EngineConfig {
            t_local: local,
            ..Default::default()
        };
        let r = run_treefold(&g, NodeId::new(2, 2), &catalog::sum_i64(), &[1; 9], &cfg, None).unwrap();
        assert_eq!(r.completion_cycles, 54);
        assert!(r.wallclock_seconds <= r.wallclock_bound_seconds);
    }
}
