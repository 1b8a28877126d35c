use std::collections::BTreeSet;

use gridfold_core::engine::{self, Contention, EngineConfig};
use gridfold_core::grid::{self, augment_smallworld, build_grid, Distance, GridGraph};
use gridfold_core::latency::{GridLatencyParams, RatioModel, Trend};
use gridfold_core::monoid::{self, catalog, FoldTree};
use gridfold_core::percolation::{decompose_clusters, FailureField};
use gridfold_core::rng::{self, Sequential};
use gridfold_core::routing::{self, EdgeLoadMap};
use gridfold_core::transport::{self, DiscreteMeasure, GraphMetric, Metric, SteinerMode};
use gridfold_core::variance::{self, ActivationField};
use gridfold_core::NodeId;
use proptest::prelude::*;
use rand::seq::index::sample;

fn graph(side: u32, k: u32, seed: u64) -> GridGraph {
    let g = build_grid(side).unwrap();
    if k == 0 {
        g
    } else {
        augment_smallworld(&g, k, seed).unwrap()
    }
}

fn measure(g: &GridGraph, n: usize, seed: u64) -> DiscreteMeasure {
    let mut r = rng::seeded(seed);
    let nodes: Vec<NodeId> = sample(&mut r, g.node_count(), n.min(g.node_count()))
        .into_iter()
        .map(|i| g.node(i as u32))
        .collect();
    let sink = g.node((seed % g.node_count() as u64) as u32);
    DiscreteMeasure::uniform(&nodes, sink).unwrap()
}

#[test]
fn bfs_is_manhattan_on_bare_grids() {
    for side in 1..=8 {
        let g = build_grid(side).unwrap();
        for s in g.nodes() {
            let f = grid::bfs_distances(&g, s, None).unwrap();
            for (v, d) in f.iter() {
                assert_eq!(d, Distance::Finite(grid::manhattan(s, v)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bfs_distances_are_lipschitz(side in 2u32..10, k in 0u32..3, seed: u64) {
        let g = graph(side, k, seed);
        let s = g.node((seed % g.node_count() as u64) as u32);
        let f = grid::bfs_distances(&g, s, None).unwrap();
        prop_assert_eq!(f.get(s), Distance::Finite(0));
        for v in g.nodes() {
            for w in g.neighbors(v) {
                let (a, b) = (f.get(v).finite().unwrap(), f.get(w).finite().unwrap());
                prop_assert!(a.abs_diff(b) <= 1);
            }
        }
    }

    #[test]
    fn radius_and_diameter_are_within_a_factor_two(side in 1u32..10, k in 0u32..3, seed: u64) {
        let g = graph(side, k, seed);
        let rad = grid::radius(&g).unwrap();
        let diam = grid::diameter(&g).unwrap();
        prop_assert!(rad <= diam && diam <= 2 * rad);
    }

    #[test]
    fn shortcuts_never_lengthen_distances(side in 2u32..9, k in 1u32..3, seed: u64) {
        let bare = build_grid(side).unwrap();
        let a = augment_smallworld(&bare, k, seed).unwrap();
        prop_assert_eq!(&a, &augment_smallworld(&bare, k, seed).unwrap());
        let with = grid::all_pairs(&a);
        let without = grid::all_pairs(&bare);
        for (r1, r2) in with.iter().zip(&without) {
            for (d1, d2) in r1.iter().zip(r2) {
                prop_assert!(d1 <= d2);
            }
        }
        for &(u, v) in a.shortcuts() {
            prop_assert!(a.has_edge(u, v) && a.has_edge(v, u));
        }
    }

    #[test]
    fn radius_dominates_w1(side in 2u32..9, k in 0u32..2, n in 1usize..8, seed: u64) {
        let g = graph(side, k, seed);
        let m = measure(&g, n, seed);
        let rep = transport::bounds_report(&m, &g, 1.0, 1.0, SteinerMode::Exact).unwrap();
        prop_assert!(rep.r_mu as f64 >= rep.w1 - 1e-12);
        prop_assert!(rep.steiner >= rep.r_mu);
        let f = grid::bfs_distances(&g, m.sink(), None).unwrap();
        let dists: BTreeSet<u32> = m.support().map(|v| f.get(v).finite().unwrap()).collect();
        let same_sphere = dists.len() == 1;
        prop_assert_eq!(same_sphere, (rep.r_mu as f64 - rep.w1).abs() < 1e-12);
    }

    #[test]
    fn steiner_lies_between_diameter_and_mst(side in 2u32..7, k in 0u32..2, n in 1usize..7, seed: u64) {
        let g = graph(side, k, seed);
        let m = measure(&g, n, seed);
        let terminals: Vec<NodeId> = m.support().collect();
        let st = transport::steiner_cost(&g, &terminals, SteinerMode::Exact).unwrap();
        let metric = GraphMetric::new(&g);
        let spread = terminals
            .iter()
            .flat_map(|&a| terminals.iter().map(move |&b| (a, b)))
            .map(|(a, b)| metric.distance(a, b))
            .max()
            .unwrap();
        let exact = st.exact.unwrap();
        prop_assert!(spread <= exact && exact <= st.mst_upper);
    }

    #[test]
    fn xy_routes_are_monotone_chains(side in 1u32..12, a: u32, b: u32) {
        let g = build_grid(side).unwrap();
        let s = g.node(a % g.node_count() as u32);
        let d = g.node(b % g.node_count() as u32);
        let r = routing::xy_route(&g, s, d).unwrap();
        prop_assert_eq!(r.len() as u32, grid::manhattan(s, d));
        prop_assert_eq!(r.source(), s);
        prop_assert_eq!(r.dest(), d);
        for w in r.nodes().windows(2) {
            prop_assert!(g.is_grid_edge(w[0], w[1]));
        }
    }

    #[test]
    fn edge_loads_sum_to_route_lengths(side in 2u32..10, seed: u64) {
        let g = build_grid(side).unwrap();
        let mut r = rng::seeded(seed);
        let routes: Vec<_> = (0..20)
            .map(|_| {
                let pick = sample(&mut r, g.node_count(), 2);
                routing::xy_route(&g, g.node(pick.index(0) as u32), g.node(pick.index(1) as u32)).unwrap()
            })
            .collect();
        let (loads, max) = routing::edge_congestion(&routes);
        let total: usize = routes.iter().map(|r| r.len()).sum();
        prop_assert_eq!(loads.total(), total as u64);
        prop_assert_eq!(max, loads.iter().map(|(_, l)| l).max().unwrap_or(0));
        let mut merged = EdgeLoadMap::default();
        for half in routes.chunks(7).rev() {
            let (part, _) = routing::edge_congestion(half);
            merged.merge(&part);
        }
        prop_assert_eq!(merged, loads);
    }

    #[test]
    fn deflection_avoids_failures(side in 3u32..10, delta in 0.0f64..0.3, seed: u64) {
        let g = build_grid(side).unwrap();
        let f = FailureField::sample(side, delta, seed).unwrap();
        let healthy: Vec<NodeId> = g.nodes().filter(|&v| !f.is_failed(v)).collect();
        prop_assume!(healthy.len() >= 2);
        let (s, d) = (healthy[0], healthy[healthy.len() - 1]);
        let blocked = |v: NodeId| f.is_failed(v);
        let bfs = grid::bfs_distances(&g, s, Some(&blocked)).unwrap();
        if let Ok((route, rec)) = routing::deflect_route(&g, s, d, &f) {
            prop_assert!(route.nodes().iter().all(|&v| !f.is_failed(v)));
            prop_assert!(rec.actual_len >= rec.nominal_len);
            prop_assert!(rec.actual_len >= bfs.get(d).finite().unwrap());
            prop_assert!(rec.clusters_hit <= rec.failed_on_route);
            prop_assert_eq!(route.len() as u32, rec.actual_len);
        }
    }

    #[test]
    fn clusters_partition_the_failed_set(side in 1u32..16, delta in 0.0f64..0.7, seed: u64) {
        let f = FailureField::sample(side, delta, seed).unwrap();
        let dec = decompose_clusters(&f);
        let mut owner = std::collections::BTreeMap::new();
        for (i, c) in dec.clusters.iter().enumerate() {
            prop_assert_eq!(c.size as usize, c.members.len());
            prop_assert!(c.perimeter <= 4 * c.size);
            for &v in &c.members {
                prop_assert!(f.is_failed(v));
                prop_assert!(owner.insert(v, i).is_none());
            }
        }
        prop_assert_eq!(owner.len(), f.failed_count());
        let g = build_grid(side).unwrap();
        for (&v, &i) in &owner {
            for w in g.grid_neighbors(v) {
                if let Some(&j) = owner.get(&w) {
                    prop_assert_eq!(i, j);
                }
            }
        }
    }

    #[test]
    fn capacity_one_respects_bounds(side in 2u32..9, k in 0u32..2, n in 1usize..10, t_edge in 1u64..3, seed: u64) {
        let g = graph(side, k, seed);
        let m = measure(&g, n, seed);
        let cfg = EngineConfig { contention: Contention::CapacityOne, t_edge, ..Default::default() };
        let a = engine::measure_attainment(&m, &g, &cfg).unwrap();
        prop_assert!(a.run.completion_cycles >= a.bounds.r_mu as u64 * t_edge);
        prop_assert!(a.run.transport_work >= a.bounds.w1 - 1e-12);
        for round in &a.run.state.edge_occupancy {
            let distinct: BTreeSet<_> = round.iter().collect();
            prop_assert_eq!(distinct.len(), round.len());
            for &(u, v) in round {
                prop_assert!(g.has_edge(u, v));
            }
        }
        prop_assert_eq!(engine::run_parallel_shortest(&m, &g, &cfg).unwrap(), a.run);
    }

    #[test]
    fn treefold_is_deterministic_and_bounded(side in 1u32..8, k in 0u32..2, t_merge in 0u64..3, local in 0u64..10, seed: u64) {
        let g = graph(side, k, seed);
        let mut r = rng::seeded(seed);
        let sum = catalog::sum_i64();
        let values: Vec<i64> = (0..g.node_count()).map(|_| (sum.sample)(&mut r)).collect();
        let cfg = EngineConfig {
            t_merge,
            t_local: (0..g.node_count() as u64).map(|i| (i * 7 + seed) % (local + 1)).collect(),
            law_samples: 32,
            ..Default::default()
        };
        let origin = g.node((seed % g.node_count() as u64) as u32);
        let a = engine::run_treefold(&g, origin, &sum, &values, &cfg, Some(seed)).unwrap();
        let b = engine::run_treefold(&g, origin, &sum, &values, &cfg, Some(seed)).unwrap();
        prop_assert_eq!(&a.merge_log, &b.merge_log);
        prop_assert_eq!(a.value, values.iter().fold(0i64, |x, y| x.wrapping_add(*y)));
        let diam = grid::diameter(&g).unwrap() as u64;
        let bound = (diam * (cfg.t_edge + t_merge) + cfg.max_local()) as f64 * cfg.t_cycle;
        prop_assert!(a.wallclock_seconds <= bound);
    }

    #[test]
    fn fold_trees_keep_their_leaves(n in 1usize..40, seed: u64) {
        let leaves: Vec<u32> = (0..n as u32).collect();
        let mut r = rng::seeded(seed);
        let t = FoldTree::random(leaves.clone(), &mut r);
        let mut order = t.leaf_order();
        order.sort_unstable();
        prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(t.internal_nodes(), n - 1);
        let b = FoldTree::balanced(leaves);
        prop_assert_eq!(b.depth(), (n as f64).log2().ceil() as usize);
        prop_assert_eq!(b.internal_nodes(), n - 1);
    }

    #[test]
    fn law_passing_folds_agree(seed: u64, n in 0usize..24) {
        let m = catalog::xor_u64();
        let mut r = rng::seeded(seed);
        let leaves: Vec<u64> = (0..n).map(|_| (m.sample)(&mut r)).collect();
        let expect = leaves.iter().fold(0, |a, b| a ^ b);
        let t = FoldTree::random(leaves.clone(), &mut r);
        prop_assert_eq!(monoid::fold(&m, &t), expect);
        prop_assert_eq!(monoid::fold(&m, &FoldTree::balanced(leaves)), expect);
    }

    #[test]
    fn trunk_sum_equals_source_sum(n in 2u32..12, f in 0.05f64..0.95, seed: u64) {
        let field = ActivationField::sample(n, f, seed).unwrap();
        prop_assert_eq!(variance::y_functional(&field), variance::y_from_trunk_loads(&field).unwrap());
    }

    #[test]
    fn exact_mean_matches_closed_form(n in 2u32..200, f in 0.01f64..0.99) {
        let (mean, var) = variance::exact_moments(n, f).unwrap();
        let nf = n as f64;
        prop_assert!((mean - f * nf * nf * (nf - 1.0) / 2.0).abs() <= 1e-9 * mean.max(1.0));
        let v = f * (1.0 - f) * nf * (nf - 1.0) * nf * (2.0 * nf - 1.0) / 6.0;
        prop_assert!((var - v).abs() <= 1e-9 * v.max(1.0));
    }

    #[test]
    fn monte_carlo_ignores_unit_layout(n in 2u32..8, seed: u64) {
        let a = variance::monte_carlo(n, 0.3, 5000, seed, &Sequential).unwrap();
        let b = variance::monte_carlo(n, 0.3, 5000, seed, &Sequential).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.count, 5000);
    }

    #[test]
    fn ratio_trend_follows_the_sign_test(c1 in 0.0f64..1.0, c2 in 0.0f64..1.0, o in 0.0f64..1.0, m in 1e-6f64..1.0) {
        let model = RatioModel::new(c1, c2, o, m).unwrap();
        let lhs = o * c1;
        let rhs = m * c2;
        let want = if lhs > rhs { Trend::Increasing } else if lhs < rhs { Trend::Decreasing } else { Trend::Constant };
        prop_assert_eq!(model.trend(), want);
        let x = 3.5;
        prop_assert!((model.eval(&x) - (c2 + o * x) / (c1 + m * x)).abs() < 1e-12);
    }

    #[test]
    fn m_p_tracks_grid_size(root in 1u64..200, c_w in 1e-12f64..1e-6, t_edge in 1u64..5) {
        let gp = GridLatencyParams { c1: 1e-6, c_w, t_edge: t_edge as f64, merge_coeff: 0.0, t_merge: 0.0, p: root * root };
        let want = c_w * root as f64 * t_edge as f64;
        prop_assert!((gp.m_p() - want).abs() <= 1e-12 * want);
        let exact = num_traits::ToPrimitive::to_f64(&gp.m_p_exact().unwrap()).unwrap();
        prop_assert!((exact - want).abs() <= 1e-12 * want);
    }
}
