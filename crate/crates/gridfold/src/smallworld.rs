//! Typical distances on grids with random long-range shortcuts.

use gridfold_core::grid::{self, augment_smallworld, build_grid, Distance, GridGraph};
use gridfold_core::rng::{self, UnitRunner};
use gridfold_core::stats;
use rand::Rng as _;
use serde::Serialize;

use crate::RunError;

/// Up to this side the mean is taken over all ordered pairs; above it over
/// sampled pairs.
pub const EXACT_MAX_SIDE: u32 = 32;

/// Largest ratio between extremes of `mean/log₂P` counted as one band.
pub const LOG_BAND_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallWorldRow {
    #[serde(rename = "L")]
    pub side: u32,
    #[serde(rename = "P")]
    pub p: u64,
    pub k: u32,
    /// Ordered pairs averaged over.
    pub pairs: u64,
    pub exact: bool,
    pub mean_dist: f64,
    #[serde(rename = "mean_dist_over_log2P")]
    pub over_log2p: f64,
    #[serde(rename = "mean_dist_over_sqrtP")]
    pub over_sqrtp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallWorldResult {
    pub rows: Vec<SmallWorldRow>,
    pub sqrt_strictly_decreasing: bool,
    /// `max/min` of the `mean/log₂P` column.
    pub log_band_ratio: f64,
    /// Relative spread of the `mean/√P` column.
    pub sqrt_spread: f64,
    /// Decreasing `mean/√P` with `mean/log₂P` inside a factor-2 band.
    pub collapse: bool,
}

fn unreachable_err() -> RunError {
    RunError::Statistical("graph is disconnected".into())
}

/// Mean hop distance over ordered pairs of distinct nodes; exact for
/// small sides, sampled otherwise. Returns the mean, the pair count, and
/// whether the mean is exact.
pub fn mean_distance<R: UnitRunner>(g: &GridGraph, pairs: u64, seed: u64, runner: &R) -> Result<(f64, u64, bool), RunError> {
    let p = g.node_count() as u64;
    if p < 2 {
        return Err(RunError::invalid("L", "need at least two nodes"));
    }
    if g.side() <= EXACT_MAX_SIDE {
        let sums = runner.run_units(p, |s| {
            let f = grid::bfs_distances(g, g.node(s as u32), None)?;
            let mut total = 0u64;
            for (_, d) in f.iter() {
                match d {
                    Distance::Finite(d) => total += d as u64,
                    Distance::Unreachable => return Ok(None),
                }
            }
            Ok::<_, gridfold_core::Error>(Some(total))
        });
        let mut total = 0u64;
        for s in sums {
            total += s?.ok_or_else(unreachable_err)?;
        }
        let count = p * (p - 1);
        return Ok((total as f64 / count as f64, count, true));
    }
    let base = (g.side() as u64) << 40;
    let dists = runner.run_units(pairs, |u| {
        let mut r = rng::substream(seed, base + u);
        let s = r.gen_range(0..p as u32);
        let mut d = r.gen_range(0..p as u32 - 1);
        if d >= s {
            d += 1;
        }
        let f = grid::bfs_distances(g, g.node(s), None)?;
        Ok::<_, gridfold_core::Error>(f.get(g.node(d)).finite())
    });
    let mut total = 0u64;
    for d in dists {
        total += d?.ok_or_else(unreachable_err)? as u64;
    }
    Ok((total as f64 / pairs as f64, pairs, false))
}

/// The graph used for side `l`: the bare grid when `k = 0`.
pub fn smallworld_graph(l: u32, k: u32, seed: u64) -> Result<GridGraph, RunError> {
    let g = build_grid(l)?;
    if k == 0 {
        return Ok(g);
    }
    Ok(augment_smallworld(&g, k, seed)?)
}

pub fn smallworld_experiment<R: UnitRunner>(
    sides: &[u32],
    k: u32,
    pairs: u64,
    seed: u64,
    runner: &R,
) -> Result<SmallWorldResult, RunError> {
    if sides.is_empty() {
        return Err(RunError::invalid("L_list", "must not be empty"));
    }
    if pairs == 0 {
        return Err(RunError::invalid("pairs", "must be positive"));
    }
    let mut rows = Vec::with_capacity(sides.len());
    for &l in sides {
        let g = smallworld_graph(l, k, seed)?;
        let (mean, count, exact) = mean_distance(&g, pairs, seed, runner)?;
        let p = g.node_count() as u64;
        rows.push(SmallWorldRow {
            side: l,
            p,
            k,
            pairs: count,
            exact,
            mean_dist: mean,
            over_log2p: mean / (p as f64).log2(),
            over_sqrtp: mean / (p as f64).sqrt(),
        });
    }
    let sq: Vec<f64> = rows.iter().map(|r| r.over_sqrtp).collect();
    let lg: Vec<f64> = rows.iter().map(|r| r.over_log2p).collect();
    let max = lg.iter().copied().fold(f64::MIN, f64::max);
    let min = lg.iter().copied().fold(f64::MAX, f64::min);
    let sqrt_strictly_decreasing = stats::is_strictly_decreasing(&sq);
    let log_band_ratio = max / min;
    Ok(SmallWorldResult {
        sqrt_spread: stats::relative_spread(&sq),
        collapse: sqrt_strictly_decreasing && log_band_ratio <= LOG_BAND_FACTOR,
        sqrt_strictly_decreasing,
        log_band_ratio,
        rows,
    })
}
