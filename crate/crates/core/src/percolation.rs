//! Site-failure fields, cluster decomposition, tail fits, and the detour
//! experiment.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::grid::{build_grid, GridGraph, NodeId};
use crate::rng::{self, UnitRunner};
use crate::routing::deflect_route;
use crate::stats::{self, linear_fit, slope_through_origin, IntMoments, LinearFit};
use crate::{Error, Result};

/// Numerical estimate of the square-lattice site-percolation threshold. Used
/// only to flag supercritical requests; no closed form is known.
pub const P_C_SITE_ESTIMATE: f64 = 0.593;

/// Independent Bernoulli(δ) node failures on an `L × L` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureField {
    side: u32,
    delta: f64,
    seed: u64,
    failed: Vec<bool>,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid("delta", format!("{delta} is outside [0, 1]")));
    }
    Ok(())
}

impl FailureField {
    pub fn sample(side: u32, delta: f64, seed: u64) -> Result<FailureField> {
        let mut field = Self::sample_with(side, delta, &mut rng::seeded(seed))?;
        field.seed = seed;
        Ok(field)
    }

    /// Draws from an existing generator; `seed()` reports 0.
    pub fn sample_with(side: u32, delta: f64, rng: &mut rng::Rng) -> Result<FailureField> {
        check_delta(delta)?;
        if side == 0 {
            return Err(Error::invalid("L", "grid side must be at least 1"));
        }
        let p = side as usize * side as usize;
        let failed = (0..p).map(|_| rng.gen::<f64>() < delta).collect();
        Ok(FailureField {
            side,
            delta,
            seed: 0,
            failed,
        })
    }

    /// A field with exactly the given failed nodes.
    pub fn from_failed<I: IntoIterator<Item = NodeId>>(side: u32, failed: I) -> Result<FailureField> {
        if side == 0 {
            return Err(Error::invalid("L", "grid side must be at least 1"));
        }
        let mut mask = vec![false; side as usize * side as usize];
        for v in failed {
            if v.x >= side || v.y >= side {
                return Err(Error::invalid("failed", "node outside the grid"));
            }
            mask[(v.y * side + v.x) as usize] = true;
        }
        Ok(FailureField {
            side,
            delta: f64::NAN,
            seed: 0,
            failed: mask,
        })
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_subcritical(&self) -> bool {
        self.delta < P_C_SITE_ESTIMATE
    }

    pub fn is_failed(&self, v: NodeId) -> bool {
        v.x < self.side && v.y < self.side && self.failed[(v.y * self.side + v.x) as usize]
    }

    pub fn failed_count(&self) -> usize {
        self.failed.iter().filter(|&&f| f).count()
    }

    pub fn failed_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        let side = self.side;
        self.failed
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(move |(i, _)| NodeId::new(i as u32 % side, i as u32 / side))
    }

    fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> {
        let side = self.side;
        let cand = [
            (v.x + 1 < side).then(|| NodeId::new(v.x + 1, v.y)),
            (v.y + 1 < side).then(|| NodeId::new(v.x, v.y + 1)),
            (v.x > 0).then(|| NodeId::new(v.x - 1, v.y)),
            (v.y > 0).then(|| NodeId::new(v.x, v.y - 1)),
        ];
        cand.into_iter().flatten()
    }

    /// Members of the 4-connected failure cluster containing `v`, sorted.
    /// Empty when `v` is healthy.
    pub fn cluster_of(&self, v: NodeId) -> Vec<NodeId> {
        if !self.is_failed(v) {
            return Vec::new();
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![v];
        seen.insert(v);
        while let Some(u) = stack.pop() {
            for w in self.neighbors(u) {
                if self.is_failed(w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Lattice edges from `members` to in-grid nodes outside the set.
    pub fn perimeter(&self, members: &[NodeId]) -> u32 {
        let set: BTreeSet<NodeId> = members.iter().copied().collect();
        members
            .iter()
            .map(|&v| self.neighbors(v).filter(|w| !set.contains(w)).count() as u32)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Sorted by `NodeId`.
    pub members: Vec<NodeId>,
    pub size: u32,
    /// Edges from the cluster to in-grid healthy nodes; off-grid edges at the
    /// boundary are not counted.
    pub perimeter: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterDecomposition {
    pub clusters: Vec<Cluster>,
}

impl ClusterDecomposition {
    pub fn size_histogram(&self) -> BTreeMap<u32, u64> {
        let mut h = BTreeMap::new();
        for c in &self.clusters {
            *h.entry(c.size).or_insert(0) += 1;
        }
        h
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], size: &mut [u32], a: u32, b: u32) {
    let (mut ra, mut rb) = (find(parent, a), find(parent, b));
    if ra == rb {
        return;
    }
    if size[ra as usize] < size[rb as usize] {
        core::mem::swap(&mut ra, &mut rb);
    }
    parent[rb as usize] = ra;
    size[ra as usize] += size[rb as usize];
}

/// Maximal 4-connected components of the failed set, ordered by their
/// smallest row-major member.
pub fn decompose_clusters(field: &FailureField) -> ClusterDecomposition {
    let side = field.side;
    let p = field.failed.len();
    let mut parent: Vec<u32> = (0..p as u32).collect();
    let mut size = vec![1u32; p];
    for i in 0..p as u32 {
        if !field.failed[i as usize] {
            continue;
        }
        let (x, y) = (i % side, i / side);
        if x + 1 < side && field.failed[(i + 1) as usize] {
            union(&mut parent, &mut size, i, i + 1);
        }
        if y + 1 < side && field.failed[(i + side) as usize] {
            union(&mut parent, &mut size, i, i + side);
        }
    }
    let mut by_root: BTreeMap<u32, usize> = BTreeMap::new();
    let mut clusters: Vec<Vec<NodeId>> = Vec::new();
    for i in 0..p as u32 {
        if !field.failed[i as usize] {
            continue;
        }
        let r = find(&mut parent, i);
        let slot = *by_root.entry(r).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[slot].push(NodeId::new(i % side, i / side));
    }
    ClusterDecomposition {
        clusters: clusters
            .into_iter()
            .map(|mut members| {
                members.sort_unstable();
                Cluster {
                    size: members.len() as u32,
                    perimeter: field.perimeter(&members),
                    members,
                }
            })
            .collect(),
    }
}

/// Fit of `ln Pr[|C| ≥ n] ≈ a − ĉ·n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailFit {
    pub c_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub clusters: u64,
    pub fit: LinearFit,
}

/// Minimum number of clusters `tail_fit` accepts.
pub const TAIL_FIT_MIN_CLUSTERS: u64 = 1000;
/// Tail points with fewer clusters than this are dropped from the fit.
pub const TAIL_FIT_MIN_TAIL_COUNT: u64 = 10;

/// Exponential decay rate of the cluster-size tail, fitted over sizes ≥ 2.
/// The interval is a 95% normal interval on the regression slope.
pub fn tail_fit(histogram: &BTreeMap<u32, u64>) -> Result<TailFit> {
    let total: u64 = histogram.values().sum();
    if total < TAIL_FIT_MIN_CLUSTERS {
        return Err(Error::Statistics(format!(
            "{total} clusters sampled, need at least {TAIL_FIT_MIN_CLUSTERS}"
        )));
    }
    let max = *histogram.keys().next_back().expect("non-empty histogram");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut at_least = total;
    for n in 1..=max {
        if n >= 2 {
            if at_least < TAIL_FIT_MIN_TAIL_COUNT {
                break;
            }
            xs.push(n as f64);
            ys.push(stats::ln(at_least as f64 / total as f64));
        }
        at_least -= histogram.get(&n).copied().unwrap_or(0);
    }
    let fit = linear_fit(&xs, &ys).ok_or_else(|| {
        Error::Statistics(format!("only {} tail points with enough clusters", xs.len()))
    })?;
    let (lo, hi) = fit.slope_ci(1.96);
    Ok(TailFit {
        c_hat: -fit.slope,
        ci_low: -hi,
        ci_high: -lo,
        clusters: total,
        fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetourParams {
    pub side: u32,
    pub delta: f64,
    /// Independent failure fields.
    pub fields: u64,
    /// Routed source/destination pairs per field.
    pub pairs_per_field: u64,
    pub seed: u64,
}

impl DetourParams {
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if self.side < 2 {
            return Err(Error::invalid("L", "grid side must be at least 2"));
        }
        if self.fields == 0 {
            return Err(Error::invalid("fields", "at least one field required"));
        }
        if self.pairs_per_field == 0 {
            return Err(Error::invalid("pairs_per_field", "at least one pair per field required"));
        }
        Ok(())
    }
}

/// Mergeable per-unit tallies of the detour experiment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetourTally {
    /// Detour moments keyed by `K_Γ`.
    pub by_k: BTreeMap<u32, IntMoments>,
    pub ambient_sizes: BTreeMap<u32, u64>,
    pub hit_sizes: BTreeMap<u32, u64>,
    pub routed: u64,
    pub excluded: u64,
    pub detour_total: u64,
    pub hit_perimeter_total: u64,
}

impl DetourTally {
    pub fn merge(&mut self, other: &DetourTally) {
        for (&k, m) in &other.by_k {
            self.by_k.entry(k).or_default().merge(m);
        }
        for (&s, &c) in &other.ambient_sizes {
            *self.ambient_sizes.entry(s).or_insert(0) += c;
        }
        for (&s, &c) in &other.hit_sizes {
            *self.hit_sizes.entry(s).or_insert(0) += c;
        }
        self.routed += other.routed;
        self.excluded += other.excluded;
        self.detour_total += other.detour_total;
        self.hit_perimeter_total += other.hit_perimeter_total;
    }
}

fn random_healthy(g: &GridGraph, field: &FailureField, rng: &mut rng::Rng) -> Option<NodeId> {
    if field.failed_count() == g.node_count() {
        return None;
    }
    loop {
        let v = g.node(rng.gen_range(0..g.node_count() as u32));
        if !field.is_failed(v) {
            return Some(v);
        }
    }
}

/// One work unit: sample a field and route `pairs_per_field` random pairs.
pub fn detour_unit(params: &DetourParams, unit: u64) -> Result<DetourTally> {
    let g = build_grid(params.side)?;
    let mut rng = rng::substream(params.seed, unit);
    let field = FailureField::sample_with(params.side, params.delta, &mut rng)?;
    let mut tally = DetourTally::default();
    for c in decompose_clusters(&field).clusters {
        *tally.ambient_sizes.entry(c.size).or_insert(0) += 1;
    }
    for _ in 0..params.pairs_per_field {
        let (Some(s), Some(d)) = (
            random_healthy(&g, &field, &mut rng),
            random_healthy(&g, &field, &mut rng),
        ) else {
            tally.excluded += 1;
            continue;
        };
        match deflect_route(&g, s, d, &field) {
            Ok((_, rec)) => {
                tally.routed += 1;
                tally
                    .by_k
                    .entry(rec.failed_on_route)
                    .or_default()
                    .push(rec.detour() as i64);
                tally.detour_total += rec.detour() as u64;
                for &size in &rec.hit_cluster_sizes {
                    *tally.hit_sizes.entry(size).or_insert(0) += 1;
                }
                tally.hit_perimeter_total += rec.hit_cluster_perimeters.iter().map(|&p| p as u64).sum::<u64>();
            }
            Err(Error::NoRoute { .. }) => tally.excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(tally)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetourBucket {
    pub k: u32,
    pub count: u64,
    pub mean_detour: f64,
    pub std_error: f64,
}

impl DetourBucket {
    /// Half-width of the 95% normal interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.std_error
    }
}

/// Buckets with fewer routes than this are reported but not used in fits
/// and shape checks.
pub const MIN_BUCKET_COUNT: u64 = 30;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetourExperimentResult {
    pub side: u32,
    pub delta: f64,
    pub buckets: Vec<DetourBucket>,
    /// Weighted least-squares slope of mean detour on `k` through the origin.
    pub c_delta_hat: f64,
    pub c_delta_se: f64,
    /// Smallest `C` with `mean_k + 3·se_k ≤ C·k` on every populated bucket.
    pub envelope: f64,
    /// Bucket means never drop by more than three combined standard errors.
    pub means_non_decreasing: bool,
    pub tail: Option<TailFit>,
    pub ambient_sizes: BTreeMap<u32, u64>,
    pub hit_sizes: BTreeMap<u32, u64>,
    pub ambient_mean_size: f64,
    pub ambient_mean_se: f64,
    pub hit_mean_size: f64,
    pub hit_mean_se: f64,
    /// Total detour over total perimeter of route-intersected clusters.
    pub detour_per_perimeter: f64,
    pub routed: u64,
    pub excluded: u64,
    pub exclusion_rate: f64,
}

impl DetourExperimentResult {
    /// Hit-cluster mean exceeds the ambient mean by more than `sigmas`
    /// combined standard errors.
    pub fn size_biased_at(&self, sigmas: f64) -> bool {
        let se = stats::sqrt(self.hit_mean_se * self.hit_mean_se + self.ambient_mean_se * self.ambient_mean_se);
        self.hit_mean_size - self.ambient_mean_size > sigmas * se
    }

    /// `Pr_hit[|C| ≥ n] ≥ Pr_ambient[|C| ≥ n] − sigmas·se` for every `n`.
    pub fn hit_dominates_ambient(&self, sigmas: f64) -> bool {
        let ccdf = |h: &BTreeMap<u32, u64>| -> (u64, BTreeMap<u32, u64>) {
            let total: u64 = h.values().sum();
            let mut out = BTreeMap::new();
            let mut at_least = total;
            for (&s, &c) in h {
                out.insert(s, at_least);
                at_least -= c;
            }
            (total, out)
        };
        let (nh, hit) = ccdf(&self.hit_sizes);
        let (na, amb) = ccdf(&self.ambient_sizes);
        if nh == 0 || na == 0 {
            return false;
        }
        let max = self
            .hit_sizes
            .keys()
            .chain(self.ambient_sizes.keys())
            .copied()
            .max()
            .unwrap_or(0);
        let at = |m: &BTreeMap<u32, u64>, n: u32| m.range(n..).next().map_or(0, |(_, &c)| c);
        (1..=max).all(|n| {
            let ph = at(&hit, n) as f64 / nh as f64;
            let pa = at(&amb, n) as f64 / na as f64;
            let se = stats::sqrt(ph * (1.0 - ph) / nh as f64 + pa * (1.0 - pa) / na as f64);
            ph >= pa - sigmas * se
        })
    }
}

fn histogram_moments(h: &BTreeMap<u32, u64>) -> (f64, f64) {
    let mut m = IntMoments::default();
    for (&s, &c) in h {
        m.count += c;
        m.sum += s as i128 * c as i128;
        m.sum_sq += (s as i128) * (s as i128) * c as i128;
    }
    (m.mean(), m.std_error())
}

/// Summarizes merged tallies.
pub fn summarize_detours(params: &DetourParams, tally: &DetourTally) -> DetourExperimentResult {
    let buckets: Vec<DetourBucket> = tally
        .by_k
        .iter()
        .map(|(&k, m)| DetourBucket {
            k,
            count: m.count,
            mean_detour: m.mean(),
            std_error: if m.count > 1 { m.std_error() } else { f64::NAN },
        })
        .collect();
    let populated: Vec<&DetourBucket> = buckets.iter().filter(|b| b.count >= MIN_BUCKET_COUNT).collect();
    let fit_points: Vec<&&DetourBucket> = populated.iter().filter(|b| b.k > 0).collect();
    let xs = stats::collect_f64(fit_points.iter().map(|b| b.k as f64));
    let ys = stats::collect_f64(fit_points.iter().map(|b| b.mean_detour));
    let vs = stats::collect_f64(
        fit_points
            .iter()
            .map(|b| (b.std_error * b.std_error).max(1.0 / b.count as f64)),
    );
    let (c_delta_hat, c_delta_se) = slope_through_origin(&xs, &ys, &vs).unwrap_or((f64::NAN, f64::NAN));
    let envelope = fit_points
        .iter()
        .map(|b| (b.mean_detour + 3.0 * b.std_error) / b.k as f64)
        .fold(0.0, f64::max);
    let means_non_decreasing = populated.windows(2).all(|w| {
        let se = stats::sqrt(w[0].std_error * w[0].std_error + w[1].std_error * w[1].std_error);
        w[1].mean_detour >= w[0].mean_detour - 3.0 * se
    });
    let (ambient_mean_size, ambient_mean_se) = histogram_moments(&tally.ambient_sizes);
    let (hit_mean_size, hit_mean_se) = histogram_moments(&tally.hit_sizes);
    let attempted = tally.routed + tally.excluded;
    DetourExperimentResult {
        side: params.side,
        delta: params.delta,
        buckets,
        c_delta_hat,
        c_delta_se,
        envelope,
        means_non_decreasing,
        tail: tail_fit(&tally.ambient_sizes).ok(),
        ambient_sizes: tally.ambient_sizes.clone(),
        hit_sizes: tally.hit_sizes.clone(),
        ambient_mean_size,
        ambient_mean_se,
        hit_mean_size,
        hit_mean_se,
        detour_per_perimeter: if tally.hit_perimeter_total > 0 {
            tally.detour_total as f64 / tally.hit_perimeter_total as f64
        } else {
            0.0
        },
        routed: tally.routed,
        excluded: tally.excluded,
        exclusion_rate: if attempted > 0 {
            tally.excluded as f64 / attempted as f64
        } else {
            0.0
        },
    }
}

/// Routes `fields × pairs_per_field` random healthy pairs around sampled
/// failure fields and buckets the detours by `K_Γ`.
pub fn detour_experiment<R: UnitRunner>(params: &DetourParams, runner: &R) -> Result<DetourExperimentResult> {
    params.validate()?;
    let tallies = runner.run_units(params.fields, |u| detour_unit(params, u));
    let mut total = DetourTally::default();
    for t in tallies {
        total.merge(&t?);
    }
    Ok(summarize_detours(params, &total))
}
