//! Load on the corner-sink trunk under random source activation.
//!
//! On an `n×n` grid with XY routes into the corner `(0,0)`, each active
//! source `(a,b)` with `b ≥ 1` crosses `b` trunk edges, so the total trunk
//! load is `Y = Σ_a Σ_{b≥1} b·X_{a,b}`. For i.i.d. `Bernoulli(f)` indicators
//!
//! ```text
//! E[Y]   = f·n·n(n−1)/2
//! Var[Y] = f(1−f)·n·(n−1)n(2n−1)/6
//! ```
//!
//! so the variance grows like `P²` with `P = n²`.

use alloc::vec::Vec;

use rand::RngCore;

use crate::grid::{GridGraph, NodeId};
use crate::routing::{self, EdgeLoadMap};
use crate::rng::{self, UnitRunner};
use crate::stats::{self, IntMoments, LinearFit};
use crate::{Error, Result};

/// Largest indicator count accepted by [`enumerate_oracle`].
pub const ENUMERATION_MAX_INDICATORS: u32 = 20;

/// Trials simulated per work unit; units are the parallel grain.
pub const TRIALS_PER_UNIT: u64 = 4096;

fn check_f(f_act: f64) -> Result<()> {
    if !(f_act > 0.0 && f_act < 1.0) {
        return Err(Error::invalid("f_act", "must lie strictly between 0 and 1"));
    }
    Ok(())
}

fn check_n(n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("n", "must be at least 2"));
    }
    if n > 4096 {
        return Err(Error::invalid("n", "must be at most 4096"));
    }
    Ok(())
}

/// Activation indicators for every node of an `n×n` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationField {
    n: u32,
    f_act: f64,
    seed: Option<u64>,
    mask: Vec<bool>,
}

/// Bernoulli(f) by comparing a uniform 64-bit word against `⌊f·2⁶⁴⌋`.
fn threshold(f_act: f64) -> u64 {
    (f_act * 18_446_744_073_709_551_616.0) as u64
}

impl ActivationField {
    pub fn sample(n: u32, f_act: f64, seed: u64) -> Result<Self> {
        check_n(n)?;
        check_f(f_act)?;
        let mut r = rng::seeded(seed);
        let t = threshold(f_act);
        let mask = (0..n as usize * n as usize).map(|_| r.next_u64() < t).collect();
        Ok(ActivationField {
            n,
            f_act,
            seed: Some(seed),
            mask,
        })
    }

    pub fn from_mask(n: u32, f_act: f64, mask: Vec<bool>) -> Result<Self> {
        check_n(n)?;
        check_f(f_act)?;
        if mask.len() != n as usize * n as usize {
            return Err(Error::invalid("mask", "length must be n²"));
        }
        Ok(ActivationField {
            n,
            f_act,
            seed: None,
            mask,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn f_act(&self) -> f64 {
        self.f_act
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_active(&self, a: u32, b: u32) -> bool {
        self.mask[(b * self.n + a) as usize]
    }
}

/// `Σ_a Σ_{b≥1} b·X_{a,b}`.
pub fn y_functional(field: &ActivationField) -> u64 {
    let n = field.n;
    let mut y = 0u64;
    for b in 1..n {
        for a in 0..n {
            if field.is_active(a, b) {
                y += b as u64;
            }
        }
    }
    y
}

/// The same quantity summed edge by edge: the loads `Λ_{e_j}` on the trunk
/// edges `(0,j) → (0,j−1)` produced by XY routes of the active sources.
pub fn y_from_trunk_loads(field: &ActivationField) -> Result<u64> {
    let n = field.n;
    let g = GridGraph::from_parts(n, 0, 0, Vec::new())?;
    let sink = NodeId::new(0, 0);
    let mut loads = EdgeLoadMap::default();
    for b in 0..n {
        for a in 0..n {
            if field.is_active(a, b) && (a, b) != (0, 0) {
                loads.add_route(&routing::xy_route(&g, NodeId::new(a, b), sink)?);
            }
        }
    }
    Ok((1..n).map(|j| loads.get(routing::trunk_edge(j)) as u64).sum())
}

fn sum_b_pow(n: u32, k: i32) -> f64 {
    (1..n).map(|b| libm::pow(b as f64, k as f64)).sum()
}

/// Closed-form `(E[Y], Var[Y])`.
pub fn exact_moments(n: u32, f_act: f64) -> Result<(f64, f64)> {
    check_n(n)?;
    check_f(f_act)?;
    let nf = n as f64;
    let mean = f_act * nf * (nf * (nf - 1.0) / 2.0);
    let var = f_act * (1.0 - f_act) * nf * ((nf - 1.0) * nf * (2.0 * nf - 1.0) / 6.0);
    Ok((mean, var))
}

/// Fourth central moment of `Y`, from the cumulants of independent
/// weighted Bernoulli terms: `μ₄ = κ₄ + 3σ⁴`.
pub fn exact_fourth_central(n: u32, f_act: f64) -> Result<f64> {
    let (_, var) = exact_moments(n, f_act)?;
    let q = f_act * (1.0 - f_act);
    let kappa4 = q * (1.0 - 6.0 * q) * n as f64 * sum_b_pow(n, 4);
    Ok(kappa4 + 3.0 * var * var)
}

/// Standard error of the unbiased sample variance over `trials` draws.
pub fn variance_std_error(n: u32, f_act: f64, trials: u64) -> Result<f64> {
    if trials < 2 {
        return Err(Error::invalid("trials", "need at least 2 trials"));
    }
    let (_, var) = exact_moments(n, f_act)?;
    let mu4 = exact_fourth_central(n, f_act)?;
    let t = trials as f64;
    Ok(stats::sqrt((mu4 - var * var * (t - 3.0) / (t - 1.0)) / t))
}

/// Exact moments by summing over all `2^{n(n−1)}` activation masks of the
/// weighted rows `b ≥ 1`.
pub fn enumerate_oracle(n: u32, f_act: f64) -> Result<(f64, f64)> {
    check_n(n)?;
    check_f(f_act)?;
    let k = n * (n - 1);
    if k > ENUMERATION_MAX_INDICATORS {
        return Err(Error::Budget {
            what: "activation indicators",
            size: k as usize,
            limit: ENUMERATION_MAX_INDICATORS as usize,
        });
    }
    let weights: Vec<u64> = (1..n).flat_map(|b| (0..n).map(move |_| b as u64)).collect();
    let masks = 1u64 << k;
    let outcomes: Vec<(f64, f64)> = (0..masks)
        .map(|mask| {
            let mut y = 0u64;
            let mut p = 1.0;
            for (i, &w) in weights.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    y += w;
                    p *= f_act;
                } else {
                    p *= 1.0 - f_act;
                }
            }
            (p, y as f64)
        })
        .collect();
    let mean: f64 = outcomes.iter().map(|(p, y)| p * y).sum();
    let var: f64 = outcomes.iter().map(|(p, y)| p * (y - mean) * (y - mean)).sum();
    Ok((mean, var))
}

/// Moments of `Y` over `trials` fresh fields drawn from one substream.
pub fn monte_carlo_unit(n: u32, f_act: f64, trials: u64, seed: u64, unit: u64) -> IntMoments {
    let mut r = rng::substream(seed, unit);
    let t = threshold(f_act);
    let mut m = IntMoments::default();
    for _ in 0..trials {
        let mut y = 0i64;
        for b in 1..n {
            for _ in 0..n {
                if r.next_u64() < t {
                    y += b as i64;
                }
            }
        }
        m.push(y);
    }
    m
}

/// Monte Carlo moments of `Y`; the result does not depend on the runner.
pub fn monte_carlo<R: UnitRunner>(n: u32, f_act: f64, trials: u64, seed: u64, runner: &R) -> Result<IntMoments> {
    check_n(n)?;
    check_f(f_act)?;
    if trials < 2 {
        return Err(Error::invalid("trials", "need at least 2 trials"));
    }
    let units = trials.div_ceil(TRIALS_PER_UNIT);
    // Unit ids carry n in the high bits so each grid size has its own streams.
    let base = (n as u64) << 40;
    let parts = runner.run_units(units, |u| {
        let count = TRIALS_PER_UNIT.min(trials - u * TRIALS_PER_UNIT);
        monte_carlo_unit(n, f_act, count, seed, base + u)
    });
    let mut total = IntMoments::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingRow {
    pub n: u32,
    pub p: u64,
    pub f: f64,
    pub trials: u64,
    pub mean_hat: f64,
    pub mean_exact: f64,
    pub var_hat: f64,
    pub var_exact: f64,
    pub var_over_p2: f64,
    pub var_over_p32: f64,
    pub var_std_error: f64,
    /// `(var_hat − var_exact)/var_std_error`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least squares of `ln var_exact` against `ln P`.
    pub exact_slope: Option<LinearFit>,
    /// Least squares of `ln var_hat` against `ln P`.
    pub sampled_slope: Option<LinearFit>,
}

impl ScalingReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| libm::fabs(r.z)).fold(0.0, f64::max)
    }

    pub fn var_over_p32_increasing(&self) -> bool {
        stats::is_strictly_increasing(&stats::collect_f64(self.rows.iter().map(|r| r.var_over_p32)))
    }

    /// `var/mean²` per row, which shrinks like `(1−f)/(f·P)`.
    pub fn relative_concentration(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.var_hat / (r.mean_hat * r.mean_hat)).collect()
    }
}

pub fn scaling_experiment<R: UnitRunner>(
    n_list: &[u32],
    f_act: f64,
    trials: u64,
    seed: u64,
    runner: &R,
) -> Result<ScalingReport> {
    check_f(f_act)?;
    if n_list.is_empty() {
        return Err(Error::invalid("n_list", "must not be empty"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let m = monte_carlo(n, f_act, trials, seed, runner)?;
        let (mean_exact, var_exact) = exact_moments(n, f_act)?;
        let se = variance_std_error(n, f_act, trials)?;
        let p = n as u64 * n as u64;
        let pf = p as f64;
        let var_hat = m.variance();
        rows.push(ScalingRow {
            n,
            p,
            f: f_act,
            trials,
            mean_hat: m.mean(),
            mean_exact,
            var_hat,
            var_exact,
            var_over_p2: var_hat / (pf * pf),
            var_over_p32: var_hat / (pf * stats::sqrt(pf)),
            var_std_error: se,
            z: (var_hat - var_exact) / se,
        });
    }
    let lp = stats::collect_f64(rows.iter().map(|r| stats::ln(r.p as f64)));
    let le = stats::collect_f64(rows.iter().map(|r| stats::ln(r.var_exact)));
    let lh = stats::collect_f64(rows.iter().map(|r| stats::ln(r.var_hat)));
    Ok(ScalingReport {
        exact_slope: stats::linear_fit(&lp, &le),
        sampled_slope: stats::linear_fit(&lp, &lh),
        rows,
    })
}

/// Every mask of a small grid, for exhaustive checks.
pub fn all_masks(n: u32) -> Result<Vec<Vec<bool>>> {
    let cells = n * n;
    if cells > ENUMERATION_MAX_INDICATORS {
        return Err(Error::Budget {
            what: "mask cells",
            size: cells as usize,
            limit: ENUMERATION_MAX_INDICATORS as usize,
        });
    }
    Ok((0..1u64 << cells)
        .map(|m| (0..cells).map(|i| m >> i & 1 == 1).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::rng::Sequential;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol * libm::fmax(1.0, libm::fabs(b))
    }

    #[test]
    fn y_examples() {
        let zero = ActivationField::from_mask(4, 0.5, vec![false; 16]).unwrap();
        assert_eq!(y_functional(&zero), 0);
        let full = ActivationField::from_mask(4, 0.5, vec![true; 16]).unwrap();
        assert_eq!(y_functional(&full), 24);
        let mut one = vec![false; 4];
        one[2] = true; // (a, b) = (0, 1)
        assert_eq!(y_functional(&ActivationField::from_mask(2, 0.5, one).unwrap()), 1);
    }

    #[test]
    fn edgewise_sum_matches_on_every_3x3_mask() {
        for mask in all_masks(3).unwrap() {
            let f = ActivationField::from_mask(3, 0.5, mask).unwrap();
            assert_eq!(y_functional(&f), y_from_trunk_loads(&f).unwrap());
        }
    }

    #[test]
    fn exact_examples() {
        let (m, v) = exact_moments(4, 0.5).unwrap();
        assert_eq!((m, v), (12.0, 14.0));
        assert_eq!(exact_moments(2, 0.5).unwrap().1, 0.5);
        assert!(exact_moments(8, 1e-12).unwrap().1 < 1e-6);
        assert!(exact_moments(1, 0.5).is_err());
        assert!(exact_moments(4, 1.0).is_err());
    }

    #[test]
    fn oracle_matches_closed_form() {
        for n in 2..=4 {
            for f in [0.1, 0.5, 0.9] {
                let (me, ve) = exact_moments(n, f).unwrap();
                let (mo, vo) = enumerate_oracle(n, f).unwrap();
                assert!(close(me, mo, 1e-12), "mean n={n} f={f}: {me} vs {mo}");
                assert!(close(ve, vo, 1e-12), "var n={n} f={f}: {ve} vs {vo}");
            }
        }
        assert!(matches!(enumerate_oracle(6, 0.5), Err(Error::Budget { .. })));
    }

    #[test]
    fn fourth_moment_matches_enumeration() {
        let n = 3;
        let f = 0.3;
        let weights: Vec<f64> = (1..n).flat_map(|b| (0..n).map(move |_| b as f64)).collect();
        let (mean, _) = exact_moments(n, f).unwrap();
        let mut mu4 = 0.0;
        for mask in 0u32..1 << weights.len() {
            let mut y = 0.0;
            let mut p = 1.0;
            for (i, w) in weights.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    y += w;
                    p *= f;
                } else {
                    p *= 1.0 - f;
                }
            }
            mu4 += p * libm::pow(y - mean, 4.0);
        }
        assert!(close(exact_fourth_central(n, f).unwrap(), mu4, 1e-12));
    }

    #[test]
    fn monte_carlo_is_close_and_deterministic() {
        let a = monte_carlo(8, 0.1, 20_000, 9, &Sequential).unwrap();
        let b = monte_carlo(8, 0.1, 20_000, 9, &Sequential).unwrap();
        assert_eq!(a, b);
        let (_, v) = exact_moments(8, 0.1).unwrap();
        let se = variance_std_error(8, 0.1, 20_000).unwrap();
        assert!(libm::fabs(a.variance() - v) < 5.0 * se);
    }

    #[test]
    fn small_scaling_table() {
        let r = scaling_experiment(&[8, 16, 32], 0.1, 10_000, 3, &Sequential).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.var_over_p32_increasing());
        let s = r.exact_slope.unwrap().slope;
        assert!(s > 1.9 && s < 2.1, "{s}");
        assert!(stats::is_strictly_decreasing(&r.relative_concentration()));
    }
}
