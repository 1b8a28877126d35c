//! Collective-communication cost models and the cluster/grid latency ratio.
//!
//! With sparsity `x = 1/f_act`, the ratio of cluster to grid latency is
//!
//! ```text
//! R(x) = (c2 + (A_N + B_N)·x) / (c1 + M_P·x)
//! ```
//!
//! whose derivative has the sign of `(A_N+B_N)·c1 − M_P·c2` and whose limit
//! is `(A_N+B_N)/M_P`. Ratio arithmetic is generic over [`Real`] so the
//! boundary case can be evaluated in exact rationals.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive};

use crate::stats::{self, LinearFit};
use crate::{Error, Result};

/// Number type for ratio evaluation.
pub trait Real: Clone + PartialOrd + Num + Debug {
    /// Exact for rationals; `None` for NaN or infinities.
    fn from_f64(v: f64) -> Option<Self>;
    fn approx_f64(&self) -> f64;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }

    fn approx_f64(&self) -> f64 {
        *self
    }
}

impl Real for BigRational {
    fn from_f64(v: f64) -> Option<Self> {
        BigRational::from_float(v)
    }

    fn approx_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

fn is_power_of_two(p: u64) -> bool {
    p >= 2 && p.is_power_of_two()
}

fn check_nonneg(field: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::invalid(field, "must be finite and non-negative"));
    }
    Ok(())
}

fn check_cost_inputs(p: u64, n_bytes: f64, alpha: f64, beta: f64, gamma: f64) -> Result<()> {
    if p < 2 {
        return Err(Error::invalid("p", "needs at least 2 participants"));
    }
    check_nonneg("n_bytes", n_bytes)?;
    check_nonneg("alpha", alpha)?;
    check_nonneg("beta", beta)?;
    check_nonneg("gamma", gamma)
}

/// `log₂p·(α + nβ + nγ)` for power-of-two `p`.
pub fn t_recursive_doubling(p: u64, n_bytes: f64, alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    check_cost_inputs(p, n_bytes, alpha, beta, gamma)?;
    if !is_power_of_two(p) {
        return Err(Error::invalid("p", "recursive doubling needs a power of two"));
    }
    let lg = p.trailing_zeros() as f64;
    Ok(lg * alpha + n_bytes * lg * beta + n_bytes * lg * gamma)
}

/// `2log₂p·α + 2((p−1)/p)·nβ + ((p−1)/p)·nγ`.
pub fn t_rabenseifner(p: u64, n_bytes: f64, alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    check_cost_inputs(p, n_bytes, alpha, beta, gamma)?;
    let frac = (p - 1) as f64 / p as f64;
    Ok(2.0 * stats::log2(p as f64) * alpha + 2.0 * frac * n_bytes * beta + frac * n_bytes * gamma)
}

/// `2((p−1)/p)·nβ + 2(p−1)·α`.
pub fn t_ring(p: u64, n_bytes: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_cost_inputs(p, n_bytes, alpha, beta, 0.0)?;
    let frac = (p - 1) as f64 / p as f64;
    Ok(2.0 * frac * n_bytes * beta + 2.0 * (p - 1) as f64 * alpha)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridLatencyParams {
    pub c1: f64,
    pub c_w: f64,
    pub t_edge: f64,
    /// Coefficient of the optional `log₂P·t_merge` term; 0 disables it.
    pub merge_coeff: f64,
    pub t_merge: f64,
    /// Number of grid nodes.
    pub p: u64,
}

impl GridLatencyParams {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("c1", self.c1)?;
        check_nonneg("c_w", self.c_w)?;
        check_nonneg("t_edge", self.t_edge)?;
        check_nonneg("merge_coeff", self.merge_coeff)?;
        check_nonneg("t_merge", self.t_merge)?;
        if self.p == 0 {
            return Err(Error::invalid("p", "must be positive"));
        }
        if !(self.m_p() > 0.0) {
            return Err(Error::invalid("c_w", "M_P must be positive"));
        }
        Ok(())
    }

    /// `c_w·√P·t_edge + merge_coeff·log₂P·t_merge`, recomputed on each call.
    pub fn m_p(&self) -> f64 {
        let p = self.p as f64;
        self.c_w * stats::sqrt(p) * self.t_edge + self.merge_coeff * stats::log2(p) * self.t_merge
    }

    /// `M_P` in exact rationals. Needs `P` to be a perfect square, and a power
    /// of two when the merge term is on.
    pub fn m_p_exact(&self) -> Result<BigRational> {
        let root = self.p.isqrt();
        if root * root != self.p {
            return Err(Error::Unsupported("exact M_P needs a perfect-square P".into()));
        }
        let q = |field: &'static str, v: f64| {
            BigRational::from_float(v).ok_or_else(|| Error::invalid(field, "must be finite"))
        };
        let mut m = q("c_w", self.c_w)? * BigRational::from_integer(BigInt::from(root)) * q("t_edge", self.t_edge)?;
        if self.merge_coeff != 0.0 {
            if !self.p.is_power_of_two() {
                return Err(Error::Unsupported("exact merge term needs a power-of-two P".into()));
            }
            let lg = BigRational::from_integer(BigInt::from(self.p.trailing_zeros()));
            m += q("merge_coeff", self.merge_coeff)? * lg * q("t_merge", self.t_merge)?;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterLatencyParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Participants.
    pub n: u64,
    /// Message-size floor in bytes.
    pub m0: f64,
    pub c2: f64,
}

impl ClusterLatencyParams {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("alpha", self.alpha)?;
        check_nonneg("beta", self.beta)?;
        check_nonneg("gamma", self.gamma)?;
        check_nonneg("c2", self.c2)?;
        if !(self.m0 > 0.0 && self.m0.is_finite()) {
            return Err(Error::invalid("m0", "must be positive"));
        }
        if self.n < 2 {
            return Err(Error::invalid("n", "needs at least 2 participants"));
        }
        Ok(())
    }

    /// Bandwidth and reduction cost of one floor-sized all-reduce:
    /// `2((N−1)/N)·m0·β + ((N−1)/N)·m0·γ`.
    pub fn a_n(&self) -> f64 {
        let frac = (self.n - 1) as f64 / self.n as f64;
        2.0 * frac * self.m0 * self.beta + frac * self.m0 * self.gamma
    }

    /// Startup cost `2·log₂N·α`.
    pub fn b_n(&self) -> f64 {
        2.0 * stats::log2(self.n as f64) * self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Trend {
    Increasing,
    Constant,
    Decreasing,
}

/// The four constants of `R(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioModel<T> {
    pub c1: T,
    pub c2: T,
    /// `A_N + B_N`.
    pub overhead: T,
    pub m_p: T,
}

impl<T: Real> RatioModel<T> {
    pub fn new(c1: T, c2: T, overhead: T, m_p: T) -> Result<Self> {
        let zero = T::zero();
        if c1 < zero {
            return Err(Error::invalid("c1", "must be non-negative"));
        }
        if c2 < zero {
            return Err(Error::invalid("c2", "must be non-negative"));
        }
        if overhead < zero {
            return Err(Error::invalid("a_n", "A_N + B_N must be non-negative"));
        }
        if m_p <= zero {
            return Err(Error::invalid("m_p", "must be positive"));
        }
        Ok(RatioModel { c1, c2, overhead, m_p })
    }

    pub fn eval(&self, x: &T) -> T {
        (self.c2.clone() + self.overhead.clone() * x.clone()) / (self.c1.clone() + self.m_p.clone() * x.clone())
    }

    /// Sign of the derivative numerator `(A+B)c1 − M_P c2`.
    pub fn trend(&self) -> Trend {
        let lhs = self.overhead.clone() * self.c1.clone();
        let rhs = self.m_p.clone() * self.c2.clone();
        match lhs.partial_cmp(&rhs) {
            Some(Ordering::Greater) => Trend::Increasing,
            Some(Ordering::Less) => Trend::Decreasing,
            _ => Trend::Constant,
        }
    }

    pub fn limit(&self) -> T {
        self.overhead.clone() / self.m_p.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurve<T> {
    /// `(x, R(x))` pairs in grid order.
    pub samples: Vec<(T, T)>,
    pub limit: T,
    /// The criterion `(A+B)c1 > M_P c2`.
    pub monotone: bool,
    pub trend: Trend,
}

impl<T: Real> RatioCurve<T> {
    /// Trend read off the samples alone; `None` if they are not monotone.
    pub fn sampled_trend(&self) -> Option<Trend> {
        let ys: Vec<&T> = self.samples.iter().map(|(_, y)| y).collect();
        let all = |f: fn(&T, &T) -> bool| ys.windows(2).all(|w| f(w[0], w[1]));
        if all(|a, b| a < b) {
            Some(Trend::Increasing)
        } else if all(|a, b| a == b) {
            Some(Trend::Constant)
        } else if all(|a, b| a > b) {
            Some(Trend::Decreasing)
        } else {
            None
        }
    }
}

/// Samples `R(x)` on a grid of `x ≥ 1`, sorted ascending.
pub fn sample_ratio<T: Real>(model: &RatioModel<T>, x_grid: &[T]) -> Result<RatioCurve<T>> {
    let one = T::one();
    if x_grid.iter().any(|x| *x < one) {
        return Err(Error::invalid("x_grid", "sparsity x = 1/f_act must be at least 1"));
    }
    if x_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("x_grid", "must be strictly increasing"));
    }
    let trend = model.trend();
    Ok(RatioCurve {
        samples: x_grid.iter().map(|x| (x.clone(), model.eval(x))).collect(),
        limit: model.limit(),
        monotone: trend == Trend::Increasing,
        trend,
    })
}

/// `R(x)` from grid and cluster parameters in floating point.
pub fn ratio_curve(
    gp: &GridLatencyParams,
    cp: &ClusterLatencyParams,
    a_n: f64,
    b_n: f64,
    x_grid: &[f64],
) -> Result<RatioCurve<f64>> {
    gp.validate()?;
    check_nonneg("c2", cp.c2)?;
    check_nonneg("a_n", a_n)?;
    check_nonneg("b_n", b_n)?;
    let model = RatioModel::new(gp.c1, cp.c2, a_n + b_n, gp.m_p())?;
    sample_ratio(&model, x_grid)
}

/// The same curve with every input converted exactly to a rational.
pub fn ratio_curve_exact(
    gp: &GridLatencyParams,
    cp: &ClusterLatencyParams,
    a_n: f64,
    b_n: f64,
    x_grid: &[BigRational],
) -> Result<RatioCurve<BigRational>> {
    gp.validate()?;
    check_nonneg("c2", cp.c2)?;
    check_nonneg("a_n", a_n)?;
    check_nonneg("b_n", b_n)?;
    let q = |field: &'static str, v: f64| BigRational::from_float(v).ok_or_else(|| Error::invalid(field, "must be finite"));
    let model = RatioModel::new(q("c1", gp.c1)?, q("c2", cp.c2)?, q("a_n", a_n)? + q("b_n", b_n)?, gp.m_p_exact()?)?;
    sample_ratio(&model, x_grid)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DivergenceRow {
    pub n: u64,
    pub a_n: f64,
    pub b_n: f64,
    pub ratio: f64,
    pub ratio_over_log2n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceResult {
    pub rows: Vec<DivergenceRow>,
    /// Relative spread of `ratio/log₂N` over the last half of the rows.
    pub tail_spread: f64,
    /// Least squares of `ratio` against `log₂N`.
    pub fit: Option<LinearFit>,
    pub strictly_increasing: bool,
    /// Logarithmic growth confirmed: `α > 0`, increasing ratios, tail spread
    /// under 10% and fit `R² > 0.999`.
    pub diverges: bool,
}

pub const DIVERGENCE_MAX_SPREAD: f64 = 0.1;
pub const DIVERGENCE_MIN_R2: f64 = 0.999;

/// Ratio at fixed `f_act` and grid size as the participant count grows.
/// `cp.n` is ignored; each entry of `n_list` takes its place.
pub fn divergence_experiment(
    n_list: &[u64],
    f_act: f64,
    gp: &GridLatencyParams,
    cp: &ClusterLatencyParams,
) -> Result<DivergenceResult> {
    if !(f_act > 0.0 && f_act <= 1.0) {
        return Err(Error::invalid("f_act", "must lie in (0, 1]"));
    }
    if n_list.len() < 2 {
        return Err(Error::invalid("n_list", "needs at least two participant counts"));
    }
    gp.validate()?;
    let x = 1.0 / f_act;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let c = ClusterLatencyParams { n, ..cp.clone() };
        c.validate()?;
        let (a_n, b_n) = (c.a_n(), c.b_n());
        let ratio = RatioModel::new(gp.c1, c.c2, a_n + b_n, gp.m_p())?.eval(&x);
        rows.push(DivergenceRow {
            n,
            a_n,
            b_n,
            ratio,
            ratio_over_log2n: ratio / stats::log2(n as f64),
        });
    }
    let tail = &rows[rows.len() / 2..];
    let tail_spread = stats::relative_spread(&stats::collect_f64(tail.iter().map(|r| r.ratio_over_log2n)));
    let lg = stats::collect_f64(rows.iter().map(|r| stats::log2(r.n as f64)));
    let ys = stats::collect_f64(rows.iter().map(|r| r.ratio));
    let fit = stats::linear_fit(&lg, &ys);
    let strictly_increasing = stats::is_strictly_increasing(&ys);
    let diverges = cp.alpha > 0.0
        && strictly_increasing
        && tail_spread < DIVERGENCE_MAX_SPREAD
        && fit.as_ref().is_some_and(|f| f.slope > 0.0 && f.r_squared > DIVERGENCE_MIN_R2);
    Ok(DivergenceResult {
        rows,
        tail_spread,
        fit,
        strictly_increasing,
        diverges,
    })
}

/// Participant counts `2^lo ..= 2^hi`.
pub fn powers_of_two(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|e| 1u64 << e).collect()
}

/// Default cluster constants with a 4 KiB message floor.
pub fn default_cluster() -> ClusterLatencyParams {
    ClusterLatencyParams {
        alpha: 1e-6,
        beta: 1e-10,
        gamma: 1e-10,
        n: 2,
        m0: 4096.0,
        c2: 1e-6,
    }
}

/// Default grid constants on a 32×32 grid.
pub fn default_grid() -> GridLatencyParams {
    GridLatencyParams {
        c1: 1e-6,
        c_w: 1e-9,
        t_edge: 1.0,
        merge_coeff: 0.0,
        t_merge: 0.0,
        p: 1024,
    }
}

/// `x` values `1, 2, 4, …` up to `2^k`, as exact rationals.
pub fn doubling_grid_exact(k: u32) -> Vec<BigRational> {
    (0..=k)
        .map(|e| BigRational::from_integer(BigInt::one() << e as usize))
        .collect()
}

impl<T: Real> RatioModel<T> {
    /// `|R(x) − limit|` at `x`, as f64.
    pub fn limit_gap(&self, x: &T) -> f64 {
        let d = self.eval(x) - self.limit();
        let d = if d < T::zero() { T::zero() - d } else { d };
        d.approx_f64()
    }
}
