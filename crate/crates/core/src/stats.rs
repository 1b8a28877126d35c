//! Small statistics helpers shared by the experiment modules.

use alloc::vec::Vec;

/// Ordinary least-squares fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl LinearFit {
    /// Normal-approximation confidence interval for the slope.
    pub fn slope_ci(&self, z: f64) -> (f64, f64) {
        (self.slope - z * self.slope_se, self.slope + z * self.slope_se)
    }
}

/// Returns `None` with fewer than two points or a degenerate `x` spread.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let slope_se = if n > 2 {
        libm::sqrt(sse / (nf - 2.0) / sxx)
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
        r_squared,
        points: n,
    })
}

/// Weighted least-squares slope of a line through the origin, with its
/// standard error from the per-point variances `var_y`.
pub fn slope_through_origin(xs: &[f64], ys: &[f64], var_y: &[f64]) -> Option<(f64, f64)> {
    let mut sw = 0.0;
    let mut swy = 0.0;
    for ((&x, &y), &v) in xs.iter().zip(ys).zip(var_y) {
        if v <= 0.0 || x == 0.0 {
            continue;
        }
        let w = x * x / v;
        sw += w;
        swy += w * (y / x);
    }
    if sw <= 0.0 {
        return None;
    }
    Some((swy / sw, libm::sqrt(1.0 / sw)))
}

/// Running integer moments of a sample; merging is exact and order-free.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntMoments {
    pub count: u64,
    pub sum: i128,
    pub sum_sq: i128,
}

impl IntMoments {
    pub fn push(&mut self, v: i64) {
        self.count += 1;
        self.sum += v as i128;
        self.sum_sq += (v as i128) * (v as i128);
    }

    pub fn merge(&mut self, other: &IntMoments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum as f64 / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as i128;
        // n·Σx² − (Σx)² is exact in i128 for the sample sizes used here.
        let num = n * self.sum_sq - self.sum * self.sum;
        num as f64 / (n as f64 * (n - 1) as f64)
    }

    pub fn std_error(&self) -> f64 {
        libm::sqrt(self.variance() / self.count as f64)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `(max − min) / max(|max|, |min|)` over a non-empty slice.
pub fn relative_spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = libm::fabs(max).max(libm::fabs(min));
    if scale == 0.0 {
        0.0
    } else {
        (max - min) / scale
    }
}

pub fn is_strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

pub fn is_strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn collect_f64<I: IntoIterator<Item = f64>>(it: I) -> Vec<f64> {
    it.into_iter().collect()
}
