//! Empirical tail statistics of latency samples.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tail samples needed below a quantile before its estimate is trusted.
pub const MIN_TAIL_SUPPORT: f64 = 100.0;
const Z_95: f64 = 1.959_963_984_540_054;

/// Empirical exceedance function `P(X > x)` evaluated at every distinct
/// sample value, preceded by `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ccdf {
    pub points: Vec<(f64, f64)>,
    sorted: Vec<f64>,
}

impl Ccdf {
    pub fn new(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points = vec![(0.0, 1.0)];
        let mut i = 0;
        while i < sorted.len() {
            let x = sorted[i];
            while i < sorted.len() && sorted[i] == x {
                i += 1;
            }
            points.push((x, (sorted.len() - i) as f64 / n));
        }
        Ccdf { points, sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `P(X > x)`.
    pub fn exceedance(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        let at_or_below = self.sorted.partition_point(|&s| s <= x);
        (self.sorted.len() - at_or_below) as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, tail: f64) -> Result<QuantileEstimate> {
        quantile_sorted(&self.sorted, tail)
    }
}

pub fn ccdf(samples: &[f64]) -> Ccdf {
    Ccdf::new(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileEstimate {
    /// Exceedance probability the estimate targets.
    pub tail: f64,
    pub value: f64,
    pub samples: usize,
    /// One-based order statistic used.
    pub rank: usize,
    /// Distribution-free 95% bounds from the binomial rank interval.
    pub lower: f64,
    pub upper: f64,
    pub sufficient_support: bool,
}

impl QuantileEstimate {
    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }
}

/// Value exceeded with probability `tail`: the `⌈n(1 - tail)⌉`-th order
/// statistic of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], tail: f64) -> Result<QuantileEstimate> {
    let n = sorted.len();
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::validation("quantile", "tail probability must lie in (0, 1)"));
    }
    let nf = n as f64;
    let rank = ((nf * (1.0 - tail)).ceil() as usize).clamp(1, n);
    let spread = Z_95 * (nf * tail * (1.0 - tail)).sqrt();
    let lo = ((rank as f64 - spread).floor() as i64).clamp(1, n as i64) as usize;
    let hi = ((rank as f64 + spread).ceil() as i64).clamp(1, n as i64) as usize;
    Ok(QuantileEstimate {
        tail,
        value: sorted[rank - 1],
        samples: n,
        rank,
        lower: sorted[lo - 1],
        upper: sorted[hi - 1],
        sufficient_support: nf * tail >= MIN_TAIL_SUPPORT,
    })
}

pub fn quantile(samples: &[f64], tail: f64) -> Result<QuantileEstimate> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, tail)
}

/// `a` is below `b` with non-overlapping confidence bounds.
pub fn confidently_below(a: &QuantileEstimate, b: &QuantileEstimate) -> bool {
    a.upper < b.lower
}
