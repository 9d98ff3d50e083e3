use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `k` successes out of `n`: `(lower, upper)`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub fn wilson_halfwidth(k: u64, n: u64) -> f64 {
    let (lo, hi) = wilson_interval(k, n);
    (hi - lo) / 2.0
}

/// Mann-Whitney estimate of `P(X1 > X0) + P(X1 = X0) / 2` with the
/// Hanley-McNeil standard error.
pub fn auc(h0: &[f64], h1: &[f64]) -> (f64, f64) {
    let (n0, n1) = (h0.len(), h1.len());
    if n0 == 0 || n1 == 0 {
        return (0.5, 0.5);
    }
    let mut pooled: Vec<(f64, bool)> = h0.iter().map(|&v| (v, false)).chain(h1.iter().map(|&v| (v, true))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // Average 1-based rank of the tie block.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += rank * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let (n0f, n1f) = (n0 as f64, n1 as f64);
    let a = (rank_sum - n1f * (n1f + 1.0) / 2.0) / (n0f * n1f);
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let var = (a * (1.0 - a) + (n1f - 1.0) * (q1 - a * a) + (n0f - 1.0) * (q2 - a * a)) / (n0f * n1f);
    (a, var.max(0.0).sqrt())
}

/// `k` thresholds at evenly spaced empirical quantiles of the pooled sample,
/// deduplicated and ascending.
pub fn quantile_grid(samples: &[f64], k: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() || k == 0 {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let last = sorted.len() - 1;
    let mut grid: Vec<f64> = (0..k)
        .map(|i| {
            let q = if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
            sorted[(q * last as f64).round() as usize]
        })
        .collect();
    grid.dedup();
    grid
}

/// Empirical minimum of `P_FA + P_MD` over threshold tests "H1 iff x >= t".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinErrorEstimate {
    /// Threshold picked on one half of the trials and scored on the other,
    /// averaged over both splits.
    pub cross_fit: f64,
    /// Minimum over thresholds on all trials; biased low when the error curve is flat.
    pub plug_in: f64,
    /// Binomial standard error of an error sum at the chosen thresholds.
    pub stderr: f64,
    /// Plug-in minimizing threshold on all trials.
    pub threshold: f64,
}

struct Sorted {
    h0: Vec<f64>,
    h1: Vec<f64>,
}

impl Sorted {
    fn new(h0: impl Iterator<Item = f64>, h1: impl Iterator<Item = f64>) -> Self {
        let mut h0: Vec<f64> = h0.collect();
        let mut h1: Vec<f64> = h1.collect();
        h0.sort_by(f64::total_cmp);
        h1.sort_by(f64::total_cmp);
        Sorted { h0, h1 }
    }

    /// `(P_FA, P_MD)` of "H1 iff x >= t".
    fn rates(&self, t: f64) -> (f64, f64) {
        let below0 = self.h0.partition_point(|&v| v < t);
        let below1 = self.h1.partition_point(|&v| v < t);
        (
            (self.h0.len() - below0) as f64 / self.h0.len() as f64,
            below1 as f64 / self.h1.len() as f64,
        )
    }

    /// Threshold minimizing the plug-in error sum, placed midway into the gap
    /// below the first minimizing candidate.
    fn best(&self) -> (f64, f64) {
        let mut candidates: Vec<f64> = self.h0.iter().chain(&self.h1).copied().collect();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        if let Some(&top) = candidates.last() {
            candidates.push(if top.is_finite() { top + 1.0 } else { f64::INFINITY });
        }
        let mut best = (f64::NEG_INFINITY, 1.0);
        let mut prev: Option<f64> = None;
        for t in candidates {
            let (fa, md) = self.rates(t);
            if fa + md < best.1 {
                let mid = match prev {
                    Some(p) if (t - p).is_finite() => p + (t - p) / 2.0,
                    _ => t,
                };
                best = (mid, fa + md);
            }
            prev = Some(t);
        }
        best
    }
}

/// Estimates Willie's best threshold-test error sum from statistic samples.
pub fn estimate_min_error(h0: &[f64], h1: &[f64]) -> MinErrorEstimate {
    let full = Sorted::new(h0.iter().copied(), h1.iter().copied());
    let (threshold, plug_in) = full.best();
    let half = |v: &[f64], parity: usize| -> Vec<f64> { v.iter().skip(parity).step_by(2).copied().collect() };
    let split = |p: usize| Sorted::new(half(h0, p).into_iter(), half(h1, p).into_iter());
    let (a, b) = (split(0), split(1));
    let cross = if a.h0.is_empty() || a.h1.is_empty() || b.h0.is_empty() || b.h1.is_empty() {
        None
    } else {
        let (ta, _) = a.best();
        let (tb, _) = b.best();
        let on_b = b.rates(ta);
        let on_a = a.rates(tb);
        Some(((on_a.0 + on_b.0) / 2.0, (on_a.1 + on_b.1) / 2.0))
    };
    let (fa, md) = cross.unwrap_or_else(|| full.rates(threshold));
    let stderr = (fa * (1.0 - fa) / h0.len().max(1) as f64 + md * (1.0 - md) / h1.len().max(1) as f64).sqrt();
    MinErrorEstimate {
        cross_fit: fa + md,
        plug_in,
        stderr,
        threshold,
    }
}
