use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ln_gamma, xlogy};
use crate::error::{ensure, Result};

/// Terms whose mass falls below this are dropped from the TV sum.
const TAIL_CUTOFF: f64 = 1e-16;

pub fn poisson_log_pmf(k: u64, lambda: f64) -> f64 {
    xlogy(k as f64, lambda) - lambda - ln_gamma(k as f64 + 1.0)
}

/// Distance between `Pois(lambda)` (H0 level count) and `Pois(lambda) + 1` (H1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub lambda: f64,
    pub tv_exact: f64,
    /// `lambda^lambda e^-lambda / lambda!`, only for integer `lambda`.
    pub tv_closed_form: Option<f64>,
    pub stirling_bound: f64,
    pub min_error_sum: f64,
    /// Declare H1 iff the level count is at least this.
    pub optimal_threshold: u64,
    /// Bound on the mass discarded by truncating the sum.
    pub truncation_error: f64,
}

fn is_positive_integer(x: f64) -> bool {
    x >= 1.0 && x.fract() == 0.0 && x < 2f64.powi(52)
}

/// Index range holding all terms of `Pois(lambda)` above the cutoff, plus a
/// geometric bound on the discarded tails.
fn support(lambda: f64) -> (u64, u64, f64) {
    let cut = TAIL_CUTOFF.ln();
    let mode = lambda.floor() as u64;
    let mut hi = mode;
    while poisson_log_pmf(hi + 1, lambda) >= cut {
        hi += 1;
    }
    let mut lo = mode;
    while lo > 0 && poisson_log_pmf(lo - 1, lambda) >= cut {
        lo -= 1;
    }
    // Beyond `hi` successive ratios are at most lambda / (hi + 2) < 1.
    let upper = poisson_log_pmf(hi + 1, lambda).exp() / (1.0 - lambda / (hi as f64 + 2.0));
    let lower = if lo == 0 {
        0.0
    } else {
        let q = (lo as f64 - 1.0) / lambda;
        poisson_log_pmf(lo - 1, lambda).exp() / (1.0 - q)
    };
    (lo, hi, upper + lower)
}

/// `V_T(P0, P1)` by direct summation, where `P1(k) = P0(k - 1)`.
pub fn tv_poisson_shifted(lambda: f64) -> Result<TvReport> {
    ensure(lambda > 0.0 && lambda.is_finite(), "lambda", || format!("{lambda} must be > 0"))?;
    let (lo, hi, tail) = support(lambda);
    let p0 = |k: u64| poisson_log_pmf(k, lambda).exp();
    let mut l1 = 0.0;
    // P1 has one extra term at hi + 1.
    for k in lo..=hi + 1 {
        let a = if k <= hi { p0(k) } else { 0.0 };
        let b = if k > lo { p0(k - 1) } else { 0.0 };
        l1 += (a - b).abs();
    }
    let tv_exact = (0.5 * l1).clamp(0.0, 1.0);
    let tv_closed_form = is_positive_integer(lambda).then(|| {
        (lambda * lambda.ln() - lambda - ln_gamma(lambda + 1.0)).exp()
    });
    Ok(TvReport {
        lambda,
        tv_exact,
        tv_closed_form,
        stirling_bound: 1.0 / (2.0 * PI * lambda).sqrt(),
        min_error_sum: 1.0 - tv_exact,
        optimal_threshold: lambda.ceil() as u64,
        truncation_error: tail,
    })
}

/// `P_FA + P_MD` of the test "declare H1 iff K >= threshold", which is
/// `1 - P0(threshold - 1)`.
pub fn shifted_poisson_error_sum(lambda: f64, threshold: u64) -> Result<f64> {
    ensure(lambda > 0.0 && lambda.is_finite(), "lambda", || format!("{lambda} must be > 0"))?;
    Ok(match threshold {
        0 => 1.0,
        t => 1.0 - poisson_log_pmf(t - 1, lambda).exp(),
    })
}

/// Jammer intensity requirement for a covertness target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammerDesign {
    /// `dP_j d_aw^r / (2 pi dP_a eps^2)`.
    pub lambda_j: f64,
    /// Mean number of jammer levels inside Alice's received range.
    pub thinned_lambda: f64,
    /// Smallest `lambda_j` whose thinned mean is an integer at or above the bound.
    pub lambda_j_integral: f64,
    pub thinned_lambda_integral: f64,
}

fn check_widths(dp_j: f64, d_aw: f64, r: f64, width: (&'static str, f64), epsilon: f64) -> Result<()> {
    ensure(dp_j > 0.0, "dP_j", || format!("{dp_j} must be > 0"))?;
    ensure(d_aw > 0.0, "d_aw", || format!("{d_aw} must be > 0"))?;
    ensure(r > 0.0, "r", || format!("{r} must be > 0"))?;
    ensure(width.1 > 0.0, width.0, || format!("{} must be > 0", width.1))?;
    ensure(epsilon > 0.0 && epsilon < 1.0, "epsilon", || format!("{epsilon} not in (0, 1)"))
}

/// Minimum jammer level intensity for covertness `epsilon`.
///
/// The continuous bound makes the Stirling estimate equal `epsilon`; the
/// exact distance at a fractional thinned mean can still exceed it, so the
/// integral variant rounds the thinned mean up to the next integer, where the
/// Stirling inequality is strict.
pub fn min_jammer_intensity(dp_j: f64, d_aw: f64, r: f64, dp_a: f64, epsilon: f64) -> Result<JammerDesign> {
    check_widths(dp_j, d_aw, r, ("dP_a", dp_a), epsilon)?;
    let scale = dp_j * d_aw.powf(r) / dp_a;
    let thinned = 1.0 / (2.0 * PI * epsilon * epsilon);
    // Guard against 1/(2 pi eps^2) landing a hair above an integer.
    let thinned_integral = (thinned * (1.0 - 1e-12)).ceil().max(1.0);
    Ok(JammerDesign {
        lambda_j: thinned * scale,
        thinned_lambda: thinned,
        lambda_j_integral: thinned_integral * scale,
        thinned_lambda_integral: thinned_integral,
    })
}

/// Dual rule: smallest Alice power width for a given jammer intensity.
pub fn min_alice_width(lambda_j: f64, dp_j: f64, d_aw: f64, r: f64, epsilon: f64) -> Result<f64> {
    check_widths(dp_j, d_aw, r, ("lambda_j", lambda_j), epsilon)?;
    Ok(dp_j * d_aw.powf(r) / (2.0 * PI * lambda_j * epsilon * epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Discrete, Poisson};

    fn l1(p: impl Fn(u64) -> f64, q: impl Fn(u64) -> f64, upto: u64) -> f64 {
        (0..upto).map(|k| (p(k) - q(k)).abs()).sum::<f64>() / 2.0
    }

    #[test]
    fn unit_lambda() {
        let r = tv_poisson_shifted(1.0).unwrap();
        assert!((r.tv_exact - (-1f64).exp()).abs() < 1e-13);
        assert!((r.tv_closed_form.unwrap() - r.tv_exact).abs() < 1e-13);
        assert_eq!(r.optimal_threshold, 1);
    }

    #[test]
    fn lambda_four() {
        let r = tv_poisson_shifted(4.0).unwrap();
        assert!((r.tv_exact - 0.19537).abs() < 1e-5, "{}", r.tv_exact);
        assert!((r.stirling_bound - 0.19947).abs() < 1e-5);
        assert!(r.tv_exact <= r.stirling_bound);
        assert!((r.min_error_sum + r.tv_exact - 1.0).abs() < 1e-15);
        let pois = Poisson::new(4.0).unwrap();
        let oracle = l1(|k| pois.pmf(k), |k| if k == 0 { 0.0 } else { pois.pmf(k - 1) }, 200);
        assert!((oracle - r.tv_exact).abs() < 1e-12);
    }

    #[test]
    fn large_lambda() {
        let r = tv_poisson_shifted(1e4).unwrap();
        assert!(r.tv_exact < 0.004 && 1.0 - r.min_error_sum < 0.004);
        assert!(r.tv_exact <= r.stirling_bound);
        assert!(r.truncation_error < 1e-14);
    }

    #[test]
    fn fractional_lambda_has_no_closed_form() {
        let r = tv_poisson_shifted(2.5).unwrap();
        assert!(r.tv_closed_form.is_none());
        let pois = Poisson::new(2.5).unwrap();
        assert!((r.tv_exact - pois.pmf(2)).abs() < 1e-13);
        assert_eq!(r.optimal_threshold, 3);
        assert!(tv_poisson_shifted(0.0).is_err());
        assert!(tv_poisson_shifted(-1.0).is_err());
    }

    #[test]
    fn exhaustive_threshold_sweep() {
        for lambda in [0.3, 1.0, 2.5, 7.0, 12.2, 30.0] {
            let r = tv_poisson_shifted(lambda).unwrap();
            let best = (0..200)
                .map(|t| shifted_poisson_error_sum(lambda, t).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!((best - r.min_error_sum).abs() < 1e-12, "lambda {lambda}");
            let at = shifted_poisson_error_sum(lambda, r.optimal_threshold).unwrap();
            assert!((at - best).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_properties() {
        let a = Poisson::new(5.0).unwrap();
        let shifted = |k: u64| if k == 0 { 0.0 } else { a.pmf(k - 1) };
        let c = Poisson::new(5.7).unwrap();
        let ab = l1(|k| a.pmf(k), shifted, 100);
        let ba = l1(shifted, |k| a.pmf(k), 100);
        assert!((ab - ba).abs() < 1e-15);
        let ac = l1(|k| a.pmf(k), |k| c.pmf(k), 100);
        let cb = l1(|k| c.pmf(k), shifted, 100);
        assert!(ab <= ac + cb + 1e-15);
        assert!((ab - tv_poisson_shifted(5.0).unwrap().tv_exact).abs() < 1e-12);
    }

    #[test]
    fn design_substitution() {
        let d = min_jammer_intensity(1.0, 1.0, 2.0, 1.0, 0.1).unwrap();
        assert!((d.lambda_j - 15.9155).abs() < 1e-3);
        assert_eq!(d.thinned_lambda_integral, 16.0);
        let far = min_jammer_intensity(1.0, 2f64.sqrt(), 2.0, 1.0, 0.1).unwrap();
        assert!((far.lambda_j / d.lambda_j - 2.0).abs() < 1e-12);
        let w = min_alice_width(d.lambda_j, 1.0, 1.0, 2.0, 0.1).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        assert!(min_jammer_intensity(0.0, 1.0, 2.0, 1.0, 0.1).is_err());
        assert!(min_jammer_intensity(1.0, 1.0, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn integral_design_meets_target() {
        for eps in [0.05, 0.1, 0.2, 0.25, 0.3, 0.5] {
            let d = min_jammer_intensity(1.0, 1.0, 2.0, 1.0, eps).unwrap();
            let r = tv_poisson_shifted(d.thinned_lambda_integral).unwrap();
            assert!(r.tv_exact < eps, "eps {eps}: {}", r.tv_exact);
        }
    }
}
