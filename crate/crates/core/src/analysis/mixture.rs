use serde::{Deserialize, Serialize};

use super::quadrature::integrate;
use super::{ln_gamma, xlogy};
use crate::error::{ensure, Result};
use crate::{Hypothesis, Priors};

/// Masses below this are treated as numerically zero when forming ratios.
const UNDERFLOW_MASS: f64 = 1e-300;

/// `ln C(n, m) + m ln p + (n - m) ln(1 - p)`.
pub fn binomial_log_pmf(m: u64, n: u64, p: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    ln_binom(n, m) + xlogy(mf, p) + xlogy(nf - mf, 1.0 - p)
}

fn ln_binom(n: u64, m: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(m as f64 + 1.0) - ln_gamma((n - m) as f64 + 1.0)
}

/// Pulse-count pmf when the per-slot rate is uniform on `[lo, lo + delta]`:
/// `pmf(m) = (1/delta) * integral Binomial(m; n, p) dp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePmf {
    pub n: u64,
    /// Shift of the mixing range in pulses (`alpha n` under H1, else 0).
    pub shift: f64,
    pub mu: f64,
    pub delta: f64,
    pub log_pmf: Vec<f64>,
    pub pmf: Vec<f64>,
}

impl MixturePmf {
    pub fn total(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

/// Natural log of `(1/width) * integral_{lo}^{lo+width} Binomial(m; n, p) dp`.
///
/// The integrand is scaled by its maximum on the range so that tiny masses
/// keep full relative precision; the initial partition brackets the binomial
/// peak at a few standard deviations.
fn log_mixture_mass(m: u64, n: u64, lo: f64, width: f64) -> f64 {
    let hi = lo + width;
    let (mf, nf) = (m as f64, n as f64);
    let log_c = ln_binom(n, m);
    let g = |p: f64| log_c + xlogy(mf, p) + xlogy(nf - mf, 1.0 - p);
    let peak = (mf / nf).clamp(lo, hi);
    let g_peak = g(peak);
    let sigma = (peak * (1.0 - peak)).max(1.0 / nf).sqrt() / nf.sqrt();

    let mut breaks = vec![lo, hi, peak];
    for k in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        for p in [peak - k * sigma, peak + k * sigma] {
            if p > lo && p < hi {
                breaks.push(p);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let scaled = integrate(|p| (g(p) - g_peak).exp(), &breaks, 1e-300, 1e-13);
    g_peak + scaled.value.ln() - width.ln()
}

/// Mixture pmf of the pulse count under either hypothesis.
///
/// Under H0 the rate `b/n` is uniform on `[mu, mu + delta]`; under H1 the
/// range is shifted by `alpha`.
pub fn mixture_pmf(n: u64, alpha: f64, mu: f64, delta: f64, hypothesis: Hypothesis) -> Result<MixturePmf> {
    ensure(n >= 1, "n", || "must be >= 1".into())?;
    ensure(delta > 0.0, "delta", || format!("{delta} must be > 0"))?;
    ensure(alpha >= 0.0, "alpha", || format!("{alpha} must be >= 0"))?;
    let shift = if hypothesis.alice_transmits() { alpha } else { 0.0 };
    let lo = mu + shift;
    ensure(lo >= 0.0 && lo + delta <= 1.0 + 1e-15, "mu", || {
        format!("b range [{}, {}] n escapes [0, n]", lo, lo + delta)
    })?;
    let log_pmf: Vec<f64> = (0..=n).map(|m| log_mixture_mass(m, n, lo, delta)).collect();
    let pmf = log_pmf.iter().map(|l| l.exp()).collect();
    Ok(MixturePmf {
        n,
        shift: shift * n as f64,
        mu,
        delta,
        log_pmf,
        pmf,
    })
}

/// Value of the likelihood ratio at one count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LrtValue {
    Finite(f64),
    Infinite,
    /// Both masses underflow; the ratio carries no information.
    Undefined,
}

impl LrtValue {
    pub fn value(self) -> Option<f64> {
        match self {
            LrtValue::Finite(v) => Some(v),
            LrtValue::Infinite => Some(f64::INFINITY),
            LrtValue::Undefined => None,
        }
    }

    fn from_logs(l1: f64, l0: f64) -> Self {
        let floor = UNDERFLOW_MASS.ln();
        if l1 < floor && l0 < floor {
            LrtValue::Undefined
        } else if l0 == f64::NEG_INFINITY {
            LrtValue::Infinite
        } else {
            let v = (l1 - l0).exp();
            if v.is_infinite() {
                LrtValue::Infinite
            } else {
                LrtValue::Finite(v)
            }
        }
    }
}

/// `Lambda(m) = P(M = m | H1) / P(M = m | H0)` for every `m` in `0..=n`.
pub fn lrt_table(n: u64, alpha: f64, mu: f64, delta: f64) -> Result<Vec<LrtValue>> {
    let p0 = mixture_pmf(n, alpha, mu, delta, Hypothesis::H0)?;
    let p1 = mixture_pmf(n, alpha, mu, delta, Hypothesis::H1)?;
    Ok(p1
        .log_pmf
        .iter()
        .zip(&p0.log_pmf)
        .map(|(&l1, &l0)| LrtValue::from_logs(l1, l0))
        .collect())
}

/// Likelihood ratio of the pulse count at `m`.
pub fn lrt_pulse_count(m: u64, n: u64, alpha: f64, mu: f64, delta: f64) -> Result<LrtValue> {
    ensure(m <= n, "m", || format!("{m} > n = {n}"))?;
    ensure(delta > 0.0, "delta", || format!("{delta} must be > 0"))?;
    ensure(alpha >= 0.0, "alpha", || format!("{alpha} must be >= 0"))?;
    ensure(mu >= 0.0 && mu + alpha + delta <= 1.0 + 1e-15, "mu", || {
        "b range escapes [0, n]".into()
    })?;
    Ok(LrtValue::from_logs(
        log_mixture_mass(m, n, mu + alpha, delta),
        log_mixture_mass(m, n, mu, delta),
    ))
}

/// `R(m) = P(M(b') = m) / P(M(b) = m)` for binomials with means `b <= b'`.
pub fn lr_ratio(m: u64, n: u64, b: f64, b_prime: f64) -> Result<f64> {
    let nf = n as f64;
    ensure(b > 0.0 && b < nf, "b", || format!("{b} outside (0, {n})"))?;
    ensure(b_prime > 0.0 && b_prime < nf, "b_prime", || format!("{b_prime} outside (0, {n})"))?;
    ensure(b <= b_prime, "b_prime", || format!("need b <= b', got {b} > {b_prime}"))?;
    ensure(m <= n, "m", || format!("{m} > n = {n}"))?;
    let mf = m as f64;
    Ok((mf * (b_prime / b).ln() + (nf - mf) * ((nf - b_prime) / (nf - b)).ln()).exp())
}

/// Which law the H1 pulse count follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum H1Model {
    /// Binomial with mean `(beta + alpha) n`, mixed over `beta`.
    #[default]
    Shifted,
    /// `Binomial(n, alpha) + Binomial(n, beta)`, as the construction draws it.
    Superposition,
}

/// pmf of `Binomial(n, alpha) + M0` where `M0` has pmf `base`.
pub fn superposition_pmf(base: &[f64], n: u64, alpha: f64) -> Vec<f64> {
    let binom: Vec<f64> = (0..=n).map(|k| binomial_log_pmf(k, n, alpha).exp()).collect();
    let first = binom.iter().position(|&p| p > 0.0).unwrap_or(0);
    let last = binom.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut out = vec![0.0; base.len() + n as usize];
    for (i, &b) in base.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        for k in first..=last {
            out[i + k] += b * binom[k];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdErrors {
    /// Declare H1 iff `M >= threshold`.
    pub threshold: u64,
    pub p_fa: f64,
    pub p_md: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub points: Vec<ThresholdErrors>,
    pub min_error_sum: f64,
    pub argmin: u64,
    /// `min P(H0) P_FA + P(H1) P_MD`.
    pub min_bayes_error: f64,
    pub bayes_argmin: u64,
}

/// Exact false-alarm and missed-detection probabilities of every integer
/// threshold on the pulse count, with `beta` integrated out.
pub fn exact_error_known(
    n: u64,
    alpha: f64,
    mu: f64,
    delta: f64,
    priors: Priors,
    model: H1Model,
) -> Result<ErrorCurve> {
    priors.validate()?;
    let p0 = mixture_pmf(n, alpha, mu, delta, Hypothesis::H0)?.pmf;
    let p1 = match model {
        H1Model::Shifted => mixture_pmf(n, alpha, mu, delta, Hypothesis::H1)?.pmf,
        H1Model::Superposition => superposition_pmf(&p0, n, alpha),
    };
    Ok(error_curve(&p0, &p1, priors))
}

/// Threshold sweep over two pmfs on `0..`; thresholds run to one past the support.
pub(crate) fn error_curve(p0: &[f64], p1: &[f64], priors: Priors) -> ErrorCurve {
    let len = p0.len().max(p1.len());
    let at = |p: &[f64], k: usize| p.get(k).copied().unwrap_or(0.0);
    // P_FA(t) = sum_{m >= t} p0, accumulated from the top.
    let mut upper0 = vec![0.0; len + 1];
    for k in (0..len).rev() {
        upper0[k] = upper0[k + 1] + at(p0, k);
    }
    let mut points = Vec::with_capacity(len + 1);
    let mut lower1: f64 = 0.0;
    for t in 0..=len {
        points.push(ThresholdErrors {
            threshold: t as u64,
            p_fa: upper0[t].min(1.0),
            p_md: lower1.min(1.0),
        });
        lower1 += at(p1, t);
    }
    let (argmin, min_error_sum) = points
        .iter()
        .map(|p| (p.threshold, p.p_fa + p.p_md))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty sweep");
    let (bayes_argmin, min_bayes_error) = points
        .iter()
        .map(|p| (p.threshold, priors.h0 * p.p_fa + priors.h1 * p.p_md))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty sweep");
    ErrorCurve {
        points,
        min_error_sum,
        argmin,
        min_bayes_error,
        bayes_argmin,
    }
}

/// Design constants that keep the pulse-count test covert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnownDesign {
    pub alpha: f64,
    pub eta: f64,
}

/// `alpha = epsilon delta / 2`, `eta = epsilon delta / 4`.
pub fn covert_design_known(epsilon: f64, delta: f64) -> Result<KnownDesign> {
    ensure(epsilon > 0.0 && epsilon <= 1.0, "epsilon", || format!("{epsilon} not in (0, 1]"))?;
    ensure(delta > 0.0 && delta <= 1.0, "delta", || format!("{delta} not in (0, 1]"))?;
    Ok(KnownDesign {
        alpha: epsilon * delta / 2.0,
        eta: epsilon * delta / 4.0,
    })
}

impl From<KnownDesign> for (f64, f64) {
    fn from(d: KnownDesign) -> Self {
        (d.alpha, d.eta)
    }
}
