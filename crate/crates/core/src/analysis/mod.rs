//! Exact computations: binomial-mixture pmfs and likelihood ratios for the
//! known-path-loss test, exact error curves, the shifted-Poisson total
//! variation distance and the covert design rules.

mod mixture;
mod poisson;
pub mod quadrature;

pub use mixture::{
    binomial_log_pmf, covert_design_known, exact_error_known, lr_ratio, lrt_pulse_count, lrt_table,
    mixture_pmf, superposition_pmf, ErrorCurve, H1Model, KnownDesign, LrtValue, MixturePmf,
    ThresholdErrors,
};
pub use poisson::{
    min_alice_width, min_jammer_intensity, poisson_log_pmf, shifted_poisson_error_sum,
    tv_poisson_shifted, JammerDesign, TvReport,
};

/// `ln Gamma(x)`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `m ln p` with `0 ln 0 = 0`.
pub(crate) fn xlogy(m: f64, p: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        m * p.ln()
    }
}
