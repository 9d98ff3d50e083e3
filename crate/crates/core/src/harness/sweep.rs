use serde::{Deserialize, Serialize};

use super::roc::sample_statistics;
use super::stats::{estimate_min_error, MinErrorEstimate};
use crate::analysis::{exact_error_known, tv_poisson_shifted, H1Model};
use crate::detectors::DetectorKind;
use crate::exec::derive_seed;
use crate::scenario::{KnownPathLossConfig, UnknownPathLossConfig};
use crate::{Error, Result, RunOptions};

/// One point of a limit sweep. Serializes to the sweep CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Swept parameter (slot count `n` or thinned mean `lambda`).
    pub param: f64,
    /// Cross-fitted empirical minimum of `P_FA + P_MD`.
    pub empirical_error_sum: f64,
    pub exact_error_sum: f64,
    pub stderr: f64,
}

impl SweepRow {
    /// `|empirical - exact|` in standard errors.
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            (self.empirical_error_sum - self.exact_error_sum).abs() / self.stderr
        } else if self.empirical_error_sum == self.exact_error_sum {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// A sweep row together with the plug-in estimate it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepDetail {
    pub row: SweepRow,
    pub estimate: MinErrorEstimate,
}

fn to_rows(details: Vec<SweepDetail>) -> Vec<SweepRow> {
    details.into_iter().map(|d| d.row).collect()
}

fn row_seed(seed: u64, param: f64) -> u64 {
    derive_seed(seed, param.to_bits())
}

/// Pulse-count test versus `n` at fixed `alpha`, `mu`, `delta`.
///
/// The exact counterpart uses the superposition law for H1, which is what the
/// trial generator draws.
pub fn sweep_known_limit_detail(
    base: &KnownPathLossConfig,
    n_values: &[u64],
    trials: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<Vec<SweepDetail>> {
    if n_values.is_empty() {
        return Err(Error::invalid("n_values", "must be non-empty"));
    }
    n_values
        .iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.t_sec = n as f64 / cfg.w_hz;
            cfg.validate()?;
            let exact = exact_error_known(n, cfg.alpha, cfg.mu, cfg.delta, cfg.priors, H1Model::Superposition)?;
            let s = sample_statistics(&cfg, &[DetectorKind::PulseCount], trials, row_seed(seed, n as f64), opts)?;
            let est = estimate_min_error(&s[0].h0, &s[0].h1);
            Ok(SweepDetail {
                row: SweepRow {
                    param: n as f64,
                    empirical_error_sum: est.cross_fit,
                    exact_error_sum: exact.min_error_sum,
                    stderr: est.stderr,
                },
                estimate: est,
            })
        })
        .collect()
}

pub fn sweep_known_limit(
    base: &KnownPathLossConfig,
    n_values: &[u64],
    trials: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<Vec<SweepRow>> {
    sweep_known_limit_detail(base, n_values, trials, seed, opts).map(to_rows)
}

/// Level-count test versus the thinned mean `lambda`; the exact counterpart
/// is `1 - V_T`.
pub fn sweep_unknown_limit_detail(
    base: &UnknownPathLossConfig,
    lambda_values: &[f64],
    trials: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<Vec<SweepDetail>> {
    if lambda_values.is_empty() {
        return Err(Error::invalid("lambda_values", "must be non-empty"));
    }
    lambda_values
        .iter()
        .map(|&lambda| {
            let tv = tv_poisson_shifted(lambda)?;
            let cfg = base.with_thinned_lambda(lambda);
            cfg.validate()?;
            let s = sample_statistics(&cfg, &[DetectorKind::LevelCount], trials, row_seed(seed, lambda), opts)?;
            let est = estimate_min_error(&s[0].h0, &s[0].h1);
            Ok(SweepDetail {
                row: SweepRow {
                    param: lambda,
                    empirical_error_sum: est.cross_fit,
                    exact_error_sum: tv.min_error_sum,
                    stderr: est.stderr,
                },
                estimate: est,
            })
        })
        .collect()
}

pub fn sweep_unknown_limit(
    base: &UnknownPathLossConfig,
    lambda_values: &[f64],
    trials: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<Vec<SweepRow>> {
    sweep_unknown_limit_detail(base, lambda_values, trials, seed, opts).map(to_rows)
}
