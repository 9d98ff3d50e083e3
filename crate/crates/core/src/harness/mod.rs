//! Monte Carlo engine: ROC curves, limit sweeps, spectral checks and result
//! persistence. All randomness comes from per-trial substreams, so outputs
//! depend only on configuration and seed.

mod bandwidth;
mod persist;
mod roc;
pub mod stats;
mod sweep;

pub use bandwidth::{bandwidth_report, concatenated_waveform, BandwidthReport, SpectrumRow};
pub use persist::{git_describe, persist_results, read_meta, read_results, sidecar_path, write_json, RunMeta};
pub use roc::{
    auc_separated, dominance, run_roc, run_rocs, sample_statistics, Dominance, Experiment, IcdExperiment, RocCurve,
    RocPoint, StatisticSamples, ThresholdGrid,
};
pub use stats::{estimate_min_error, MinErrorEstimate};
pub use sweep::{
    sweep_known_limit, sweep_known_limit_detail, sweep_unknown_limit, sweep_unknown_limit_detail, SweepDetail, SweepRow,
};
