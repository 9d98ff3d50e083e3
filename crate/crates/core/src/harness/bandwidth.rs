use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exec::trial_rng;
use crate::scenario::{known_pulse_list, KnownPathLossConfig};
use crate::signals::{add_pulse, estimate_psd, SampledSignal, SpectrumEstimate};
use crate::{Error, Hypothesis, Result, RunOptions};

/// One spectrum bin with the analytic shape scaled to the same total power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub freq: f64,
    pub psd: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub w_hz: f64,
    pub rolloff: f64,
    pub intervals: u64,
    pub samples: usize,
    pub segments: usize,
    /// Mean of `|S(f) - A(f)| / A(f)` over bins with `|f| <= W/2`, both
    /// normalized to unit total power. `None` for an all-zero waveform.
    pub in_band_deviation: Option<f64>,
    /// Power fraction beyond the one-sided band edge `(1 + rolloff) W / 2`.
    pub out_of_band_fraction: f64,
    /// Power fraction beyond `(1 + rolloff) W`.
    pub beyond_full_width_fraction: f64,
    /// One-sided bandwidth holding 99% of the power.
    pub occupied_bandwidth_99: f64,
    pub total_power: f64,
    #[serde(skip)]
    pub spectrum: Vec<SpectrumRow>,
}

/// Transmitted waveform of `intervals` consecutive known-path-loss intervals
/// (both transmitters active, noise-free). Pulses spill across interval
/// boundaries; only the end of the last interval truncates.
pub fn concatenated_waveform(
    cfg: &KnownPathLossConfig,
    intervals: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<SampledSignal> {
    cfg.validate()?;
    if intervals == 0 {
        return Err(Error::invalid("intervals", "must be >= 1"));
    }
    let rate = cfg.rate();
    let per = (cfg.t_sec * rate).round() as usize;
    let taps = &cfg.pulse.taps;
    let chunks = opts.map_indexed(intervals, |i| -> Result<Vec<Complex64>> {
        let mut rng = trial_rng(seed, i, Hypothesis::H1);
        let mut buf = vec![Complex64::new(0.0, 0.0); per + taps.len()];
        for (loc, h) in known_pulse_list(cfg, Hypothesis::H1, &mut rng)? {
            add_pulse(&mut buf, taps, (loc * rate).round() as usize, h);
        }
        Ok(buf)
    });
    let mut out = SampledSignal::zeros(rate, per * intervals as usize);
    for (i, chunk) in chunks.into_iter().enumerate() {
        let chunk = chunk?;
        let start = i * per;
        let end = (start + chunk.len()).min(out.len());
        for (o, c) in out.samples[start..end].iter_mut().zip(&chunk) {
            *o += c;
        }
    }
    Ok(out)
}

/// Compares the averaged periodogram of the construction against the
/// analytic raised-cosine shape.
pub fn bandwidth_report(
    cfg: &KnownPathLossConfig,
    intervals: u64,
    segment_len: usize,
    seed: u64,
    opts: RunOptions,
) -> Result<BandwidthReport> {
    let x = concatenated_waveform(cfg, intervals, seed, opts)?;
    let est = estimate_psd(&x, segment_len)?;
    Ok(report_from(cfg, intervals, x.len(), &est))
}

fn report_from(cfg: &KnownPathLossConfig, intervals: u64, samples: usize, est: &SpectrumEstimate) -> BandwidthReport {
    let rate = cfg.rate();
    let shape: Vec<f64> = est.freqs.iter().map(|f| cfg.pulse.analytic_spectrum(f / rate)).collect();
    let total: f64 = est.psd.iter().sum();
    let shape_total: f64 = shape.iter().sum();
    let scale = if shape_total > 0.0 { total / shape_total } else { 0.0 };

    let in_band_deviation = (total > 0.0).then(|| {
        let (mut acc, mut count) = (0.0, 0usize);
        for ((f, &p), &a) in est.freqs.iter().zip(&est.psd).zip(&shape) {
            if f.abs() <= cfg.w_hz / 2.0 && a > 0.0 {
                acc += ((p / total) - (a / shape_total)).abs() / (a / shape_total);
                count += 1;
            }
        }
        acc / count.max(1) as f64
    });
    let edge = (1.0 + cfg.pulse.rolloff) * cfg.w_hz;
    BandwidthReport {
        w_hz: cfg.w_hz,
        rolloff: cfg.pulse.rolloff,
        intervals,
        samples,
        segments: est.segments,
        in_band_deviation,
        out_of_band_fraction: est.fraction_beyond(edge / 2.0),
        beyond_full_width_fraction: est.fraction_beyond(edge),
        occupied_bandwidth_99: est.occupied_bandwidth(0.99),
        total_power: est.total_power(),
        spectrum: est
            .freqs
            .iter()
            .zip(&est.psd)
            .zip(&shape)
            .map(|((&freq, &psd), &a)| SpectrumRow {
                freq,
                psd,
                analytic: a * scale,
            })
            .collect(),
    }
}
