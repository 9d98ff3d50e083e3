//! Pulse shapes, pulse-train synthesis and spectral estimation.
//!
//! Continuous time is represented by an oversampled grid: a symbol period
//! spans `samples_per_symbol` samples and pulse delays are quantized to the
//! nearest sample instant.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub const DEFAULT_SAMPLES_PER_SYMBOL: usize = 48;
pub const DEFAULT_SPAN_SYMBOLS: usize = 12;

/// Unit-energy square-root raised cosine pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub rolloff: f64,
    pub samples_per_symbol: usize,
    pub span_symbols: usize,
    pub taps: Vec<f64>,
}

/// SRRC impulse response at `x = t / T_s`, unnormalized.
fn srrc_value(x: f64, rolloff: f64) -> f64 {
    if x == 0.0 {
        return 1.0 - rolloff + 4.0 * rolloff / PI;
    }
    let quarter = 4.0 * rolloff * x;
    if rolloff > 0.0 && (1.0 - quarter * quarter).abs() < 1e-10 {
        let arg = PI / (4.0 * rolloff);
        return rolloff / SQRT_2 * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * x * (1.0 - rolloff)).sin() + quarter * (PI * x * (1.0 + rolloff)).cos();
    num / (PI * x * (1.0 - quarter * quarter))
}

impl PulseShape {
    /// Builds the truncated SRRC pulse with `span_symbols * samples_per_symbol + 1`
    /// taps, normalized so that the squared taps sum to one.
    pub fn srrc(rolloff: f64, samples_per_symbol: usize, span_symbols: usize) -> Result<Self> {
        ensure((0.0..=1.0).contains(&rolloff), "rolloff", || {
            format!("{rolloff} is outside [0, 1]")
        })?;
        ensure(samples_per_symbol >= 2, "samples_per_symbol", || {
            format!("{samples_per_symbol} < 2")
        })?;
        ensure(span_symbols >= 2, "span_symbols", || {
            format!("{span_symbols} is too short to contain the main lobe")
        })?;
        ensure(span_symbols % 2 == 0, "span_symbols", || {
            format!("{span_symbols} must be even")
        })?;

        let len = span_symbols * samples_per_symbol + 1;
        let center = (len / 2) as isize;
        let mut taps: Vec<f64> = (0..len as isize)
            .map(|i| srrc_value((i - center) as f64 / samples_per_symbol as f64, rolloff))
            .collect();
        // Symmetrize exactly; the formula is evaluated at +x and -x separately.
        for i in 0..len / 2 {
            let avg = 0.5 * (taps[i] + taps[len - 1 - i]);
            taps[i] = avg;
            taps[len - 1 - i] = avg;
        }
        let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
        taps.iter_mut().for_each(|t| *t /= norm);

        Ok(PulseShape {
            rolloff,
            samples_per_symbol,
            span_symbols,
            taps,
        })
    }

    /// The default pulse: rolloff 0.2, 48 samples per symbol, 12-symbol span.
    pub fn default_srrc() -> Self {
        Self::srrc(0.2, DEFAULT_SAMPLES_PER_SYMBOL, DEFAULT_SPAN_SYMBOLS)
            .expect("default pulse parameters are valid")
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Sample rate that realizes symbol period `symbol_period` (seconds).
    pub fn sample_rate(&self, symbol_period: f64) -> f64 {
        self.samples_per_symbol as f64 / symbol_period
    }

    /// Analytic `|P(f)|^2` of this pulse in discrete-time units, with `nu` in
    /// cycles per sample. Integrates to one over `[-1/2, 1/2)`.
    pub fn analytic_spectrum(&self, nu: f64) -> f64 {
        let sps = self.samples_per_symbol as f64;
        sps * raised_cosine_shape(nu * sps, self.rolloff)
    }
}

/// Raised-cosine spectral shape at normalized frequency `f * T_s`; equal to 1
/// in the flat band and 0 beyond `(1 + rolloff) / 2`.
pub fn raised_cosine_shape(f_ts: f64, rolloff: f64) -> f64 {
    let f = f_ts.abs();
    let lo = (1.0 - rolloff) / 2.0;
    let hi = (1.0 + rolloff) / 2.0;
    if f <= lo {
        1.0
    } else if f > hi {
        0.0
    } else {
        0.5 * (1.0 + (PI / rolloff * (f - lo)).cos())
    }
}

/// Oversampled complex-baseband waveform standing in for a signal on `[t0, t0 + duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub rate: f64,
    pub t0: f64,
    pub samples: Vec<Complex64>,
}

impl SampledSignal {
    pub fn zeros(rate: f64, len: usize) -> Self {
        SampledSignal {
            rate,
            t0: 0.0,
            samples: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    /// `sum |x[k]|^2`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean per-sample power.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    /// Adds `other` sample-wise; lengths must agree.
    pub fn add_assign(&mut self, other: &SampledSignal) {
        debug_assert_eq!(self.samples.len(), other.samples.len());
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += b;
        }
    }
}

/// Number of samples covering `duration` seconds at `rate`.
pub fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate).round() as usize
}

/// Adds `amplitude * p[k - start]` into `out`, truncating at the window edge.
pub(crate) fn add_pulse(out: &mut [Complex64], taps: &[f64], start: usize, amplitude: Complex64) {
    if start >= out.len() {
        return;
    }
    let end = (start + taps.len()).min(out.len());
    for (o, &t) in out[start..end].iter_mut().zip(taps) {
        *o += amplitude * t;
    }
}

/// Synthesizes `sum_k symbols[k] * p(t - delays[k])` on `[0, duration)`.
///
/// The first tap of each pulse sits at its delay, rounded to the nearest
/// sample. Pulses crossing the end of the window are truncated.
pub fn synth_pulse_train(
    symbols: &[Complex64],
    delays: &[f64],
    pulse: &PulseShape,
    rate: f64,
    duration: f64,
) -> Result<SampledSignal> {
    ensure(symbols.len() == delays.len(), "delays", || {
        format!("{} delays for {} symbols", delays.len(), symbols.len())
    })?;
    ensure(rate.is_finite() && rate > 0.0, "rate", || format!("{rate} must be positive"))?;
    ensure(duration.is_finite() && duration >= 0.0, "duration", || {
        format!("{duration} must be non-negative")
    })?;
    if let Some(bad) = delays.iter().find(|&&d| !(0.0..=duration).contains(&d)) {
        return Err(crate::Error::invalid(
            "delays",
            format!("delay {bad} outside [0, {duration}]"),
        ));
    }
    let mut out = SampledSignal::zeros(rate, sample_count(duration, rate));
    for (&a, &d) in symbols.iter().zip(delays) {
        let start = (d * rate).round() as usize;
        add_pulse(&mut out.samples, &pulse.taps, start, a);
    }
    Ok(out)
}

/// Averaged-periodogram PSD estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Bin centers in Hz, strictly increasing and symmetric about zero.
    pub freqs: Vec<f64>,
    /// Power per Hz.
    pub psd: Vec<f64>,
    pub resolution: f64,
    pub segments: usize,
}

impl SpectrumEstimate {
    /// `sum psd * resolution`, the mean per-sample power of the analysed samples.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution
    }

    /// Fraction of power at `|f| > cutoff` (0 for an all-zero spectrum).
    pub fn fraction_beyond(&self, cutoff: f64) -> f64 {
        let total: f64 = self.psd.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        let outside: f64 = self
            .freqs
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| f.abs() > cutoff)
            .map(|(_, p)| p)
            .sum();
        outside / total
    }

    /// Smallest symmetric band `[-b, b]` holding `fraction` of the power.
    pub fn occupied_bandwidth(&self, fraction: f64) -> f64 {
        let total: f64 = self.psd.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut order: Vec<usize> = (0..self.freqs.len()).collect();
        order.sort_by(|&a, &b| self.freqs[a].abs().total_cmp(&self.freqs[b].abs()));
        let mut acc = 0.0;
        for i in order {
            acc += self.psd[i];
            if acc >= fraction * total {
                return self.freqs[i].abs() + 0.5 * self.resolution;
            }
        }
        self.freqs.last().copied().unwrap_or(0.0)
    }
}

/// Averages periodograms of consecutive non-overlapping segments of
/// `segment_len` samples (rectangular window). Trailing samples that do not
/// fill a segment are ignored.
///
/// Each segment is modulated by half a bin before the FFT so that bin
/// centers fall at `(k + 1/2) * rate / segment_len`, symmetric about zero.
pub fn estimate_psd(signal: &SampledSignal, segment_len: usize) -> Result<SpectrumEstimate> {
    ensure(!signal.is_empty(), "signal", || "signal is empty".into())?;
    ensure(
        segment_len >= 2 && segment_len.is_power_of_two(),
        "segment_len",
        || format!("{segment_len} must be a power of two >= 2"),
    )?;
    ensure(segment_len <= signal.len(), "segment_len", || {
        format!("{segment_len} exceeds signal length {}", signal.len())
    })?;

    let len = segment_len;
    let segments = signal.len() / len;
    let fft = FftPlanner::new().plan_fft_forward(len);
    let shift: Vec<Complex64> = (0..len)
        .map(|k| Complex64::from_polar(1.0, -PI * k as f64 / len as f64))
        .collect();

    let mut acc = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for seg in signal.samples.chunks_exact(len) {
        for ((b, &x), &s) in buf.iter_mut().zip(seg).zip(&shift) {
            *b = x * s;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (segments as f64 * len as f64 * signal.rate);
    let resolution = signal.rate / len as f64;
    // fftshift: bin k (k + 1/2 cycles) maps to index (k + len/2) mod len.
    let half = len / 2;
    let mut psd = vec![0.0; len];
    let mut freqs = vec![0.0; len];
    for k in 0..len {
        let idx = (k + half) % len;
        psd[idx] = acc[k] * scale;
    }
    for (idx, f) in freqs.iter_mut().enumerate() {
        *f = (idx as f64 - half as f64 + 0.5) * resolution;
    }
    Ok(SpectrumEstimate {
        freqs,
        psd,
        resolution,
        segments,
    })
}
