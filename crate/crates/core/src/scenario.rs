//! Trial generators.
//!
//! Each draw follows the layers of the construction: first the transmitter
//! decisions and counts ([`CountRecord`]), then pulse locations and heights
//! ([`GenieRecord`]), then Willie's waveform. The count layer is drawn from the
//! front of the trial's random stream, so `draw_*_counts` and `draw_*_trial`
//! agree on it for the same stream.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detectors::JammerTiming;
use crate::error::{ensure, Result};
use crate::signals::{add_pulse, synth_pulse_train, PulseShape, SampledSignal};
use crate::{Error, Hypothesis, Priors};

/// Path loss, delay and receiver noise of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub distance: f64,
    pub exponent: f64,
    /// One-sided noise PSD at the receiver.
    pub n0: f64,
    /// Propagation delay in seconds.
    pub delay: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            distance: 1.0,
            exponent: 2.0,
            n0: 0.0,
            delay: 0.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.distance > 0.0, "distance", || format!("{} must be > 0", self.distance))?;
        ensure(self.exponent >= 2.0, "exponent", || format!("{} must be >= 2", self.exponent))?;
        ensure(self.n0 >= 0.0, "n0", || format!("{} must be >= 0", self.n0))?;
        ensure(self.delay >= 0.0, "delay", || format!("{} must be >= 0", self.delay))
    }

    /// Amplitude scaling `d^(-r/2)`.
    pub fn amplitude_gain(&self) -> f64 {
        self.distance.powf(-self.exponent / 2.0)
    }

    /// Complex per-sample noise variance at `rate` (`n0 / 2 * rate` per real dimension).
    pub fn noise_variance(&self, rate: f64) -> f64 {
        self.n0 * rate
    }
}

/// Draws a circularly-symmetric complex Gaussian with total variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Delays and scales `signal` without adding noise; the output keeps the input window.
pub fn propagate(signal: &SampledSignal, ch: &ChannelConfig) -> SampledSignal {
    let gain = ch.amplitude_gain();
    let shift = (ch.delay * signal.rate).round() as usize;
    let mut out = SampledSignal::zeros(signal.rate, signal.len());
    out.t0 = signal.t0;
    if shift < signal.len() {
        for (o, s) in out.samples[shift..].iter_mut().zip(&signal.samples) {
            *o = s * gain;
        }
    }
    out
}

/// Adds complex AWGN of per-sample variance `variance`.
pub fn add_awgn<R: Rng + ?Sized>(signal: &mut SampledSignal, variance: f64, rng: &mut R) {
    if variance == 0.0 {
        return;
    }
    for s in signal.samples.iter_mut() {
        *s += complex_gaussian(rng, variance);
    }
}

/// Path loss, delay and receiver noise applied to one transmitted waveform.
pub fn apply_channel<R: Rng + ?Sized>(
    signal: &SampledSignal,
    ch: &ChannelConfig,
    rng: &mut R,
) -> Result<SampledSignal> {
    ensure(!signal.is_empty(), "signal", || "signal is empty".into())?;
    ch.validate()?;
    let mut out = propagate(signal, ch);
    add_awgn(&mut out, ch.noise_variance(signal.rate), rng);
    Ok(out)
}

/// Layer-one side information: transmitter decisions and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub hypothesis: Hypothesis,
    /// Realized jammer rate (known path loss only).
    pub beta: Option<f64>,
    /// Total pulse count.
    pub m: u64,
    /// Received power levels (unknown path loss only), source identity erased.
    pub power_levels: Vec<f64>,
    /// Levels inside the detection region.
    pub k1: u64,
    /// Levels outside the detection region.
    pub k2: u64,
}

/// Full side information granted to the genie-aided warden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenieRecord {
    pub counts: CountRecord,
    /// Pulse locations in seconds, ascending.
    pub locations: Vec<f64>,
    /// Received pulse heights aligned with `locations`.
    pub heights: Vec<Complex64>,
}

impl std::ops::Deref for GenieRecord {
    type Target = CountRecord;
    fn deref(&self) -> &CountRecord {
        &self.counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Alice,
    Jammer,
}

#[derive(Debug, Clone)]
struct Pulse {
    source: Source,
    location: f64,
    height: Complex64,
}

/// Merges pulses into a genie record, sorting by location to erase the sender.
fn erase_sources(counts: CountRecord, mut pulses: Vec<Pulse>) -> GenieRecord {
    pulses.sort_by(|a, b| a.location.total_cmp(&b.location));
    GenieRecord {
        counts,
        locations: pulses.iter().map(|p| p.location).collect(),
        heights: pulses.iter().map(|p| p.height).collect(),
    }
}

fn synth_source(pulses: &[Pulse], source: Source, pulse: &PulseShape, rate: f64, duration: f64) -> Result<SampledSignal> {
    let (heights, delays): (Vec<Complex64>, Vec<f64>) = pulses
        .iter()
        .filter(|p| p.source == source)
        .map(|p| (p.height, p.location))
        .unzip();
    synth_pulse_train(&heights, &delays, pulse, rate, duration)
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0))
        .expect("probability clamped to [0, 1]")
        .sample(rng)
}

/// Parameters of the known-path-loss construction.
///
/// The jammer sends `Binomial(n, beta)` pulses with `beta ~ U[mu, mu + delta]`;
/// Alice adds `Binomial(n, alpha)` pulses under H1. All delays are uniform on
/// `[0, T]` and all symbols are complex Gaussian with variance `sigma_sq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownPathLossConfig {
    pub w_hz: f64,
    pub t_sec: f64,
    pub alpha: f64,
    pub mu: f64,
    pub delta: f64,
    /// Symbol variance shared by Alice and the jammer.
    pub sigma_sq: f64,
    pub pulse: PulseShape,
    pub priors: Priors,
    /// Willie's receiver noise PSD.
    pub n0: f64,
}

impl KnownPathLossConfig {
    /// Config with `n` symbol slots (`W = 1 Hz`, `T = n s`).
    pub fn with_slots(n: u64, alpha: f64, mu: f64, delta: f64) -> Self {
        KnownPathLossConfig {
            w_hz: 1.0,
            t_sec: n as f64,
            alpha,
            mu,
            delta,
            sigma_sq: 1.0,
            pulse: PulseShape::default_srrc(),
            priors: Priors::default(),
            n0: 0.0,
        }
    }

    /// `n = floor(W T)`.
    pub fn n(&self) -> u64 {
        slots(self.w_hz, self.t_sec)
    }

    pub fn rate(&self) -> f64 {
        self.pulse.samples_per_symbol as f64 * self.w_hz
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.w_hz > 0.0 && self.t_sec > 0.0, "w_hz", || "W and T must be positive".into())?;
        ensure(self.n() >= 1, "t_sec", || "W T must be at least one slot".into())?;
        ensure((0.0..1.0).contains(&self.alpha), "alpha", || format!("{} not in [0, 1)", self.alpha))?;
        ensure(self.mu >= 0.0, "mu", || format!("{} must be >= 0", self.mu))?;
        ensure(self.delta > 0.0 && self.mu + self.delta <= 1.0, "delta", || {
            format!("need 0 <= mu < mu + delta <= 1, got mu={} delta={}", self.mu, self.delta)
        })?;
        ensure(self.delta >= self.alpha, "delta", || {
            format!("delta {} must be >= alpha {}", self.delta, self.alpha)
        })?;
        ensure(self.sigma_sq >= 0.0, "sigma_sq", || "must be >= 0".into())?;
        ensure(self.n0 >= 0.0, "n0", || "must be >= 0".into())?;
        self.priors.validate()
    }
}

pub(crate) fn slots(w_hz: f64, t_sec: f64) -> u64 {
    (w_hz * t_sec * (1.0 + 1e-12)).floor() as u64
}

struct KnownCounts {
    record: CountRecord,
    m_alice: u64,
    m_jammer: u64,
}

fn draw_known_layer<R: Rng + ?Sized>(cfg: &KnownPathLossConfig, hypothesis: Hypothesis, rng: &mut R) -> KnownCounts {
    let n = cfg.n();
    let beta = rng.random_range(cfg.mu..=cfg.mu + cfg.delta);
    let m_jammer = binomial(rng, n, beta);
    let m_alice = if hypothesis.alice_transmits() {
        binomial(rng, n, cfg.alpha)
    } else {
        0
    };
    KnownCounts {
        record: CountRecord {
            hypothesis,
            beta: Some(beta),
            m: m_alice + m_jammer,
            power_levels: Vec::new(),
            k1: 0,
            k2: 0,
        },
        m_alice,
        m_jammer,
    }
}

/// Draws only the count layer of a known-path-loss trial.
pub fn draw_known_counts<R: Rng + ?Sized>(
    cfg: &KnownPathLossConfig,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<CountRecord> {
    cfg.validate()?;
    Ok(draw_known_layer(cfg, hypothesis, rng).record)
}

fn draw_known_pulses<R: Rng + ?Sized>(
    cfg: &KnownPathLossConfig,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> (CountRecord, Vec<Pulse>) {
    let layer = draw_known_layer(cfg, hypothesis, rng);
    let mut pulses = Vec::with_capacity(layer.record.m as usize);
    for (source, count) in [(Source::Jammer, layer.m_jammer), (Source::Alice, layer.m_alice)] {
        for _ in 0..count {
            let location = rng.random_range(0.0..=cfg.t_sec);
            let height = complex_gaussian(rng, cfg.sigma_sq);
            pulses.push(Pulse { source, location, height });
        }
    }
    (layer.record, pulses)
}

/// One known-path-loss trial: Willie's waveform and the genie's side information.
pub fn draw_known_trial<R: Rng + ?Sized>(
    cfg: &KnownPathLossConfig,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<(SampledSignal, GenieRecord)> {
    cfg.validate()?;
    let (record, pulses) = draw_known_pulses(cfg, hypothesis, rng);
    let rate = cfg.rate();
    // Unit path loss on both links.
    let mut z = synth_source(&pulses, Source::Jammer, &cfg.pulse, rate, cfg.t_sec)?;
    z.add_assign(&synth_source(&pulses, Source::Alice, &cfg.pulse, rate, cfg.t_sec)?);
    add_awgn(&mut z, cfg.n0 * rate, rng);
    Ok((z, erase_sources(record, pulses)))
}

/// Parameters of the unknown-path-loss construction.
///
/// The jammer picks `K ~ Poisson(lambda_j)` power levels uniform on
/// `[p_j, p_j + dp_j]` and sends `floor(alpha n)` pulses per level; Alice
/// picks one level uniform on `[p_a, p_a + dp_a]`, received at Willie divided
/// by `d_aw^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnknownPathLossConfig {
    pub w_hz: f64,
    pub t_sec: f64,
    pub alpha: f64,
    pub p_a: f64,
    pub dp_a: f64,
    pub p_j: f64,
    pub dp_j: f64,
    pub lambda_j: f64,
    pub d_aw: f64,
    pub r: f64,
    pub sigma_a_sq: f64,
    pub sigma_j_sq: f64,
    pub pulse: PulseShape,
    pub priors: Priors,
    pub n0: f64,
}

impl UnknownPathLossConfig {
    pub fn n(&self) -> u64 {
        slots(self.w_hz, self.t_sec)
    }

    /// Pulses per power level, `floor(alpha n)`.
    pub fn pulses_per_level(&self) -> u64 {
        (self.alpha * self.n() as f64 + 1e-9).floor() as u64
    }

    pub fn rate(&self) -> f64 {
        self.pulse.samples_per_symbol as f64 * self.w_hz
    }

    pub fn path_loss(&self) -> f64 {
        self.d_aw.powf(self.r)
    }

    /// Closed detection region `[p_a / d^r, (p_a + dp_a) / d^r]`.
    pub fn detection_region(&self) -> (f64, f64) {
        let pl = self.path_loss();
        (self.p_a / pl, (self.p_a + self.dp_a) / pl)
    }

    /// Mean number of jammer levels in the detection region.
    pub fn thinned_lambda(&self) -> f64 {
        self.lambda_j * self.dp_a / (self.dp_j * self.path_loss())
    }

    pub fn in_region(&self, level: f64) -> bool {
        let (lo, hi) = self.detection_region();
        (lo..=hi).contains(&level)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.w_hz > 0.0 && self.t_sec > 0.0, "w_hz", || "W and T must be positive".into())?;
        ensure((0.0..1.0).contains(&self.alpha), "alpha", || format!("{} not in [0, 1)", self.alpha))?;
        ensure(self.dp_a > 0.0 && self.dp_j > 0.0, "dp_a", || "power widths must be positive".into())?;
        ensure(self.p_a >= 0.0 && self.p_j >= 0.0, "p_a", || "power levels must be >= 0".into())?;
        ensure(self.lambda_j > 0.0, "lambda_j", || format!("{} must be > 0", self.lambda_j))?;
        ensure(self.d_aw > 0.0, "d_aw", || format!("{} must be > 0", self.d_aw))?;
        ensure(self.r >= 2.0, "r", || format!("{} must be >= 2", self.r))?;
        let (lo, hi) = self.detection_region();
        ensure(lo >= self.p_j && hi <= self.p_j + self.dp_j, "p_j", || {
            format!(
                "detection region [{lo}, {hi}] not inside jammer range [{}, {}]",
                self.p_j,
                self.p_j + self.dp_j
            )
        })?;
        ensure(self.p_a + self.dp_a <= self.sigma_a_sq, "sigma_a_sq", || {
            "p_a + dp_a exceeds Alice's power constraint".into()
        })?;
        ensure(self.p_j + self.dp_j <= self.sigma_j_sq, "sigma_j_sq", || {
            "p_j + dp_j exceeds the jammer's power constraint".into()
        })?;
        ensure(self.n0 >= 0.0, "n0", || "must be >= 0".into())?;
        self.priors.validate()
    }

    /// Config whose thinned mean equals `lambda` with everything else fixed.
    pub fn with_thinned_lambda(&self, lambda: f64) -> Self {
        let mut cfg = self.clone();
        cfg.lambda_j = lambda * self.dp_j * self.path_loss() / self.dp_a;
        cfg
    }
}

impl Default for UnknownPathLossConfig {
    /// 100 slots, `alpha = 0.05`; the detection region covers half the jammer range,
    /// so `lambda_j = 8` gives a thinned mean of 4.
    fn default() -> Self {
        UnknownPathLossConfig {
            w_hz: 1.0,
            t_sec: 100.0,
            alpha: 0.05,
            p_a: 2.0,
            dp_a: 2.0,
            p_j: 0.5,
            dp_j: 1.0,
            lambda_j: 8.0,
            d_aw: 2.0,
            r: 2.0,
            sigma_a_sq: 4.0,
            sigma_j_sq: 1.5,
            pulse: PulseShape::default_srrc(),
            priors: Priors::default(),
            n0: 0.0,
        }
    }
}

struct Level {
    source: Source,
    /// Received power at Willie.
    received: f64,
}

fn draw_unknown_layer<R: Rng + ?Sized>(
    cfg: &UnknownPathLossConfig,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> (CountRecord, Vec<Level>) {
    let k = Poisson::new(cfg.lambda_j)
        .expect("lambda_j validated positive")
        .sample(rng) as u64;
    let mut levels: Vec<Level> = (0..k)
        .map(|_| Level {
            source: Source::Jammer,
            received: rng.random_range(cfg.p_j..=cfg.p_j + cfg.dp_j),
        })
        .collect();
    if hypothesis.alice_transmits() {
        let tx = rng.random_range(cfg.p_a..=cfg.p_a + cfg.dp_a);
        levels.push(Level {
            source: Source::Alice,
            received: tx / cfg.path_loss(),
        });
    }
    levels.shuffle(rng);
    let k1 = levels.iter().filter(|l| cfg.in_region(l.received)).count() as u64;
    let record = CountRecord {
        hypothesis,
        beta: None,
        m: levels.len() as u64 * cfg.pulses_per_level(),
        power_levels: levels.iter().map(|l| l.received).collect(),
        k1,
        k2: levels.len() as u64 - k1,
    };
    (record, levels)
}

/// Draws only the power-level layer of an unknown-path-loss trial.
pub fn draw_unknown_counts<R: Rng + ?Sized>(
    cfg: &UnknownPathLossConfig,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<CountRecord> {
    cfg.validate()?;
    Ok(draw_unknown_layer(cfg, hypothesis, rng).0)
}

/// One unknown-path-loss trial.
pub fn draw_unknown_trial<R: Rng + ?Sized>(
    cfg: &UnknownPathLossConfig,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<(SampledSignal, GenieRecord)> {
    cfg.validate()?;
    let (record, levels) = draw_unknown_layer(cfg, hypothesis, rng);
    let per_level = cfg.pulses_per_level();
    let pl = cfg.path_loss();
    let mut pulses = Vec::with_capacity(record.m as usize);
    for level in &levels {
        // Alice's symbols are drawn at transmit power; the channel scales them.
        let tx = match level.source {
            Source::Alice => level.received * pl,
            Source::Jammer => level.received,
        };
        for _ in 0..per_level {
            pulses.push(Pulse {
                source: level.source,
                location: rng.random_range(0.0..=cfg.t_sec),
                height: complex_gaussian(rng, tx),
            });
        }
    }
    let rate = cfg.rate();
    let alice_link = ChannelConfig {
        distance: cfg.d_aw,
        exponent: cfg.r,
        ..ChannelConfig::default()
    };
    let x_a = synth_source(&pulses, Source::Alice, &cfg.pulse, rate, cfg.t_sec)?;
    let mut z = synth_source(&pulses, Source::Jammer, &cfg.pulse, rate, cfg.t_sec)?;
    z.add_assign(&propagate(&x_a, &alice_link));
    add_awgn(&mut z, cfg.n0 * rate, rng);

    let gain = alice_link.amplitude_gain();
    for p in pulses.iter_mut().filter(|p| p.source == Source::Alice) {
        p.height *= gain;
    }
    Ok((z, erase_sources(record, pulses)))
}

/// Decibel value that may be `-inf` (source switched off).
pub fn db_to_linear(db: f64) -> f64 {
    if db == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

/// The two-stream interference-cancellation experiment: Alice and the jammer
/// each send `num_symbols` Gaussian symbols on a regular grid with period
/// `samples_per_symbol`, Alice's stream lagging by `offset_samples`.
///
/// SNR is the mean per-sample signal power of a continuous symbol stream
/// (`variance / samples_per_symbol`) over the per-sample noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcdScenario {
    pub num_symbols: usize,
    pub pulse: PulseShape,
    pub offset_samples: usize,
    pub alice_snr_db: f64,
    pub jammer_snr_db: f64,
    pub noise_variance: f64,
}

impl Default for IcdScenario {
    fn default() -> Self {
        IcdScenario {
            num_symbols: 200,
            pulse: PulseShape::default_srrc(),
            offset_samples: crate::signals::DEFAULT_SAMPLES_PER_SYMBOL / 6,
            alice_snr_db: 5.0,
            jammer_snr_db: 20.0,
            noise_variance: 1.0,
        }
    }
}

impl IcdScenario {
    pub fn validate(&self) -> Result<()> {
        ensure(self.num_symbols >= 1, "num_symbols", || "must be >= 1".into())?;
        ensure(self.noise_variance >= 0.0, "noise_variance", || "must be >= 0".into())?;
        for (name, v) in [("alice_snr_db", self.alice_snr_db), ("jammer_snr_db", self.jammer_snr_db)] {
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::invalid(name, format!("{v} is not a usable SNR")));
            }
        }
        Ok(())
    }

    pub fn sps(&self) -> usize {
        self.pulse.samples_per_symbol
    }

    /// Observation window: every pulse of both streams fits.
    pub fn window_len(&self) -> usize {
        (self.num_symbols - 1) * self.sps() + self.offset_samples + self.pulse.len()
    }

    pub fn alice_variance(&self) -> f64 {
        db_to_linear(self.alice_snr_db) * self.noise_variance * self.sps() as f64
    }

    pub fn jammer_variance(&self) -> f64 {
        db_to_linear(self.jammer_snr_db) * self.noise_variance * self.sps() as f64
    }

    pub fn jammer_present(&self) -> bool {
        self.jammer_snr_db != f64::NEG_INFINITY
    }

    /// Timing granted to the interference-cancellation detector.
    pub fn jammer_timing(&self) -> JammerTiming {
        JammerTiming {
            symbol_period: self.sps(),
            offset: 0,
            count: if self.jammer_present() { self.num_symbols } else { 0 },
        }
    }

    /// Willie's observation for one trial. The stream rate is one sample per
    /// second of the discrete grid.
    pub fn draw<R: Rng + ?Sized>(&self, hypothesis: Hypothesis, rng: &mut R) -> SampledSignal {
        let sps = self.sps();
        let mut z = SampledSignal::zeros(sps as f64, self.window_len());
        let jv = self.jammer_variance();
        let timing = self.jammer_timing();
        for k in 0..timing.count {
            let a = complex_gaussian(rng, jv);
            add_pulse(&mut z.samples, &self.pulse.taps, timing.offset + k * timing.symbol_period, a);
        }
        if hypothesis.alice_transmits() {
            let av = self.alice_variance();
            for k in 0..self.num_symbols {
                let a = complex_gaussian(rng, av);
                add_pulse(&mut z.samples, &self.pulse.taps, self.offset_samples + k * sps, a);
            }
        }
        add_awgn(&mut z, self.noise_variance, rng);
        z
    }
}

/// Pulse list (location in seconds, height) for one known-path-loss interval,
/// transmitter identities already merged.
pub fn known_pulse_list<R: Rng + ?Sized>(
    cfg: &KnownPathLossConfig,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<Vec<(f64, Complex64)>> {
    cfg.validate()?;
    let (_, pulses) = draw_known_pulses(cfg, hypothesis, rng);
    Ok(pulses.into_iter().map(|p| (p.location, p.height)).collect())
}
