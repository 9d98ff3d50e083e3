//! Willie's detectors. Each reduces an observation to a scalar compared
//! against a threshold.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::scenario::CountRecord;
use crate::signals::{PulseShape, SampledSignal};
use crate::{Error, Hypothesis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Power,
    IcdResidual,
    PulseCount,
    LevelCount,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Power => "power",
            DetectorKind::IcdResidual => "icd_residual",
            DetectorKind::PulseCount => "pulse_count",
            DetectorKind::LevelCount => "level_count",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorStatistic {
    pub value: f64,
    pub kind: DetectorKind,
}

/// Radiometer: received energy per unit time, i.e. mean per-sample power.
pub fn power_statistic(signal: &SampledSignal) -> Result<DetectorStatistic> {
    ensure(!signal.is_empty(), "signal", || "signal is empty".into())?;
    Ok(DetectorStatistic {
        value: signal.energy() / signal.rate / signal.duration(),
        kind: DetectorKind::Power,
    })
}

/// Jammer symbol grid in samples: symbol `k` starts at `offset + k * symbol_period`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JammerTiming {
    pub symbol_period: usize,
    pub offset: usize,
    pub count: usize,
}

impl JammerTiming {
    pub fn starts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.count).map(move |k| self.offset + k * self.symbol_period)
    }
}

/// Single-pass least-squares interference canceller.
///
/// The jammer dictionary holds one delayed pulse per jammer symbol slot.
/// Observations are projected onto the orthogonal complement of its span and
/// the residual is energy-detected. The Gram matrix factorization depends only
/// on the timing, so it is computed once and reused across trials.
#[derive(Debug, Clone)]
pub struct IcdDetector {
    taps: Vec<f64>,
    starts: Vec<usize>,
    window_len: usize,
    /// Lower Cholesky factor of the Gram matrix, row-major.
    chol: Vec<f64>,
}

/// Relative pivot below which the dictionary is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

impl IcdDetector {
    pub fn new(timing: JammerTiming, pulse: &PulseShape, window_len: usize) -> Result<Self> {
        let starts: Vec<usize> = timing.starts().collect();
        if let Some(&last) = starts.last() {
            ensure(last < window_len, "jammer_timing", || {
                format!("jammer slot at sample {last} lies outside the {window_len}-sample window")
            })?;
        }
        let taps = pulse.taps.clone();
        let n = starts.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let g = atom_inner(&taps, starts[i], starts[j], window_len);
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        let max_diag = (0..n).map(|i| gram[i * n + i]).fold(0.0, f64::max);
        let chol = cholesky(gram, n, RANK_TOLERANCE * max_diag)?;
        Ok(IcdDetector {
            taps,
            starts,
            window_len,
            chol,
        })
    }

    pub fn atoms(&self) -> usize {
        self.starts.len()
    }

    /// `<atom_i, z>` for every dictionary atom.
    pub fn correlate(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.starts
            .iter()
            .map(|&s| {
                let end = (s + self.taps.len()).min(z.len());
                z[s..end].iter().zip(&self.taps).map(|(x, &t)| x * t).sum()
            })
            .collect()
    }

    /// Least-squares jammer symbol estimates.
    pub fn estimate(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut x = self.correlate(z);
        let n = x.len();
        let l = &self.chol;
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= x[k] * l[i * n + k];
            }
            x[i] = acc / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= x[k] * l[k * n + i];
            }
            x[i] = acc / l[i * n + i];
        }
        x
    }

    /// Observation minus the reconstructed jammer waveform.
    pub fn residual(&self, signal: &SampledSignal) -> Result<Vec<Complex64>> {
        ensure(signal.len() == self.window_len, "signal", || {
            format!("{} samples, detector built for {}", signal.len(), self.window_len)
        })?;
        let mut r = signal.samples.clone();
        for (&s, a) in self.starts.iter().zip(self.estimate(&signal.samples)) {
            let end = (s + self.taps.len()).min(r.len());
            for (o, &t) in r[s..end].iter_mut().zip(&self.taps) {
                *o -= a * t;
            }
        }
        Ok(r)
    }

    pub fn statistic(&self, signal: &SampledSignal) -> Result<DetectorStatistic> {
        let residual = SampledSignal {
            rate: signal.rate,
            t0: signal.t0,
            samples: self.residual(signal)?,
        };
        let p = power_statistic(&residual)?;
        Ok(DetectorStatistic {
            value: p.value,
            kind: DetectorKind::IcdResidual,
        })
    }
}

/// Inner product of two window-truncated pulse atoms.
fn atom_inner(taps: &[f64], a: usize, b: usize, window_len: usize) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let shift = hi - lo;
    if shift >= taps.len() {
        return 0.0;
    }
    let overlap = taps.len() - shift;
    let visible = window_len.saturating_sub(hi).min(overlap);
    (0..visible).map(|k| taps[k + shift] * taps[k]).sum()
}

fn cholesky(mut a: Vec<f64>, n: usize, tol: f64) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > tol) {
            return Err(Error::RankDeficient { atom: j, pivot: d });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    Ok(a)
}

/// Cancels the known-timing jammer and energy-detects the residual.
pub fn icd_statistic(signal: &SampledSignal, timing: JammerTiming, pulse: &PulseShape) -> Result<DetectorStatistic> {
    IcdDetector::new(timing, pulse, signal.len())?.statistic(signal)
}

/// Genie-aided total pulse count `M`.
pub fn pulse_count_statistic(genie: &CountRecord) -> DetectorStatistic {
    DetectorStatistic {
        value: genie.m as f64,
        kind: DetectorKind::PulseCount,
    }
}

/// Genie-aided count `K1` of power levels in the detection region.
pub fn level_count_statistic(genie: &CountRecord) -> DetectorStatistic {
    DetectorStatistic {
        value: genie.k1 as f64,
        kind: DetectorKind::LevelCount,
    }
}

/// Threshold test; ties go to H1.
pub fn decide(stat: &DetectorStatistic, threshold: f64) -> Hypothesis {
    if stat.value >= threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::trial_rng;
    use crate::scenario::{complex_gaussian, IcdScenario};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stat(v: f64) -> DetectorStatistic {
        DetectorStatistic { value: v, kind: DetectorKind::PulseCount }
    }

    #[test]
    fn decision_rule() {
        assert_eq!(decide(&stat(3.0), 5.0), Hypothesis::H0);
        assert_eq!(decide(&stat(5.0), 5.0), Hypothesis::H1);
        assert_eq!(decide(&stat(5.0), f64::NEG_INFINITY), Hypothesis::H1);
        assert_eq!(decide(&stat(5.0), f64::INFINITY), Hypothesis::H0);
    }

    #[test]
    fn false_alarm_falls_with_threshold() {
        let values: Vec<f64> = (0..200).map(|k| ((k * 37) % 101) as f64).collect();
        let mut last = 1.0;
        for t in -5..110 {
            let pfa = values.iter().filter(|&&v| decide(&stat(v), t as f64) == Hypothesis::H1).count() as f64 / 200.0;
            assert!(pfa <= last);
            last = pfa;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn power_statistic_basics() {
        let z = SampledSignal::zeros(48.0, 100);
        assert_eq!(power_statistic(&z).unwrap().value, 0.0);
        assert!(power_statistic(&SampledSignal::zeros(1.0, 0)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<Complex64> = (0..1_000_000).map(|_| complex_gaussian(&mut rng, 2.0)).collect();
        let mut sig = SampledSignal { rate: 10.0, t0: 0.0, samples };
        let p = power_statistic(&sig).unwrap().value;
        assert!((p / 2.0 - 1.0).abs() < 0.01);
        let rot = Complex64::from_polar(1.0, 0.7);
        sig.samples.iter_mut().for_each(|s| *s *= rot);
        assert!((power_statistic(&sig).unwrap().value - p).abs() < 1e-9 * p);
    }

    #[test]
    fn power_mean_is_larger_under_h1() {
        let sc = IcdScenario::default();
        let mean = |h: Hypothesis| {
            (0..300)
                .map(|i| power_statistic(&sc.draw(h, &mut trial_rng(4, i, h))).unwrap().value)
                .sum::<f64>()
                / 300.0
        };
        let m0 = mean(Hypothesis::H0);
        let m1 = mean(Hypothesis::H1);
        // analytic means: noise + per-sample pulse power of each stream
        let n = sc.window_len() as f64;
        let s = sc.num_symbols as f64;
        let a0 = sc.noise_variance + s * sc.jammer_variance() / n;
        let a1 = a0 + s * sc.alice_variance() / n;
        assert!(m1 > m0);
        assert!((m0 / a0 - 1.0).abs() < 0.02, "{m0} vs {a0}");
        assert!((m1 / a1 - 1.0).abs() < 0.02, "{m1} vs {a1}");
    }

    fn icd_fixture() -> (IcdScenario, IcdDetector) {
        let sc = IcdScenario::default();
        let det = IcdDetector::new(sc.jammer_timing(), &sc.pulse, sc.window_len()).unwrap();
        (sc, det)
    }

    #[test]
    fn noiseless_jammer_is_annihilated() {
        let (sc, det) = icd_fixture();
        let quiet = IcdScenario { noise_variance: 0.0, alice_snr_db: f64::NEG_INFINITY, ..sc.clone() };
        // noise_variance 0 zeroes the symbol variances too; use explicit symbols.
        let mut z = SampledSignal::zeros(48.0, quiet.window_len());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for s in sc.jammer_timing().starts() {
            crate::signals::add_pulse(&mut z.samples, &sc.pulse.taps, s, complex_gaussian(&mut rng, 100.0));
        }
        let input = power_statistic(&z).unwrap().value;
        let res = det.statistic(&z).unwrap().value;
        assert!(res < 1e-9 * input, "{res} vs {input}");
    }

    #[test]
    fn residual_is_orthogonal_to_atoms() {
        let (sc, det) = icd_fixture();
        let z = sc.draw(Hypothesis::H1, &mut ChaCha8Rng::seed_from_u64(6));
        let r = det.residual(&z).unwrap();
        let scale = z.energy().sqrt();
        for c in det.correlate(&r) {
            assert!(c.norm() < 1e-9 * scale, "{c}");
        }
    }

    /// Energy of Alice's stream left after projecting out the jammer span,
    /// computed from the Gram matrices only (independent of the detector path).
    fn retained_fraction_oracle(sc: &IcdScenario) -> f64 {
        let n = sc.window_len();
        let taps = &sc.pulse.taps;
        let sps = sc.sps();
        let jam: Vec<usize> = (0..sc.num_symbols).map(|k| k * sps).collect();
        let ali: Vec<usize> = (0..sc.num_symbols).map(|k| k * sps + sc.offset_samples).collect();
        let m = jam.len();
        // Gram of jammer atoms, solved column by column with plain Gaussian elimination.
        let g = |a: usize, b: usize| atom_inner(taps, a, b, n);
        let mut gram = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                gram[i][j] = g(jam[i], jam[j]);
            }
        }
        // For iid unit-variance Alice symbols the expected retained energy is
        // sum_a (||a||^2 - c_a^T G^-1 c_a) with c_a the cross-correlations.
        let mut total = 0.0;
        let mut kept = 0.0;
        for &a in &ali {
            let c: Vec<f64> = jam.iter().map(|&j| g(a, j)).collect();
            let y = solve_dense(&gram, &c);
            let proj: f64 = c.iter().zip(&y).map(|(u, v)| u * v).sum();
            let e = g(a, a);
            total += e;
            kept += e - proj;
        }
        kept / total
    }

    fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &v)| {
            let mut r = row.clone();
            r.push(v);
            r
        }).collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
            m.swap(col, piv);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn alice_leakage_matches_projection_oracle() {
        let (sc, det) = icd_fixture();
        let oracle = retained_fraction_oracle(&sc);
        // Analytic value for an SRRC lattice: (rolloff / 4) (1 - cos(2 pi offset / T_s)),
        // plus edge effects from the last Alice pulse.
        let lattice = 0.2 / 4.0 * (1.0 - (2.0 * std::f64::consts::PI / 6.0).cos());
        assert!((oracle - lattice).abs() < 0.01, "oracle {oracle} lattice {lattice}");

        let trials = 200;
        let (mut kept, mut total) = (0.0, 0.0);
        for i in 0..trials {
            let mut rng = trial_rng(12, i, Hypothesis::H1);
            let mut z = SampledSignal::zeros(48.0, sc.window_len());
            for k in 0..sc.num_symbols {
                let a = complex_gaussian(&mut rng, 1.0);
                crate::signals::add_pulse(&mut z.samples, &sc.pulse.taps, k * 48 + sc.offset_samples, a);
            }
            let r = det.residual(&z).unwrap();
            kept += r.iter().map(|s| s.norm_sqr()).sum::<f64>();
            total += z.energy();
        }
        let fraction = kept / total;
        assert!((fraction - oracle).abs() < 0.15 * oracle, "measured {fraction} oracle {oracle}");
    }

    #[test]
    fn empty_dictionary_reduces_to_power() {
        let sc = IcdScenario { jammer_snr_db: f64::NEG_INFINITY, ..Default::default() };
        let z = sc.draw(Hypothesis::H1, &mut ChaCha8Rng::seed_from_u64(8));
        let a = icd_statistic(&z, sc.jammer_timing(), &sc.pulse).unwrap().value;
        let b = power_statistic(&z).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_timing_is_rank_deficient() {
        let pulse = PulseShape::srrc(0.2, 8, 4).unwrap();
        let timing = JammerTiming { symbol_period: 0, offset: 3, count: 4 };
        assert!(matches!(IcdDetector::new(timing, &pulse, 200), Err(Error::RankDeficient { .. })));
        let outside = JammerTiming { symbol_period: 8, offset: 0, count: 40 };
        assert!(IcdDetector::new(outside, &pulse, 100).is_err());
    }

    #[test]
    fn count_statistics_read_the_genie() {
        let rec = CountRecord {
            hypothesis: Hypothesis::H0,
            beta: Some(0.3),
            m: 0,
            power_levels: vec![],
            k1: 2,
            k2: 1,
        };
        assert_eq!(pulse_count_statistic(&rec).value, 0.0);
        assert_eq!(level_count_statistic(&rec).value, 2.0);
    }
}
