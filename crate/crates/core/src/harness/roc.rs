use serde::{Deserialize, Serialize};

use super::stats::{auc, quantile_grid, wilson_halfwidth};
use crate::detectors::{power_statistic, DetectorKind, IcdDetector};
use crate::exec::{trial_rng, TrialRng};
use crate::scenario::{draw_known_counts, draw_unknown_counts, IcdScenario, KnownPathLossConfig, UnknownPathLossConfig};
use crate::{Error, Hypothesis, Result, RunOptions};

/// Anything that yields detector statistics for one random trial.
pub trait Experiment: Sync {
    fn describe(&self) -> String;

    /// Statistics of every detector in `kinds`, evaluated on one shared observation.
    fn observe(&self, kinds: &[DetectorKind], hypothesis: Hypothesis, rng: &mut TrialRng) -> Result<Vec<f64>>;
}

fn unsupported(kind: DetectorKind, what: &str) -> Error {
    Error::invalid("detector", format!("{} is not available for {what}", kind.name()))
}

/// The interference-cancellation experiment with its detector prepared once.
#[derive(Debug, Clone)]
pub struct IcdExperiment {
    pub scenario: IcdScenario,
    detector: IcdDetector,
}

impl IcdExperiment {
    pub fn new(scenario: IcdScenario) -> Result<Self> {
        scenario.validate()?;
        let detector = IcdDetector::new(scenario.jammer_timing(), &scenario.pulse, scenario.window_len())?;
        Ok(IcdExperiment { scenario, detector })
    }
}

impl Experiment for IcdExperiment {
    fn describe(&self) -> String {
        let s = &self.scenario;
        format!(
            "icd: {} symbols, rolloff {}, sps {}, offset {}, alice {} dB, jammer {} dB",
            s.num_symbols,
            s.pulse.rolloff,
            s.sps(),
            s.offset_samples,
            s.alice_snr_db,
            s.jammer_snr_db
        )
    }

    fn observe(&self, kinds: &[DetectorKind], hypothesis: Hypothesis, rng: &mut TrialRng) -> Result<Vec<f64>> {
        let z = self.scenario.draw(hypothesis, rng);
        kinds
            .iter()
            .map(|&k| match k {
                DetectorKind::Power => Ok(power_statistic(&z)?.value),
                DetectorKind::IcdResidual => Ok(self.detector.statistic(&z)?.value),
                other => Err(unsupported(other, "the icd scenario")),
            })
            .collect()
    }
}

impl Experiment for KnownPathLossConfig {
    fn describe(&self) -> String {
        format!("known path loss: n {}, alpha {}, mu {}, delta {}", self.n(), self.alpha, self.mu, self.delta)
    }

    fn observe(&self, kinds: &[DetectorKind], hypothesis: Hypothesis, rng: &mut TrialRng) -> Result<Vec<f64>> {
        let rec = draw_known_counts(self, hypothesis, rng)?;
        kinds
            .iter()
            .map(|&k| match k {
                DetectorKind::PulseCount => Ok(rec.m as f64),
                other => Err(unsupported(other, "known path loss counts")),
            })
            .collect()
    }
}

impl Experiment for UnknownPathLossConfig {
    fn describe(&self) -> String {
        format!("unknown path loss: thinned lambda {}, alpha {}", self.thinned_lambda(), self.alpha)
    }

    fn observe(&self, kinds: &[DetectorKind], hypothesis: Hypothesis, rng: &mut TrialRng) -> Result<Vec<f64>> {
        let rec = draw_unknown_counts(self, hypothesis, rng)?;
        kinds
            .iter()
            .map(|&k| match k {
                DetectorKind::LevelCount => Ok(rec.k1 as f64),
                DetectorKind::PulseCount => Ok(rec.m as f64),
                other => Err(unsupported(other, "unknown path loss counts")),
            })
            .collect()
    }
}

/// One detector's statistic over `trials` trials per hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSamples {
    pub kind: DetectorKind,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
}

/// Runs `trials` trials under each hypothesis. Trial `i` of hypothesis `h`
/// always draws from substream `(seed, i, h)`.
pub fn sample_statistics<E: Experiment + ?Sized>(
    exp: &E,
    kinds: &[DetectorKind],
    trials: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<Vec<StatisticSamples>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    let mut per_hyp = Vec::with_capacity(2);
    for h in Hypothesis::BOTH {
        let rows = opts.map_indexed(trials, |i| {
            let mut rng = trial_rng(seed, i, h);
            exp.observe(kinds, h, &mut rng).map_err(|e| Error::Trial {
                index: i,
                source: Box::new(e),
            })
        });
        per_hyp.push(rows.into_iter().collect::<Result<Vec<_>>>()?);
    }
    let column = |rows: &[Vec<f64>], j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(j, &kind)| StatisticSamples {
            kind,
            h0: column(&per_hyp[0], j),
            h1: column(&per_hyp[1], j),
        })
        .collect())
}

/// Where the ROC curve is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdGrid {
    /// Evenly spaced quantiles of the pooled statistic sample.
    Quantiles(usize),
    Explicit(Vec<f64>),
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid::Quantiles(50)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_d: f64,
    /// Larger of the two 95% Wilson half-widths.
    pub ci_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub detector: DetectorKind,
    pub scenario: String,
    pub trials: u64,
    pub seed: u64,
    /// Ascending threshold; decision rule "H1 iff statistic >= threshold".
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub auc_stderr: f64,
}

impl RocCurve {
    pub fn from_samples(samples: &StatisticSamples, grid: &ThresholdGrid, scenario: String, seed: u64) -> Result<Self> {
        let mut thresholds = match grid {
            ThresholdGrid::Quantiles(k) => {
                let pooled: Vec<f64> = samples.h0.iter().chain(&samples.h1).copied().collect();
                quantile_grid(&pooled, *k)
            }
            ThresholdGrid::Explicit(t) => t.clone(),
        };
        if thresholds.is_empty() || thresholds.iter().any(|t| t.is_nan()) {
            return Err(Error::invalid("thresholds", "grid must be non-empty and free of NaN"));
        }
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        let mut h0 = samples.h0.clone();
        let mut h1 = samples.h1.clone();
        h0.sort_by(f64::total_cmp);
        h1.sort_by(f64::total_cmp);
        let (n0, n1) = (h0.len() as u64, h1.len() as u64);
        let points = thresholds
            .into_iter()
            .map(|t| {
                let fa = n0 - h0.partition_point(|&v| v < t) as u64;
                let d = n1 - h1.partition_point(|&v| v < t) as u64;
                RocPoint {
                    threshold: t,
                    p_fa: fa as f64 / n0 as f64,
                    p_d: d as f64 / n1 as f64,
                    ci_halfwidth: wilson_halfwidth(fa, n0).max(wilson_halfwidth(d, n1)),
                }
            })
            .collect();
        let (auc, auc_stderr) = auc(&samples.h0, &samples.h1);
        Ok(RocCurve {
            detector: samples.kind,
            scenario,
            trials: n0.min(n1),
            seed,
            points,
            auc,
            auc_stderr,
        })
    }

    /// Best detection probability among grid points with `P_FA <= target`.
    pub fn pd_at_pfa(&self, target: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.p_fa <= target)
            .map(|p| p.p_d)
            .fold(0.0, f64::max)
    }
}

/// ROC curves of several detectors evaluated on the same trials.
pub fn run_rocs<E: Experiment + ?Sized>(
    exp: &E,
    kinds: &[DetectorKind],
    grid: &ThresholdGrid,
    trials: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<Vec<RocCurve>> {
    sample_statistics(exp, kinds, trials, seed, opts)?
        .iter()
        .map(|s| RocCurve::from_samples(s, grid, exp.describe(), seed))
        .collect()
}

pub fn run_roc<E: Experiment + ?Sized>(
    exp: &E,
    kind: DetectorKind,
    grid: &ThresholdGrid,
    trials: u64,
    seed: u64,
    opts: RunOptions,
) -> Result<RocCurve> {
    Ok(run_rocs(exp, &[kind], grid, trials, seed, opts)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub dominates: bool,
    /// Number of false-alarm levels compared.
    pub checked: usize,
    /// Smallest `P_D(a) - P_D(b)` over the compared levels.
    pub worst_margin: f64,
    /// `(p_fa, p_d of a, p_d of b)` wherever `a` falls below `b`.
    pub violations: Vec<(f64, f64, f64)>,
}

/// Whether curve `a` is at least as good as `b` at every grid false-alarm
/// level of either curve inside `[pfa_lo, pfa_hi]`.
pub fn dominance(a: &RocCurve, b: &RocCurve, pfa_lo: f64, pfa_hi: f64) -> Dominance {
    let mut levels: Vec<f64> = a
        .points
        .iter()
        .chain(&b.points)
        .map(|p| p.p_fa)
        .filter(|&f| f >= pfa_lo && f <= pfa_hi)
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut worst = f64::INFINITY;
    let mut violations = Vec::new();
    for &f in &levels {
        let (da, db) = (a.pd_at_pfa(f), b.pd_at_pfa(f));
        worst = worst.min(da - db);
        if da < db {
            violations.push((f, da, db));
        }
    }
    Dominance {
        dominates: violations.is_empty() && !levels.is_empty(),
        checked: levels.len(),
        worst_margin: if levels.is_empty() { 0.0 } else { worst },
        violations,
    }
}

/// True when the two AUC 95% intervals do not overlap and `a` is higher.
pub fn auc_separated(a: &RocCurve, b: &RocCurve) -> bool {
    use super::stats::Z95;
    a.auc - Z95 * a.auc_stderr > b.auc + Z95 * b.auc_stderr
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    struct Blind;

    impl Experiment for Blind {
        fn describe(&self) -> String {
            "blind".into()
        }
        fn observe(&self, kinds: &[DetectorKind], _: Hypothesis, rng: &mut TrialRng) -> Result<Vec<f64>> {
            let v: f64 = rng.random();
            Ok(kinds.iter().map(|_| v).collect())
        }
    }

    struct Failing;

    impl Experiment for Failing {
        fn describe(&self) -> String {
            "failing".into()
        }
        fn observe(&self, _: &[DetectorKind], h: Hypothesis, rng: &mut TrialRng) -> Result<Vec<f64>> {
            let v: f64 = rng.random();
            if h == Hypothesis::H1 && v > 0.99 {
                Err(Error::invalid("observation", "synthetic failure"))
            } else {
                Ok(vec![v])
            }
        }
    }

    #[test]
    fn blind_detector_on_diagonal() {
        let c = run_roc(&Blind, DetectorKind::Power, &ThresholdGrid::default(), 4000, 3, RunOptions::default()).unwrap();
        assert_eq!(c.points.len(), 50);
        for p in &c.points {
            assert!((p.p_d - p.p_fa).abs() <= 2.0 * p.ci_halfwidth, "{p:?}");
        }
        assert!((c.auc - 0.5).abs() < 3.0 * c.auc_stderr);
    }

    #[test]
    fn points_sorted_and_monotone() {
        let exp = IcdExperiment::new(IcdScenario {
            num_symbols: 20,
            ..IcdScenario::default()
        })
        .unwrap();
        let curves = run_rocs(
            &exp,
            &[DetectorKind::Power, DetectorKind::IcdResidual],
            &ThresholdGrid::default(),
            200,
            1,
            RunOptions::default(),
        )
        .unwrap();
        for c in &curves {
            assert!(c.points.windows(2).all(|w| w[0].threshold < w[1].threshold));
            assert!(c.points.windows(2).all(|w| w[0].p_fa >= w[1].p_fa && w[0].p_d >= w[1].p_d));
            assert!((0.0..=1.0).contains(&c.auc));
        }
    }

    #[test]
    fn ci_shrinks_with_trials() {
        let grid = ThresholdGrid::Explicit(vec![0.5]);
        let a = run_roc(&Blind, DetectorKind::Power, &grid, 2000, 9, RunOptions::default()).unwrap();
        let b = run_roc(&Blind, DetectorKind::Power, &grid, 4000, 9, RunOptions::default()).unwrap();
        let r = b.points[0].ci_halfwidth / a.points[0].ci_halfwidth;
        assert!((r - 0.5f64.sqrt()).abs() < 0.03, "{r}");
    }

    #[test]
    fn errors_carry_trial_index() {
        let err = sample_statistics(&Failing, &[DetectorKind::Power], 2000, 5, RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Trial { .. }), "{err}");
        assert!(sample_statistics(&Blind, &[DetectorKind::Power], 0, 5, RunOptions::default()).is_err());
        let s = StatisticSamples {
            kind: DetectorKind::Power,
            h0: vec![1.0],
            h1: vec![2.0],
        };
        assert!(RocCurve::from_samples(&s, &ThresholdGrid::Explicit(vec![]), String::new(), 0).is_err());
    }

    #[test]
    fn wrong_detector_rejected() {
        let cfg = KnownPathLossConfig::with_slots(100, 0.05, 0.2, 0.5);
        assert!(run_roc(&cfg, DetectorKind::Power, &ThresholdGrid::default(), 10, 0, RunOptions::default()).is_err());
        assert!(run_roc(&cfg, DetectorKind::PulseCount, &ThresholdGrid::default(), 10, 0, RunOptions::default()).is_ok());
    }

    #[test]
    fn dominance_of_shifted_curve() {
        let mk = |shift: f64| {
            let s = StatisticSamples {
                kind: DetectorKind::Power,
                h0: (0..500).map(|i| i as f64 / 500.0).collect(),
                h1: (0..500).map(|i| i as f64 / 500.0 + shift).collect(),
            };
            RocCurve::from_samples(&s, &ThresholdGrid::default(), String::new(), 0).unwrap()
        };
        let (good, bad) = (mk(0.5), mk(0.1));
        let d = dominance(&good, &bad, 0.05, 0.5);
        assert!(d.dominates && d.checked > 0 && d.worst_margin > 0.0);
        assert!(!dominance(&bad, &good, 0.05, 0.5).dominates);
        assert!(auc_separated(&good, &bad));
    }
}
