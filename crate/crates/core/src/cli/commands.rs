use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::{CommandConfig, IcdDemoConfig, KnownLimitConfig, PsdCheckConfig, TvConfig, UnknownLimitConfig};
use super::CliError;
use crate::analysis::{covert_design_known, exact_error_known, min_jammer_intensity, tv_poisson_shifted, H1Model};
use crate::detectors::DetectorKind;
use crate::exec::derive_seed;
use crate::harness::{
    auc_separated, bandwidth_report, dominance, persist_results, run_rocs, sweep_known_limit_detail,
    sweep_unknown_limit_detail, write_json, IcdExperiment, RocCurve, RunMeta, SweepDetail, ThresholdGrid,
};
use crate::scenario::{IcdScenario, KnownPathLossConfig};
use crate::signals::PulseShape;
use crate::{Error, Priors, RunOptions};

pub struct Context {
    pub out: PathBuf,
    pub plot_data: bool,
    pub opts: RunOptions,
}

/// Result of one subcommand: whether every verdict gate passed, and a
/// human-readable report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub message: String,
}

#[derive(Serialize)]
struct PlotRow<'a> {
    series: &'a str,
    x: f64,
    y: f64,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|source| {
            CliError::Runtime(Error::Io {
                path: self.out.clone(),
                source,
            })
        })
    }

    fn meta<C: CommandConfig>(&self, cfg: &C, seed: u64) -> RunMeta {
        RunMeta::new(C::COMMAND, serde_json::to_value(cfg).unwrap_or_default(), seed)
    }

    fn plot<C: CommandConfig>(&self, name: &str, rows: &[PlotRow], cfg: &C, seed: u64) -> Result<(), CliError> {
        if self.plot_data {
            persist_results(rows, &self.path(name), &self.meta(cfg, seed))?;
        }
        Ok(())
    }

    fn summary(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        write_json(&p, value)?;
        Ok(p)
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

pub fn icd_demo(ctx: &Context, cfg: &IcdDemoConfig) -> Result<Outcome, CliError> {
    ctx.ensure_out()?;
    let scenario = IcdScenario {
        num_symbols: cfg.num_symbols,
        pulse: PulseShape::srrc(cfg.rolloff, cfg.samples_per_symbol, cfg.span_symbols)?,
        offset_samples: cfg.offset_samples,
        alice_snr_db: cfg.alice_snr_db,
        jammer_snr_db: cfg.jammer_snr_db,
        noise_variance: cfg.noise_variance,
    };
    let exp = IcdExperiment::new(scenario)?;
    let curves = run_rocs(
        &exp,
        &[DetectorKind::Power, DetectorKind::IcdResidual],
        &ThresholdGrid::Quantiles(cfg.thresholds),
        cfg.trials,
        cfg.seed,
        ctx.opts,
    )?;
    let (power, icd) = (&curves[0], &curves[1]);
    for (c, name) in [(power, "icd_demo_power.csv"), (icd, "icd_demo_icd.csv")] {
        persist_results(&c.points, &ctx.path(name), &ctx.meta(cfg, cfg.seed))?;
    }
    let dom = dominance(icd, power, cfg.pfa_min, cfg.pfa_max);
    let separated = auc_separated(icd, power);
    let icd_dominates = dom.dominates && separated;
    let curve_json = |c: &RocCurve| json!({"auc": c.auc, "auc_stderr": c.auc_stderr, "points": c.points.len()});
    let summary = json!({
        "command": IcdDemoConfig::COMMAND,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "scenario": icd.scenario,
        "power": curve_json(power),
        "icd": curve_json(icd),
        "auc_separated": separated,
        "dominance": dom,
        "icd_dominates": icd_dominates,
        "check_dominance": cfg.check_dominance,
    });
    let sp = ctx.summary("icd_demo_summary.json", &summary)?;
    let mut rows = Vec::new();
    for (c, series) in [(power, "power"), (icd, "icd")] {
        rows.extend(c.points.iter().map(|p| PlotRow {
            series,
            x: p.p_fa,
            y: p.p_d,
        }));
    }
    ctx.plot("icd_demo_plot.csv", &rows, cfg, cfg.seed)?;
    Ok(Outcome {
        passed: !cfg.check_dominance || icd_dominates,
        message: format!(
            "AUC power {:.4} ± {:.4}, ICD {:.4} ± {:.4}; dominance on {} levels: {}; icd_dominates={}\nsummary: {}",
            power.auc,
            power.auc_stderr,
            icd.auc,
            icd.auc_stderr,
            dom.checked,
            dom.dominates,
            icd_dominates,
            show(&sp)
        ),
    })
}

fn detail_json(details: &[SweepDetail]) -> Vec<serde_json::Value> {
    details
        .iter()
        .map(|d| {
            json!({
                "param": d.row.param,
                "empirical_error_sum": d.row.empirical_error_sum,
                "plug_in_error_sum": d.estimate.plug_in,
                "exact_error_sum": d.row.exact_error_sum,
                "stderr": d.row.stderr,
                "z": d.row.z_score(),
            })
        })
        .collect()
}

fn sweep_plot(details: &[SweepDetail]) -> Vec<PlotRow<'static>> {
    let mut rows = Vec::new();
    for d in details {
        rows.push(PlotRow {
            series: "empirical",
            x: d.row.param,
            y: d.row.empirical_error_sum,
        });
        rows.push(PlotRow {
            series: "exact",
            x: d.row.param,
            y: d.row.exact_error_sum,
        });
    }
    rows
}

pub fn known_limit(ctx: &Context, cfg: &KnownLimitConfig) -> Result<Outcome, CliError> {
    ctx.ensure_out()?;
    let alpha = cfg.effective_alpha();
    let design = covert_design_known(cfg.epsilon, cfg.delta)?;
    let base = KnownPathLossConfig::with_slots(cfg.n_values[0], alpha, cfg.mu, cfg.delta);
    let details = sweep_known_limit_detail(&base, &cfg.n_values, cfg.trials, cfg.seed, ctx.opts)?;
    let rows: Vec<_> = details.iter().map(|d| d.row).collect();
    persist_results(&rows, &ctx.path("known_limit.csv"), &ctx.meta(cfg, cfg.seed))?;

    let shifted = cfg
        .n_values
        .iter()
        .map(|&n| Ok(exact_error_known(n, alpha, cfg.mu, cfg.delta, Priors::default(), H1Model::Shifted)?.min_error_sum))
        .collect::<Result<Vec<f64>, Error>>()?;
    let last = rows.last().expect("validated non-empty");
    let final_exceeds = last.exact_error_sum > 1.0 - cfg.epsilon;
    let consistent = rows.iter().all(|r| r.z_score() < 3.0);
    let monotone = shifted.windows(2).all(|w| w[1] >= w[0]);
    let summary = json!({
        "command": KnownLimitConfig::COMMAND,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "alpha": alpha,
        "design": {"alpha": design.alpha, "eta": design.eta},
        "rows": detail_json(&details),
        "exact_shifted_model": shifted,
        "exact_shifted_non_decreasing": monotone,
        "final_exceeds_target": final_exceeds,
        "rows_within_3_stderr": consistent,
    });
    let sp = ctx.summary("known_limit_summary.json", &summary)?;
    ctx.plot("known_limit_plot.csv", &sweep_plot(&details), cfg, cfg.seed)?;
    let mut message = String::from("n, empirical, exact, stderr\n");
    for r in &rows {
        message.push_str(&format!(
            "{}, {:.5}, {:.5}, {:.5}\n",
            r.param, r.empirical_error_sum, r.exact_error_sum, r.stderr
        ));
    }
    message.push_str(&format!(
        "alpha {alpha}; final exact > 1 - epsilon: {final_exceeds}; rows within 3 stderr: {consistent}\nsummary: {}",
        show(&sp)
    ));
    Ok(Outcome {
        passed: final_exceeds && consistent,
        message,
    })
}

pub fn unknown_limit(ctx: &Context, cfg: &UnknownLimitConfig) -> Result<Outcome, CliError> {
    ctx.ensure_out()?;
    let base = cfg.scenario();
    let details = sweep_unknown_limit_detail(&base, &cfg.lambda_values, cfg.trials, cfg.seed, ctx.opts)?;
    let rows: Vec<_> = details.iter().map(|d| d.row).collect();
    persist_results(&rows, &ctx.path("unknown_limit.csv"), &ctx.meta(cfg, cfg.seed))?;
    let consistent = rows.iter().all(|r| r.z_score() < 3.0);
    let mut message = String::from("lambda, empirical, exact, stderr\n");
    for r in &rows {
        message.push_str(&format!(
            "{}, {:.5}, {:.5}, {:.5}\n",
            r.param, r.empirical_error_sum, r.exact_error_sum, r.stderr
        ));
    }

    let mut design_ok = true;
    let design_json = match cfg.epsilon {
        None => serde_json::Value::Null,
        Some(eps) => {
            let d = min_jammer_intensity(cfg.dp_j, cfg.d_aw, cfg.r, cfg.dp_a, eps)?;
            let tv_bound = tv_poisson_shifted(d.thinned_lambda)?;
            let tv_int = tv_poisson_shifted(d.thinned_lambda_integral)?;
            let row = sweep_unknown_limit_detail(
                &base,
                &[d.thinned_lambda_integral],
                cfg.trials,
                derive_seed(cfg.seed, 0xde51),
                ctx.opts,
            )?[0];
            let z95 = crate::harness::stats::Z95;
            let covert = row.row.empirical_error_sum + z95 * row.row.stderr >= 1.0 - eps;
            design_ok = tv_int.tv_exact <= eps && covert;
            message.push_str(&format!(
                "epsilon {eps}: lambda_j >= {:.4} (thinned {:.4}, tv {:.5}); integral design lambda_j {:.4} (thinned {}, tv {:.5}, empirical error sum {:.5} ± {:.5})\n",
                d.lambda_j,
                d.thinned_lambda,
                tv_bound.tv_exact,
                d.lambda_j_integral,
                d.thinned_lambda_integral,
                tv_int.tv_exact,
                row.row.empirical_error_sum,
                row.row.stderr
            ));
            json!({
                "epsilon": eps,
                "lambda_j": d.lambda_j,
                "thinned_lambda": d.thinned_lambda,
                "tv_at_bound": tv_bound.tv_exact,
                "lambda_j_integral": d.lambda_j_integral,
                "thinned_lambda_integral": d.thinned_lambda_integral,
                "tv_at_integral": tv_int.tv_exact,
                "empirical_error_sum": row.row.empirical_error_sum,
                "stderr": row.row.stderr,
                "covert": design_ok,
            })
        }
    };
    let summary = json!({
        "command": UnknownLimitConfig::COMMAND,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "rows": detail_json(&details),
        "rows_within_3_stderr": consistent,
        "design": design_json,
    });
    let sp = ctx.summary("unknown_limit_summary.json", &summary)?;
    ctx.plot("unknown_limit_plot.csv", &sweep_plot(&details), cfg, cfg.seed)?;
    message.push_str(&format!("rows within 3 stderr: {consistent}\nsummary: {}", show(&sp)));
    Ok(Outcome {
        passed: consistent && design_ok,
        message,
    })
}

pub fn tv(ctx: &Context, cfg: &TvConfig) -> Result<Outcome, CliError> {
    ctx.ensure_out()?;
    let report = tv_poisson_shifted(cfg.lambda)?;
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    write_json(&ctx.path("tv.json"), &report)?;
    Ok(Outcome {
        passed: true,
        message: text,
    })
}

pub fn psd_check(ctx: &Context, cfg: &PsdCheckConfig) -> Result<Outcome, CliError> {
    ctx.ensure_out()?;
    let mut k = KnownPathLossConfig::with_slots(cfg.n_slots, cfg.alpha, cfg.mu, cfg.delta);
    k.pulse = PulseShape::srrc(cfg.rolloff, cfg.samples_per_symbol, cfg.span_symbols)?;
    k.sigma_sq = cfg.sigma_sq;
    let report = bandwidth_report(&k, cfg.intervals, cfg.segment_len, cfg.seed, ctx.opts)?;
    persist_results(&report.spectrum, &ctx.path("psd_check.csv"), &ctx.meta(cfg, cfg.seed))?;
    let oob_ok = report.out_of_band_fraction < cfg.max_out_of_band;
    let shape_ok = report.in_band_deviation.is_none_or(|d| d < cfg.max_in_band_deviation);
    let sp = ctx.summary(
        "psd_check_summary.json",
        &json!({
            "command": PsdCheckConfig::COMMAND,
            "seed": cfg.seed,
            "report": report,
            "out_of_band_ok": oob_ok,
            "in_band_ok": shape_ok,
        }),
    )?;
    let mut rows = Vec::new();
    for s in &report.spectrum {
        rows.push(PlotRow {
            series: "psd",
            x: s.freq,
            y: s.psd,
        });
        rows.push(PlotRow {
            series: "analytic",
            x: s.freq,
            y: s.analytic,
        });
    }
    ctx.plot("psd_check_plot.csv", &rows, cfg, cfg.seed)?;
    Ok(Outcome {
        passed: oob_ok && shape_ok,
        message: format!(
            "{} segments; in-band deviation {}; power beyond (1+rolloff)W/2: {:.3e}; beyond (1+rolloff)W: {:.3e}; 99% bandwidth {:.4} Hz\nsummary: {}",
            report.segments,
            report.in_band_deviation.map_or("n/a".to_string(), |d| format!("{d:.4}")),
            report.out_of_band_fraction,
            report.beyond_full_width_fraction,
            report.occupied_bandwidth_99,
            show(&sp)
        ),
    })
}
