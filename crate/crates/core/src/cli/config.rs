//! Run configurations: one record per subcommand, merged from defaults, an
//! optional JSON file and `--set key=value` overrides, then validated.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::CliError;

/// One documented configuration key.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub unit: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, unit: &'static str, help: &'static str) -> Key {
    Key { name, unit, help }
}

pub trait CommandConfig: Serialize + DeserializeOwned + Default {
    const COMMAND: &'static str;
    const KEYS: &'static [Key];

    fn validate(&self) -> Result<(), String>;
}

/// Help text listing every key with its unit and default.
pub fn keys_help<C: CommandConfig>() -> String {
    let defaults = serde_json::to_value(C::default()).unwrap_or(Value::Null);
    let mut out = String::from("Config keys (JSON file or --set key=value):\n");
    for k in C::KEYS {
        let d = defaults.get(k.name).map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("  {:<22} [{}] {} (default {})\n", k.name, k.unit, k.help, d));
    }
    out
}

/// SNR in dB that may be `-inf` (source off). Written as a string when infinite.
mod db {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => t
                .trim()
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("`{t}` is not a dB value (number or \"-inf\")"))),
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcdDemoConfig {
    pub seed: u64,
    pub trials: u64,
    pub num_symbols: usize,
    pub rolloff: f64,
    pub samples_per_symbol: usize,
    pub span_symbols: usize,
    pub offset_samples: usize,
    #[serde(with = "db")]
    pub alice_snr_db: f64,
    #[serde(with = "db")]
    pub jammer_snr_db: f64,
    pub noise_variance: f64,
    pub thresholds: usize,
    pub pfa_min: f64,
    pub pfa_max: f64,
    pub check_dominance: bool,
}

impl Default for IcdDemoConfig {
    fn default() -> Self {
        IcdDemoConfig {
            seed: 1,
            trials: 1000,
            num_symbols: 200,
            rolloff: 0.2,
            samples_per_symbol: 48,
            span_symbols: 12,
            offset_samples: 8,
            alice_snr_db: 5.0,
            jammer_snr_db: 20.0,
            noise_variance: 1.0,
            thresholds: 50,
            pfa_min: 0.05,
            pfa_max: 0.5,
            check_dominance: true,
        }
    }
}

impl CommandConfig for IcdDemoConfig {
    const COMMAND: &'static str = "icd-demo";
    const KEYS: &'static [Key] = &[
        key("seed", "integer", "master seed"),
        key("trials", "count", "trials per hypothesis"),
        key("num_symbols", "symbols", "symbols per stream"),
        key("rolloff", "1", "SRRC roll-off factor"),
        key("samples_per_symbol", "samples", "symbol period T_s"),
        key("span_symbols", "symbols", "pulse length"),
        key("offset_samples", "samples", "Alice's lag behind the jammer"),
        key("alice_snr_db", "dB", "Alice per-sample SNR, \"-inf\" for off"),
        key("jammer_snr_db", "dB", "jammer per-sample SNR, \"-inf\" for off"),
        key("noise_variance", "power", "complex noise variance per sample"),
        key("thresholds", "count", "quantile-spaced ROC thresholds"),
        key("pfa_min", "probability", "lower end of the dominance check"),
        key("pfa_max", "probability", "upper end of the dominance check"),
        key("check_dominance", "bool", "fail unless the ICD dominates"),
    ];

    fn validate(&self) -> Result<(), String> {
        check(self.trials >= 1, || "trials: must be >= 1".into())?;
        check(self.num_symbols >= 1, || "num_symbols: must be >= 1".into())?;
        check((0.0..=1.0).contains(&self.rolloff), || format!("rolloff: {} not in [0, 1]", self.rolloff))?;
        check(self.samples_per_symbol >= 2, || "samples_per_symbol: must be >= 2".into())?;
        check(self.span_symbols >= 1, || "span_symbols: must be >= 1".into())?;
        for (name, v) in [("alice_snr_db", self.alice_snr_db), ("jammer_snr_db", self.jammer_snr_db)] {
            check(!v.is_nan() && v != f64::INFINITY, || format!("{name}: {v} is not usable"))?;
        }
        check(self.noise_variance > 0.0, || "noise_variance: must be > 0".into())?;
        check(self.thresholds >= 2, || "thresholds: must be >= 2".into())?;
        check(
            0.0 <= self.pfa_min && self.pfa_min <= self.pfa_max && self.pfa_max <= 1.0,
            || "pfa_min/pfa_max: need 0 <= pfa_min <= pfa_max <= 1".into(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnownLimitConfig {
    pub seed: u64,
    pub trials: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub mu: f64,
    /// `null` selects the covert design `epsilon * delta / 2`.
    pub alpha: Option<f64>,
    pub n_values: Vec<u64>,
}

impl Default for KnownLimitConfig {
    fn default() -> Self {
        KnownLimitConfig {
            seed: 1,
            trials: 10_000,
            epsilon: 0.2,
            delta: 0.5,
            mu: 0.2,
            alpha: None,
            n_values: vec![100, 1000, 10_000],
        }
    }
}

impl KnownLimitConfig {
    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.epsilon * self.delta / 2.0)
    }
}

impl CommandConfig for KnownLimitConfig {
    const COMMAND: &'static str = "known-limit";
    const KEYS: &'static [Key] = &[
        key("seed", "integer", "master seed"),
        key("trials", "count", "trials per hypothesis and row"),
        key("epsilon", "1", "covertness target, in (0, 1)"),
        key("delta", "1", "width of the jammer rate range"),
        key("mu", "1", "lower end of the jammer rate range"),
        key("alpha", "1", "Alice's rate; null uses epsilon*delta/2"),
        key("n_values", "slots", "slot counts n = WT to sweep"),
    ];

    fn validate(&self) -> Result<(), String> {
        check(self.trials >= 2, || "trials: must be >= 2".into())?;
        check(self.epsilon > 0.0 && self.epsilon < 1.0, || format!("epsilon: {} not in (0, 1)", self.epsilon))?;
        check(self.delta > 0.0 && self.delta <= 1.0, || format!("delta: {} not in (0, 1]", self.delta))?;
        let a = self.effective_alpha();
        check(a >= 0.0 && a <= self.delta, || format!("alpha: {a} not in [0, delta]"))?;
        check(self.mu >= 0.0 && self.mu + a + self.delta <= 1.0, || {
            format!("mu: need 0 <= mu and mu + alpha + delta <= 1 (got {})", self.mu + a + self.delta)
        })?;
        check(!self.n_values.is_empty(), || "n_values: must be non-empty".into())?;
        check(self.n_values.iter().all(|&n| n >= 1), || "n_values: entries must be >= 1".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnknownLimitConfig {
    pub seed: u64,
    pub trials: u64,
    pub lambda_values: Vec<f64>,
    /// Covertness target for the jammer design; `null` skips the design.
    pub epsilon: Option<f64>,
    pub w_hz: f64,
    pub t_sec: f64,
    pub alpha: f64,
    pub p_a: f64,
    pub dp_a: f64,
    pub p_j: f64,
    pub dp_j: f64,
    pub d_aw: f64,
    pub r: f64,
    pub sigma_a_sq: f64,
    pub sigma_j_sq: f64,
}

impl Default for UnknownLimitConfig {
    fn default() -> Self {
        let base = crate::scenario::UnknownPathLossConfig::default();
        UnknownLimitConfig {
            seed: 1,
            trials: 100_000,
            lambda_values: vec![1.0, 2.0, 4.0, 9.0],
            epsilon: Some(0.1),
            w_hz: base.w_hz,
            t_sec: base.t_sec,
            alpha: base.alpha,
            p_a: base.p_a,
            dp_a: base.dp_a,
            p_j: base.p_j,
            dp_j: base.dp_j,
            d_aw: base.d_aw,
            r: base.r,
            sigma_a_sq: base.sigma_a_sq,
            sigma_j_sq: base.sigma_j_sq,
        }
    }
}

impl UnknownLimitConfig {
    /// Scenario with `lambda_j` chosen so that the thinned mean is 1.
    pub fn scenario(&self) -> crate::scenario::UnknownPathLossConfig {
        let base = crate::scenario::UnknownPathLossConfig {
            w_hz: self.w_hz,
            t_sec: self.t_sec,
            alpha: self.alpha,
            p_a: self.p_a,
            dp_a: self.dp_a,
            p_j: self.p_j,
            dp_j: self.dp_j,
            lambda_j: 1.0,
            d_aw: self.d_aw,
            r: self.r,
            sigma_a_sq: self.sigma_a_sq,
            sigma_j_sq: self.sigma_j_sq,
            ..Default::default()
        };
        base.with_thinned_lambda(1.0)
    }
}

impl CommandConfig for UnknownLimitConfig {
    const COMMAND: &'static str = "unknown-limit";
    const KEYS: &'static [Key] = &[
        key("seed", "integer", "master seed"),
        key("trials", "count", "trials per hypothesis and row"),
        key("lambda_values", "levels", "thinned mean level counts to sweep"),
        key("epsilon", "1", "target for the jammer design; null skips it"),
        key("w_hz", "Hz", "bandwidth W"),
        key("t_sec", "s", "interval length T"),
        key("alpha", "1", "pulses per level as a fraction of n"),
        key("p_a", "power", "lower end of Alice's transmit power range"),
        key("dp_a", "power", "width of Alice's transmit power range"),
        key("p_j", "power", "lower end of the jammer power range"),
        key("dp_j", "power", "width of the jammer power range"),
        key("d_aw", "distance", "Alice-to-Willie distance"),
        key("r", "1", "path-loss exponent"),
        key("sigma_a_sq", "power", "Alice's power budget"),
        key("sigma_j_sq", "power", "jammer power budget"),
    ];

    fn validate(&self) -> Result<(), String> {
        check(self.trials >= 2, || "trials: must be >= 2".into())?;
        check(!self.lambda_values.is_empty(), || "lambda_values: must be non-empty".into())?;
        check(
            self.lambda_values.iter().all(|l| l.is_finite() && *l > 0.0),
            || "lambda_values: entries must be finite and > 0".into(),
        )?;
        if let Some(e) = self.epsilon {
            check(e > 0.0 && e < 1.0, || format!("epsilon: {e} not in (0, 1)"))?;
        }
        self.scenario().validate().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvConfig {
    pub lambda: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig { lambda: 4.0 }
    }
}

impl CommandConfig for TvConfig {
    const COMMAND: &'static str = "tv";
    const KEYS: &'static [Key] = &[key("lambda", "levels", "thinned mean level count")];

    fn validate(&self) -> Result<(), String> {
        check(self.lambda > 0.0 && self.lambda.is_finite(), || format!("lambda: {} must be > 0", self.lambda))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdCheckConfig {
    pub seed: u64,
    pub n_slots: u64,
    pub intervals: u64,
    pub segment_len: usize,
    pub rolloff: f64,
    pub samples_per_symbol: usize,
    pub span_symbols: usize,
    pub alpha: f64,
    pub mu: f64,
    pub delta: f64,
    pub sigma_sq: f64,
    pub max_out_of_band: f64,
    pub max_in_band_deviation: f64,
}

impl Default for PsdCheckConfig {
    fn default() -> Self {
        PsdCheckConfig {
            seed: 1,
            n_slots: 1000,
            intervals: 100,
            segment_len: 2048,
            rolloff: 0.2,
            samples_per_symbol: 48,
            span_symbols: 12,
            alpha: 0.05,
            mu: 0.2,
            delta: 0.5,
            sigma_sq: 1.0,
            max_out_of_band: 1e-2,
            max_in_band_deviation: 0.05,
        }
    }
}

impl CommandConfig for PsdCheckConfig {
    const COMMAND: &'static str = "psd-check";
    const KEYS: &'static [Key] = &[
        key("seed", "integer", "master seed"),
        key("n_slots", "slots", "slots per interval (W = 1 Hz)"),
        key("intervals", "count", "consecutive intervals concatenated"),
        key("segment_len", "samples", "periodogram segment, power of two"),
        key("rolloff", "1", "SRRC roll-off factor"),
        key("samples_per_symbol", "samples", "oversampling factor"),
        key("span_symbols", "symbols", "pulse length"),
        key("alpha", "1", "Alice's pulse rate"),
        key("mu", "1", "lower end of the jammer rate range"),
        key("delta", "1", "width of the jammer rate range"),
        key("sigma_sq", "power", "symbol variance; 0 gives an empty waveform"),
        key("max_out_of_band", "1", "gate on power beyond (1+rolloff)W/2"),
        key("max_in_band_deviation", "1", "gate on the mean in-band shape deviation"),
    ];

    fn validate(&self) -> Result<(), String> {
        check(self.n_slots >= 1 && self.intervals >= 1, || "n_slots/intervals: must be >= 1".into())?;
        check(
            self.segment_len >= 2 && self.segment_len.is_power_of_two(),
            || format!("segment_len: {} must be a power of two", self.segment_len),
        )?;
        check((0.0..=1.0).contains(&self.rolloff), || format!("rolloff: {} not in [0, 1]", self.rolloff))?;
        check(self.samples_per_symbol >= 2, || "samples_per_symbol: must be >= 2".into())?;
        check(self.span_symbols >= 1, || "span_symbols: must be >= 1".into())?;
        check(self.sigma_sq >= 0.0, || "sigma_sq: must be >= 0".into())
    }
}

fn parse_override(raw: &str) -> Result<(String, Value), CliError> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Schema(format!("--set {raw}: expected key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(CliError::Schema(format!("--set {raw}: empty key")));
    }
    let value = serde_json::from_str(v.trim()).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// Global flags that map onto config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub set: Vec<String>,
}

/// Defaults, then `file`, then flags.
pub fn load<C: CommandConfig>(file: Option<&Path>, ov: &Overrides) -> Result<C, CliError> {
    let Value::Object(mut map) = serde_json::to_value(C::default()).map_err(|e| CliError::Schema(e.to_string()))?
    else {
        return Err(CliError::Schema("config defaults are not an object".into()));
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        let parsed: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        let Value::Object(file_map) = parsed else {
            return Err(CliError::Schema(format!("{}: top level must be an object", path.display())));
        };
        map.extend(file_map);
    }
    // Global flags are shared by all subcommands; ignore those a command has no key for.
    let put = |flag: &str, k: &str, v: Value, map: &mut Map<String, Value>| {
        if map.contains_key(k) {
            map.insert(k.to_string(), v);
        } else {
            eprintln!("note: {flag} has no effect on {}", C::COMMAND);
        }
    };
    if let Some(s) = ov.seed {
        put("--seed", "seed", s.into(), &mut map);
    }
    if let Some(t) = ov.trials {
        put("--trials", "trials", t.into(), &mut map);
    }
    for raw in &ov.set {
        let (k, v) = parse_override(raw)?;
        map.insert(k, v);
    }
    let cfg: C = serde_path_to_error::deserialize(Value::Object(map))
        .map_err(|e| CliError::Schema(format!("{}: {}", e.path(), e.inner())))?;
    cfg.validate().map_err(CliError::Schema)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn keys_match<C: CommandConfig>() {
        let Value::Object(m) = serde_json::to_value(C::default()).unwrap() else {
            panic!("not an object")
        };
        let schema: BTreeSet<&str> = m.keys().map(String::as_str).collect();
        let documented: BTreeSet<&str> = C::KEYS.iter().map(|k| k.name).collect();
        assert_eq!(schema, documented, "{}", C::COMMAND);
        assert_eq!(documented.len(), C::KEYS.len(), "duplicate key in {}", C::COMMAND);
        let help = keys_help::<C>();
        for k in C::KEYS {
            assert!(help.contains(k.name) && help.contains(&format!("[{}]", k.unit)));
        }
    }

    #[test]
    fn help_in_sync_with_schema() {
        keys_match::<IcdDemoConfig>();
        keys_match::<KnownLimitConfig>();
        keys_match::<UnknownLimitConfig>();
        keys_match::<TvConfig>();
        keys_match::<PsdCheckConfig>();
    }

    #[test]
    fn defaults_validate() {
        IcdDemoConfig::default().validate().unwrap();
        KnownLimitConfig::default().validate().unwrap();
        UnknownLimitConfig::default().validate().unwrap();
        TvConfig::default().validate().unwrap();
        PsdCheckConfig::default().validate().unwrap();
        assert_eq!(UnknownLimitConfig::default().scenario().thinned_lambda(), 1.0);
    }

    fn with_set(set: &[&str]) -> Overrides {
        Overrides {
            set: set.iter().map(|s| s.to_string()).collect(),
            ..Overrides::default()
        }
    }

    #[test]
    fn overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"epsilon": 0.3, "mu": 0.1}"#).unwrap();
        let mut ov = with_set(&["epsilon=0.25", "n_values=[10,20]"]);
        ov.seed = Some(9);
        let c: KnownLimitConfig = load(Some(&p), &ov).unwrap();
        assert_eq!((c.epsilon, c.mu, c.seed), (0.25, 0.1, 9));
        assert_eq!(c.n_values, vec![10, 20]);
        assert!((c.effective_alpha() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let e = load::<KnownLimitConfig>(None, &with_set(&["epsilon=1"])).unwrap_err();
        assert!(matches!(&e, CliError::Schema(m) if m.contains("epsilon")), "{e}");
        let e = load::<KnownLimitConfig>(None, &with_set(&["bogus=1"])).unwrap_err();
        assert!(matches!(&e, CliError::Schema(m) if m.contains("bogus")), "{e}");
        let e = load::<KnownLimitConfig>(None, &with_set(&["n_values=oops"])).unwrap_err();
        assert!(matches!(&e, CliError::Schema(m) if m.contains("n_values")), "{e}");
        let e = load::<UnknownLimitConfig>(None, &with_set(&["lambda_values=[]"])).unwrap_err();
        assert!(matches!(e, CliError::Schema(_)));
        assert!(load::<TvConfig>(None, &with_set(&["lambda=0"])).is_err());
        let ov = Overrides {
            trials: Some(3),
            seed: Some(1),
            ..Overrides::default()
        };
        assert_eq!(load::<TvConfig>(None, &ov).unwrap(), TvConfig::default());
        assert!(load::<TvConfig>(None, &with_set(&["trials=3"])).is_err());
        assert!(load::<TvConfig>(None, &with_set(&["novalue"])).is_err());
    }

    #[test]
    fn infinite_snr_round_trips() {
        let c: IcdDemoConfig = load(None, &with_set(&["jammer_snr_db=-inf"])).unwrap();
        assert_eq!(c.jammer_snr_db, f64::NEG_INFINITY);
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["jammer_snr_db"], "-inf");
        let back: IcdDemoConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
        assert!(load::<IcdDemoConfig>(None, &with_set(&["alice_snr_db=loud"])).is_err());
        assert!(load::<IcdDemoConfig>(None, &with_set(&["alice_snr_db=inf"])).is_err());
    }
}
