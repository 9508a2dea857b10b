//! Run configuration in TOML with mandatory unit suffixes.
//!
//! Frequencies are ordinary frequencies (`"7.5 GHz"`) and are stored as
//! angular rates. Times take `s`, `ms`, `us`, `ns` or `ps`; powers `dBm`;
//! the attenuation correction `dB`; transition rates `/s`; the detection
//! noise `sqrt(1/s)` or `"auto"`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::{Table, Value};

use crate::model::{QubitState, SystemParams};
use crate::units::TWO_PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config key `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    fn key(key: &str, message: impl Into<String>) -> Self {
        Self::Key {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Offending key, when the error is tied to one.
    pub fn key_name(&self) -> Option<&str> {
        match self {
            Self::Key { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Frequency,
    Time,
    Power,
    Ratio,
    Rate,
    Noise,
}

impl Dim {
    fn describe(self) -> &'static str {
        match self {
            Dim::Frequency => "a frequency with unit Hz, kHz, MHz or GHz",
            Dim::Time => "a duration with unit s, ms, us, ns or ps",
            Dim::Power => "a power with unit dBm",
            Dim::Ratio => "a ratio with unit dB",
            Dim::Rate => "a rate with unit /s",
            Dim::Noise => "a noise amplitude with unit sqrt(1/s)",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        match (self, unit) {
            (Dim::Frequency, "Hz") => Some(TWO_PI),
            (Dim::Frequency, "kHz") => Some(TWO_PI * 1e3),
            (Dim::Frequency, "MHz") => Some(TWO_PI * 1e6),
            (Dim::Frequency, "GHz") => Some(TWO_PI * 1e9),
            (Dim::Time, "s") => Some(1.0),
            (Dim::Time, "ms") => Some(1e-3),
            (Dim::Time, "us" | "µs") => Some(1e-6),
            (Dim::Time, "ns") => Some(1e-9),
            (Dim::Time, "ps") => Some(1e-12),
            (Dim::Power, "dBm") | (Dim::Ratio, "dB") | (Dim::Rate, "/s") | (Dim::Noise, "sqrt(1/s)") => Some(1.0),
            _ => None,
        }
    }
}

fn parse_quantity(key: &str, v: &Value, dim: Dim) -> Result<f64, ConfigError> {
    let s = match v {
        Value::String(s) => s.trim(),
        Value::Integer(_) | Value::Float(_) => {
            return Err(ConfigError::key(
                key,
                format!("unit suffix required: expected {}", dim.describe()),
            ))
        }
        _ => return Err(ConfigError::key(key, format!("expected {}", dim.describe()))),
    };
    let (num, unit) = s
        .split_once(char::is_whitespace)
        .map(|(n, u)| (n, u.trim()))
        .unwrap_or((s, ""));
    if unit.is_empty() {
        return Err(ConfigError::key(
            key,
            format!("unit suffix required: expected {}", dim.describe()),
        ));
    }
    let x: f64 = num
        .parse()
        .map_err(|_| ConfigError::key(key, format!("`{num}` is not a number")))?;
    if !x.is_finite() {
        return Err(ConfigError::key(key, "value must be finite"));
    }
    let scale = dim
        .scale(unit)
        .ok_or_else(|| ConfigError::key(key, format!("unit `{unit}` not accepted: expected {}", dim.describe())))?;
    Ok(x * scale)
}

/// Parses a lone frequency such as `"7.508 GHz"` into rad/s; errors name
/// `key`.
pub fn parse_frequency(key: &str, text: &str) -> Result<f64, ConfigError> {
    parse_quantity(key, &Value::String(text.to_string()), Dim::Frequency)
}

/// Parses a lone power such as `"-89 dBm"`.
pub fn parse_power_dbm(key: &str, text: &str) -> Result<f64, ConfigError> {
    parse_quantity(key, &Value::String(text.to_string()), Dim::Power)
}

/// Keyed view of one table that tracks which entries were consumed.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    seen: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: Option<&'a Table>) -> Self {
        Self {
            path: path.to_string(),
            table,
            seen: BTreeSet::new(),
        }
    }

    fn of(parent: &'a Table, name: &str, required: bool) -> Result<Self, ConfigError> {
        match parent.get(name) {
            Some(Value::Table(t)) => Ok(Self::new(name, Some(t))),
            Some(_) => Err(ConfigError::key(name, "expected a table")),
            None if required => Err(ConfigError::key(name, "missing required section")),
            None => Ok(Self::new(name, None)),
        }
    }

    fn full(&self, key: &str) -> String {
        format!("{}.{}", self.path, key)
    }

    fn get(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    fn required(&mut self, key: &str) -> Result<&'a Value, ConfigError> {
        let full = self.full(key);
        self.get(key)
            .ok_or_else(|| ConfigError::key(&full, "missing required key"))
    }

    fn quantity(&mut self, key: &str, dim: Dim) -> Result<f64, ConfigError> {
        let full = self.full(key);
        parse_quantity(&full, self.required(key)?, dim)
    }

    fn quantity_or(&mut self, key: &str, dim: Dim, default: f64) -> Result<f64, ConfigError> {
        let full = self.full(key);
        match self.get(key) {
            Some(v) => parse_quantity(&full, v, dim),
            None => Ok(default),
        }
    }

    fn number_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let full = self.full(key);
        match self.get(key) {
            Some(Value::Float(x)) if x.is_finite() => Ok(*x),
            Some(Value::Integer(i)) => Ok(*i as f64),
            Some(_) => Err(ConfigError::key(&full, "expected a plain number")),
            None => Ok(default),
        }
    }

    fn integer_or(&mut self, key: &str, default: i64) -> Result<i64, ConfigError> {
        let full = self.full(key);
        match self.get(key) {
            Some(Value::Integer(i)) => Ok(*i),
            Some(_) => Err(ConfigError::key(&full, "expected an integer")),
            None => Ok(default),
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        let full = self.full(key);
        match self.get(key) {
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(ConfigError::key(&full, "expected true or false")),
            None => Ok(default),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<&'a str>, ConfigError> {
        let full = self.full(key);
        match self.get(key) {
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(ConfigError::key(&full, "expected a string")),
            None => Ok(None),
        }
    }

    /// Either a list of quantities or `{ start, stop, points }`.
    fn grid(&mut self, key: &str, dim: Dim) -> Result<Vec<f64>, ConfigError> {
        let full = self.full(key);
        let values = match self.required(key)? {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, v)| parse_quantity(&format!("{full}[{i}]"), v, dim))
                .collect::<Result<Vec<_>, _>>()?,
            Value::Table(t) => {
                let mut s = Section::new(&full, Some(t));
                let start = s.quantity("start", dim)?;
                let stop = s.quantity("stop", dim)?;
                let points = match s.required("points")? {
                    Value::Integer(n) if *n >= 1 => *n as usize,
                    _ => return Err(ConfigError::key(&s.full("points"), "expected a positive integer")),
                };
                s.finish()?;
                if points == 1 {
                    if start != stop {
                        return Err(ConfigError::key(&full, "a single point needs start == stop"));
                    }
                    vec![start]
                } else {
                    let step = (stop - start) / (points - 1) as f64;
                    (0..points)
                        .map(|k| if k + 1 == points { stop } else { start + step * k as f64 })
                        .collect()
                }
            }
            _ => {
                return Err(ConfigError::key(
                    &full,
                    "expected a list or a { start, stop, points } table",
                ))
            }
        };
        if values.is_empty() {
            return Err(ConfigError::key(&full, "grid must not be empty"));
        }
        Ok(values)
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !self.seen.contains(*k)) {
                return Err(ConfigError::key(&self.full(k), "unknown key"));
            }
        }
        Ok(())
    }
}

/// Time-domain protocol settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub ramp_time: f64,
    pub hold_time: f64,
    pub averaging_fraction: f64,
    pub rise_time: f64,
    pub pulse_length: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub sample_interval: f64,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SigmaSpec {
    /// Calibrated to `overlap_target` at the calibration point.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseConfig {
    pub sigma_det: SigmaSpec,
    pub overlap_target: f64,
    pub gamma_down: f64,
    pub gamma_up: f64,
    pub prep_error: f64,
    pub heralding: bool,
    pub shots_per_point: usize,
    /// `(ω_d rad/s, power dBm)` used for calibration and single shots.
    pub calibration: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: SystemParams,
    /// Drive angular frequencies.
    pub freq_grid: Vec<f64>,
    pub power_grid_dbm: Vec<f64>,
    pub protocol: ProtocolConfig,
    pub noise: NoiseConfig,
    pub attenuation_correction_db: f64,
    pub seed: u64,
    pub qubit_state: Option<QubitState>,
    pub curve_points: usize,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let allowed = ["system", "grid", "protocol", "noise", "calibration", "run"];
        if let Some(k) = root.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ConfigError::key(k, "unknown section"));
        }

        let mut s = Section::of(&root, "system", true)?;
        let system = SystemParams {
            omega_q: s.quantity("omega_q", Dim::Frequency)?,
            omega_a: s.quantity("omega_a", Dim::Frequency)?,
            omega_c: s.quantity("omega_c", Dim::Frequency)?,
            u_a: s.quantity("u_a", Dim::Frequency)?,
            g_zz: s.quantity("g_zz", Dim::Frequency)?,
            g_ac: s.quantity("g_ac", Dim::Frequency)?,
            kappa_a: s.quantity("kappa_a", Dim::Frequency)?,
            kappa_c: s.quantity("kappa_c", Dim::Frequency)?,
            t1: s.quantity("t1", Dim::Time)?,
            t2: s.quantity("t2", Dim::Time)?,
        };
        s.finish()?;
        system
            .validate()
            .map_err(|e| ConfigError::key("system", e.to_string()))?;

        let mut g = Section::of(&root, "grid", true)?;
        let freq_grid = g.grid("freq", Dim::Frequency)?;
        let power_grid_dbm = g.grid("power", Dim::Power)?;
        g.finish()?;
        if freq_grid.iter().any(|&w| w <= 0.0) {
            return Err(ConfigError::key("grid.freq", "frequencies must be positive"));
        }

        let mut p = Section::of(&root, "protocol", false)?;
        let pulse_length = p.quantity_or("pulse_length", Dim::Time, 500e-9)?;
        let protocol = ProtocolConfig {
            ramp_time: p.quantity_or("ramp_time", Dim::Time, 500e-9)?,
            hold_time: p.quantity_or("hold_time", Dim::Time, 1e-6)?,
            averaging_fraction: p.number_or("averaging_fraction", 0.2)?,
            rise_time: p.quantity_or("rise_time", Dim::Time, 20e-9)?,
            pulse_length,
            window_start: p.quantity_or("window_start", Dim::Time, 0.0)?,
            window_end: p.quantity_or("window_end", Dim::Time, pulse_length)?,
            sample_interval: p.quantity_or("sample_interval", Dim::Time, 1e-9)?,
            rtol: p.number_or("rtol", 1e-9)?,
            atol: p.number_or("atol", 1e-12)?,
        };
        p.finish()?;
        for (key, v) in [
            ("protocol.ramp_time", protocol.ramp_time),
            ("protocol.hold_time", protocol.hold_time),
            ("protocol.pulse_length", protocol.pulse_length),
            ("protocol.sample_interval", protocol.sample_interval),
            ("protocol.rtol", protocol.rtol),
            ("protocol.atol", protocol.atol),
        ] {
            if !(v > 0.0) {
                return Err(ConfigError::key(key, "must be positive"));
            }
        }
        if !(protocol.averaging_fraction > 0.0 && protocol.averaging_fraction <= 1.0) {
            return Err(ConfigError::key("protocol.averaging_fraction", "must lie in (0, 1]"));
        }
        if !(protocol.rise_time >= 0.0 && protocol.rise_time <= protocol.pulse_length) {
            return Err(ConfigError::key("protocol.rise_time", "must lie within the pulse"));
        }
        if !(protocol.window_start >= 0.0
            && protocol.window_end > protocol.window_start
            && protocol.window_end <= protocol.pulse_length)
        {
            return Err(ConfigError::key(
                "protocol.window_end",
                "window must lie within the pulse",
            ));
        }

        let mut n = Section::of(&root, "noise", false)?;
        let sigma_det = match n.get("sigma_det") {
            None => SigmaSpec::Auto,
            Some(Value::String(s)) if s.trim() == "auto" => SigmaSpec::Auto,
            Some(v) => {
                let x = parse_quantity("noise.sigma_det", v, Dim::Noise)?;
                if x < 0.0 {
                    return Err(ConfigError::key("noise.sigma_det", "must be >= 0"));
                }
                SigmaSpec::Fixed(x)
            }
        };
        let overlap_target = n.number_or("overlap_target", 0.001)?;
        let gamma_down = n.quantity_or("gamma_down", Dim::Rate, 1.0 / system.t1)?;
        let gamma_up = n.quantity_or("gamma_up", Dim::Rate, 0.0)?;
        let prep_error = n.number_or("prep_error", 0.003)?;
        let heralding = n.bool_or("heralding", false)?;
        let shots = n.integer_or("shots_per_point", 10_000)?;
        let cal_freq = n
            .get("calibration_freq")
            .map(|v| parse_quantity("noise.calibration_freq", v, Dim::Frequency));
        let cal_power = n
            .get("calibration_power")
            .map(|v| parse_quantity("noise.calibration_power", v, Dim::Power));
        n.finish()?;
        let calibration = match (cal_freq, cal_power) {
            (Some(f), Some(p)) => Some((f?, p?)),
            (None, None) => None,
            (Some(_), None) => return Err(ConfigError::key("noise.calibration_power", "missing required key")),
            (None, Some(_)) => return Err(ConfigError::key("noise.calibration_freq", "missing required key")),
        };
        if !(overlap_target > 0.0 && overlap_target < 0.5) {
            return Err(ConfigError::key("noise.overlap_target", "must lie in (0, 0.5)"));
        }
        if !(gamma_down >= 0.0) {
            return Err(ConfigError::key("noise.gamma_down", "must be >= 0"));
        }
        if !(gamma_up >= 0.0) {
            return Err(ConfigError::key("noise.gamma_up", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&prep_error) {
            return Err(ConfigError::key("noise.prep_error", "must be a probability"));
        }
        if shots < 100 {
            return Err(ConfigError::key("noise.shots_per_point", "must be at least 100"));
        }
        let noise = NoiseConfig {
            sigma_det,
            overlap_target,
            gamma_down,
            gamma_up,
            prep_error,
            heralding,
            shots_per_point: shots as usize,
            calibration,
        };

        let mut c = Section::of(&root, "calibration", false)?;
        let attenuation_correction_db = c.quantity_or("attenuation_correction", Dim::Ratio, 0.0)?;
        c.finish()?;

        let mut r = Section::of(&root, "run", false)?;
        let seed = r.integer_or("seed", 0)?;
        if seed < 0 {
            return Err(ConfigError::key("run.seed", "must be non-negative"));
        }
        let threads = match r.integer_or("threads", 0)? {
            0 => None,
            t if t > 0 => Some(t as usize),
            _ => return Err(ConfigError::key("run.threads", "must be positive")),
        };
        let qubit_state = match r.string("qubit_state")? {
            Some(s) => Some(
                s.parse::<QubitState>()
                    .map_err(|_| ConfigError::key("run.qubit_state", "expected \"g\" or \"e\""))?,
            ),
            None => None,
        };
        let curve_points = r.integer_or("curve_points", 99)?;
        if curve_points < 1 {
            return Err(ConfigError::key("run.curve_points", "must be positive"));
        }
        let out = r.string("out")?.map(PathBuf::from);
        r.finish()?;

        Ok(Self {
            system,
            freq_grid,
            power_grid_dbm,
            protocol,
            noise,
            attenuation_correction_db,
            seed: seed as u64,
            qubit_state,
            curve_points: curve_points as usize,
            threads,
            out,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// SHA-256 over every field that affects results; output location and
    /// thread count are excluded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ghz, mhz};

    pub(crate) const MINIMAL: &str = r#"
[system]
omega_q = "6.283 GHz"
omega_a = "7.3748 GHz"
omega_c = "7.1531 GHz"
u_a = "13.5 MHz"
g_zz = "34.5 MHz"
g_ac = "290.7 MHz"
kappa_a = "5.6 MHz"
kappa_c = "12.7 MHz"
t1 = "3.3 us"
t2 = "3.3 us"

[grid]
freq = ["7.5 GHz", "7.51 GHz"]
power = { start = "-100 dBm", stop = "-90 dBm", points = 3 }
"#;

    #[test]
    fn parses_units_into_angular_rates() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert!((c.system.u_a - mhz(13.5)).abs() < 1e-6);
        assert!((c.freq_grid[1] - ghz(7.51)).abs() < 1e-3);
        assert_eq!(c.power_grid_dbm, vec![-100.0, -95.0, -90.0]);
        assert!((c.system.t1 - 3.3e-6).abs() < 1e-20);
        assert_eq!(c.attenuation_correction_db, 0.0);
        assert_eq!(c.noise.sigma_det, SigmaSpec::Auto);
    }

    #[test]
    fn unsuffixed_number_rejected_with_key() {
        let text = MINIMAL.replace("u_a = \"13.5 MHz\"", "u_a = 13.5");
        let e = RunConfig::from_toml_str(&text).unwrap_err();
        assert_eq!(e.key_name(), Some("system.u_a"));
        let text = MINIMAL.replace("u_a = \"13.5 MHz\"", "u_a = \"13.5\"");
        assert_eq!(
            RunConfig::from_toml_str(&text).unwrap_err().key_name(),
            Some("system.u_a")
        );
    }

    #[test]
    fn wrong_dimension_rejected() {
        let text = MINIMAL.replace("t1 = \"3.3 us\"", "t1 = \"3.3 MHz\"");
        assert_eq!(
            RunConfig::from_toml_str(&text).unwrap_err().key_name(),
            Some("system.t1")
        );
    }

    #[test]
    fn missing_and_unknown_keys_named() {
        let text = MINIMAL.replace("g_zz = \"34.5 MHz\"\n", "");
        assert_eq!(
            RunConfig::from_toml_str(&text).unwrap_err().key_name(),
            Some("system.g_zz")
        );
        let text = format!("{MINIMAL}\n[run]\nsed = 3\n");
        assert_eq!(RunConfig::from_toml_str(&text).unwrap_err().key_name(), Some("run.sed"));
    }

    #[test]
    fn hash_ignores_output_and_threads_only() {
        let base = RunConfig::from_toml_str(MINIMAL).unwrap();
        let with_run = RunConfig::from_toml_str(&format!("{MINIMAL}\n[run]\nout = \"x\"\nthreads = 3\n")).unwrap();
        assert_eq!(base.hash(), with_run.hash());
        let seeded = RunConfig::from_toml_str(&format!("{MINIMAL}\n[run]\nseed = 5\n")).unwrap();
        assert_ne!(base.hash(), seeded.hash());
        let shifted = RunConfig::from_toml_str(&MINIMAL.replace("5.6 MHz", "5.7 MHz")).unwrap();
        assert_ne!(base.hash(), shifted.hash());
    }
}
