//! Grid artifacts: a CSV of cell values plus a JSON metadata sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: String,
    pub config_hash: String,
    pub code_version: String,
    /// Taken from `SOURCE_DATE_EPOCH` when set, so repeated runs stay
    /// byte-identical by default.
    pub timestamp: Option<String>,
    pub qubit_state: Option<String>,
    pub unit: String,
    pub shape: [usize; 2],
    pub freq_ghz: Vec<f64>,
    pub power_dbm: Vec<f64>,
    /// Kind-specific extras (contours, star point, calibration).
    pub extra: serde_json::Value,
}

impl Metadata {
    pub fn new(kind: &str, config_hash: String, unit: &str, freq_ghz: Vec<f64>, power_dbm: Vec<f64>) -> Self {
        Self {
            kind: kind.to_string(),
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
            qubit_state: None,
            unit: unit.to_string(),
            shape: [freq_ghz.len(), power_dbm.len()],
            freq_ghz,
            power_dbm,
            extra: serde_json::Value::Null,
        }
    }
}

/// Values on a frequency × power grid, frequency-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapArtifact {
    pub values: Vec<f64>,
    pub metadata: Metadata,
}

/// 17 significant digits round-trip every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl MapArtifact {
    pub fn new(values: Vec<f64>, metadata: Metadata) -> Result<Self, HarnessError> {
        let a = Self { values, metadata };
        a.check_shape()?;
        Ok(a)
    }

    fn check_shape(&self) -> Result<(), HarnessError> {
        let [nf, np] = self.metadata.shape;
        if nf != self.metadata.freq_ghz.len() || np != self.metadata.power_dbm.len() || self.values.len() != nf * np {
            return Err(HarnessError::Artifact(format!(
                "shape {nf}x{np} does not match {} values",
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.metadata.shape[1] + j]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_GHz,power_dBm,value,unit\n");
        let np = self.metadata.shape[1];
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt_f64(self.metadata.freq_ghz[k / np]),
                fmt_f64(self.metadata.power_dbm[k % np]),
                fmt_f64(*v),
                self.metadata.unit
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.metadata).expect("metadata serialises");
        s.push('\n');
        s
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| HarnessError::io(&csv, e))?;
        std::fs::write(&json, self.to_json()).map_err(|e| HarnessError::io(&json, e))?;
        Ok((csv, json))
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self, HarnessError> {
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        let meta_text = std::fs::read_to_string(&json).map_err(|e| HarnessError::io(&json, e))?;
        let metadata: Metadata =
            serde_json::from_str(&meta_text).map_err(|e| HarnessError::Artifact(format!("{}: {e}", json.display())))?;
        let text = std::fs::read_to_string(&csv).map_err(|e| HarnessError::io(&csv, e))?;
        let mut lines = text.lines();
        if lines.next() != Some("freq_GHz,power_dBm,value,unit") {
            return Err(HarnessError::Artifact(format!("{}: bad header", csv.display())));
        }
        let values = lines
            .enumerate()
            .map(|(n, line)| {
                let bad = || HarnessError::Artifact(format!("{}: bad row {}", csv.display(), n + 2));
                let field = line.split(',').nth(2).ok_or_else(bad)?;
                field.parse::<f64>().map_err(|_| bad())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(values, metadata)
    }
}
