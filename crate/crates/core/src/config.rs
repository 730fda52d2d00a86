//! Run configuration.
//!
//! A single TOML document; every key is optional and falls back to the
//! defaults below. Unknown keys are rejected. The resolved configuration is
//! echoed into every report.
//!
//! ```toml
//! workers = 0                  # 0 = one per core
//! min_daily_trades = 500
//! q_grid = [1.0, 1.25, 1.5]    # default: 1.00 … 6.00 step 0.25
//! moment_orders = [2, 4, 8, 16]
//!
//! [input]
//! path = "minutes.csv"         # tick, minute-bar or volatility CSV
//! calendar = "calendar.csv"    # tick input only
//! meta = "meta.csv"
//!
//! [input.synth]                # instead of `path`
//! alpha = 0.85
//! length = 1048576
//! seed = 7
//! count = 8
//!
//! [se_fit]
//! rms_threshold = 0.10
//!
//! [delta]
//! rms_threshold = 0.22
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::Binning;
use crate::intervals::PdfOptions;
use crate::scaling::{default_q_grid, DeltaOptions, SeFitOptions, DEFAULT_MOMENT_ORDERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthSignal {
    CorrelatedGaussian,
    WhiteNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthBatch {
    pub signal: SynthSignal,
    pub alpha: f64,
    pub length: usize,
    /// Series `i` uses seed `seed + i`.
    pub seed: u64,
    pub count: usize,
    /// Shuffle each series (seeded by its own seed) to destroy correlations.
    pub shuffle: bool,
}

impl Default for SynthBatch {
    fn default() -> Self {
        SynthBatch {
            signal: SynthSignal::CorrelatedGaussian,
            alpha: 0.85,
            length: 1 << 20,
            seed: 7,
            count: 8,
            shuffle: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub calendar: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub synth: Option<SynthBatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DfaConfig {
    pub enabled: bool,
    pub detrend_order: usize,
    pub min_scale: usize,
    pub scale_count: usize,
    /// Inclusive scale window for the regression; the full grid when absent.
    pub fit_range: Option<(usize, usize)>,
}

impl Default for DfaConfig {
    fn default() -> Self {
        DfaConfig {
            enabled: true,
            detrend_order: 2,
            min_scale: 10,
            scale_count: 20,
            fit_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub workers: usize,
    pub min_daily_trades: u64,
    pub q_grid: Vec<f64>,
    pub moment_orders: Vec<f64>,
    /// Threshold `|signal|` instead of the signal itself (synthetic input only).
    pub threshold_on_abs: bool,
    /// Thresholds whose densities are kept in the report.
    pub pdf_q: Vec<f64>,
    pub curve_q: Vec<f64>,
    pub curve_m: Vec<f64>,
    pub regression_q: Vec<f64>,
    pub regression_m: f64,
    pub input: InputConfig,
    pub pdf: PdfOptions,
    pub se_fit: SeFitOptions,
    pub delta: DeltaOptions,
    pub dfa: DfaConfig,
    pub binning: Binning,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            workers: 0,
            min_daily_trades: 500,
            q_grid: default_q_grid(),
            moment_orders: DEFAULT_MOMENT_ORDERS.to_vec(),
            threshold_on_abs: false,
            pdf_q: vec![2.0, 3.0, 4.0, 5.0],
            curve_q: vec![2.0, 3.0, 4.0, 5.0],
            curve_m: DEFAULT_MOMENT_ORDERS.to_vec(),
            regression_q: vec![2.0, 3.0, 4.0, 5.0],
            regression_m: 2.0,
            input: InputConfig::default(),
            pdf: PdfOptions::default(),
            se_fit: SeFitOptions::default(),
            delta: DeltaOptions::default(),
            dfa: DfaConfig::default(),
            binning: Binning::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Applies `key.path=value` overrides; `value` is parsed as a TOML value
    /// and falls back to a plain string.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let mut table = &mut doc;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for part in &parts[..parts.len() - 1] {
                table = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("`{part}` in `{key}` is not a table")))?;
            }
            table.insert(parts[parts.len() - 1].to_string(), value);
        }
        let cfg: Config = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_grid.is_empty() || self.q_grid.iter().any(|&q| q.is_nan() || q <= 0.0) {
            return Err(Error::Config("q_grid must hold positive thresholds".into()));
        }
        if self.moment_orders.iter().any(|&m| m.is_nan() || m <= 0.0) {
            return Err(Error::Config("moment orders must be positive".into()));
        }
        if self.pdf.bins_per_decade == 0 {
            return Err(Error::Config("pdf.bins_per_decade must be positive".into()));
        }
        if !(1..=2).contains(&self.dfa.detrend_order) {
            return Err(Error::Config("dfa.detrend_order must be 1 or 2".into()));
        }
        if let Some(s) = &self.input.synth {
            if s.count == 0 {
                return Err(Error::Config("input.synth.count must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_toml_str("qgrid = [1.0]").is_err());
        assert!(Config::from_toml_str("[se_fit]\nrms = 0.2").is_err());
    }

    #[test]
    fn nested_values_and_overrides() {
        let cfg = Config::from_toml_str("q_grid = [2.0]\n[se_fit]\nrms_threshold = 0.2\n").unwrap();
        assert_eq!(cfg.q_grid, vec![2.0]);
        assert_eq!(cfg.se_fit.rms_threshold, 0.2);
        assert_eq!(cfg.se_fit.x_min, 0.1);
        let cfg = cfg
            .with_overrides(&["delta.tau_high=200".into(), "workers=3".into(), "input.path=x.csv".into()])
            .unwrap();
        assert_eq!(cfg.delta.tau_high, 200.0);
        assert_eq!(cfg.workers, 3);
        assert_eq!(cfg.input.path.as_deref(), Some(Path::new("x.csv")));
    }

    #[test]
    fn invalid_grid_rejected() {
        assert!(Config::from_toml_str("q_grid = [0.0]").is_err());
    }
}
