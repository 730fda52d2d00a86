//! The machine-readable analysis report and the figure tables derived from it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::factors::{bin_and_aggregate, regress_delta_gamma, DeltaGammaRegression, FactorCurve, FactorKind, StockFactors};
use crate::scaling::{GammaPoint, MomentScalingResult, PointStatus};
use crate::stats::{mean, sample_std};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub code_version: String,
    pub rng: String,
    /// Order of the volatility construction steps.
    pub volatility_construction: String,
    pub config: Config,
    /// Wall-clock creation time; excluded from determinism comparisons.
    pub created_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdfTable {
    pub q: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub count: Vec<u64>,
    pub width: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfaSummary {
    pub alpha: f64,
    /// `2(1 − α)`, shown next to the fitted `γ`.
    pub gamma_from_alpha: f64,
    pub detrend_order: usize,
    pub fit_range: (usize, usize),
    pub scales: Vec<usize>,
    pub fluctuations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockRecord {
    pub symbol: String,
    pub factors: Option<StockFactors>,
    pub gamma_by_q: Vec<GammaPoint>,
    pub delta_by_m: Vec<MomentScalingResult>,
    pub pdfs: Vec<PdfTable>,
    pub dfa: Option<DfaSummary>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tally {
    pub attempted: usize,
    pub valid: usize,
    pub outlier: usize,
    pub insufficient: usize,
    pub outlier_fraction: f64,
    pub insufficient_fraction: f64,
}

impl Tally {
    pub fn from_statuses(statuses: impl Iterator<Item = PointStatus>) -> Self {
        let mut t = Tally::default();
        for s in statuses {
            t.attempted += 1;
            match s {
                PointStatus::Valid => t.valid += 1,
                PointStatus::Outlier => t.outlier += 1,
                PointStatus::Insufficient => t.insufficient += 1,
            }
        }
        if t.attempted > 0 {
            t.outlier_fraction = t.outlier as f64 / t.attempted as f64;
            t.insufficient_fraction = t.insufficient as f64 / t.attempted as f64;
        }
        t
    }

    pub fn is_consistent(&self) -> bool {
        self.valid + self.outlier + self.insufficient == self.attempted
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tallies {
    pub gamma: Tally,
    pub delta: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QSummary {
    pub q: f64,
    pub mean_gamma: Option<f64>,
    pub std_gamma: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentKind {
    Gamma,
    Delta,
}

impl ExponentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExponentKind::Gamma => "gamma",
            ExponentKind::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRecord {
    pub exponent: ExponentKind,
    /// `q` for γ curves, `m` for δ curves.
    pub parameter: f64,
    pub curve: FactorCurve,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aggregates {
    pub gamma_vs_q: Vec<QSummary>,
    pub curves: Vec<CurveRecord>,
    pub regressions: Vec<DeltaGammaRegression>,
    /// Aggregates that could not be formed, and why.
    pub notes: Vec<String>,
}

/// Published values for comparison against equivalent market data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedReference {
    /// `(q, mean γ)`.
    pub mean_gamma: Vec<(f64, f64)>,
    pub gamma_plateau: f64,
    /// `(q, slope)` of δ against γ at `m = 2`.
    pub delta_gamma_slopes: Vec<(f64, f64)>,
    pub se_outliers: (usize, usize),
    pub delta_outliers: (usize, usize),
}

impl Default for PublishedReference {
    fn default() -> Self {
        PublishedReference {
            mean_gamma: vec![(1.0, 0.49), (3.0, 0.28)],
            gamma_plateau: 0.26,
            delta_gamma_slopes: vec![(2.0, -0.63), (3.0, -0.75), (4.0, -0.74), (5.0, -0.62)],
            se_outliers: (730, 22740),
            delta_outliers: (215, 4548),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub metadata: RunMetadata,
    pub stocks: Vec<StockRecord>,
    pub tallies: Tallies,
    pub aggregates: Aggregates,
    pub reference: PublishedReference,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

impl StockRecord {
    pub fn gamma_at(&self, q: f64) -> Option<&GammaPoint> {
        self.gamma_by_q.iter().find(|p| same(p.q, q))
    }

    pub fn valid_gamma(&self, q: f64) -> Option<f64> {
        self.gamma_at(q)
            .filter(|p| p.status == PointStatus::Valid)
            .and_then(|p| p.fit.map(|f| f.gamma))
    }

    pub fn valid_delta(&self, m: f64) -> Option<f64> {
        self.delta_by_m
            .iter()
            .find(|d| same(d.m, m) && d.status == PointStatus::Valid)
            .and_then(|d| d.fit.map(|f| f.delta))
    }
}

pub fn tallies(stocks: &[StockRecord]) -> Tallies {
    Tallies {
        gamma: Tally::from_statuses(stocks.iter().flat_map(|s| s.gamma_by_q.iter().map(|p| p.status))),
        delta: Tally::from_statuses(stocks.iter().flat_map(|s| s.delta_by_m.iter().map(|d| d.status))),
    }
}

/// Fig.-2 summary, factor curves and δ–γ regressions over valid points only.
pub fn aggregate(stocks: &[StockRecord], config: &Config) -> Aggregates {
    let mut agg = Aggregates::default();
    for &q in &config.q_grid {
        let gs: Vec<f64> = stocks.iter().filter_map(|s| s.valid_gamma(q)).collect();
        agg.gamma_vs_q.push(QSummary {
            q,
            mean_gamma: (!gs.is_empty()).then(|| mean(&gs)),
            std_gamma: (!gs.is_empty()).then(|| sample_std(&gs)),
            count: gs.len(),
        });
    }
    let mut curve = |exponent: ExponentKind, parameter: f64, value: &dyn Fn(&StockRecord) -> Option<f64>| {
        for factor in FactorKind::ALL {
            let samples: Vec<(f64, f64)> = stocks
                .iter()
                .filter_map(|s| {
                    let f = factor.value(s.factors.as_ref()?)?;
                    Some((f, value(s)?))
                })
                .collect();
            if samples.is_empty() {
                continue;
            }
            match bin_and_aggregate(&samples, factor, &config.binning) {
                Ok(curve) => agg.curves.push(CurveRecord { exponent, parameter, curve }),
                Err(e) => agg.notes.push(format!("{} vs {factor} at {parameter}: {e}", exponent.name())),
            }
        }
    };
    for &q in &config.curve_q {
        curve(ExponentKind::Gamma, q, &|s| s.valid_gamma(q));
    }
    for &m in &config.curve_m {
        curve(ExponentKind::Delta, m, &|s| s.valid_delta(m));
    }
    let m = config.regression_m;
    for &q in &config.regression_q {
        let pairs = delta_gamma_pairs(stocks, q, m);
        if pairs.is_empty() {
            continue;
        }
        let pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(_, g, d)| (g, d)).collect();
        match regress_delta_gamma(&pairs, q, m) {
            Ok(r) => agg.regressions.push(r),
            Err(e) => agg.notes.push(format!("delta vs gamma at q={q}, m={m}: {e}")),
        }
    }
    agg
}

/// `(symbol, γ, δ)` for stocks whose γ at `q` and δ at `m` are both valid.
pub fn delta_gamma_pairs(stocks: &[StockRecord], q: f64, m: f64) -> Vec<(&str, f64, f64)> {
    stocks
        .iter()
        .filter_map(|s| Some((s.symbol.as_str(), s.valid_gamma(q)?, s.valid_delta(m)?)))
        .collect()
}

impl AnalysisReport {
    /// JSON with the creation time cleared; identical runs give identical bytes.
    pub fn body_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.metadata.created_unix = None;
        Ok(serde_json::to_string_pretty(&copy)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: AnalysisReport = serde_json::from_str(text)?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report schema version {} is not supported (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Writes through a temporary file in the same directory and renames it.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("report");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Scaled interval densities per threshold.
    ScaledPdf = 1,
    /// Mean γ against `q`.
    GammaVsQ = 2,
    /// γ against the four factors.
    GammaFactors = 3,
    /// Moments against `⟨τ⟩`.
    Moments = 4,
    /// δ against the four factors.
    DeltaFactors = 5,
    /// δ against γ.
    DeltaVsGamma = 6,
}

impl Figure {
    pub fn from_number(n: u8) -> Result<Self> {
        Ok(match n {
            1 => Figure::ScaledPdf,
            2 => Figure::GammaVsQ,
            3 => Figure::GammaFactors,
            4 => Figure::Moments,
            5 => Figure::DeltaFactors,
            6 => Figure::DeltaVsGamma,
            _ => return Err(Error::Config(format!("no figure {n}; choose 1–6"))),
        })
    }
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Plot-ready CSV for one figure.
pub fn emit_figure_table(report: &AnalysisReport, figure: Figure) -> Result<String> {
    match figure {
        Figure::ScaledPdf => {
            let mut rows = Vec::new();
            for s in &report.stocks {
                for p in &s.pdfs {
                    for i in 0..p.x.len() {
                        rows.push(vec![
                            s.symbol.clone(),
                            p.q.to_string(),
                            p.x[i].to_string(),
                            p.density[i].to_string(),
                            p.count[i].to_string(),
                            p.width[i].to_string(),
                        ]);
                    }
                }
            }
            if rows.is_empty() {
                return Err(Error::MissingSection("scaled density (fig 1)".into()));
            }
            csv_string(&["symbol", "q", "x", "density", "count", "width"], rows)
        }
        Figure::GammaVsQ => {
            if report.aggregates.gamma_vs_q.is_empty() {
                return Err(Error::MissingSection("gamma-vs-q summary (fig 2)".into()));
            }
            let rows = report
                .aggregates
                .gamma_vs_q
                .iter()
                .map(|r| vec![r.q.to_string(), opt(r.mean_gamma), opt(r.std_gamma), r.count.to_string()])
                .collect();
            csv_string(&["q", "mean_gamma", "std_gamma", "count"], rows)
        }
        Figure::GammaFactors | Figure::DeltaFactors => {
            let (kind, label) = if figure == Figure::GammaFactors {
                (ExponentKind::Gamma, "q")
            } else {
                (ExponentKind::Delta, "m")
            };
            let mut rows = Vec::new();
            for c in report.aggregates.curves.iter().filter(|c| c.exponent == kind) {
                for b in &c.curve.bins {
                    rows.push(vec![
                        c.curve.factor.to_string(),
                        c.parameter.to_string(),
                        b.center.to_string(),
                        b.mean.to_string(),
                        b.std.to_string(),
                        b.count.to_string(),
                        c.curve.fit.slope.to_string(),
                        c.curve.fit.intercept.to_string(),
                    ]);
                }
            }
            if rows.is_empty() {
                return Err(Error::MissingSection(format!("{} factor curves (fig {})", kind.name(), figure as u8)));
            }
            csv_string(&["factor", label, "bin_center", "mean", "std", "count", "fit_slope", "fit_intercept"], rows)
        }
        Figure::Moments => {
            let mut rows = Vec::new();
            for s in &report.stocks {
                for d in &s.delta_by_m {
                    for (tau, mu) in &d.points {
                        rows.push(vec![s.symbol.clone(), d.m.to_string(), tau.to_string(), mu.to_string()]);
                    }
                }
            }
            if rows.is_empty() {
                return Err(Error::MissingSection("moment points (fig 4)".into()));
            }
            csv_string(&["symbol", "m", "mean_interval", "moment"], rows)
        }
        Figure::DeltaVsGamma => {
            let cfg = &report.metadata.config;
            let lines: BTreeMap<u64, &DeltaGammaRegression> =
                report.aggregates.regressions.iter().map(|r| (r.q.to_bits(), r)).collect();
            let mut rows = Vec::new();
            for &q in &cfg.regression_q {
                let line = lines.get(&q.to_bits());
                for (sym, g, d) in delta_gamma_pairs(&report.stocks, q, cfg.regression_m) {
                    rows.push(vec![
                        sym.to_string(),
                        q.to_string(),
                        cfg.regression_m.to_string(),
                        g.to_string(),
                        d.to_string(),
                        opt(line.map(|r| r.slope * g + r.intercept)),
                    ]);
                }
            }
            if rows.is_empty() {
                return Err(Error::MissingSection("dually valid (gamma, delta) pairs (fig 6)".into()));
            }
            csv_string(&["symbol", "q", "m", "gamma", "delta", "fit_delta"], rows)
        }
    }
}

/// Factor-curve CSVs (`bin_center,mean,std,count`) keyed by file name.
pub fn curve_tables(aggregates: &Aggregates) -> Result<Vec<(String, String)>> {
    aggregates
        .curves
        .iter()
        .map(|c| {
            let tag = if c.exponent == ExponentKind::Gamma { "q" } else { "m" };
            let name = format!("{}_{}_{tag}{}.csv", c.exponent.name(), c.curve.factor, c.parameter);
            let rows = c
                .curve
                .bins
                .iter()
                .map(|b| vec![b.center.to_string(), b.mean.to_string(), b.std.to_string(), b.count.to_string()])
                .collect();
            Ok((name, csv_string(&["bin_center", "mean", "std", "count"], rows)?))
        })
        .collect()
}
