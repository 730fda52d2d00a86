//! End-to-end orchestration: inputs → volatility → intervals → fits →
//! factors → aggregates, fanned out per symbol on a bounded worker pool.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;

use crate::config::{Config, SynthBatch, SynthSignal};
use crate::dfa::{dfa_with_range, gamma_from_alpha, log_scales};
use crate::error::{Error, Result};
use crate::factors::compute_factors;
use crate::ingest::{self, Calendar, MinuteSeries, StockMeta, TickFormat};
use crate::intervals::{extract_intervals, IntervalSet};
use crate::report::{self, AnalysisReport, DfaSummary, PdfTable, RunMetadata, StockRecord, SCHEMA_VERSION};
use crate::scaling::{gamma_point, moment_scaling, GammaPoint, MomentScalingResult, PointStatus};
use crate::synth::{self, SynthKind, SynthSpec};
use crate::volatility::{daily_series, volatility_series};

/// One symbol's data as handed to the analysis.
#[derive(Debug, Clone)]
pub enum StockInput {
    /// Minute prices, optionally with capitalization metadata.
    Minutes { series: MinuteSeries, meta: Option<StockMeta> },
    /// A ready-made signal thresholded directly (volatility CSV or synthetic).
    Signal { symbol: String, values: Vec<f64> },
}

impl StockInput {
    pub fn symbol(&self) -> &str {
        match self {
            StockInput::Minutes { series, .. } => &series.symbol,
            StockInput::Signal { symbol, .. } => symbol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Ticks,
    Minutes,
    Volatility,
}

/// Recognizes a CSV by its header line.
pub fn detect_format(path: &Path) -> Result<InputFormat> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let cols: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    if cols == ingest::TICK_HEADER {
        Ok(InputFormat::Ticks)
    } else if cols == ingest::MINUTE_HEADER {
        Ok(InputFormat::Minutes)
    } else if cols == crate::volatility::VOLATILITY_HEADER {
        Ok(InputFormat::Volatility)
    } else {
        Err(Error::Format(format!("{}: unrecognized header `{}`", path.display(), first.trim())))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

/// Synthetic signals `SYN000`, `SYN001`, … from a batch description.
pub fn synth_inputs(batch: &SynthBatch) -> Result<Vec<StockInput>> {
    (0..batch.count)
        .into_par_iter()
        .map(|i| {
            let seed = batch.seed + i as u64;
            let kind = match batch.signal {
                SynthSignal::CorrelatedGaussian => SynthKind::CorrelatedGaussian,
                SynthSignal::WhiteNoise => SynthKind::WhiteNoise,
            };
            let mut values = synth::generate_correlated(&SynthSpec {
                length: batch.length,
                alpha_target: batch.alpha,
                seed,
                kind,
            })?;
            if batch.shuffle {
                values = synth::shuffle(&values, seed);
            }
            Ok(StockInput::Signal { symbol: format!("SYN{i:03}"), values })
        })
        .collect()
}

/// Loads the inputs named in the configuration.
pub fn load_inputs(config: &Config) -> Result<Vec<StockInput>> {
    let input = &config.input;
    if let Some(batch) = &input.synth {
        if input.path.is_some() {
            return Err(Error::Config("input names both a file and a synthetic batch".into()));
        }
        return synth_inputs(batch);
    }
    let path = input
        .path
        .as_deref()
        .ok_or_else(|| Error::Config("no input: set input.path or input.synth".into()))?;
    let meta = match &input.meta {
        Some(p) => ingest::read_meta_csv(open(p)?)?,
        None => BTreeMap::new(),
    };
    let with_meta = |series: Vec<MinuteSeries>| {
        series
            .into_iter()
            .map(|s| {
                let m = meta.get(&s.symbol).cloned();
                StockInput::Minutes { series: s, meta: m }
            })
            .collect::<Vec<_>>()
    };
    match detect_format(path)? {
        InputFormat::Volatility => Ok(crate::volatility::read_volatility_csv(open(path)?)?
            .into_iter()
            .map(|v| StockInput::Signal { symbol: v.symbol, values: v.values })
            .collect()),
        InputFormat::Minutes => Ok(with_meta(ingest::read_minute_csv(open(path)?)?)),
        InputFormat::Ticks => {
            let parsed = ingest::parse_ticks(open(path)?, TickFormat::default())?;
            let calendar = match &input.calendar {
                Some(p) => Calendar::from_csv(open(p)?)?,
                None => Calendar::regular(tick_dates(&parsed.records))?,
            };
            let built = ingest::build_all(&parsed.records, &calendar)?;
            let series = built.into_iter().map(|b| b.series).collect();
            Ok(with_meta(ingest::filter_active_stocks(series, config.min_daily_trades)))
        }
    }
}

/// Distinct UTC dates carrying at least one tick.
pub fn tick_dates(ticks: &[ingest::TickRecord]) -> Vec<chrono::NaiveDate> {
    let mut dates: Vec<chrono::NaiveDate> = ticks
        .iter()
        .filter_map(|t| chrono::DateTime::from_timestamp_millis(t.timestamp))
        .map(|dt| dt.date_naive())
        .collect();
    dates.sort();
    dates.dedup();
    dates
}

fn insufficient_gamma(q: f64, note: &str) -> GammaPoint {
    GammaPoint { q, mean_interval: None, n_intervals: 0, status: PointStatus::Insufficient, fit: None, note: Some(note.to_string()) }
}

fn insufficient_delta(m: f64, note: &str) -> MomentScalingResult {
    MomentScalingResult { m, points: Vec::new(), status: PointStatus::Insufficient, fit: None, note: Some(note.to_string()) }
}

/// Everything computed for one symbol.
pub fn analyze_stock(input: &StockInput, config: &Config) -> Result<StockRecord> {
    let mut record = StockRecord {
        symbol: input.symbol().to_string(),
        factors: None,
        gamma_by_q: Vec::new(),
        delta_by_m: Vec::new(),
        pdfs: Vec::new(),
        dfa: None,
        notes: Vec::new(),
    };
    let values = match input {
        StockInput::Signal { values, .. } if config.threshold_on_abs => values.iter().map(|v| v.abs()).collect(),
        StockInput::Signal { values, .. } => values.clone(),
        StockInput::Minutes { series, meta } => {
            match daily_series(series).and_then(|d| compute_factors(&d, series, meta.as_ref())) {
                Ok(f) => record.factors = Some(f),
                Err(e) => record.notes.push(format!("factors: {e}")),
            }
            match volatility_series(series) {
                Ok(v) => v.values,
                Err(e) => {
                    let note = format!("volatility: {e}");
                    record.gamma_by_q = config.q_grid.iter().map(|&q| insufficient_gamma(q, &note)).collect();
                    record.delta_by_m = config.moment_orders.iter().map(|&m| insufficient_delta(m, &note)).collect();
                    record.notes.push(note);
                    return Ok(record);
                }
            }
        }
    };

    let sets: Vec<IntervalSet> = config
        .q_grid
        .iter()
        .map(|&q| extract_intervals(&record.symbol, &values, q))
        .collect::<Result<_>>()?;
    for set in &sets {
        let (point, pdf) = gamma_point(set, &config.pdf, &config.se_fit);
        if let Some(pdf) = pdf.filter(|_| config.pdf_q.iter().any(|&q| (q - set.q).abs() < 1e-9)) {
            record.pdfs.push(PdfTable {
                q: set.q,
                x: pdf.bin_centers,
                density: pdf.densities,
                count: pdf.bin_counts,
                width: pdf.bin_widths,
            });
        }
        record.gamma_by_q.push(point);
    }
    for &m in &config.moment_orders {
        record.delta_by_m.push(moment_scaling(&sets, m, &config.delta)?);
    }

    if config.dfa.enabled {
        let scales = log_scales(config.dfa.min_scale, values.len() / 8, config.dfa.scale_count);
        match dfa_with_range(&values, &scales, config.dfa.detrend_order, config.dfa.fit_range) {
            Ok(r) => {
                record.dfa = Some(DfaSummary {
                    alpha: r.alpha,
                    gamma_from_alpha: gamma_from_alpha(r.alpha),
                    detrend_order: r.detrend_order,
                    fit_range: r.fit_range,
                    scales: r.scales,
                    fluctuations: r.fluctuations,
                });
            }
            Err(e) => record.notes.push(format!("dfa: {e}")),
        }
    }
    Ok(record)
}

/// Analyzes every input and assembles the report.
///
/// Records are sorted by symbol, so the report does not depend on input
/// order or on the number of workers.
pub fn run_on(inputs: &[StockInput], config: &Config) -> Result<AnalysisReport> {
    config.validate()?;
    let mut seen = std::collections::BTreeSet::new();
    for i in inputs {
        if !seen.insert(i.symbol()) {
            return Err(Error::Config(format!("symbol {} appears twice", i.symbol())));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut stocks: Vec<StockRecord> = pool
        .install(|| inputs.par_iter().map(|i| analyze_stock(i, config)).collect::<Result<_>>())
        .map_err(|e| e.in_stage("analyze"))?;
    stocks.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    let tallies = report::tallies(&stocks);
    let aggregates = report::aggregate(&stocks, config);
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        metadata: RunMetadata {
            code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            rng: synth::RNG_NAME.to_string(),
            volatility_construction: "abs log-return / per-slot mean abs return, then / global sample std".into(),
            config: config.clone(),
            created_unix: None,
        },
        stocks,
        tallies,
        aggregates,
        reference: Default::default(),
    })
}

pub fn run_pipeline(config: &Config) -> Result<AnalysisReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let inputs = pool.install(|| load_inputs(config)).map_err(|e| e.in_stage("ingest"))?;
    run_on(&inputs, config)
}
