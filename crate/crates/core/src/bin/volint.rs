//! Command-line front end. Every subcommand reads and writes the library's
//! CSV/JSON formats, so stages can be run separately and diffed.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tracing::{info, warn};

use volint::config::Config;
use volint::dfa::{dfa_with_range, gamma_from_alpha, log_scales, write_dfa_csv};
use volint::ingest::{self, Calendar, TickFormat};
use volint::pipeline::{run_pipeline, tick_dates};
use volint::report::{self, curve_tables, emit_figure_table, AnalysisReport, Figure};
use volint::synth::{self, SynthKind, SynthSpec};
use volint::volatility::{read_volatility_csv, volatility_series, write_volatility_csv, VolatilitySeries};
use volint::{Error, Result};

#[derive(Parser)]
#[command(name = "volint", version, about = "Volatility return-interval analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Signal {
    Correlated,
    White,
}

#[derive(Subcommand)]
enum Command {
    /// Ticks + calendar -> minute-bar CSV (and optionally volatility CSV).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// `date,open_timestamp`; default: every tick date, opening 14:30 UTC.
        #[arg(long)]
        calendar: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        min_daily_trades: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        volatility: Option<PathBuf>,
    },
    /// Synthetic series written as `<out>/volatility.csv`.
    Synth {
        #[arg(long, default_value_t = 0.85)]
        alpha: f64,
        #[arg(long, default_value_t = 1 << 20)]
        length: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, value_enum, default_value = "correlated")]
        signal: Signal,
        #[arg(long)]
        shuffle: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline -> report JSON. Exits 2 when any point was flagged.
    Analyze {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        calendar: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// `key.path=value`, repeatable.
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute aggregates from a report; writes curve CSVs and `aggregates.json`.
    Aggregate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot-ready table for figure 1–6.
    Figures {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        fig: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// DFA of one series from a volatility CSV.
    Dfa {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        symbol: Option<String>,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 10)]
        min_scale: usize,
        #[arg(long, default_value_t = 20)]
        scale_count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest { input, calendar, min_daily_trades, out, volatility } => {
            let parsed = ingest::parse_ticks(open(&input)?, TickFormat::default())?;
            if parsed.malformed > 0 {
                warn!(malformed = parsed.malformed, total = parsed.total_rows, "skipped malformed tick rows");
            }
            let calendar = match calendar {
                Some(p) => Calendar::from_csv(open(&p)?)?,
                None => Calendar::regular(tick_dates(&parsed.records))?,
            };
            let built = ingest::build_all(&parsed.records, &calendar)?;
            for b in built.iter().filter(|b| !b.dropped_days.is_empty()) {
                warn!(symbol = %b.series.symbol, days = b.dropped_days.len(), "dropped days without ticks");
            }
            let series = ingest::filter_active_stocks(built.into_iter().map(|b| b.series).collect(), min_daily_trades);
            info!(stocks = series.len(), "minute series built");
            ingest::write_minute_csv(create(&out)?, &series)?;
            if let Some(path) = volatility {
                let vols: Vec<VolatilitySeries> = series
                    .iter()
                    .filter_map(|s| match volatility_series(s) {
                        Ok(v) => Some(v),
                        Err(e) => {
                            warn!(symbol = %s.symbol, "no volatility: {e}");
                            None
                        }
                    })
                    .collect();
                write_volatility_csv(create(&path)?, &vols)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { alpha, length, seed, count, signal, shuffle, out } => {
            mkdir(&out)?;
            let kind = match signal {
                Signal::Correlated => SynthKind::CorrelatedGaussian,
                Signal::White => SynthKind::WhiteNoise,
            };
            let series = (0..count as u64)
                .map(|i| {
                    let spec = SynthSpec { length, alpha_target: alpha, seed: seed + i, kind };
                    let mut values = synth::generate_correlated(&spec)?;
                    if shuffle {
                        values = synth::shuffle(&values, seed + i);
                    }
                    Ok(VolatilitySeries::from_raw(format!("SYN{i:03}"), values))
                })
                .collect::<Result<Vec<_>>>()?;
            write_volatility_csv(create(&out.join("volatility.csv"))?, &series)?;
            info!(count, length, rng = synth::RNG_NAME, "synthetic series written");
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { input, config, calendar, meta, workers, mut overrides, out } => {
            let base = match config {
                Some(p) => Config::load(&p)?,
                None => Config::default(),
            };
            let quote = |p: &Path| format!("\"{}\"", p.display().to_string().replace('\\', "\\\\").replace('"', "\\\""));
            if let Some(p) = input {
                overrides.push(format!("input.path={}", quote(&p)));
            }
            if let Some(p) = calendar {
                overrides.push(format!("input.calendar={}", quote(&p)));
            }
            if let Some(p) = meta {
                overrides.push(format!("input.meta={}", quote(&p)));
            }
            if let Some(w) = workers {
                overrides.push(format!("workers={w}"));
            }
            let config = base.with_overrides(&overrides)?;
            let mut report = run_pipeline(&config)?;
            report.metadata.created_unix = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs());
            report.write_atomic(&out)?;
            let t = &report.tallies;
            info!(
                stocks = report.stocks.len(),
                gamma_outliers = t.gamma.outlier,
                gamma_insufficient = t.gamma.insufficient,
                delta_outliers = t.delta.outlier,
                delta_insufficient = t.delta.insufficient,
                "report written"
            );
            let soft = t.gamma.outlier + t.gamma.insufficient + t.delta.outlier + t.delta.insufficient;
            Ok(if soft > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Aggregate { report: path, overrides, out } => {
            let rep = AnalysisReport::read(&path)?;
            let config = rep.metadata.config.with_overrides(&overrides)?;
            let aggregates = report::aggregate(&rep.stocks, &config);
            mkdir(&out)?;
            for (name, body) in curve_tables(&aggregates)? {
                report::write_atomic(&out.join(name), body.as_bytes())?;
            }
            let json = serde_json::to_string_pretty(&aggregates)?;
            report::write_atomic(&out.join("aggregates.json"), json.as_bytes())?;
            for note in &aggregates.notes {
                warn!("{note}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Figures { report: path, fig, out } => {
            let rep = AnalysisReport::read(&path)?;
            let table = emit_figure_table(&rep, Figure::from_number(fig)?)?;
            report::write_atomic(&out, table.as_bytes())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Dfa { input, symbol, order, min_scale, scale_count, out } => {
            let all = read_volatility_csv(open(&input)?)?;
            let series = match &symbol {
                Some(s) => all
                    .into_iter()
                    .find(|v| &v.symbol == s)
                    .ok_or_else(|| Error::Config(format!("symbol {s} not in {}", input.display())))?,
                None => all
                    .into_iter()
                    .next()
                    .ok_or_else(|| Error::Format(format!("{} holds no series", input.display())))?,
            };
            let scales = log_scales(min_scale, series.values.len() / 8, scale_count);
            let result = dfa_with_range(&series.values, &scales, order, None)?;
            println!(
                "{}\talpha={:.4}\tgamma=2(1-alpha)={:.4}",
                series.symbol,
                result.alpha,
                gamma_from_alpha(result.alpha)
            );
            if let Some(p) = out {
                write_dfa_csv(create(&p)?, &result)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
