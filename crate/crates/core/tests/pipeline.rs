use chrono::NaiveDate;

use volint::config::{Config, SynthBatch};
use volint::error::Error;
use volint::ingest::StockMeta;
use volint::pipeline::{analyze_stock, run_on, synth_inputs, StockInput};
use volint::report::{emit_figure_table, AnalysisReport, Figure};
use volint::scaling::PointStatus;
use volint::synth::{synthetic_market, MarketSpec};

fn batch(count: usize, length: usize) -> Config {
    let mut config = Config::default();
    config.input.synth = Some(SynthBatch { count, length, ..SynthBatch::default() });
    config
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn market(symbol: &str, seed: u64) -> StockInput {
    let series = synthetic_market(
        &MarketSpec {
            symbol: symbol.into(),
            days: 30,
            alpha_target: 0.85,
            vol_of_vol: 0.6,
            sigma: 5e-4,
            start_price: 40.0,
            seed,
        },
        NaiveDate::from_ymd_opt(2023, 3, 1).unwrap(),
    )
    .unwrap();
    let meta = StockMeta { symbol: symbol.into(), shares_outstanding: 1e8, ref_price: 40.0, ref_date: "2023-03-01".into() };
    StockInput::Minutes { series, meta: Some(meta) }
}

#[test]
fn correlated_batch_gives_gamma_near_point_three() {
    let mut config = batch(8, 1 << 20);
    config.q_grid = vec![1.0, 1.5, 2.0];
    config.dfa.enabled = false;
    let report = run_on(&synth_inputs(config.input.synth.as_ref().unwrap()).unwrap(), &config).unwrap();
    // the fitted value, whatever the 10% rule decides about each point
    let fits: Vec<f64> = report.stocks.iter().filter_map(|s| s.gamma_at(1.5)?.fit.map(|f| f.gamma)).collect();
    assert_eq!(fits.len(), 8);
    let mean = fits.iter().sum::<f64>() / 8.0;
    assert!((0.20..=0.40).contains(&mean), "mean gamma {mean}");
}

#[test]
fn one_threshold_one_record() {
    let mut config = batch(1, 1 << 14);
    config.q_grid = vec![2.0];
    let report = run_on(&synth_inputs(config.input.synth.as_ref().unwrap()).unwrap(), &config).unwrap();
    assert_eq!(report.stocks.len(), 1);
    assert_eq!(report.stocks[0].gamma_by_q.len(), 1);
    assert_eq!(report.stocks[0].gamma_by_q[0].q, 2.0);
}

#[test]
fn every_symbol_and_threshold_once() {
    let config = batch(3, 1 << 15);
    let report = run_on(&synth_inputs(config.input.synth.as_ref().unwrap()).unwrap(), &config).unwrap();
    for s in &report.stocks {
        let qs: Vec<f64> = s.gamma_by_q.iter().map(|p| p.q).collect();
        assert_eq!(qs, config.q_grid);
        let ms: Vec<f64> = s.delta_by_m.iter().map(|d| d.m).collect();
        assert_eq!(ms, config.moment_orders);
    }
    let t = report.tallies;
    assert!(t.gamma.is_consistent() && t.delta.is_consistent());
    assert_eq!(t.gamma.attempted, 3 * 21);
    assert!((t.gamma.outlier_fraction - t.gamma.outlier as f64 / 63.0).abs() < 1e-15);
}

#[test]
fn same_seed_same_body() {
    let mut config = batch(3, 1 << 15);
    config.q_grid = vec![1.0, 2.0, 3.0];
    let inputs = synth_inputs(config.input.synth.as_ref().unwrap()).unwrap();
    let mut a = run_on(&inputs, &config).unwrap();
    let b = run_on(&inputs, &config).unwrap();
    a.metadata.created_unix = Some(1_700_000_000);
    assert_eq!(a.body_json().unwrap(), b.body_json().unwrap());
    assert_ne!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn duplicate_symbols_rejected() {
    let config = Config::default();
    let inputs = vec![market("AAA", 1), market("AAA", 2)];
    assert!(matches!(run_on(&inputs, &config), Err(Error::Config(_))));
}

#[test]
fn degenerate_stock_is_flagged_not_fatal() {
    let mut flat = market("FLAT", 3);
    if let StockInput::Minutes { series, .. } = &mut flat {
        series.prices.iter_mut().for_each(|d| d.fill(12.5));
    }
    let config = Config::default();
    let rec = analyze_stock(&flat, &config).unwrap();
    assert!(rec.gamma_by_q.iter().all(|p| p.status == PointStatus::Insufficient));
    assert!(rec.delta_by_m.iter().all(|d| d.status == PointStatus::Insufficient));
    assert!(!rec.notes.is_empty());
    assert_eq!(rec.factors.unwrap().risk, 0.0);
}

#[test]
fn market_stock_has_factors_and_dfa() {
    let config = Config::default();
    let rec = analyze_stock(&market("MKT", 4), &config).unwrap();
    let f = rec.factors.unwrap();
    assert!((f.capitalization.unwrap() - 4e9).abs() < 1e-3);
    assert!(f.risk > 0.0);
    assert_eq!(f.trades_per_day, None);
    let dfa = rec.dfa.unwrap();
    assert!(dfa.alpha > 0.5, "alpha {}", dfa.alpha);
}

#[test]
fn figure_tables() {
    let mut config = batch(12, 1 << 16);
    config.se_fit.rms_threshold = 0.5;
    config.regression_q = vec![1.0];
    config.curve_q = vec![];
    config.curve_m = vec![];
    let report = run_on(&synth_inputs(config.input.synth.as_ref().unwrap()).unwrap(), &config).unwrap();

    let fig2 = emit_figure_table(&report, Figure::GammaVsQ).unwrap();
    assert_eq!(rows(&fig2).len(), 21);

    let fig1 = emit_figure_table(&report, Figure::ScaledPdf).unwrap();
    let mut integrals = std::collections::BTreeMap::<(String, String), f64>::new();
    for r in rows(&fig1) {
        let (d, w): (f64, f64) = (r[3].parse().unwrap(), r[5].parse().unwrap());
        *integrals.entry((r[0].clone(), r[1].clone())).or_default() += d * w;
    }
    assert!(!integrals.is_empty());
    for (key, total) in integrals {
        assert!((total - 1.0).abs() <= 0.02, "{key:?} integrates to {total}");
    }

    let fig6 = emit_figure_table(&report, Figure::DeltaVsGamma).unwrap();
    let dual = report.stocks.iter().filter(|s| s.valid_gamma(1.0).is_some() && s.valid_delta(2.0).is_some()).count();
    assert!(dual >= 10);
    assert_eq!(rows(&fig6).len(), dual);
    assert_eq!(report.aggregates.regressions[0].n_points, dual);

    let fig4 = emit_figure_table(&report, Figure::Moments).unwrap();
    assert!(!rows(&fig4).is_empty());
    assert!(matches!(emit_figure_table(&report, Figure::GammaFactors), Err(Error::MissingSection(_))));
}

#[test]
fn report_json_round_trip() {
    let mut config = batch(2, 1 << 13);
    config.q_grid = vec![1.0, 1.5];
    let report = run_on(&synth_inputs(config.input.synth.as_ref().unwrap()).unwrap(), &config).unwrap();
    let text = report.to_json().unwrap();
    assert_eq!(AnalysisReport::from_json(&text).unwrap(), report);

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["surprise"] = serde_json::json!(1);
    assert!(AnalysisReport::from_json(&v.to_string()).is_err());

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["schema_version"] = serde_json::json!(99);
    assert!(matches!(AnalysisReport::from_json(&v.to_string()), Err(Error::Format(_))));
}

#[test]
fn atomic_write_leaves_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = batch(1, 1 << 13);
    config.q_grid = vec![1.0];
    let report = run_on(&synth_inputs(config.input.synth.as_ref().unwrap()).unwrap(), &config).unwrap();
    let path = dir.path().join("report.json");
    report.write_atomic(&path).unwrap();
    report.write_atomic(&path).unwrap();
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("report.json")]);
    assert_eq!(AnalysisReport::read(&path).unwrap(), report);
}
