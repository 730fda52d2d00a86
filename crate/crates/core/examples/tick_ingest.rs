//! From raw ticks to a volatility series.
//!
//! Writes a tick CSV for two synthetic symbols (with off-mark prints and a
//! malformed row), then parses it, samples the minute grid, and builds the
//! pattern-corrected volatility.

use std::fmt::Write as _;

use chrono::NaiveDate;
use volint::ingest::{build_all, filter_active_stocks, parse_ticks, Calendar, TickFormat};
use volint::synth::{synthetic_market, MarketSpec};
use volint::volatility::{intraday_pattern, log_returns, volatility_series};

fn main() -> volint::Result<()> {
    let day0 = NaiveDate::from_ymd_opt(2024, 5, 6).unwrap();
    let calendar = Calendar::regular((0..10).map(|k| day0 + chrono::Days::new(k)))?;

    let mut csv = String::from("symbol,timestamp,price,size\n");
    for (i, sym) in ["ALPHA", "BETA"].iter().enumerate() {
        let spec = MarketSpec {
            symbol: sym.to_string(),
            days: 10,
            alpha_target: 0.8,
            vol_of_vol: 0.5,
            sigma: 4e-4,
            start_price: 20.0 + 10.0 * i as f64,
            seed: i as u64,
        };
        for t in synthetic_market(&spec, day0)?.as_ticks(&calendar) {
            writeln!(csv, "{},{},{},200", t.symbol, t.timestamp - 2_000, t.price).unwrap();
            writeln!(csv, "{},{},{},100", t.symbol, t.timestamp + 25_000, t.price * 1.001).unwrap();
        }
    }
    csv.push_str("BETA,not-a-time,1.0,1\n");

    let parsed = parse_ticks(csv.as_bytes(), TickFormat::default())?;
    println!("{} ticks, {} malformed", parsed.records.len(), parsed.malformed);
    let series: Vec<_> = build_all(&parsed.records, &calendar)?.into_iter().map(|b| b.series).collect();
    let active = filter_active_stocks(series, 500);
    for s in &active {
        let pattern = intraday_pattern(&log_returns(s))?;
        let (open, mid) = (pattern.slot_means[0], pattern.slot_means[194]);
        let v = volatility_series(s)?;
        let max = v.values.iter().copied().fold(0.0, f64::max);
        println!(
            "{}: {} days, trades/day {:?}, open/midday |r| ratio {:.2}, {} volatility values, max {:.1}σ",
            s.symbol,
            s.n_days(),
            s.trades_per_day.as_ref().map(|c| c[0]),
            open / mid,
            v.len(),
            max
        );
    }
    Ok(())
}
