//! Tick and minute-bar ingestion.
//!
//! Ticks are sampled onto a fixed grid of 390 minute marks per trading day.
//! Each mark takes the price of the tick nearest to it within ±30 s (ties go
//! to the earlier tick); marks without such a tick carry the previous slot's
//! price forward, and leading marks before the day's first tick take that
//! tick's price.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Minute marks per trading day.
pub const SLOTS_PER_DAY: usize = 390;

/// Half-width of the window around a minute mark, in milliseconds.
pub const MARK_WINDOW_MS: i64 = 30_000;

const MINUTE_MS: i64 = 60_000;

/// Fraction of malformed rows tolerated before a file is rejected.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

/// Default session open used when only dates are known: 14:30 UTC.
pub const DEFAULT_OPEN_UTC_SECS: i64 = 14 * 3600 + 30 * 60;

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub symbol: String,
    /// Milliseconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub price: f64,
    pub size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickFormat {
    pub delimiter: u8,
}

impl Default for TickFormat {
    fn default() -> Self {
        TickFormat { delimiter: b',' }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickParse {
    /// Sorted by `(symbol, timestamp)`; rows with equal keys keep file order.
    pub records: Vec<TickRecord>,
    pub malformed: usize,
    pub total_rows: usize,
}

pub const TICK_HEADER: [&str; 4] = ["symbol", "timestamp", "price", "size"];
pub const MINUTE_HEADER: [&str; 4] = ["symbol", "date", "minute_index", "price"];
pub const CALENDAR_HEADER: [&str; 2] = ["date", "open_timestamp"];
pub const META_HEADER: [&str; 4] = ["symbol", "shares_outstanding", "ref_price", "ref_date"];

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str], what: &str) -> Result<bool> {
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::Format(format!("unreadable {what} header: {e}"))),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Ok(false);
    }
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::Format(format!(
            "{what} header must be `{}`, found `{}`",
            expected.join(","),
            found.join(",")
        )));
    }
    Ok(true)
}

fn parse_tick_row(row: &csv::StringRecord) -> Option<TickRecord> {
    if row.len() != 4 {
        return None;
    }
    let symbol = row[0].trim();
    if symbol.is_empty() {
        return None;
    }
    let timestamp: i64 = row[1].trim().parse().ok()?;
    let price: f64 = row[2].trim().parse().ok()?;
    let size: u64 = row[3].trim().parse().ok()?;
    if !(price.is_finite() && price > 0.0) {
        return None;
    }
    Some(TickRecord {
        symbol: symbol.to_string(),
        timestamp,
        price,
        size,
    })
}

/// Parses a tick CSV (`symbol,timestamp,price,size`).
///
/// Malformed rows are skipped and counted; more than 1% malformed rows means
/// the file is probably not a tick file and the whole parse fails.
pub fn parse_ticks<R: Read>(input: R, format: TickFormat) -> Result<TickParse> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .flexible(true)
        .has_headers(true)
        .from_reader(input);
    if !check_header(&mut reader, &TICK_HEADER, "tick")? {
        return Ok(TickParse {
            records: Vec::new(),
            malformed: 0,
            total_rows: 0,
        });
    }
    let mut records = Vec::new();
    let mut malformed = 0usize;
    let mut total_rows = 0usize;
    for row in reader.records() {
        total_rows += 1;
        match row.ok().as_ref().and_then(parse_tick_row) {
            Some(rec) => records.push(rec),
            None => malformed += 1,
        }
    }
    if total_rows > 0 && malformed as f64 > MAX_MALFORMED_FRACTION * total_rows as f64 {
        return Err(Error::TooManyMalformed {
            source_name: "tick file".into(),
            malformed,
            total: total_rows,
        });
    }
    if malformed > 0 {
        tracing::warn!(malformed, total_rows, "skipped malformed tick rows");
    }
    records.sort_by(|a, b| a.symbol.cmp(&b.symbol).then(a.timestamp.cmp(&b.timestamp)));
    Ok(TickParse {
        records,
        malformed,
        total_rows,
    })
}

/// One trading session: a date and the timestamp of its first minute mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Session {
    pub date: NaiveDate,
    pub open_ms: i64,
}

impl Session {
    pub fn mark(&self, slot: usize) -> i64 {
        self.open_ms + slot as i64 * MINUTE_MS
    }

    fn window(&self) -> (i64, i64) {
        (
            self.open_ms - MARK_WINDOW_MS,
            self.mark(SLOTS_PER_DAY - 1) + MARK_WINDOW_MS,
        )
    }
}

/// Ordered trading sessions of 390 one-minute marks each.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Calendar {
    sessions: Vec<Session>,
}

impl Calendar {
    pub fn new(mut sessions: Vec<Session>) -> Result<Self> {
        sessions.sort();
        for pair in sessions.windows(2) {
            if pair[0].date == pair[1].date {
                return Err(Error::Format(format!("calendar lists {} twice", pair[0].date)));
            }
            let (_, end) = pair[0].window();
            if pair[1].window().0 <= end {
                return Err(Error::Format(format!(
                    "sessions on {} and {} overlap",
                    pair[0].date, pair[1].date
                )));
            }
        }
        Ok(Calendar { sessions })
    }

    /// Sessions opening at 14:30 UTC on each listed date.
    pub fn regular(dates: impl IntoIterator<Item = NaiveDate>) -> Result<Self> {
        let sessions = dates
            .into_iter()
            .map(|date| Session {
                date,
                open_ms: (date_epoch_secs(date) + DEFAULT_OPEN_UTC_SECS) * 1000,
            })
            .collect();
        Calendar::new(sessions)
    }

    /// Reads a calendar CSV (`date,open_timestamp`, timestamps in epoch ms).
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        if !check_header(&mut reader, &CALENDAR_HEADER, "calendar")? {
            return Ok(Calendar::default());
        }
        let mut sessions = Vec::new();
        for (line, row) in reader.records().enumerate() {
            let row = row?;
            let bad = || Error::Format(format!("calendar row {} is malformed", line + 2));
            if row.len() != 2 {
                return Err(bad());
            }
            let date = parse_date(&row[0]).ok_or_else(bad)?;
            let open_ms = row[1].trim().parse().map_err(|_| bad())?;
            sessions.push(Session { date, open_ms });
        }
        Calendar::new(sessions)
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }
}

fn date_epoch_secs(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp()
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Minute-resolution prices of one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteSeries {
    pub symbol: String,
    /// Strictly increasing.
    pub days: Vec<NaiveDate>,
    pub prices: Vec<[f64; SLOTS_PER_DAY]>,
    /// Tick count per day; `None` when the series came from minute bars.
    pub trades_per_day: Option<Vec<u64>>,
}

impl MinuteSeries {
    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn closes(&self) -> impl Iterator<Item = f64> + '_ {
        self.prices.iter().map(|day| day[SLOTS_PER_DAY - 1])
    }

    /// The series re-expressed as one tick exactly on every minute mark.
    pub fn as_ticks(&self, calendar: &Calendar) -> Vec<TickRecord> {
        let by_date: BTreeMap<NaiveDate, Session> =
            calendar.sessions().iter().map(|s| (s.date, *s)).collect();
        let mut out = Vec::with_capacity(self.days.len() * SLOTS_PER_DAY);
        for (date, prices) in self.days.iter().zip(&self.prices) {
            if let Some(session) = by_date.get(date) {
                for (slot, &price) in prices.iter().enumerate() {
                    out.push(TickRecord {
                        symbol: self.symbol.clone(),
                        timestamp: session.mark(slot),
                        price,
                        size: 0,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinuteBuild {
    pub series: MinuteSeries,
    /// Calendar days dropped because they held no ticks.
    pub dropped_days: Vec<NaiveDate>,
}

fn sample_day(ticks: &[TickRecord], session: &Session) -> [f64; SLOTS_PER_DAY] {
    let mut prices = [f64::NAN; SLOTS_PER_DAY];
    let mut lo = 0usize;
    for (slot, price) in prices.iter_mut().enumerate() {
        let mark = session.mark(slot);
        while lo < ticks.len() && ticks[lo].timestamp < mark - MARK_WINDOW_MS {
            lo += 1;
        }
        let mut best: Option<(i64, f64)> = None;
        for t in ticks[lo..].iter().take_while(|t| t.timestamp <= mark + MARK_WINDOW_MS) {
            let d = (t.timestamp - mark).abs();
            // strict comparison keeps the earlier tick on ties
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, t.price));
            }
        }
        if let Some((_, p)) = best {
            *price = p;
        }
    }
    let mut last = ticks[0].price;
    for price in prices.iter_mut() {
        if price.is_nan() {
            *price = last;
        } else {
            last = *price;
        }
    }
    prices
}

/// Samples one symbol's sorted ticks onto the calendar's minute marks.
pub fn build_minute_series(ticks: &[TickRecord], calendar: &Calendar) -> Result<MinuteBuild> {
    let symbol = match ticks.first() {
        Some(t) => t.symbol.clone(),
        None => return Err(Error::Insufficient { what: "ticks", have: 0, need: 1 }),
    };
    if let Some(other) = ticks.iter().find(|t| t.symbol != symbol) {
        return Err(Error::Format(format!(
            "build_minute_series got ticks for {} and {}",
            symbol, other.symbol
        )));
    }
    if ticks.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::Format(format!("ticks for {symbol} are not sorted")));
    }
    let mut series = MinuteSeries {
        symbol,
        days: Vec::new(),
        prices: Vec::new(),
        trades_per_day: Some(Vec::new()),
    };
    let mut dropped_days = Vec::new();
    for session in calendar.sessions() {
        let (start, end) = session.window();
        let a = ticks.partition_point(|t| t.timestamp < start);
        let b = ticks.partition_point(|t| t.timestamp <= end);
        let day = &ticks[a..b];
        if day.is_empty() {
            tracing::warn!(symbol = %series.symbol, date = %session.date, "no ticks; day dropped");
            dropped_days.push(session.date);
            continue;
        }
        series.days.push(session.date);
        series.prices.push(sample_day(day, session));
        if let Some(counts) = series.trades_per_day.as_mut() {
            counts.push(day.len() as u64);
        }
    }
    Ok(MinuteBuild {
        series,
        dropped_days,
    })
}

/// Splits sorted ticks by symbol and samples each onto the calendar.
pub fn build_all(ticks: &[TickRecord], calendar: &Calendar) -> Result<Vec<MinuteBuild>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < ticks.len() {
        let sym = &ticks[start].symbol;
        let len = ticks[start..].iter().take_while(|t| &t.symbol == sym).count();
        out.push(build_minute_series(&ticks[start..start + len], calendar)?);
        start += len;
    }
    Ok(out)
}

/// Keeps symbols whose every day has at least `min_daily_trades` ticks.
///
/// Series without tick counts (read from minute bars) cannot be judged and
/// are kept.
pub fn filter_active_stocks(series: Vec<MinuteSeries>, min_daily_trades: u64) -> Vec<MinuteSeries> {
    series
        .into_iter()
        .filter(|s| match &s.trades_per_day {
            Some(counts) => counts.iter().all(|&c| c >= min_daily_trades),
            None => true,
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct MinuteRow {
    symbol: String,
    date: String,
    minute_index: usize,
    price: f64,
}

/// Reads canonical minute bars (`symbol,date,minute_index,price`).
///
/// Every listed day must carry all 390 slots with positive prices.
pub fn read_minute_csv<R: Read>(input: R) -> Result<Vec<MinuteSeries>> {
    let mut reader = csv::Reader::from_reader(input);
    if !check_header(&mut reader, &MINUTE_HEADER, "minute-bar")? {
        return Ok(Vec::new());
    }
    let mut grid: BTreeMap<String, BTreeMap<NaiveDate, [f64; SLOTS_PER_DAY]>> = BTreeMap::new();
    for (line, row) in reader.deserialize::<MinuteRow>().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("minute-bar row {}: {e}", line + 2)))?;
        let date = parse_date(&row.date)
            .ok_or_else(|| Error::Format(format!("minute-bar row {}: bad date", line + 2)))?;
        if row.minute_index >= SLOTS_PER_DAY {
            return Err(Error::Format(format!(
                "minute-bar row {}: minute_index {} out of range",
                line + 2,
                row.minute_index
            )));
        }
        if !(row.price.is_finite() && row.price > 0.0) {
            return Err(Error::Format(format!("minute-bar row {}: price must be positive", line + 2)));
        }
        grid.entry(row.symbol)
            .or_default()
            .entry(date)
            .or_insert([f64::NAN; SLOTS_PER_DAY])[row.minute_index] = row.price;
    }
    grid.into_iter()
        .map(|(symbol, days)| {
            let mut series = MinuteSeries {
                symbol,
                days: Vec::with_capacity(days.len()),
                prices: Vec::with_capacity(days.len()),
                trades_per_day: None,
            };
            for (date, prices) in days {
                if prices.iter().any(|p| p.is_nan()) {
                    return Err(Error::Format(format!(
                        "{} on {date} lacks some of its {SLOTS_PER_DAY} minute slots",
                        series.symbol
                    )));
                }
                series.days.push(date);
                series.prices.push(prices);
            }
            Ok(series)
        })
        .collect()
}

/// Writes canonical minute bars. Prices use the shortest representation
/// that parses back to the identical `f64`.
pub fn write_minute_csv<W: Write>(out: W, series: &[MinuteSeries]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(MINUTE_HEADER)?;
    let mut sorted: Vec<&MinuteSeries> = series.iter().collect();
    sorted.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    for s in sorted {
        for (date, prices) in s.days.iter().zip(&s.prices) {
            let date = date.format("%Y-%m-%d").to_string();
            for (slot, price) in prices.iter().enumerate() {
                writer.write_record([
                    s.symbol.as_str(),
                    &date,
                    &slot.to_string(),
                    &price.to_string(),
                ])?;
            }
        }
    }
    writer.flush().map_err(|e| Error::io("<minute csv>", e))?;
    Ok(())
}

/// Per-symbol reference data for the capitalization factor.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StockMeta {
    pub symbol: String,
    pub shares_outstanding: f64,
    pub ref_price: f64,
    pub ref_date: String,
}

/// Reads `symbol,shares_outstanding,ref_price,ref_date`.
pub fn read_meta_csv<R: Read>(input: R) -> Result<BTreeMap<String, StockMeta>> {
    let mut reader = csv::Reader::from_reader(input);
    if !check_header(&mut reader, &META_HEADER, "metadata")? {
        return Ok(BTreeMap::new());
    }
    let mut out = BTreeMap::new();
    for (line, row) in reader.deserialize::<StockMeta>().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("metadata row {}: {e}", line + 2)))?;
        if !(row.shares_outstanding > 0.0 && row.ref_price > 0.0) {
            return Err(Error::Format(format!(
                "metadata row {}: shares and price must be positive",
                line + 2
            )));
        }
        out.insert(row.symbol.clone(), row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        parse_date(s).unwrap()
    }

    fn tick(ts: i64, price: f64) -> TickRecord {
        TickRecord {
            symbol: "GE".into(),
            timestamp: ts,
            price,
            size: 100,
        }
    }

    #[test]
    fn parses_single_row() {
        let raw = "symbol,timestamp,price,size\nGE,1009890000000,40.10,500\n";
        let p = parse_ticks(raw.as_bytes(), TickFormat::default()).unwrap();
        assert_eq!(p.malformed, 0);
        assert_eq!(
            p.records,
            vec![TickRecord {
                symbol: "GE".into(),
                timestamp: 1_009_890_000_000,
                price: 40.10,
                size: 500
            }]
        );
    }

    #[test]
    fn empty_file_is_empty() {
        let p = parse_ticks("".as_bytes(), TickFormat::default()).unwrap();
        assert!(p.records.is_empty());
        assert_eq!(p.malformed, 0);
    }

    #[test]
    fn negative_price_counted_malformed() {
        let mut raw = String::from("symbol,timestamp,price,size\n");
        for i in 0..200 {
            raw.push_str(&format!("GE,{},40.0,1\n", 1000 + i));
        }
        raw.push_str("GE,5000,-1,1\n");
        let p = parse_ticks(raw.as_bytes(), TickFormat::default()).unwrap();
        assert_eq!(p.malformed, 1);
        assert_eq!(p.records.len(), 200);
        assert!(p.records.iter().all(|r| r.price > 0.0));
    }

    #[test]
    fn too_many_malformed_is_hard_failure() {
        let raw = "symbol,timestamp,price,size\nGE,1,40,1\nGE,x,40,1\n";
        assert!(matches!(
            parse_ticks(raw.as_bytes(), TickFormat::default()),
            Err(Error::TooManyMalformed { malformed: 1, total: 2, .. })
        ));
    }

    #[test]
    fn wrong_header_is_format_error() {
        let raw = "sym,ts,px\nGE,1,40\n";
        assert!(matches!(parse_ticks(raw.as_bytes(), TickFormat::default()), Err(Error::Format(_))));
    }

    #[test]
    fn records_sorted_by_symbol_then_time() {
        let raw = "symbol,timestamp,price,size\nIBM,5,1,1\nGE,9,1,1\nGE,3,1,1\n";
        let p = parse_ticks(raw.as_bytes(), TickFormat::default()).unwrap();
        let keys: Vec<_> = p.records.iter().map(|r| (r.symbol.as_str(), r.timestamp)).collect();
        assert_eq!(keys, vec![("GE", 3), ("GE", 9), ("IBM", 5)]);
    }

    fn one_day() -> (Calendar, i64) {
        let cal = Calendar::regular([d("2002-01-02")]).unwrap();
        let open = cal.sessions()[0].open_ms;
        (cal, open)
    }

    #[test]
    fn nearest_tick_with_window_and_carry_forward() {
        // ticks at 09:30:02 and 09:31:40; the second is 40 s from the 09:31
        // mark (outside the window) and 20 s from 09:32
        let (cal, open) = one_day();
        let ticks = vec![tick(open + 2_000, 10.0), tick(open + 100_000, 11.0)];
        let s = build_minute_series(&ticks, &cal).unwrap().series;
        assert_eq!(&s.prices[0][..3], &[10.0, 10.0, 11.0]);
        assert!(s.prices[0][3..].iter().all(|&p| p == 11.0));

        // within the window of 09:31 the later tick takes that slot
        let ticks = vec![tick(open + 2_000, 10.0), tick(open + 80_000, 11.0)];
        let s = build_minute_series(&ticks, &cal).unwrap().series;
        assert_eq!(&s.prices[0][..3], &[10.0, 11.0, 11.0]);
    }

    #[test]
    fn single_tick_fills_day() {
        let (cal, open) = one_day();
        let s = build_minute_series(&[tick(open + 3_600_000, 7.5)], &cal).unwrap().series;
        assert!(s.prices[0].iter().all(|&p| p == 7.5));
        assert_eq!(s.trades_per_day, Some(vec![1]));
    }

    #[test]
    fn equidistant_ticks_earlier_wins() {
        let (cal, open) = one_day();
        let mark = open + 10 * 60_000;
        let ticks = vec![tick(mark - 15_000, 20.0), tick(mark + 15_000, 21.0)];
        let s = build_minute_series(&ticks, &cal).unwrap().series;
        assert_eq!(s.prices[0][10], 20.0);
    }

    #[test]
    fn empty_day_dropped() {
        let cal = Calendar::regular([d("2002-01-02"), d("2002-01-03")]).unwrap();
        let open2 = cal.sessions()[1].open_ms;
        let b = build_minute_series(&[tick(open2, 5.0)], &cal).unwrap();
        assert_eq!(b.series.days, vec![d("2002-01-03")]);
        assert_eq!(b.dropped_days, vec![d("2002-01-02")]);
    }

    #[test]
    fn rebuild_from_own_output_is_identity() {
        let (cal, open) = one_day();
        let ticks: Vec<_> = (0..50).map(|i| tick(open + i * 457_000 + 1_234, 10.0 + i as f64)).collect();
        let s = build_minute_series(&ticks, &cal).unwrap().series;
        let again = build_minute_series(&s.as_ticks(&cal), &cal).unwrap().series;
        assert_eq!(again.prices, s.prices);
    }

    fn with_counts(sym: &str, counts: Vec<u64>) -> MinuteSeries {
        MinuteSeries {
            symbol: sym.into(),
            days: (0..counts.len()).map(|i| d("2002-01-02") + chrono::Days::new(i as u64)).collect(),
            prices: vec![[1.0; SLOTS_PER_DAY]; counts.len()],
            trades_per_day: Some(counts),
        }
    }

    #[test]
    fn active_filter_boundaries() {
        let set = vec![with_counts("A", vec![501, 600]), with_counts("B", vec![800, 499])];
        let kept: Vec<_> = filter_active_stocks(set.clone(), 500).into_iter().map(|s| s.symbol).collect();
        assert_eq!(kept, vec!["A"]);
        assert_eq!(filter_active_stocks(set, 0).len(), 2);
    }

    #[test]
    fn minute_csv_round_trip_is_bit_exact() {
        let mut s = with_counts("GE", vec![1, 1]);
        s.trades_per_day = None;
        for (k, day) in s.prices.iter_mut().enumerate() {
            for (i, p) in day.iter_mut().enumerate() {
                *p = 0.1 + (i as f64 * 0.7 + k as f64).sin().abs() * 33.3;
            }
        }
        let mut buf = Vec::new();
        write_minute_csv(&mut buf, std::slice::from_ref(&s)).unwrap();
        let back = read_minute_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![s]);
    }

    #[test]
    fn calendar_csv() {
        let cal = Calendar::from_csv("date,open_timestamp\n2002-01-03,1010068200000\n2002-01-02,1009981800000\n".as_bytes()).unwrap();
        assert_eq!(cal.sessions()[0].date, d("2002-01-02"));
        assert_eq!(cal.sessions()[0].open_ms, 1_009_981_800_000);
    }
}
