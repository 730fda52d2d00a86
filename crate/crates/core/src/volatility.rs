//! Volatility construction: absolute minute log-returns, divided by the
//! intraday pattern (mean absolute return per minute-of-day slot), then
//! scaled to unit standard deviation.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{MinuteSeries, SLOTS_PER_DAY};

/// Returns per trading day; slot `s` is the change from minute `s` to `s + 1`.
pub const RETURNS_PER_DAY: usize = SLOTS_PER_DAY - 1;

pub const VOLATILITY_HEADER: [&str; 3] = ["symbol", "global_minute_index", "volatility"];

#[derive(Debug, Clone, PartialEq)]
pub struct VolatilitySeries {
    pub symbol: String,
    /// Non-negative, in units of standard deviations, concatenated across days.
    pub values: Vec<f64>,
    /// Start index of each day within `values`.
    pub day_boundaries: Vec<usize>,
}

impl VolatilitySeries {
    /// Wraps a raw signal (e.g. synthetic) as a single-segment series.
    pub fn from_raw(symbol: impl Into<String>, values: Vec<f64>) -> Self {
        VolatilitySeries {
            symbol: symbol.into(),
            values,
            day_boundaries: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntradayPattern {
    pub slot_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub symbol: String,
    pub daily_returns: Vec<f64>,
}

pub type DayReturns = Vec<[f64; RETURNS_PER_DAY]>;

pub fn log_returns(series: &MinuteSeries) -> DayReturns {
    series
        .prices
        .iter()
        .map(|day| {
            let mut r = [0.0; RETURNS_PER_DAY];
            for (s, out) in r.iter_mut().enumerate() {
                *out = (day[s + 1] / day[s]).ln();
            }
            r
        })
        .collect()
}

pub fn intraday_pattern(returns: &[[f64; RETURNS_PER_DAY]]) -> Result<IntradayPattern> {
    if returns.is_empty() {
        return Err(Error::Insufficient {
            what: "days of returns for the intraday pattern",
            have: 0,
            need: 1,
        });
    }
    let n = returns.len() as f64;
    let mut slot_means = vec![0.0; RETURNS_PER_DAY];
    for day in returns {
        for (acc, r) in slot_means.iter_mut().zip(day) {
            *acc += r.abs();
        }
    }
    slot_means.iter_mut().for_each(|m| *m /= n);
    Ok(IntradayPattern { slot_means })
}

pub fn normalize_volatility(
    symbol: &str,
    returns: &[[f64; RETURNS_PER_DAY]],
    pattern: &IntradayPattern,
) -> Result<VolatilitySeries> {
    let mut values = Vec::with_capacity(returns.len() * RETURNS_PER_DAY);
    let mut day_boundaries = Vec::with_capacity(returns.len());
    for day in returns {
        day_boundaries.push(values.len());
        values.extend(day.iter().zip(&pattern.slot_means).map(|(r, &m)| {
            if m > 0.0 {
                r.abs() / m
            } else {
                0.0
            }
        }));
    }
    let sd = crate::stats::sample_std(&values);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Degenerate(format!(
            "{symbol}: volatility has zero spread and cannot be normalized"
        )));
    }
    values.iter_mut().for_each(|v| *v /= sd);
    Ok(VolatilitySeries {
        symbol: symbol.to_string(),
        values,
        day_boundaries,
    })
}

/// Full construction from minute prices.
pub fn volatility_series(series: &MinuteSeries) -> Result<VolatilitySeries> {
    let returns = log_returns(series);
    let pattern = intraday_pattern(&returns)?;
    normalize_volatility(&series.symbol, &returns, &pattern)
}

pub fn daily_series(series: &MinuteSeries) -> Result<DailySeries> {
    if series.n_days() < 2 {
        return Err(Error::Insufficient {
            what: "trading days for daily returns",
            have: series.n_days(),
            need: 2,
        });
    }
    let closes: Vec<f64> = series.closes().collect();
    Ok(DailySeries {
        symbol: series.symbol.clone(),
        daily_returns: closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect(),
    })
}

pub fn write_volatility_csv<W: Write>(out: W, series: &[VolatilitySeries]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(VOLATILITY_HEADER)?;
    for s in series {
        for (i, v) in s.values.iter().enumerate() {
            writer.write_record([s.symbol.as_str(), &i.to_string(), &v.to_string()])?;
        }
    }
    writer.flush().map_err(|e| Error::io("<volatility csv>", e))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct VolRow {
    symbol: String,
    global_minute_index: usize,
    volatility: f64,
}

/// Reads `symbol,global_minute_index,volatility`; indices must run 0, 1, 2, …
/// per symbol. Symbols keep their first-appearance order.
pub fn read_volatility_csv<R: Read>(input: R) -> Result<Vec<VolatilitySeries>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != VOLATILITY_HEADER {
        return Err(Error::Format(format!(
            "volatility header must be `{}`",
            VOLATILITY_HEADER.join(",")
        )));
    }
    let mut out: Vec<VolatilitySeries> = Vec::new();
    for (line, row) in reader.deserialize::<VolRow>().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("volatility row {}: {e}", line + 2)))?;
        let idx = match out.iter().position(|s| s.symbol == row.symbol) {
            Some(i) => i,
            None => {
                out.push(VolatilitySeries::from_raw(row.symbol.clone(), Vec::new()));
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        if row.global_minute_index != s.values.len() {
            return Err(Error::Format(format!(
                "volatility row {}: expected index {} for {}, got {}",
                line + 2,
                s.values.len(),
                s.symbol,
                row.global_minute_index
            )));
        }
        s.values.push(row.volatility);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use std::f64::consts::E;

    fn series(days: Vec<[f64; SLOTS_PER_DAY]>) -> MinuteSeries {
        let d0 = NaiveDate::from_ymd_opt(2001, 1, 2).unwrap();
        MinuteSeries {
            symbol: "T".into(),
            days: (0..days.len()).map(|i| d0 + chrono::Days::new(i as u64)).collect(),
            prices: days,
            trades_per_day: None,
        }
    }

    fn wiggly(seed: f64) -> [f64; SLOTS_PER_DAY] {
        let mut p = [0.0; SLOTS_PER_DAY];
        for (i, v) in p.iter_mut().enumerate() {
            *v = 50.0 + 5.0 * ((i as f64) * 0.37 + seed).sin() + 0.01 * i as f64;
        }
        p
    }

    #[test]
    fn constant_prices_zero_returns() {
        let r = log_returns(&series(vec![[3.0; SLOTS_PER_DAY]]));
        assert!(r[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn log_identity_and_no_overnight_return() {
        let mut a = [E; SLOTS_PER_DAY];
        a[0] = 1.0;
        let mut b = [4.0; SLOTS_PER_DAY];
        b[0] = 2.0;
        let r = log_returns(&series(vec![a, b]));
        assert_eq!(r.len(), 2);
        assert!((r[0][0] - 1.0).abs() < 1e-15 && r[0][1] == 0.0);
        assert!((r[1][0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pattern_single_day_and_symmetry() {
        let mut r1 = [0.0; RETURNS_PER_DAY];
        let mut r2 = [0.0; RETURNS_PER_DAY];
        r1[5] = 0.02;
        r2[5] = -0.02;
        assert_eq!(intraday_pattern(&[r1]).unwrap().slot_means[5], 0.02);
        assert_eq!(intraday_pattern(&[r1, r2]).unwrap().slot_means[5], 0.02);
        let zero = intraday_pattern(&[[0.0; RETURNS_PER_DAY]]).unwrap();
        assert!(zero.slot_means.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn identical_days_give_flat_raw_volatility() {
        let s = series(vec![wiggly(0.0), wiggly(0.0)]);
        let returns = log_returns(&s);
        let pattern = intraday_pattern(&returns).unwrap();
        for day in &returns {
            for (r, m) in day.iter().zip(&pattern.slot_means) {
                if *m > 0.0 {
                    assert!((r.abs() / m - 1.0).abs() < 1e-12);
                }
            }
        }
        // a constant raw series has no spread to normalize by
        assert!(matches!(volatility_series(&s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn unit_standard_deviation() {
        let s = series((0..5).map(|k| wiggly(k as f64 * 1.3)).collect());
        let v = volatility_series(&s).unwrap();
        assert!((crate::stats::sample_std(&v.values) - 1.0).abs() < 1e-9);
        assert!(v.values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn flat_pattern_reproduces_scaled_absolute_returns() {
        let returns: Vec<[f64; RETURNS_PER_DAY]> = (0..3)
            .map(|k| {
                let mut r = [0.0; RETURNS_PER_DAY];
                for (i, x) in r.iter_mut().enumerate() {
                    *x = ((i * 7 + k * 13) as f64).sin() * 0.01;
                }
                r
            })
            .collect();
        let flat = IntradayPattern { slot_means: vec![1.0; RETURNS_PER_DAY] };
        let v = normalize_volatility("T", &returns, &flat).unwrap();
        let abs: Vec<f64> = returns.iter().flatten().map(|r| r.abs()).collect();
        let sd = crate::stats::sample_std(&abs);
        for (got, a) in v.values.iter().zip(&abs) {
            assert!((got - a / sd).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_series_is_degenerate() {
        let s = series(vec![[10.0; SLOTS_PER_DAY], [10.0; SLOTS_PER_DAY]]);
        assert!(matches!(volatility_series(&s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn price_scale_invariance() {
        let s = series((0..3).map(|k| wiggly(k as f64)).collect());
        let mut scaled = s.clone();
        scaled.prices.iter_mut().flatten().for_each(|p| *p *= 17.0);
        let a = volatility_series(&s).unwrap();
        let b = volatility_series(&scaled).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn doubled_returns_leave_volatility_unchanged() {
        let s = series((0..3).map(|k| wiggly(k as f64)).collect());
        let r = log_returns(&s);
        let r2: Vec<_> = r.iter().map(|d| d.map(|x| 2.0 * x)).collect();
        let a = normalize_volatility("T", &r, &intraday_pattern(&r).unwrap()).unwrap();
        let b = normalize_volatility("T", &r2, &intraday_pattern(&r2).unwrap()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn daily_returns_from_closes() {
        let day = |c: f64| {
            let mut p = [1.0; SLOTS_PER_DAY];
            p[SLOTS_PER_DAY - 1] = c;
            p
        };
        let d = daily_series(&series(vec![day(100.0), day(100.0), day(100.0)])).unwrap();
        assert_eq!(d.daily_returns, vec![0.0, 0.0]);
        let d = daily_series(&series(vec![day(100.0), day(101.0)])).unwrap();
        assert!((d.daily_returns[0] - 1.01f64.ln()).abs() < 1e-15);
        let d = daily_series(&series(vec![day(1.0), day(E), day(1.0)])).unwrap();
        assert!((d.daily_returns[0] - 1.0).abs() < 1e-15 && (d.daily_returns[1] + 1.0).abs() < 1e-15);
        assert!(daily_series(&series(vec![day(1.0)])).is_err());
    }

    #[test]
    fn volatility_csv_round_trip() {
        let v = vec![
            VolatilitySeries::from_raw("A", vec![0.25, 1.5, 0.0]),
            VolatilitySeries::from_raw("B", vec![3.0]),
        ];
        let mut buf = Vec::new();
        write_volatility_csv(&mut buf, &v).unwrap();
        assert_eq!(read_volatility_csv(buf.as_slice()).unwrap(), v);
    }
}
