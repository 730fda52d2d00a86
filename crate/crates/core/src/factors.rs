//! Per-stock factors and factor-binned aggregation of fitted exponents.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{MinuteSeries, StockMeta};
use crate::stats::{fit_line, mean, sample_std};
use crate::volatility::DailySeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockFactors {
    pub symbol: String,
    /// Reference price × shares outstanding; absent without metadata.
    pub capitalization: Option<f64>,
    pub risk: f64,
    pub mean_return: f64,
    /// Absent when the input carried no tick counts.
    pub trades_per_day: Option<f64>,
}

pub fn compute_factors(daily: &DailySeries, minute: &MinuteSeries, meta: Option<&StockMeta>) -> Result<StockFactors> {
    if daily.daily_returns.is_empty() {
        return Err(Error::Insufficient { what: "daily returns for factors", have: 0, need: 1 });
    }
    let trades_per_day = minute.trades_per_day.as_ref().filter(|c| !c.is_empty()).map(|counts| {
        counts.iter().sum::<u64>() as f64 / counts.len() as f64
    });
    Ok(StockFactors {
        symbol: daily.symbol.clone(),
        capitalization: meta.map(|m| m.ref_price * m.shares_outstanding),
        risk: sample_std(&daily.daily_returns),
        mean_return: mean(&daily.daily_returns),
        trades_per_day,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Capitalization,
    Risk,
    TradesPerDay,
    MeanReturn,
}

impl FactorKind {
    pub const ALL: [FactorKind; 4] = [
        FactorKind::Capitalization,
        FactorKind::Risk,
        FactorKind::TradesPerDay,
        FactorKind::MeanReturn,
    ];

    pub fn logarithmic(self) -> bool {
        !matches!(self, FactorKind::MeanReturn)
    }

    pub fn value(self, f: &StockFactors) -> Option<f64> {
        match self {
            FactorKind::Capitalization => f.capitalization,
            FactorKind::Risk => Some(f.risk),
            FactorKind::TradesPerDay => f.trades_per_day,
            FactorKind::MeanReturn => Some(f.mean_return),
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorKind::Capitalization => "capitalization",
            FactorKind::Risk => "risk",
            FactorKind::TradesPerDay => "trades_per_day",
            FactorKind::MeanReturn => "mean_return",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Binning {
    pub log_bins: usize,
    pub linear_bins: usize,
    pub min_occupancy: usize,
}

impl Default for Binning {
    fn default() -> Self {
        Binning {
            log_bins: 12,
            linear_bins: 10,
            min_occupancy: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendKind {
    Logarithmic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trend {
    pub kind: TrendKind,
    /// For a logarithmic trend, `exponent = slope·ln(factor) + intercept`.
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorBin {
    pub center: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorCurve {
    pub factor: FactorKind,
    /// Occupied bins only.
    pub bins: Vec<FactorBin>,
    pub fit: Trend,
    /// Samples dropped because a log-binned factor was not positive.
    pub excluded_nonpositive: usize,
}

/// Bins `(factor value, exponent)` samples and fits the trend line over
/// bins meeting the minimum occupancy.
pub fn bin_and_aggregate(samples: &[(f64, f64)], factor: FactorKind, binning: &Binning) -> Result<FactorCurve> {
    let log = factor.logarithmic();
    let usable: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(v, e)| v.is_finite() && e.is_finite() && (!log || *v > 0.0))
        .collect();
    let excluded_nonpositive = samples.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::Insufficient { what: "stocks for a factor curve", have: 0, need: binning.min_occupancy });
    }
    let n_bins = if log { binning.log_bins } else { binning.linear_bins }.max(1);
    let axis = |v: f64| if log { v.ln() } else { v };
    let lo = usable.iter().map(|s| axis(s.0)).fold(f64::INFINITY, f64::min);
    let hi = usable.iter().map(|s| axis(s.0)).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for &(v, e) in &usable {
        let k = if width > 0.0 {
            (((axis(v) - lo) / width).floor() as usize).min(n_bins - 1)
        } else {
            0
        };
        groups[k].push(e);
    }
    let bins: Vec<FactorBin> = groups
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(k, g)| {
            let c = if width > 0.0 { lo + (k as f64 + 0.5) * width } else { lo };
            FactorBin {
                center: if log { c.exp() } else { c },
                mean: mean(g),
                std: sample_std(g),
                count: g.len(),
            }
        })
        .collect();
    let fit_bins: Vec<&FactorBin> = bins.iter().filter(|b| b.count >= binning.min_occupancy).collect();
    if fit_bins.is_empty() {
        return Err(Error::Insufficient {
            what: "bins meeting the minimum occupancy",
            have: 0,
            need: 1,
        });
    }
    let kind = if log { TrendKind::Logarithmic } else { TrendKind::Linear };
    let fit = if fit_bins.len() == 1 {
        Trend { kind, slope: 0.0, intercept: fit_bins[0].mean }
    } else {
        let xs: Vec<f64> = fit_bins.iter().map(|b| axis(b.center)).collect();
        let ys: Vec<f64> = fit_bins.iter().map(|b| b.mean).collect();
        let line = fit_line(&xs, &ys)?;
        Trend { kind, slope: line.slope, intercept: line.intercept }
    };
    Ok(FactorCurve {
        factor,
        bins,
        fit,
        excluded_nonpositive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaGammaRegression {
    pub q: f64,
    pub m: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

pub const MIN_REGRESSION_PAIRS: usize = 10;

/// Least-squares line `δ = slope·γ + intercept` over dually valid pairs.
pub fn regress_delta_gamma(pairs: &[(f64, f64)], q: f64, m: f64) -> Result<DeltaGammaRegression> {
    if pairs.len() < MIN_REGRESSION_PAIRS {
        return Err(Error::Insufficient {
            what: "(γ, δ) pairs for regression",
            have: pairs.len(),
            need: MIN_REGRESSION_PAIRS,
        });
    }
    let (g, d): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let line = fit_line(&g, &d)?;
    let residual_rms = (g
        .iter()
        .zip(&d)
        .map(|(&x, &y)| (y - line.eval(x)).powi(2))
        .sum::<f64>()
        / g.len() as f64)
        .sqrt();
    Ok(DeltaGammaRegression {
        q,
        m,
        slope: line.slope,
        intercept: line.intercept,
        residual_rms,
        n_points: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    use crate::ingest::SLOTS_PER_DAY;

    fn minute(closes: &[f64], counts: Option<Vec<u64>>) -> MinuteSeries {
        let d0 = NaiveDate::from_ymd_opt(2002, 1, 2).unwrap();
        MinuteSeries {
            symbol: "X".into(),
            days: (0..closes.len()).map(|i| d0 + chrono::Days::new(i as u64)).collect(),
            prices: closes.iter().map(|&c| [c; SLOTS_PER_DAY]).collect(),
            trades_per_day: counts,
        }
    }

    fn meta(price: f64, shares: f64) -> StockMeta {
        StockMeta { symbol: "X".into(), shares_outstanding: shares, ref_price: price, ref_date: "2002-12-31".into() }
    }

    #[test]
    fn factor_arithmetic() {
        let m = minute(&[100.0, 101.0, 100.0], Some(vec![600, 800, 700]));
        let d = crate::volatility::daily_series(&m).unwrap();
        let f = compute_factors(&d, &m, Some(&meta(10.0, 1e7))).unwrap();
        assert!((f.capitalization.unwrap() - 1e8).abs() < 1e-6);
        assert!(f.mean_return.abs() < 1e-15);
        // sample std of ±ln 1.01 with n - 1 = 1
        assert!((f.risk - 2f64.sqrt() * 1.01f64.ln()).abs() < 1e-12);
        assert_eq!(f.trades_per_day, Some(700.0));

        let flat = minute(&[50.0; 4], None);
        let f = compute_factors(&crate::volatility::daily_series(&flat).unwrap(), &flat, None).unwrap();
        assert_eq!((f.risk, f.mean_return, f.capitalization, f.trades_per_day), (0.0, 0.0, None, None));
    }

    #[test]
    fn constant_exponent_field() {
        let samples: Vec<(f64, f64)> = (1..=60).map(|i| (1e6 * i as f64, 0.42)).collect();
        let c = bin_and_aggregate(&samples, FactorKind::Capitalization, &Binning::default()).unwrap();
        assert!(!c.bins.is_empty());
        assert!(c.bins.iter().all(|b| (b.mean - 0.42).abs() < 1e-12 && b.std < 1e-12));
        assert!(c.fit.slope.abs() < 1e-12);
    }

    #[test]
    fn two_bin_log_fit() {
        // log-range [-0.5, 1.5] in two bins puts the centers at ln = 0 and ln = 1
        let mut samples = vec![];
        for _ in 0..5 {
            samples.push(((-0.5f64).exp(), 0.3));
            samples.push(((1.5f64).exp(), 0.5));
        }
        let binning = Binning { log_bins: 2, ..Binning::default() };
        let c = bin_and_aggregate(&samples, FactorKind::Risk, &binning).unwrap();
        assert_eq!(c.bins.len(), 2);
        assert!(c.bins[0].center.ln().abs() < 1e-12);
        assert!((c.bins[1].center.ln() - 1.0).abs() < 1e-12);
        assert!((c.fit.slope - 0.2).abs() < 1e-12);
        assert!((c.fit.intercept - 0.3).abs() < 1e-12);
    }

    #[test]
    fn return_curve_is_linear() {
        let samples: Vec<(f64, f64)> = (0..50).map(|i| (-0.005 + 0.0002 * i as f64, 0.3)).collect();
        let c = bin_and_aggregate(&samples, FactorKind::MeanReturn, &Binning::default()).unwrap();
        assert_eq!(c.fit.kind, TrendKind::Linear);
        assert_eq!(c.bins.len(), 10);
    }

    #[test]
    fn sparse_bins_error() {
        let samples: Vec<(f64, f64)> = (1..=4).map(|i| (i as f64, 0.3)).collect();
        assert!(bin_and_aggregate(&samples, FactorKind::Risk, &Binning::default()).is_err());
    }

    #[test]
    fn nonpositive_log_factor_excluded() {
        let mut samples: Vec<(f64, f64)> = (1..=20).map(|i| (i as f64, 0.3)).collect();
        samples.push((0.0, 0.9));
        let c = bin_and_aggregate(&samples, FactorKind::Risk, &Binning::default()).unwrap();
        assert_eq!(c.excluded_nonpositive, 1);
        assert_eq!(c.bins.iter().map(|b| b.count).sum::<usize>(), 20);
    }

    #[test]
    fn exact_line_regression() {
        let pairs: Vec<(f64, f64)> = (0..12).map(|i| {
            let g = 0.2 + 0.03 * i as f64;
            (g, -0.7 * g + 0.5)
        }).collect();
        let r = regress_delta_gamma(&pairs, 2.0, 2.0).unwrap();
        assert!((r.slope + 0.7).abs() < 1e-12 && (r.intercept - 0.5).abs() < 1e-12);
        assert!(r.residual_rms < 1e-12);
    }

    #[test]
    fn regression_errors() {
        let few: Vec<(f64, f64)> = (0..9).map(|i| (i as f64, 0.0)).collect();
        assert!(matches!(regress_delta_gamma(&few, 2.0, 2.0), Err(Error::Insufficient { .. })));
        let flat: Vec<(f64, f64)> = (0..12).map(|i| (0.3, i as f64)).collect();
        assert!(matches!(regress_delta_gamma(&flat, 2.0, 2.0), Err(Error::Degenerate(_))));
    }

    proptest! {
        #[test]
        fn regression_shift(shift in -1.0f64..1.0, noise in prop::collection::vec(-0.01f64..0.01, 12)) {
            let pairs: Vec<(f64, f64)> = noise.iter().enumerate().map(|(i, e)| (0.2 + 0.02 * i as f64, 0.1 - 0.6 * (0.2 + 0.02 * i as f64) + e)).collect();
            let moved: Vec<(f64, f64)> = pairs.iter().map(|&(g, d)| (g, d + shift)).collect();
            let a = regress_delta_gamma(&pairs, 2.0, 2.0).unwrap();
            let b = regress_delta_gamma(&moved, 2.0, 2.0).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-9);
            prop_assert!((b.intercept - a.intercept - shift).abs() < 1e-9);
        }

        #[test]
        fn curve_is_order_independent(vals in prop::collection::vec((0.01f64..100.0, 0.0f64..1.0), 30..80), seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = vals.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = bin_and_aggregate(&vals, FactorKind::TradesPerDay, &Binning::default());
            let b = bin_and_aggregate(&shuffled, FactorKind::TradesPerDay, &Binning::default());
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.bins.len(), b.bins.len());
                    for (x, y) in a.bins.iter().zip(&b.bins) {
                        prop_assert_eq!(x.count, y.count);
                        prop_assert!((x.mean - y.mean).abs() < 1e-12);
                    }
                    prop_assert_eq!(a.bins.iter().map(|b| b.count).sum::<usize>(), vals.len());
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "order changed the outcome"),
            }
        }
    }
}
