//! Detrended fluctuation analysis.
//!
//! The profile (cumulative sum of the mean-removed series) is cut into
//! non-overlapping windows of `n` samples, once from the start and once from
//! the end, so no remainder is discarded. A polynomial of the detrending
//! order is removed from each window and `F(n)` is the RMS of what is left.
//! `α` is the slope of `ln F` against `ln n`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::fit_line;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaResult {
    pub alpha: f64,
    pub intercept: f64,
    pub scales: Vec<usize>,
    pub fluctuations: Vec<f64>,
    /// Inclusive scale range used for the regression.
    pub fit_range: (usize, usize),
    pub detrend_order: usize,
}

/// About 20 log-spaced scales from 10 to `len / 8`.
pub fn default_scales(len: usize) -> Vec<usize> {
    log_scales(10, len / 8, 20)
}

pub fn log_scales(min: usize, max: usize, count: usize) -> Vec<usize> {
    if max < min || count == 0 {
        return Vec::new();
    }
    if count == 1 || max == min {
        return vec![min];
    }
    let (lmin, lmax) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| (lmin + (lmax - lmin) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

/// Orthonormal-by-construction polynomial basis on `0..n`, up to order 2.
struct Basis {
    /// `basis[k][i]` evaluated at sample `i`.
    columns: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl Basis {
    fn new(n: usize, order: usize) -> Self {
        let mid = (n as f64 - 1.0) / 2.0;
        let t: Vec<f64> = (0..n).map(|i| i as f64 - mid).collect();
        let mut columns = vec![vec![1.0; n]];
        if order >= 1 {
            columns.push(t.clone());
        }
        if order >= 2 {
            // symmetric grid: t² minus its mean is orthogonal to 1 and t
            let m2 = t.iter().map(|x| x * x).sum::<f64>() / n as f64;
            columns.push(t.iter().map(|x| x * x - m2).collect());
        }
        let norms = columns.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        Basis { columns, norms }
    }

    /// Sum of squared residuals after projecting out the basis.
    fn residual_ss(&self, y: &[f64]) -> f64 {
        let coef: Vec<f64> = self
            .columns
            .iter()
            .zip(&self.norms)
            .map(|(c, norm)| c.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / norm)
            .collect();
        y.iter()
            .enumerate()
            .map(|(i, &v)| {
                let fit: f64 = self.columns.iter().zip(&coef).map(|(c, k)| c[i] * k).sum();
                (v - fit) * (v - fit)
            })
            .sum()
    }
}

fn fluctuation(profile: &[f64], n: usize, order: usize) -> f64 {
    let basis = Basis::new(n, order);
    let windows = profile.len() / n;
    let offset = profile.len() - windows * n;
    let mut total = 0.0;
    for w in 0..windows {
        total += basis.residual_ss(&profile[w * n..(w + 1) * n]);
        total += basis.residual_ss(&profile[offset + w * n..offset + (w + 1) * n]);
    }
    (total / (2 * windows * n) as f64).sqrt()
}

/// DFA with an explicit fit range (inclusive, in samples).
pub fn dfa_with_range(series: &[f64], scales: &[usize], detrend_order: usize, fit_range: Option<(usize, usize)>) -> Result<DfaResult> {
    if !(1..=2).contains(&detrend_order) {
        return Err(Error::Domain(format!("detrend order must be 1 or 2, got {detrend_order}")));
    }
    let mut scales = scales.to_vec();
    scales.sort_unstable();
    scales.dedup();
    let max_scale = *scales.last().ok_or(Error::Insufficient { what: "DFA scales", have: 0, need: 2 })?;
    if series.len() < 4 * max_scale {
        return Err(Error::Insufficient {
            what: "samples for DFA (4 × largest scale)",
            have: series.len(),
            need: 4 * max_scale,
        });
    }
    if scales[0] < detrend_order + 2 {
        return Err(Error::Domain(format!(
            "smallest scale {} is below detrend order + 2",
            scales[0]
        )));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut acc = 0.0;
    let profile: Vec<f64> = series
        .iter()
        .map(|x| {
            acc += x - mean;
            acc
        })
        .collect();

    let fluctuations: Vec<f64> = scales
        .par_iter()
        .map(|&n| fluctuation(&profile, n, detrend_order))
        .collect();

    let (lo, hi) = fit_range.unwrap_or((scales[0], max_scale));
    let (lx, ly): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .zip(&fluctuations)
        .filter(|(&n, &f)| n >= lo && n <= hi && f > 0.0)
        .map(|(&n, &f)| ((n as f64).ln(), f.ln()))
        .unzip();
    if lx.len() < 2 {
        return Err(Error::Insufficient { what: "scales inside the DFA fit range", have: lx.len(), need: 2 });
    }
    let line = fit_line(&lx, &ly)?;
    Ok(DfaResult {
        alpha: line.slope,
        intercept: line.intercept,
        scales,
        fluctuations,
        fit_range: (lo, hi),
        detrend_order,
    })
}

pub fn dfa(series: &[f64], scales: &[usize], detrend_order: usize) -> Result<DfaResult> {
    dfa_with_range(series, scales, detrend_order, None)
}

/// `γ = 2(1 − α)`.
///
/// The relation is asserted only for long-range correlated records
/// (`0.5 < α < 1`); outside that range the value is still returned and a
/// warning logged.
pub fn gamma_from_alpha(alpha: f64) -> f64 {
    if !(alpha > 0.5 && alpha < 1.0) {
        tracing::warn!(alpha, "α outside (0.5, 1); γ = 2(1 − α) is outside its regime");
    }
    2.0 * (1.0 - alpha)
}

pub fn write_dfa_csv<W: Write>(out: W, result: &DfaResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scale", "F"])?;
    for (n, f) in result.scales.iter().zip(&result.fluctuations) {
        w.write_record([n.to_string(), f.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<dfa csv>", e))?;
    Ok(())
}
