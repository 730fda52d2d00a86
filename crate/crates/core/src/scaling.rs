//! Stretched-exponential scaling function and moment multiscaling.
//!
//! The scaling function is `f(x) = c·exp(-(a·x)^γ)`, with `a` and `c`
//! fixed by requiring unit norm and unit mean, so `γ` is the only free
//! parameter. `γ` is fitted by least squares on `ln f` over bins with
//! `x >= x_min`.
//!
//! Multiscaling is measured through `μ_m = ⟨(τ/⟨τ⟩)^m⟩^{1/m}`, whose
//! power-law dependence on `⟨τ⟩` gives the exponent `δ`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};
use crate::intervals::{extract_intervals, scaled_pdf, IntervalSet, PdfOptions, ScaledPdf};
use crate::stats::fit_line;

/// Largest admissible stretching exponent.
pub const GAMMA_MAX: f64 = 2.0;

/// Scale `a` and normalization `c` for a given `γ`.
pub fn se_params(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0 && gamma <= GAMMA_MAX) {
        return Err(Error::Domain(format!("SE exponent must lie in (0, 2], got {gamma}")));
    }
    let g1 = gamma_fn(1.0 + 1.0 / gamma);
    let a = gamma_fn(2.0 / gamma) / (gamma * g1);
    Ok((a, a / g1))
}

/// `c·exp(-(a·x)^γ)` with constrained `(a, c)`.
pub fn se_density(gamma: f64, x: f64) -> Result<f64> {
    let (a, c) = se_params(gamma)?;
    Ok(c * (-(a * x).powf(gamma)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeFitOptions {
    /// Smallest scaled interval admitted to the fit.
    pub x_min: f64,
    /// Bins holding fewer intervals are left out of the fit.
    pub min_bin_count: u64,
    pub min_bins: usize,
    pub gamma_low: f64,
    pub gamma_high: f64,
    /// Search tolerance on `γ`.
    pub tolerance: f64,
    /// Fits with a larger relative RMS error are outliers.
    pub rms_threshold: f64,
}

impl Default for SeFitOptions {
    fn default() -> Self {
        SeFitOptions {
            x_min: 0.1,
            min_bin_count: 10,
            min_bins: 4,
            gamma_low: 0.05,
            gamma_high: GAMMA_MAX,
            tolerance: 1e-9,
            rms_threshold: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeFitResult {
    pub gamma: f64,
    pub a: f64,
    pub c: f64,
    /// `sqrt(mean(((fit − emp)/emp)^2))` over the fitted bins.
    pub rms_error: f64,
    pub n_bins: usize,
    /// The optimum lies strictly inside the search bracket.
    pub converged: bool,
    pub valid: bool,
}

/// Model density of bin `i`: `c·e^{−(ax)^γ}` averaged over the bin's support.
fn model_bin(pdf: &ScaledPdf, i: usize, gamma: f64, a: f64, c: f64) -> f64 {
    c * pdf.bin_average(i, |x| (-(a * x).powf(gamma)).exp())
}

fn log_residual_ss(gamma: f64, pdf: &ScaledPdf, bins: &[usize]) -> f64 {
    let (a, c) = se_params(gamma).expect("bracket lies in the domain");
    bins.iter()
        .map(|&i| {
            let r = pdf.densities[i].ln() - model_bin(pdf, i, gamma, a, c).ln();
            r * r
        })
        .sum()
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Fits `γ` to a scaled density.
///
/// A coarse scan over the bracket locates the basin; golden-section search
/// then refines it to `opts.tolerance`.
pub fn fit_se(pdf: &ScaledPdf, opts: &SeFitOptions) -> Result<SeFitResult> {
    let bins: Vec<usize> = (0..pdf.bin_centers.len())
        .filter(|&i| {
            pdf.bin_centers[i] >= opts.x_min && pdf.densities[i] > 0.0 && pdf.bin_counts[i] >= opts.min_bin_count
        })
        .collect();
    if bins.len() < opts.min_bins {
        return Err(Error::Insufficient {
            what: "usable density bins for the SE fit",
            have: bins.len(),
            need: opts.min_bins,
        });
    }
    if !(opts.gamma_low > 0.0 && opts.gamma_high <= GAMMA_MAX && opts.gamma_low < opts.gamma_high) {
        return Err(Error::Config(format!(
            "SE search bracket [{}, {}] must lie in (0, 2]",
            opts.gamma_low, opts.gamma_high
        )));
    }
    let objective = |g: f64| log_residual_ss(g, pdf, &bins);

    const SCAN: usize = 80;
    let span = opts.gamma_high - opts.gamma_low;
    let grid: Vec<f64> = (0..=SCAN).map(|i| opts.gamma_low + span * i as f64 / SCAN as f64).collect();
    let best = grid
        .iter()
        .map(|&g| objective(g))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(SCAN)];
    let gamma = golden_min(objective, lo, hi, opts.tolerance);

    let edge = 10.0 * opts.tolerance;
    let converged = objective(gamma).is_finite()
        && gamma - opts.gamma_low > edge
        && opts.gamma_high - gamma > edge;
    let (a, c) = se_params(gamma)?;
    let rms_error = (bins
        .iter()
        .map(|&i| {
            let d = pdf.densities[i];
            ((model_bin(pdf, i, gamma, a, c) - d) / d).powi(2)
        })
        .sum::<f64>()
        / bins.len() as f64)
        .sqrt();
    Ok(SeFitResult {
        gamma,
        a,
        c,
        rms_error,
        n_bins: bins.len(),
        converged,
        valid: converged && rms_error <= opts.rms_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Valid,
    Outlier,
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPoint {
    pub q: f64,
    pub mean_interval: Option<f64>,
    pub n_intervals: usize,
    pub status: PointStatus,
    pub fit: Option<SeFitResult>,
    /// Why the point is insufficient, when it is.
    pub note: Option<String>,
}

/// Fits `γ` for one interval set, turning failures into status flags.
pub fn gamma_point(iset: &IntervalSet, pdf_opts: &PdfOptions, fit_opts: &SeFitOptions) -> (GammaPoint, Option<ScaledPdf>) {
    let mut point = GammaPoint {
        q: iset.q,
        mean_interval: (!iset.is_empty()).then_some(iset.mean_interval),
        n_intervals: iset.len(),
        status: PointStatus::Insufficient,
        fit: None,
        note: None,
    };
    let pdf = match scaled_pdf(iset, pdf_opts) {
        Ok(p) => p,
        Err(e) => {
            point.note = Some(e.to_string());
            return (point, None);
        }
    };
    match fit_se(&pdf, fit_opts) {
        Ok(fit) => {
            point.status = if fit.valid { PointStatus::Valid } else { PointStatus::Outlier };
            point.fit = Some(fit);
        }
        Err(e) => point.note = Some(e.to_string()),
    }
    (point, Some(pdf))
}

/// `q = 1.00, 1.25, …, 6.00`.
pub fn default_q_grid() -> Vec<f64> {
    (0..=20).map(|i| 1.0 + 0.25 * i as f64).collect()
}

/// `γ` for every threshold in `q_grid`; failures are carried as flags.
pub fn gamma_curve(
    symbol: &str,
    values: &[f64],
    q_grid: &[f64],
    pdf_opts: &PdfOptions,
    fit_opts: &SeFitOptions,
) -> Result<Vec<GammaPoint>> {
    q_grid
        .iter()
        .map(|&q| {
            let iset = extract_intervals(symbol, values, q)?;
            Ok(gamma_point(&iset, pdf_opts, fit_opts).0)
        })
        .collect()
}

/// `μ_m = ⟨(τ/⟨τ⟩)^m⟩^{1/m}`.
pub fn moment(iset: &IntervalSet, m: f64) -> Result<f64> {
    moment_of(&iset.intervals, m)
}

pub fn moment_of(intervals: &[u64], m: f64) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::Insufficient { what: "intervals for a moment", have: 0, need: 1 });
    }
    if m.is_nan() || m <= 0.0 {
        return Err(Error::Domain(format!("moment order must be positive, got {m}")));
    }
    if m == 1.0 {
        // ⟨τ/⟨τ⟩⟩ is 1 by definition; summing would only add rounding
        return Ok(1.0);
    }
    let n = intervals.len() as f64;
    let mean = intervals.iter().sum::<u64>() as f64 / n;
    let s: f64 = intervals.iter().map(|&t| (t as f64 / mean).powf(m)).sum();
    Ok((s / n).powf(1.0 / m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeltaOptions {
    /// Points need `tau_low < ⟨τ⟩ <= tau_high`.
    pub tau_low: f64,
    pub tau_high: f64,
    pub min_points: usize,
    pub rms_threshold: f64,
    /// Interval sets smaller than this contribute no moment point.
    pub min_intervals: usize,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        DeltaOptions {
            tau_low: 10.0,
            tau_high: 100.0,
            min_points: 3,
            rms_threshold: 0.22,
            min_intervals: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaFit {
    pub delta: f64,
    /// `ln μ_m` at `⟨τ⟩ = 1`.
    pub intercept: f64,
    /// Relative RMS of the residuals on `μ_m`.
    pub rms_error: f64,
    pub n_points: usize,
    pub valid: bool,
}

/// Power-law fit `μ_m ∼ ⟨τ⟩^δ` over the admitted points.
pub fn fit_delta(points: &[(f64, f64)], opts: &DeltaOptions) -> Result<DeltaFit> {
    let admitted: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(tau, mu)| tau > opts.tau_low && tau <= opts.tau_high && mu > 0.0)
        .collect();
    if admitted.len() < opts.min_points {
        return Err(Error::Insufficient {
            what: "moment points inside the ⟨τ⟩ window",
            have: admitted.len(),
            need: opts.min_points,
        });
    }
    let lx: Vec<f64> = admitted.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = admitted.iter().map(|p| p.1.ln()).collect();
    let line = fit_line(&lx, &ly)?;
    let rms_error = (admitted
        .iter()
        .zip(&lx)
        .map(|(&(_, mu), &x)| ((line.eval(x).exp() - mu) / mu).powi(2))
        .sum::<f64>()
        / admitted.len() as f64)
        .sqrt();
    Ok(DeltaFit {
        delta: line.slope,
        intercept: line.intercept,
        rms_error,
        n_points: admitted.len(),
        valid: rms_error <= opts.rms_threshold,
    })
}

/// Orders used by default.
pub const DEFAULT_MOMENT_ORDERS: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentScalingResult {
    pub m: f64,
    /// `(⟨τ⟩, μ_m)` for every threshold with enough intervals.
    pub points: Vec<(f64, f64)>,
    pub status: PointStatus,
    pub fit: Option<DeltaFit>,
    pub note: Option<String>,
}

/// Moment points across thresholds and the resulting `δ`.
pub fn moment_scaling(sets: &[IntervalSet], m: f64, opts: &DeltaOptions) -> Result<MomentScalingResult> {
    let mut points = Vec::new();
    for s in sets.iter().filter(|s| s.len() >= opts.min_intervals.max(1)) {
        points.push((s.mean_interval, moment(s, m)?));
    }
    let mut out = MomentScalingResult {
        m,
        points,
        status: PointStatus::Insufficient,
        fit: None,
        note: None,
    };
    match fit_delta(&out.points, opts) {
        Ok(fit) => {
            out.status = if fit.valid { PointStatus::Valid } else { PointStatus::Outlier };
            out.fit = Some(fit);
        }
        Err(e) => out.note = Some(e.to_string()),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exact_pdf(gamma: f64) -> ScaledPdf {
        let xs: Vec<f64> = (0..60).map(|i| 0.05 * 1.12f64.powi(i)).collect();
        ScaledPdf {
            densities: xs.iter().map(|&x| se_density(gamma, x).unwrap()).collect(),
            bin_counts: vec![1000; xs.len()],
            bin_widths: vec![0.0; xs.len()],
            bin_centers: xs,
            supports: Vec::new(),
        }
    }

    #[test]
    fn exponential_case_params() {
        let (a, c) = se_params(1.0).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_and_two() {
        let (a, c) = se_params(0.5).unwrap();
        assert!((a - 6.0).abs() < 1e-9 && (c - 3.0).abs() < 1e-9);
        let (a, c) = se_params(2.0).unwrap();
        assert!((a - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((c - 2.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn params_domain() {
        assert!(se_params(0.0).is_err());
        assert!(se_params(-1.0).is_err());
        assert!(se_params(2.5).is_err());
    }

    #[test]
    fn zero_noise_recovery() {
        for g in [0.3, 0.5, 1.0, 1.7] {
            let fit = fit_se(&exact_pdf(g), &SeFitOptions::default()).unwrap();
            assert!((fit.gamma - g).abs() < 1e-6, "{g} -> {}", fit.gamma);
            assert!(fit.rms_error < 1e-6 && fit.valid);
        }
    }

    #[test]
    fn fit_needs_four_bins() {
        let mut pdf = exact_pdf(0.5);
        pdf.bin_centers.truncate(26); // 0.05·1.12^25 ≈ 0.85; 7 bins ≥ 0.1
        pdf.densities.truncate(26);
        pdf.bin_counts.truncate(26);
        pdf.bin_counts[..23].fill(5);
        assert!(matches!(
            fit_se(&pdf, &SeFitOptions::default()),
            Err(Error::Insufficient { have: 3, .. })
        ));
    }

    #[test]
    fn moment_examples() {
        assert_eq!(moment_of(&[5, 5, 5], 8.0).unwrap(), 1.0);
        assert!((moment_of(&[1, 2, 9, 40], 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(moment_of(&[1, 3], 2.0).unwrap(), 1.25f64.sqrt());
        assert!(moment_of(&[], 2.0).is_err());
        assert!(moment_of(&[1], 0.0).is_err());
    }

    #[test]
    fn exact_power_law_delta() {
        let pts: Vec<(f64, f64)> = [12.0, 20.0, 35.0, 60.0, 99.0].iter().map(|&t: &f64| (t, t.powf(0.1))).collect();
        let fit = fit_delta(&pts, &DeltaOptions::default()).unwrap();
        assert!((fit.delta - 0.1).abs() < 1e-9);
        assert!(fit.valid);
        let flat: Vec<(f64, f64)> = pts.iter().map(|&(t, _)| (t, 1.4)).collect();
        assert!(fit_delta(&flat, &DeltaOptions::default()).unwrap().delta.abs() < 1e-12);
    }

    #[test]
    fn delta_window_is_half_open() {
        let pts = vec![(10.0, 1.0), (100.0, 2.0), (50.0, 1.5), (101.0, 9.0), (20.0, 1.2)];
        let fit = fit_delta(&pts, &DeltaOptions::default()).unwrap();
        assert_eq!(fit.n_points, 3);
        assert!(fit_delta(&pts[..3], &DeltaOptions::default()).is_err());
    }

    #[test]
    fn default_grid_has_21_points() {
        let g = default_q_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[20], 6.0);
    }

    #[test]
    fn q_above_max_flagged() {
        let pts = gamma_curve("T", &[0.1, 3.0, 0.2, 2.0], &[10.0], &PdfOptions::default(), &SeFitOptions::default()).unwrap();
        assert_eq!(pts[0].status, PointStatus::Insufficient);
    }

    proptest! {
        #[test]
        fn delta_ignores_constant_factor(k in 0.01f64..100.0, d in -0.5f64..0.5) {
            let pts: Vec<(f64, f64)> = [11.0, 25.0, 47.0, 80.0].iter().map(|&t: &f64| (t, 1.3 * t.powf(d) * (1.0 + 0.01 * t.sin()))).collect();
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(t, m)| (t, k * m)).collect();
            let a = fit_delta(&pts, &DeltaOptions::default()).unwrap();
            let b = fit_delta(&scaled, &DeltaOptions::default()).unwrap();
            prop_assert!((a.delta - b.delta).abs() < 1e-9);
        }

        #[test]
        fn moment_one_is_unity(taus in prop::collection::vec(1u64..10_000, 1..100)) {
            prop_assert!((moment_of(&taus, 1.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
