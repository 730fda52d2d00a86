//! Return intervals between threshold exceedances and their scaled density.
//!
//! An event is a volatility value `>= q`; the return interval `τ` is the
//! index distance between consecutive events over the concatenated series.
//!
//! The density of the scaled interval `x = τ/⟨τ⟩` is estimated on
//! logarithmic bins. Integer intervals live on a lattice, so a bin's width is
//! the span of lattice points it contains rather than its nominal width;
//! otherwise narrow low-`x` bins would alternately hold zero or one lattice
//! point and the density would oscillate. Integer intervals are also shifted
//! to cell midpoints (`τ − g/2`, with `g` the lattice step) before scaling,
//! which keeps the scaled variable at unit mean while matching a
//! geometric interval law to the unit exponential.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::gcd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub symbol: String,
    pub q: f64,
    /// Each `τ >= 1`, in samples of the underlying series.
    pub intervals: Vec<u64>,
    pub mean_interval: f64,
    pub n_events: usize,
    /// Fewer than two events were found.
    pub insufficient: bool,
}

impl IntervalSet {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

pub fn extract_intervals(symbol: &str, values: &[f64], q: f64) -> Result<IntervalSet> {
    if q.is_nan() || q <= 0.0 {
        return Err(Error::Domain(format!("threshold q must be positive, got {q}")));
    }
    let mut intervals = Vec::new();
    let mut last: Option<usize> = None;
    let mut n_events = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v >= q {
            n_events += 1;
            if let Some(prev) = last {
                intervals.push((i - prev) as u64);
            }
            last = Some(i);
        }
    }
    let mean_interval = if intervals.is_empty() {
        f64::NAN
    } else {
        intervals.iter().sum::<u64>() as f64 / intervals.len() as f64
    };
    Ok(IntervalSet {
        symbol: symbol.to_string(),
        q,
        insufficient: n_events < 2,
        intervals,
        mean_interval,
        n_events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdfOptions {
    pub bins_per_decade: usize,
    pub min_intervals: usize,
    /// Shift integer intervals to cell midpoints before scaling.
    pub continuity_correction: bool,
}

impl Default for PdfOptions {
    fn default() -> Self {
        PdfOptions {
            bins_per_decade: 20,
            min_intervals: 50,
            continuity_correction: true,
        }
    }
}

/// Where the samples of one bin can fall, in scaled units. A model density
/// is compared with a bin through its average over this support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinSupport {
    /// Compare at the bin center only.
    Point,
    /// Continuous values in `[lo, hi)`.
    Interval { lo: f64, hi: f64 },
    /// `count` lattice points `first, first + step, …`.
    Lattice { first: f64, step: f64, count: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPdf {
    /// Strictly increasing, positive.
    pub bin_centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub bin_counts: Vec<u64>,
    /// Effective width of each occupied bin; `Σ density·width = 1`.
    pub bin_widths: Vec<f64>,
    /// One per bin, or empty to compare at the centers.
    #[serde(default)]
    pub supports: Vec<BinSupport>,
}

impl ScaledPdf {
    fn empty() -> Self {
        ScaledPdf {
            bin_centers: Vec::new(),
            densities: Vec::new(),
            bin_counts: Vec::new(),
            bin_widths: Vec::new(),
            supports: Vec::new(),
        }
    }

    /// Support of bin `i`; [`BinSupport::Point`] when none was recorded.
    pub fn support(&self, i: usize) -> BinSupport {
        self.supports.get(i).copied().unwrap_or(BinSupport::Point)
    }

    /// Average of `f` over the support of bin `i`.
    pub fn bin_average(&self, i: usize, f: impl Fn(f64) -> f64) -> f64 {
        const DIRECT: u64 = 64;
        const PANELS: usize = 16;
        let simpson = |lo: f64, hi: f64| {
            let h = (hi - lo) / PANELS as f64;
            let mut acc = f(lo) + f(hi);
            for j in 1..PANELS {
                acc += f(lo + h * j as f64) * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc / (3.0 * PANELS as f64)
        };
        match self.support(i) {
            BinSupport::Point => f(self.bin_centers[i]),
            BinSupport::Interval { lo, hi } => simpson(lo, hi),
            BinSupport::Lattice { first, step, count } if count <= DIRECT => {
                (0..count).map(|j| f(first + step * j as f64)).sum::<f64>() / count as f64
            }
            // dense lattice: the point average is the cell-midpoint rule
            BinSupport::Lattice { first, step, count } => {
                simpson(first - step / 2.0, first + step * (count as f64 - 0.5))
            }
        }
    }

    pub fn total_count(&self) -> u64 {
        self.bin_counts.iter().sum()
    }

    pub fn integral(&self) -> f64 {
        self.densities.iter().zip(&self.bin_widths).map(|(d, w)| d * w).sum()
    }
}

struct LogBins {
    lo: f64,
    per_decade: f64,
    n: usize,
}

impl LogBins {
    fn new(lo: f64, hi: f64, per_decade: usize) -> Self {
        let n = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
        LogBins {
            lo,
            per_decade: per_decade as f64,
            n,
        }
    }

    fn index(&self, x: f64) -> usize {
        let k = ((x / self.lo).log10() * self.per_decade).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n - 1)
        }
    }

    fn edges(&self, k: usize) -> (f64, f64) {
        let e = |j: usize| self.lo * 10f64.powf(j as f64 / self.per_decade);
        (e(k), e(k + 1))
    }
}

/// Scaled density of an integer interval set.
pub fn scaled_pdf(iset: &IntervalSet, opts: &PdfOptions) -> Result<ScaledPdf> {
    let n = iset.intervals.len();
    if n < opts.min_intervals.max(1) {
        return Err(Error::Insufficient {
            what: "intervals for density estimation",
            have: n,
            need: opts.min_intervals.max(1),
        });
    }
    if opts.bins_per_decade == 0 {
        return Err(Error::Config("bins_per_decade must be positive".into()));
    }
    let step_tau = iset.intervals.iter().fold(0u64, |g, &t| gcd(g, t)) as f64;
    let shift = if opts.continuity_correction { step_tau / 2.0 } else { 0.0 };
    let mean = iset.intervals.iter().sum::<u64>() as f64 / n as f64;
    let scale = mean - shift;
    let to_x = |tau: f64| (tau - shift) / scale;

    let tmin = *iset.intervals.iter().min().expect("non-empty");
    let tmax = *iset.intervals.iter().max().expect("non-empty");
    let bins = LogBins::new(to_x(tmin as f64), to_x(tmax as f64), opts.bins_per_decade);

    let mut counts = vec![0u64; bins.n];
    for &t in &iset.intervals {
        counts[bins.index(to_x(t as f64))] += 1;
    }
    // lattice points per bin and their mean position
    let mut lattice = vec![0u64; bins.n];
    let mut x_sum = vec![0.0; bins.n];
    let mut first = vec![f64::NAN; bins.n];
    let (kmin, kmax) = (tmin / step_tau as u64, tmax / step_tau as u64);
    for k in kmin..=kmax {
        let x = to_x(k as f64 * step_tau);
        let b = bins.index(x);
        if lattice[b] == 0 {
            first[b] = x;
        }
        lattice[b] += 1;
        x_sum[b] += x;
    }

    let cell = step_tau / scale;
    let mut pdf = ScaledPdf::empty();
    for b in 0..bins.n {
        if counts[b] == 0 {
            continue;
        }
        let width = lattice[b] as f64 * cell;
        pdf.bin_centers.push(x_sum[b] / lattice[b] as f64);
        pdf.densities.push(counts[b] as f64 / (n as f64 * width));
        pdf.bin_counts.push(counts[b]);
        pdf.bin_widths.push(width);
        pdf.supports.push(BinSupport::Lattice { first: first[b], step: cell, count: lattice[b] });
    }
    Ok(pdf)
}

/// Scaled density of continuous interval samples (no lattice).
pub fn scaled_pdf_from_samples(samples: &[f64], bins_per_decade: usize, min_intervals: usize) -> Result<ScaledPdf> {
    let n = samples.len();
    if n < min_intervals.max(1) {
        return Err(Error::Insufficient {
            what: "samples for density estimation",
            have: n,
            need: min_intervals.max(1),
        });
    }
    if bins_per_decade == 0 {
        return Err(Error::Config("bins_per_decade must be positive".into()));
    }
    if samples.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Domain("interval samples must be positive and finite".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) / mean;
    let hi = samples.iter().copied().fold(0.0, f64::max) / mean;
    if hi <= lo {
        return Err(Error::Degenerate("all continuous samples are equal; density is a point mass".into()));
    }
    let bins = LogBins::new(lo, hi, bins_per_decade);
    let mut counts = vec![0u64; bins.n];
    for &s in samples {
        counts[bins.index(s / mean)] += 1;
    }
    let mut pdf = ScaledPdf::empty();
    for (b, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (a, z) = bins.edges(b);
        pdf.bin_centers.push((a * z).sqrt());
        pdf.densities.push(c as f64 / (n as f64 * (z - a)));
        pdf.bin_counts.push(c);
        pdf.bin_widths.push(z - a);
        pdf.supports.push(BinSupport::Interval { lo: a, hi: z });
    }
    Ok(pdf)
}

pub fn write_intervals_csv<W: Write>(out: W, sets: &[IntervalSet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["symbol", "q", "tau"])?;
    for s in sets {
        for t in &s.intervals {
            w.write_record([s.symbol.as_str(), &s.q.to_string(), &t.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<interval csv>", e))?;
    Ok(())
}

pub fn write_pdf_csv<W: Write>(out: W, rows: &[(&str, f64, &ScaledPdf)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["symbol", "q", "x", "density", "count"])?;
    for (symbol, q, pdf) in rows {
        for ((x, d), c) in pdf.bin_centers.iter().zip(&pdf.densities).zip(&pdf.bin_counts) {
            w.write_record([*symbol, &q.to_string(), &x.to_string(), &d.to_string(), &c.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<pdf csv>", e))?;
    Ok(())
}
