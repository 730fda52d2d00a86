//! Synthetic series with controlled correlation structure.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; Gaussian
//! variates use `rand_distr::StandardNormal`. Identical inputs give
//! bit-identical output.
//!
//! Long-range correlated Gaussian noise is built by Fourier filtering: white
//! noise is transformed, amplitude at frequency index `k` is multiplied by
//! `k^{-β/2}` with `β = 2α − 1`, the zero-frequency term is removed, and the
//! inverse transform is standardized.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::ingest::{MinuteSeries, SLOTS_PER_DAY};
use crate::scaling::se_params;

/// Name of the generator recorded in report metadata.
pub const RNG_NAME: &str = "rand_chacha::ChaCha8Rng::seed_from_u64";

pub const MIN_LENGTH: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SynthKind {
    CorrelatedGaussian,
    WhiteNoise,
    SeIntervals { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub length: usize,
    pub alpha_target: f64,
    pub seed: u64,
    pub kind: SynthKind,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn standardize(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter_mut().for_each(|v| *v -= mean);
    let sd = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    x.iter_mut().for_each(|v| *v /= sd);
    // one more centering pass absorbs rounding from the division
    let mean = x.iter().sum::<f64>() / n;
    x.iter_mut().for_each(|v| *v -= mean);
}

pub fn white_noise(length: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut x: Vec<f64> = (0..length).map(|_| StandardNormal.sample(&mut r)).collect();
    standardize(&mut x);
    x
}

/// Series for a correlated-Gaussian or white-noise spec.
pub fn generate_correlated(spec: &SynthSpec) -> Result<Vec<f64>> {
    if !spec.length.is_power_of_two() || spec.length < MIN_LENGTH {
        return Err(Error::Domain(format!(
            "synthetic length must be a power of two ≥ {MIN_LENGTH}, got {}",
            spec.length
        )));
    }
    match spec.kind {
        SynthKind::WhiteNoise => return Ok(white_noise(spec.length, spec.seed)),
        SynthKind::SeIntervals { .. } => {
            return Err(Error::Domain("SE interval specs are sampled with sample_se_intervals".into()))
        }
        SynthKind::CorrelatedGaussian => {}
    }
    if spec.alpha_target > 1.0 || spec.alpha_target.is_nan() {
        return Err(Error::Domain(format!("alpha_target must be ≤ 1, got {}", spec.alpha_target)));
    }
    if spec.alpha_target <= 0.5 {
        return Ok(white_noise(spec.length, spec.seed));
    }
    let n = spec.length;
    let beta = 2.0 * spec.alpha_target - 1.0;
    let mut r = rng(spec.seed);
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(&mut r), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        // mirror index keeps the spectrum Hermitian, so the output is real
        let f = k.min(n - k) as f64;
        *c *= f.powf(-beta / 2.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut x: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    standardize(&mut x);
    Ok(x)
}

/// Uniform random permutation; deterministic per seed.
pub fn shuffle(series: &[f64], seed: u64) -> Vec<f64> {
    let mut out = series.to_vec();
    out.shuffle(&mut rng(seed));
    out
}

/// CDF of the constrained SE density.
///
/// With `y = (a·x)^γ` the distribution of `y` is Gamma(1/γ, 1), so
/// `F(x) = P(1/γ, (a·x)^γ)`.
pub struct SeSampler {
    gamma: f64,
    a: f64,
    shape: f64,
    ln_gamma_shape: f64,
    /// `(u, y)` pairs tabulated on a grid in `y`, increasing.
    table: Vec<(f64, f64)>,
}

impl SeSampler {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.2..=2.0).contains(&gamma) {
            return Err(Error::Domain(format!("SE sampler needs γ in [0.2, 2], got {gamma}")));
        }
        let (a, _) = se_params(gamma)?;
        let shape = 1.0 / gamma;
        let table = (0..=2000)
            .map(|i| {
                let y = 10f64.powf(-8.0 + 10.5 * i as f64 / 2000.0);
                (gamma_lr(shape, y), y)
            })
            .collect();
        Ok(SeSampler {
            gamma,
            a,
            shape,
            ln_gamma_shape: ln_gamma(shape),
            table,
        })
    }

    fn density_y(&self, y: f64) -> f64 {
        ((self.shape - 1.0) * y.ln() - y - self.ln_gamma_shape).exp()
    }

    /// Solves `P(1/γ, y) = u` to relative precision 1e-12 in `y`.
    fn inverse_y(&self, u: f64) -> f64 {
        let i = self.table.partition_point(|&(p, _)| p < u);
        let (mut lo, mut hi) = match i {
            0 => (0.0, self.table[0].1),
            k if k >= self.table.len() => (self.table[self.table.len() - 1].1, f64::INFINITY),
            k => (self.table[k - 1].1, self.table[k].1),
        };
        let mut y = if hi.is_finite() { 0.5 * (lo + hi) } else { lo * 2.0 };
        // upper tail works on the complement to keep precision
        let upper = u > 0.5;
        let target = if upper { 1.0 - u } else { u };
        for _ in 0..200 {
            let g = if upper { target - gamma_ur(self.shape, y) } else { gamma_lr(self.shape, y) - target };
            if g > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let newton = y - g / self.density_y(y);
            let next = if newton > lo && newton < hi && newton.is_finite() {
                newton
            } else if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * lo.max(1e-300)
            };
            if (next - y).abs() <= 1e-12 * y.abs() {
                return next;
            }
            y = next;
        }
        y
    }

    /// The scaled interval `x` with `F(x) = u`.
    pub fn quantile(&self, u: f64) -> f64 {
        self.inverse_y(u).powf(1.0 / self.gamma) / self.a
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        gamma_lr(self.shape, (self.a * x).powf(self.gamma))
    }
}

/// `n` draws from the SE density by numeric CDF inversion.
pub fn sample_se_intervals(gamma: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 1000 {
        return Err(Error::Insufficient { what: "SE samples", have: n, need: 1000 });
    }
    let sampler = SeSampler::new(gamma)?;
    let mut r = rng(seed);
    Ok((0..n)
        .map(|_| {
            // open interval (0, 1)
            let u = loop {
                let u: f64 = r.random();
                if u > 0.0 {
                    break u;
                }
            };
            sampler.quantile(u)
        })
        .collect())
}

/// Dispatches on the spec kind; SE specs yield `length` interval samples.
pub fn generate(spec: &SynthSpec) -> Result<Vec<f64>> {
    match spec.kind {
        SynthKind::SeIntervals { gamma } => sample_se_intervals(gamma, spec.length, spec.seed),
        _ => generate_correlated(spec),
    }
}

/// Minute prices whose absolute returns carry long-range correlated
/// magnitudes and a U-shaped intraday profile.
///
/// Log-return at minute slot `s` of day `d` is `σ·u(s)·exp(κ·g_t)·ε_t` with
/// `g` Fourier-filtered noise, `ε` independent Gaussian signs, and `u` a
/// parabola that is 3× higher at the open and close than at midday.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub symbol: String,
    pub days: usize,
    pub alpha_target: f64,
    /// Log-volatility loading of the correlated component.
    pub vol_of_vol: f64,
    /// Minute return scale.
    pub sigma: f64,
    pub start_price: f64,
    pub seed: u64,
}

pub fn synthetic_market(spec: &MarketSpec, first_day: chrono::NaiveDate) -> Result<MinuteSeries> {
    let n_ret = spec.days * (SLOTS_PER_DAY - 1);
    let len = n_ret.next_power_of_two().max(MIN_LENGTH);
    let g = generate_correlated(&SynthSpec {
        length: len,
        alpha_target: spec.alpha_target,
        seed: spec.seed,
        kind: SynthKind::CorrelatedGaussian,
    })?;
    let mut r = rng(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut prices = Vec::with_capacity(spec.days);
    let mut days = Vec::with_capacity(spec.days);
    let mut price = spec.start_price;
    let mut t = 0usize;
    let mut date = first_day;
    for _ in 0..spec.days {
        let mut day = [0.0; SLOTS_PER_DAY];
        day[0] = price;
        for (s, slot) in day.iter_mut().enumerate().skip(1) {
            let u = (s as f64 - 1.0) / (SLOTS_PER_DAY - 2) as f64 - 0.5;
            let profile = 1.0 + 8.0 * u * u;
            let eps: f64 = StandardNormal.sample(&mut r);
            price *= (spec.sigma * profile * (spec.vol_of_vol * g[t]).exp() * eps).exp();
            *slot = price;
            t += 1;
        }
        prices.push(day);
        days.push(date);
        date = date.succ_opt().expect("date in range");
    }
    Ok(MinuteSeries {
        symbol: spec.symbol.clone(),
        days,
        prices,
        trades_per_day: None,
    })
}
