//! Small numeric helpers shared by the estimators.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 normalization). Zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Fits a straight line through `(x, y)` pairs.
///
/// Fails when fewer than two points are given or when all `x` coincide.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return Err(Error::Insufficient {
            what: "points for a line fit",
            have: xs.len(),
            need: 2,
        });
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let scale = xs.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    if sxx <= 1e-24 * scale * scale * xs.len() as f64 {
        return Err(Error::Degenerate(
            "regressor has no spread; slope is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
