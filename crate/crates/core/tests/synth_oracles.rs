use rustfft::{num_complex::Complex, FftPlanner};

use volint::synth::{generate_correlated, SynthKind, SynthSpec};

/// Log-log slope of the periodogram, averaged in log-spaced frequency
/// bands so each band carries equal weight.
fn periodogram_slope(x: &[f64]) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut lo = 1usize;
    while lo < n / 2 {
        let hi = ((lo as f64 * 1.25).ceil() as usize).max(lo + 1).min(n / 2);
        let band = &power[lo..hi];
        let mean_p = band.iter().sum::<f64>() / band.len() as f64;
        let mean_k = (lo..hi).map(|k| (k as f64).ln()).sum::<f64>() / band.len() as f64;
        xs.push(mean_k);
        ys.push(mean_p.ln());
        lo = hi;
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn spectral_slope_matches_target() {
    for (alpha, seed) in [(0.8, 3u64), (0.9, 4), (0.7, 5)] {
        let x = generate_correlated(&SynthSpec {
            length: 1 << 18,
            alpha_target: alpha,
            seed,
            kind: SynthKind::CorrelatedGaussian,
        })
        .unwrap();
        let beta = 2.0 * alpha - 1.0;
        let slope = periodogram_slope(&x);
        assert!((slope + beta).abs() <= 0.1, "alpha {alpha}: slope {slope}, expected {}", -beta);
    }
}

#[test]
fn white_noise_spectrum_is_flat() {
    let x = generate_correlated(&SynthSpec { length: 1 << 16, alpha_target: 0.5, seed: 8, kind: SynthKind::WhiteNoise }).unwrap();
    assert!(periodogram_slope(&x).abs() <= 0.1);
}
