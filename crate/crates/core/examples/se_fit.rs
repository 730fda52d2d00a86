//! Stretched-exponential fitting on intervals with a known exponent.
//!
//! Draws 10^5 intervals from SE(γ₀), bins them on the scaled axis and
//! fits γ back. Run with `cargo run --release --example se_fit`.

use volint::intervals::scaled_pdf_from_samples;
use volint::scaling::{fit_se, se_params, SeFitOptions};
use volint::synth::sample_se_intervals;

fn main() -> volint::Result<()> {
    println!("{:>6} {:>8} {:>8} {:>8} {:>6}", "gamma0", "a", "c", "fit", "rms");
    for gamma0 in [0.3, 0.5, 0.7, 1.0, 1.5] {
        let (a, c) = se_params(gamma0)?;
        let samples = sample_se_intervals(gamma0, 100_000, 1)?;
        let pdf = scaled_pdf_from_samples(&samples, 20, 50)?;
        let fit = fit_se(&pdf, &SeFitOptions::default())?;
        println!("{gamma0:>6.2} {a:>8.4} {c:>8.4} {:>8.4} {:>6.3}", fit.gamma, fit.rms_error);
    }
    Ok(())
}
