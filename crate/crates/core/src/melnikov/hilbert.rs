//! Envelope of a real signal through its FFT-built analytic signal.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::MelnikovError;

/// |x + iH[x]| for a real signal of power-of-two length ≥ 8.
///
/// The analytic signal keeps the DC and Nyquist bins, doubles the positive
/// frequencies and zeroes the negative ones.
pub fn hilbert_envelope(signal: &[f64]) -> Result<Vec<f64>, MelnikovError> {
    let n = signal.len();
    if n < 8 || !n.is_power_of_two() {
        return Err(MelnikovError::Length { len: n });
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, z) in buf.iter_mut().enumerate() {
        if k == 0 || k == half {
            continue;
        }
        if k < half {
            *z *= 2.0;
        } else {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf.iter().map(|z| z.norm() * scale).collect())
}

/// Indices left after dropping `fraction` of the samples at each end.
pub fn interior(len: usize, fraction: f64) -> std::ops::Range<usize> {
    let cut = (len as f64 * fraction).ceil() as usize;
    cut.min(len / 2)..len.saturating_sub(cut).max(len / 2)
}
