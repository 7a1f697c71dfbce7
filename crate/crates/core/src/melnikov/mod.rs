//! Melnikov analysis of the driven, damped oscillator around its homoclinic
//! orbit: M(t₀) = −α⟨v_h²⟩ + A(Ω)cos(Ωt₀ + φ).
//!
//! A(Ω) is computed by direct quadrature of I = ∫v_h cos Ωτ and
//! J = ∫v_h sin Ωτ. An independent route takes the FFT of the orbit velocity,
//! builds the t₀-signal Re[F̄(Ω)e^{iΩt₀}] and reads its amplitude off the
//! Hilbert envelope; the two must agree.

mod hilbert;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conservative::HomoclinicOrbit;

pub use hilbert::{hilbert_envelope, interior};

/// Relative agreement required between the quadrature and Hilbert routes.
pub const CONSISTENCY_TOL: f64 = 1e-5;
/// Relative tolerance of the "threshold" verdict.
pub const THRESHOLD_TOL: f64 = 1e-12;
/// Zero padding factor applied before the discrete transform.
pub const PADDING: usize = 4;
/// Length and span (in forcing periods) of the t₀-signal fed to the
/// Hilbert envelope.
const ENVELOPE_SAMPLES: usize = 1024;
const ENVELOPE_PERIODS: f64 = 32.0;
const EDGE_TAPER: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MelnikovError {
    #[error("signal length {len} is not a power of two >= 8")]
    Length { len: usize },
    #[error("orbit grid is not uniform and centred on tau = 0 (sample {index})")]
    NonUniformGrid { index: usize },
    #[error("frequency {omega} must be positive and finite")]
    Frequency { omega: f64 },
    #[error("frequency grid must be positive and strictly ascending (index {index})")]
    FrequencyGrid { index: usize },
    #[error("alpha = {alpha} must be non-negative")]
    Alpha { alpha: f64 },
    #[error("amplitude routes disagree at Omega = {omega}: quadrature {quadrature:e}, Hilbert {hilbert:e}")]
    Inconsistent {
        omega: f64,
        quadrature: f64,
        hilbert: f64,
    },
}

/// Continuous-time Fourier transform F(Ω) = ∫v_h e^{−iΩτ}dτ sampled on the
/// uniform grid Ω_k = k·ΔΩ, k = 0..=M/2, of the zero-padded transform.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySpectrum {
    pub d_omega: f64,
    pub values: Vec<Complex64>,
}

impl VelocitySpectrum {
    pub fn omegas(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| k as f64 * self.d_omega).collect()
    }

    /// F(Ω) between grid points by 8-point Lagrange interpolation. Negative
    /// frequencies come from F(−Ω) = conj F(Ω).
    pub fn at(&self, omega: f64) -> Complex64 {
        const P: isize = 8;
        let n = self.values.len() as isize;
        let pos = omega / self.d_omega;
        let first = (pos.floor() as isize - P / 2 + 1).min(n - P);
        let sample = |k: isize| {
            if k < 0 {
                self.values[(-k) as usize].conj()
            } else {
                self.values[k as usize]
            }
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..P {
            let ki = first + i;
            let mut w = 1.0;
            for j in 0..P {
                if j != i {
                    let kj = (first + j) as f64;
                    w *= (pos - kj) / (ki as f64 - kj);
                }
            }
            acc += sample(ki) * w;
        }
        acc
    }
}

/// F(Ω) of the orbit velocity via a zero-padded FFT. Sample j of the orbit
/// sits at τ_j = (j − N/2)dτ, so the samples are rotated to put τ = 0 at
/// index 0 before transforming.
pub fn fourier_velocity(orbit: &HomoclinicOrbit) -> Result<VelocitySpectrum, MelnikovError> {
    check_grid(orbit)?;
    let n = orbit.len();
    let m = PADDING * n;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (j, &v) in orbit.v.iter().enumerate() {
        let idx = (j as isize - (n / 2) as isize).rem_euclid(m as isize) as usize;
        buf[idx] = Complex64::new(v, 0.0);
    }
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    buf.truncate(m / 2 + 1);
    for z in &mut buf {
        *z *= orbit.dtau;
    }
    Ok(VelocitySpectrum {
        d_omega: 2.0 * PI / (m as f64 * orbit.dtau),
        values: buf,
    })
}

fn check_grid(orbit: &HomoclinicOrbit) -> Result<(), MelnikovError> {
    let n = orbit.len();
    if n < 8 || !n.is_power_of_two() || orbit.v.len() != n {
        return Err(MelnikovError::Length { len: n });
    }
    let tol = 1e-9 * orbit.dtau;
    for (j, &t) in orbit.tau.iter().enumerate() {
        let expected = (j as f64 - (n / 2) as f64) * orbit.dtau;
        if (t - expected).abs() > tol * (1.0 + (j as f64 - (n / 2) as f64).abs()) {
            return Err(MelnikovError::NonUniformGrid { index: j });
        }
    }
    Ok(())
}

/// I = ∫v_h cos Ωτ dτ and J = ∫v_h sin Ωτ dτ by the rectangle rule on the
/// orbit grid, pairing ±τ samples so that an exactly odd v_h gives I = 0.
pub fn cos_sin_integrals(orbit: &HomoclinicOrbit, omega: f64) -> (f64, f64) {
    let n = orbit.len();
    let h = n / 2;
    let (v, dt) = (&orbit.v, orbit.dtau);
    let mut i_sum = v[h];
    let mut j_sum = 0.0;
    for k in 1..h {
        let (c, s) = ((omega * k as f64 * dt).cos(), (omega * k as f64 * dt).sin());
        i_sum += (v[h + k] + v[h - k]) * c;
        j_sum += (v[h + k] - v[h - k]) * s;
    }
    // Sample 0 sits at τ = −T.
    let t_edge = -(h as f64) * dt;
    i_sum += v[0] * (omega * t_edge).cos();
    j_sum += v[0] * (omega * t_edge).sin();
    (i_sum * dt, j_sum * dt)
}

/// Amplitude and phase such that ∫v_h(τ)cos(Ω(τ + t₀))dτ = A·cos(Ωt₀ + φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub amplitude: f64,
    pub phase: f64,
    /// Amplitude recovered by the FFT + Hilbert route.
    pub hilbert_amplitude: f64,
}

/// Orbit plus its cached velocity spectrum; evaluates A(Ω) repeatedly.
#[derive(Debug, Clone)]
pub struct MelnikovAnalysis<'a> {
    orbit: &'a HomoclinicOrbit,
    spectrum: VelocitySpectrum,
    abs_scale: f64,
}

impl<'a> MelnikovAnalysis<'a> {
    pub fn new(orbit: &'a HomoclinicOrbit) -> Result<Self, MelnikovError> {
        let spectrum = fourier_velocity(orbit)?;
        let abs_scale = orbit.v.iter().map(|v| v.abs()).sum::<f64>() * orbit.dtau;
        Ok(Self {
            orbit,
            spectrum,
            abs_scale,
        })
    }

    pub fn orbit(&self) -> &HomoclinicOrbit {
        self.orbit
    }

    pub fn spectrum(&self) -> &VelocitySpectrum {
        &self.spectrum
    }

    pub fn msv(&self) -> f64 {
        self.orbit.msv
    }

    /// A(Ω) by quadrature, cross-checked against the Hilbert envelope of the
    /// t₀-signal built from the FFT spectrum.
    pub fn amplitude(&self, omega: f64) -> Result<Amplitude, MelnikovError> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(MelnikovError::Frequency { omega });
        }
        let (i, j) = cos_sin_integrals(self.orbit, omega);
        let amplitude = i.hypot(j);
        let phase = j.atan2(i);
        let hilbert_amplitude = self.hilbert_amplitude(omega)?;
        let floor = 1e-3 * self.abs_scale;
        if (amplitude - hilbert_amplitude).abs() > CONSISTENCY_TOL * amplitude.max(floor) {
            return Err(MelnikovError::Inconsistent {
                omega,
                quadrature: amplitude,
                hilbert: hilbert_amplitude,
            });
        }
        Ok(Amplitude {
            amplitude,
            phase,
            hilbert_amplitude,
        })
    }

    /// Mean Hilbert envelope of s(t₀) = Re[conj F(Ω)·e^{iΩt₀}] over a whole
    /// number of forcing periods, edges excluded.
    pub fn hilbert_amplitude(&self, omega: f64) -> Result<f64, MelnikovError> {
        let f = self.spectrum.at(omega).conj();
        let span = ENVELOPE_PERIODS * 2.0 * PI / omega;
        let signal: Vec<f64> = (0..ENVELOPE_SAMPLES)
            .map(|k| {
                let t0 = k as f64 * span / ENVELOPE_SAMPLES as f64;
                (f * Complex64::from_polar(1.0, omega * t0)).re
            })
            .collect();
        let env = hilbert_envelope(&signal)?;
        let keep = interior(env.len(), EDGE_TAPER);
        let count = keep.len() as f64;
        Ok(env[keep].iter().sum::<f64>() / count)
    }

    pub fn threshold(&self, omega: f64) -> Result<f64, MelnikovError> {
        Ok(self.amplitude(omega)?.amplitude / self.orbit.msv)
    }
}

pub fn melnikov_amplitude(orbit: &HomoclinicOrbit, omega: f64) -> Result<Amplitude, MelnikovError> {
    MelnikovAnalysis::new(orbit)?.amplitude(omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// α⟨v_h²⟩ < A: M(t₀) has simple zeros.
    Chaotic,
    /// α⟨v_h²⟩ = A within tolerance: non-simple zeros.
    Threshold,
    /// α⟨v_h²⟩ > A: M(t₀) never vanishes.
    Regular,
}

impl Verdict {
    pub fn from_balance(damping_term: f64, amplitude: f64) -> Self {
        let scale = damping_term.abs().max(amplitude.abs());
        if (damping_term - amplitude).abs() <= THRESHOLD_TOL * scale {
            Verdict::Threshold
        } else if damping_term < amplitude {
            Verdict::Chaotic
        } else {
            Verdict::Regular
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelnikovFunction {
    pub t0: Vec<f64>,
    pub values: Vec<f64>,
    pub amplitude: f64,
    pub phase: f64,
    pub msv: f64,
    pub verdict: Verdict,
}

/// Samples M(t₀) = −α⟨v_h²⟩ + A cos(Ωt₀ + φ).
pub fn melnikov_function(
    orbit: &HomoclinicOrbit,
    alpha: f64,
    omega: f64,
    t0: &[f64],
) -> Result<MelnikovFunction, MelnikovError> {
    if !(alpha >= 0.0) {
        return Err(MelnikovError::Alpha { alpha });
    }
    let amp = melnikov_amplitude(orbit, omega)?;
    let offset = alpha * orbit.msv;
    Ok(MelnikovFunction {
        t0: t0.to_vec(),
        values: t0
            .iter()
            .map(|t| -offset + amp.amplitude * (omega * t + amp.phase).cos())
            .collect(),
        amplitude: amp.amplitude,
        phase: amp.phase,
        msv: orbit.msv,
        verdict: Verdict::from_balance(offset, amp.amplitude),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelnikovSpectrum {
    pub omegas: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub msv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub omegas: Vec<f64>,
    pub alpha_threshold: Vec<f64>,
}

fn check_omega_grid(omegas: &[f64]) -> Result<(), MelnikovError> {
    for (index, &w) in omegas.iter().enumerate() {
        if !(w > 0.0 && w.is_finite()) || (index > 0 && w <= omegas[index - 1]) {
            return Err(MelnikovError::FrequencyGrid { index });
        }
    }
    Ok(())
}

/// A(Ω) and φ(Ω) on `omegas`, evaluated on up to `workers` threads. Each
/// point is independent, so the result does not depend on `workers`.
pub fn melnikov_spectrum(
    orbit: &HomoclinicOrbit,
    omegas: &[f64],
    workers: usize,
) -> Result<MelnikovSpectrum, MelnikovError> {
    check_omega_grid(omegas)?;
    let analysis = MelnikovAnalysis::new(orbit)?;
    let workers = workers.clamp(1, omegas.len().max(1));
    let chunk = omegas.len().div_ceil(workers).max(1);
    let results: Vec<Result<Vec<Amplitude>, MelnikovError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = omegas
            .chunks(chunk)
            .map(|part| {
                let analysis = &analysis;
                scope.spawn(move || part.iter().map(|&w| analysis.amplitude(w)).collect())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("spectrum worker panicked"))
            .collect()
    });
    let mut amplitude = Vec::with_capacity(omegas.len());
    let mut phase = Vec::with_capacity(omegas.len());
    for part in results {
        for a in part? {
            amplitude.push(a.amplitude);
            phase.push(a.phase);
        }
    }
    Ok(MelnikovSpectrum {
        omegas: omegas.to_vec(),
        amplitude,
        phase,
        msv: orbit.msv,
    })
}

/// α_th(Ω) = A(Ω)/⟨v_h²⟩.
pub fn threshold_curve(
    orbit: &HomoclinicOrbit,
    omegas: &[f64],
    workers: usize,
) -> Result<ThresholdCurve, MelnikovError> {
    let spectrum = melnikov_spectrum(orbit, omegas, workers)?;
    Ok(ThresholdCurve {
        omegas: spectrum.omegas,
        alpha_threshold: spectrum.amplitude.iter().map(|a| a / spectrum.msv).collect(),
    })
}
