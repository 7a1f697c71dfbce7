//! Duffing oscillator ξ'' = ξ − ξ³ + ε(F cos Ωτ − δξ') as a reference
//! system with a closed-form homoclinic orbit and Melnikov threshold.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conservative::{homoclinic_orbit, AnalysisError, HomoclinicOptions, HomoclinicOrbit};
use crate::melnikov::{threshold_curve, MelnikovError};
use crate::system::{ConservativeSystem, DomainError, Dynamics, State};

/// Default absorbing floor: the bottom of the left well.
pub const DEFAULT_FLOOR: f64 = -1.0;

#[derive(Debug, Error)]
pub enum DuffingError {
    #[error("invalid Duffing parameter {name} = {value}: {constraint}")]
    Parameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("tau grid must be uniform, symmetric, of power-of-two length (sample {index})")]
    Grid { index: usize },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Melnikov(#[from] MelnikovError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    pub delta: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "Omega")]
    pub omega: f64,
}

impl DuffingParams {
    pub fn new(delta: f64, f: f64, omega: f64) -> Result<Self, DuffingError> {
        let bad = |name, value, constraint| {
            Err(DuffingError::Parameter {
                name,
                value,
                constraint,
            })
        };
        if !(delta >= 0.0 && delta.is_finite()) {
            return bad("delta", delta, "must be finite and >= 0");
        }
        if !(f >= 0.0 && f.is_finite()) {
            return bad("F", f, "must be finite and >= 0");
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return bad("Omega", omega, "must be finite and > 0");
        }
        Ok(Self { delta, f, omega })
    }
}

pub fn duffing_rhs(params: &DuffingParams, epsilon: f64, tau: f64, state: &State) -> State {
    let [x, v] = *state;
    let drive = params.f * (params.omega * tau).cos() - params.delta * v;
    [v, x - x * x * x + epsilon * drive]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuffingSystem {
    pub params: DuffingParams,
    pub epsilon: f64,
    pub floor: f64,
}

impl DuffingSystem {
    pub fn new(params: DuffingParams, epsilon: f64) -> Self {
        Self {
            params,
            epsilon,
            floor: DEFAULT_FLOOR,
        }
    }

    pub fn conservative() -> Self {
        Self::new(
            DuffingParams {
                delta: 0.0,
                f: 0.0,
                omega: 1.0,
            },
            0.0,
        )
    }
}

impl ConservativeSystem for DuffingSystem {
    fn potential(&self, xi: f64) -> Result<f64, DomainError> {
        let x2 = xi * xi;
        Ok(0.25 * x2 * x2 - 0.5 * x2)
    }

    fn acceleration(&self, xi: f64) -> Result<f64, DomainError> {
        Ok(xi - xi * xi * xi)
    }

    fn curvature(&self, xi: f64) -> Result<f64, DomainError> {
        Ok(3.0 * xi * xi - 1.0)
    }

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

impl Dynamics for DuffingSystem {
    #[inline]
    fn derivatives(&self, tau: f64, state: &State) -> Result<State, DomainError> {
        Ok(duffing_rhs(&self.params, self.epsilon, tau, state))
    }

    fn absorbing_floor(&self) -> f64 {
        self.floor
    }

    fn stiction_band(&self) -> f64 {
        1e-4
    }

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn period(&self) -> f64 {
        if self.epsilon != 0.0 {
            2.0 * PI / self.params.omega
        } else {
            2.0 * PI
        }
    }
}

/// Uniform grid τ_j = (j − n/2)·2T/n, j < n.
pub fn symmetric_grid(n: usize, half_span: f64) -> Vec<f64> {
    let d = 2.0 * half_span / n as f64;
    (0..n).map(|j| (j as f64 - (n / 2) as f64) * d).collect()
}

/// x_h = √2 sech τ, v_h = −√2 sech τ tanh τ on a grid from
/// [`symmetric_grid`]. As for numerically computed orbits, sample 0 stands
/// for both ends of the periodic window and carries v = 0.
pub fn duffing_homoclinic_exact(tau: &[f64]) -> Result<HomoclinicOrbit, DuffingError> {
    let n = tau.len();
    if n < 8 || !n.is_power_of_two() {
        return Err(DuffingError::Grid { index: 0 });
    }
    let dtau = tau[1] - tau[0];
    for (j, &t) in tau.iter().enumerate() {
        let k = j as f64 - (n / 2) as f64;
        if !(dtau > 0.0) || (t - k * dtau).abs() > 1e-9 * dtau * (1.0 + k.abs()) {
            return Err(DuffingError::Grid { index: j });
        }
    }
    let x: Vec<f64> = tau.iter().map(|t| SQRT_2 / t.cosh()).collect();
    let mut v: Vec<f64> = tau.iter().map(|t| -SQRT_2 * t.tanh() / t.cosh()).collect();
    v[0] = 0.0;
    let msv = v.iter().map(|u| u * u).sum::<f64>() * dtau;
    Ok(HomoclinicOrbit {
        tau: tau.to_vec(),
        x,
        v,
        dtau,
        saddle_xi: 0.0,
        center_xi: 1.0,
        turning_xi: SQRT_2,
        msv,
        tol_saddle: SQRT_2 / tau[0].abs().cosh(),
        saddle_rate: 1.0,
        integrated_until: -tau[0],
        saddle_energy: 0.0,
        center_energy: -0.25,
    })
}

/// Critical δ/F = (3√2/4)·π·Ω·sech(πΩ/2); chaos is predicted below it.
pub fn duffing_threshold_exact(omega: f64) -> f64 {
    0.75 * SQRT_2 * PI * omega / (0.5 * PI * omega).cosh()
}

/// Numerically computed Duffing homoclinic orbit.
pub fn duffing_homoclinic_numeric(opts: &HomoclinicOptions) -> Result<HomoclinicOrbit, DuffingError> {
    Ok(homoclinic_orbit(&DuffingSystem::conservative(), 0.0, 1.0, opts)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub omegas: Vec<f64>,
    pub alpha_numeric: Vec<f64>,
    pub alpha_exact: Vec<f64>,
}

/// Runs the numeric pipeline on the Duffing system and compares it with
/// the closed forms: orbit shape, ⟨v_h²⟩ and the threshold curve on 20
/// points of Ω ∈ [0.5, 2].
pub fn validate(opts: &HomoclinicOptions, workers: usize) -> Result<ValidationReport, DuffingError> {
    let orbit = duffing_homoclinic_numeric(opts)?;
    let orbit_err = orbit
        .tau
        .iter()
        .zip(&orbit.x)
        .map(|(t, x)| (x - SQRT_2 / t.cosh()).abs())
        .fold(0.0, f64::max);
    let velocity_err = orbit
        .tau
        .iter()
        .zip(&orbit.v)
        .skip(1)
        .map(|(t, v)| (v + SQRT_2 * t.tanh() / t.cosh()).abs())
        .fold(0.0, f64::max);
    let msv_err = (orbit.msv - 4.0 / 3.0).abs() / (4.0 / 3.0);

    let omegas: Vec<f64> = (0..20).map(|k| 0.5 + 1.5 * k as f64 / 19.0).collect();
    let curve = threshold_curve(&orbit, &omegas, workers)?;
    let exact: Vec<f64> = omegas.iter().map(|&w| duffing_threshold_exact(w)).collect();
    let curve_err = curve
        .alpha_threshold
        .iter()
        .zip(&exact)
        .map(|(a, e)| (a - e).abs() / e)
        .fold(0.0, f64::max);

    let checks = vec![
        Check::new("homoclinic_position_max_abs", orbit_err, 1e-6),
        Check::new("homoclinic_velocity_max_abs", velocity_err, 1e-6),
        Check::new("msv_rel", msv_err, 1e-6),
        Check::new("threshold_curve_max_rel", curve_err, 1e-2),
    ];
    Ok(ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
        omegas,
        alpha_numeric: curve.alpha_threshold,
        alpha_exact: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melnikov::melnikov_amplitude;
    use crate::quadrature::integrate;

    #[test]
    fn fixed_points_and_turning_point() {
        let p = DuffingParams::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(duffing_rhs(&p, 0.0, 0.3, &[0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(duffing_rhs(&p, 0.0, 0.3, &[1.0, 0.0]), [0.0, 0.0]);
        let d = duffing_rhs(&p, 0.0, 0.0, &[SQRT_2, 0.0]);
        assert_eq!(d[0], 0.0);
        assert!((d[1] + SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(DuffingParams::new(-0.1, 1.0, 1.0).is_err());
        assert!(DuffingParams::new(0.1, -1.0, 1.0).is_err());
        assert!(DuffingParams::new(0.1, 1.0, 0.0).is_err());
    }

    #[test]
    fn exact_orbit_properties() {
        let orbit = duffing_homoclinic_exact(&symmetric_grid(1 << 14, 40.0)).unwrap();
        let h = orbit.len() / 2;
        assert_eq!(orbit.x[h], SQRT_2);
        assert_eq!(orbit.v[h], 0.0);
        assert!((orbit.msv - 4.0 / 3.0).abs() < 1e-10);
        for &t in &orbit.tau {
            // ẍ_h from the closed form: √2 sech τ (tanh²τ − sech²τ).
            let (s, th) = (1.0 / t.cosh(), t.tanh());
            let acc = SQRT_2 * s * (th * th - s * s);
            let x = SQRT_2 * s;
            assert!((acc - x + x * x * x).abs() < 1e-10, "tau {t}");
        }
        assert!(duffing_homoclinic_exact(&[0.0, 1.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).is_err());
    }

    #[test]
    fn msv_matches_quadrature_oracle() {
        let oracle = integrate(
            &|t: f64| {
                let v = SQRT_2 * t.tanh() / t.cosh();
                v * v
            },
            -40.0,
            40.0,
            1e-14,
            1e-16,
        );
        assert!((oracle - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_closed_form_values() {
        assert!((duffing_threshold_exact(1.0) - 1.32799).abs() < 1e-5);
        assert!((duffing_threshold_exact(2.0) - 0.57491).abs() < 1e-5);
        assert!(duffing_threshold_exact(1e-9) < 1e-8);
        assert!(duffing_threshold_exact(40.0) < 1e-20);
        // Single interior maximum.
        let vals: Vec<f64> = (1..=400)
            .map(|k| duffing_threshold_exact(0.01 * k as f64))
            .collect();
        let peak = vals
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0;
        assert!(peak > 0 && peak < vals.len() - 1);
        assert!(vals[..=peak].windows(2).all(|w| w[1] > w[0]));
        assert!(vals[peak..].windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn exact_orbit_threshold_matches_closed_form() {
        let orbit = duffing_homoclinic_exact(&symmetric_grid(1 << 14, 40.0)).unwrap();
        for w in [0.5, 1.0, 2.0, 3.0] {
            let a = melnikov_amplitude(&orbit, w).unwrap().amplitude;
            let exact = duffing_threshold_exact(w);
            assert!((a / orbit.msv - exact).abs() < 1e-9 * exact, "Omega {w}");
        }
    }

    #[test]
    fn numeric_orbit_matches_closed_form() {
        let opts = HomoclinicOptions::default();
        let orbit = duffing_homoclinic_numeric(&opts).unwrap();
        for (t, x) in orbit.tau.iter().zip(&orbit.x) {
            assert!((x - SQRT_2 / t.cosh()).abs() < 1e-6, "tau {t}");
        }
        assert!((orbit.msv - 4.0 / 3.0).abs() < 1e-6 * 4.0 / 3.0);
        let dev = orbit
            .max_energy_deviation(&DuffingSystem::conservative())
            .unwrap();
        assert!(dev < 1e-8, "{dev:e}");
        for w in [0.2, 0.7, 1.0, 1.9, 3.0] {
            let a = melnikov_amplitude(&orbit, w).unwrap().amplitude;
            let exact = SQRT_2 * PI * w / (0.5 * PI * w).cosh();
            assert!((a - exact).abs() < 1e-6 * exact, "Omega {w}: {a} vs {exact}");
        }
    }

    #[test]
    fn validation_report_passes() {
        let report = validate(&HomoclinicOptions::default(), 2).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.omegas.len(), 20);
    }
}
