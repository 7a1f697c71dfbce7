//! Oscillator parameters and their dimensionless reduction.
//!
//! The reduced system uses τ = ω₀·t and ξ = x/L₀, which turns the equation of
//! motion into
//!
//! ```text
//! ξ'' = (1 − ξ) − F(L₀ξ)/(κL₀) − ε·(1/Q)·ξ' + ε·f·cos(Ω·τ)
//! ```
//!
//! with f = F₀/(κL₀) and Ω = ω/ω₀.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    Invalid {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

impl ParamError {
    fn invalid(name: &'static str, value: f64, constraint: &'static str) -> Self {
        ParamError::Invalid {
            name,
            value,
            constraint,
        }
    }
}

/// Effective mass from spring constant and natural angular frequency.
pub fn derive_mass(kappa: f64, omega0: f64) -> Result<f64, ParamError> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(ParamError::invalid("kappa", kappa, "must be > 0"));
    }
    if !(omega0.is_finite() && omega0 > 0.0) {
        return Err(ParamError::invalid("omega0", omega0, "must be > 0"));
    }
    Ok(kappa / (omega0 * omega0))
}

/// Perturbation switch. `Off` is the conservative system, `On` adds damping
/// and drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Epsilon {
    Off,
    On,
}

impl Epsilon {
    pub fn value(self) -> f64 {
        match self {
            Epsilon::Off => 0.0,
            Epsilon::On => 1.0,
        }
    }

    pub fn is_on(self) -> bool {
        self == Epsilon::On
    }
}

impl TryFrom<u8> for Epsilon {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Epsilon::Off),
            1 => Ok(Epsilon::On),
            other => Err(format!("epsilon must be exactly 0 or 1, got {other}")),
        }
    }
}

impl From<Epsilon> for u8 {
    fn from(e: Epsilon) -> u8 {
        match e {
            Epsilon::Off => 0,
            Epsilon::On => 1,
        }
    }
}

/// Physical inputs in SI units. The mass is not an input; it always follows
/// from `kappa` and `omega0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalInputs {
    pub kappa: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
    pub omega0: f64,
    pub area: f64,
    pub d0: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "F0")]
    pub f0: f64,
    pub omega: f64,
    pub epsilon: Epsilon,
}

/// Validated parameters of the spring, plate and drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorParams {
    kappa: f64,
    #[serde(rename = "L0")]
    l0: f64,
    omega0: f64,
    mass: f64,
    area: f64,
    d0: f64,
    #[serde(rename = "Q")]
    q: f64,
    #[serde(rename = "F0")]
    f0: f64,
    omega: f64,
    epsilon: Epsilon,
}

fn positive(name: &'static str, v: f64) -> Result<f64, ParamError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ParamError::invalid(name, v, "must be finite and > 0"))
    }
}

impl OscillatorParams {
    pub fn new(p: PhysicalInputs) -> Result<Self, ParamError> {
        let kappa = positive("kappa", p.kappa)?;
        let l0 = positive("L0", p.l0)?;
        let omega0 = positive("omega0", p.omega0)?;
        let area = positive("area", p.area)?;
        let q = positive("Q", p.q)?;
        let omega = positive("omega", p.omega)?;
        if !(p.f0.is_finite() && p.f0 >= 0.0) {
            return Err(ParamError::invalid("F0", p.f0, "must be finite and >= 0"));
        }
        if !(p.d0.is_finite() && p.d0 >= 0.0 && p.d0 < l0) {
            return Err(ParamError::invalid("d0", p.d0, "must satisfy 0 <= d0 < L0"));
        }
        Ok(Self {
            kappa,
            l0,
            omega0,
            mass: derive_mass(kappa, omega0)?,
            area,
            d0: p.d0,
            q,
            f0: p.f0,
            omega,
            epsilon: p.epsilon,
        })
    }

    pub fn inputs(&self) -> PhysicalInputs {
        PhysicalInputs {
            kappa: self.kappa,
            l0: self.l0,
            omega0: self.omega0,
            area: self.area,
            d0: self.d0,
            q: self.q,
            f0: self.f0,
            omega: self.omega,
            epsilon: self.epsilon,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn l0(&self) -> f64 {
        self.l0
    }
    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn area(&self) -> f64 {
        self.area
    }
    pub fn d0(&self) -> f64 {
        self.d0
    }
    pub fn quality_factor(&self) -> f64 {
        self.q
    }
    pub fn drive_amplitude(&self) -> f64 {
        self.f0
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn epsilon(&self) -> Epsilon {
        self.epsilon
    }

    /// Friction constant γ = m·ω₀/Q.
    pub fn friction(&self) -> f64 {
        self.mass * self.omega0 / self.q
    }

    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn nondimensionalize(&self) -> DimensionlessParams {
        let omega_ratio = self.omega / self.omega0;
        let d0_hat = self.d0 / self.l0;
        if !self.epsilon.is_on() {
            return DimensionlessParams {
                f: None,
                omega_ratio,
                damping: None,
                alpha: None,
                d0_hat,
            };
        }
        let f = self.f0 / (self.kappa * self.l0);
        let alpha = if self.f0 > 0.0 {
            Some(self.friction() * self.omega0 * self.l0 / self.f0)
        } else {
            None
        };
        DimensionlessParams {
            f: Some(f),
            omega_ratio,
            damping: Some(1.0 / self.q),
            alpha,
            d0_hat,
        }
    }
}

/// Reduced parameter set. Fields that play no role in the current
/// configuration are `None`: drive and damping when ε = 0, and α when there is
/// no drive to divide by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    pub f: Option<f64>,
    #[serde(rename = "Omega")]
    pub omega_ratio: f64,
    pub damping: Option<f64>,
    pub alpha: Option<f64>,
    pub d0_hat: f64,
}

impl DimensionlessParams {
    /// Recovers (F₀, Q, ω, d₀) from the reduced set given the scales
    /// (κ, L₀, ω₀). Drive-related values are `None` when unused.
    pub fn redimensionalize(&self, kappa: f64, l0: f64, omega0: f64) -> Redimensionalized {
        Redimensionalized {
            f0: self.f.map(|f| f * kappa * l0),
            q: self.damping.map(|d| 1.0 / d),
            omega: self.omega_ratio * omega0,
            d0: self.d0_hat * l0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Redimensionalized {
    pub f0: Option<f64>,
    pub q: Option<f64>,
    pub omega: f64,
    pub d0: f64,
}
