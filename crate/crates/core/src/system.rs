//! Reduced one-degree-of-freedom systems shared by the conservative analysis
//! and the dynamics engine.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::force::ForceModel;
use crate::params::OscillatorParams;

/// Phase-space point (ξ, v).
pub type State = [f64; 2];

/// Raised when a state leaves the region where the model can be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("position xi = {xi} outside the model domain")]
pub struct DomainError {
    pub xi: f64,
}

/// A conservative system ξ'' = −U'(ξ) in dimensionless units.
pub trait ConservativeSystem: Sync {
    fn potential(&self, xi: f64) -> Result<f64, DomainError>;

    /// −U'(ξ).
    fn acceleration(&self, xi: f64) -> Result<f64, DomainError>;

    /// U''(ξ).
    fn curvature(&self, xi: f64) -> Result<f64, DomainError>;

    /// Closed interval of admissible ξ.
    fn domain(&self) -> (f64, f64);

    fn energy(&self, state: &State) -> Result<f64, DomainError> {
        Ok(0.5 * state[1] * state[1] + self.potential(state[0])?)
    }
}

/// A (possibly driven, damped) planar system with an absorbing floor.
pub trait Dynamics: Sync {
    fn derivatives(&self, tau: f64, state: &State) -> Result<State, DomainError>;

    /// Trajectories with ξ at or below this value have reached stiction.
    fn absorbing_floor(&self) -> f64;

    /// Width below the floor within which a located stiction state must lie.
    fn stiction_band(&self) -> f64;

    /// Admissible ξ range; leaving it terminates a trajectory.
    fn domain(&self) -> (f64, f64);

    /// Unit in which elapsed time is reported: the forcing period 2π/Ω when
    /// driven, otherwise the natural period 2π.
    fn period(&self) -> f64;
}

/// The Casimir oscillator in reduced units τ = ω₀t, ξ = x/L₀.
#[derive(Debug, Clone)]
pub struct CasimirOscillator {
    force: Arc<dyn ForceModel>,
    l0: f64,
    inv_kl0: f64,
    inv_kl0_sq: f64,
    epsilon: f64,
    damping: f64,
    drive: f64,
    omega_ratio: f64,
    d0_hat: f64,
    stiction_delta: f64,
    domain: (f64, f64),
}

impl CasimirOscillator {
    /// `stiction_delta` is the dimensionless distance above d₀/L₀ at which a
    /// trajectory counts as stuck.
    pub fn new(params: &OscillatorParams, force: Arc<dyn ForceModel>, stiction_delta: f64) -> Self {
        let reduced = params.nondimensionalize();
        let (kappa, l0) = (params.kappa(), params.l0());
        let range = force.valid_range();
        Self {
            l0,
            inv_kl0: 1.0 / (kappa * l0),
            inv_kl0_sq: 1.0 / (kappa * l0 * l0),
            epsilon: params.epsilon().value(),
            damping: reduced.damping.unwrap_or(0.0),
            drive: reduced.f.unwrap_or(0.0),
            omega_ratio: reduced.omega_ratio,
            d0_hat: reduced.d0_hat,
            stiction_delta,
            domain: (range.min / l0, range.max / l0),
            force,
        }
    }

    pub fn force_model(&self) -> &Arc<dyn ForceModel> {
        &self.force
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn d0_hat(&self) -> f64 {
        self.d0_hat
    }

    pub fn omega_ratio(&self) -> f64 {
        self.omega_ratio
    }

    pub fn is_driven(&self) -> bool {
        self.epsilon != 0.0
    }

    pub fn stiction_delta(&self) -> f64 {
        self.stiction_delta
    }

    /// Same oscillator with a different stiction floor offset.
    pub fn with_stiction_delta(&self, delta: f64) -> Self {
        Self {
            stiction_delta: delta,
            ..self.clone()
        }
    }

    /// F(L₀ξ)/(κL₀).
    pub fn reduced_force(&self, xi: f64) -> Result<f64, DomainError> {
        self.force
            .force(self.l0 * xi)
            .map(|f| f * self.inv_kl0)
            .map_err(|_| DomainError { xi })
    }
}

impl ConservativeSystem for CasimirOscillator {
    fn potential(&self, xi: f64) -> Result<f64, DomainError> {
        let w = self
            .force
            .potential_primitive(self.l0 * xi)
            .map_err(|_| DomainError { xi })?;
        Ok(0.5 * (xi - 1.0) * (xi - 1.0) + w * self.inv_kl0_sq)
    }

    fn acceleration(&self, xi: f64) -> Result<f64, DomainError> {
        Ok((1.0 - xi) - self.reduced_force(xi)?)
    }

    fn curvature(&self, xi: f64) -> Result<f64, DomainError> {
        let grad = self
            .force
            .force_gradient(self.l0 * xi)
            .map_err(|_| DomainError { xi })?;
        Ok(1.0 + grad * self.l0 * self.inv_kl0)
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

impl Dynamics for CasimirOscillator {
    #[inline]
    fn derivatives(&self, tau: f64, state: &State) -> Result<State, DomainError> {
        let [xi, v] = *state;
        let mut accel = (1.0 - xi) - self.reduced_force(xi)?;
        if self.epsilon != 0.0 {
            accel += self.epsilon * (self.drive * (self.omega_ratio * tau).cos() - self.damping * v);
        }
        Ok([v, accel])
    }

    fn absorbing_floor(&self) -> f64 {
        self.d0_hat + self.stiction_delta
    }

    fn stiction_band(&self) -> f64 {
        self.stiction_delta
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn period(&self) -> f64 {
        if self.is_driven() {
            2.0 * PI / self.omega_ratio
        } else {
            2.0 * PI
        }
    }
}
