//! Time integration of the driven oscillator with stiction detection.

pub mod integrator;
mod survival;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::{DomainError, Dynamics, State};
use integrator::{Accepted, Controls, DormandPrince, Flow, IntegrationError};

pub use survival::{classify_chaos, survival_map, ChaosClass, Classification, GridSpec, SurvivalMap};

/// Default stiction offset δ above d₀/L₀.
pub const DEFAULT_STICTION_DELTA: f64 = 1e-4;
/// Default survival horizon in periods.
pub const DEFAULT_MAX_PERIODS: f64 = 100.0;
/// Stiction times are localized to this fraction of a period.
const EVENT_TIME_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub xi: f64,
    pub v: f64,
    pub tau: f64,
}

impl SimState {
    pub fn new(xi: f64, v: f64) -> Self {
        Self { xi, v, tau: 0.0 }
    }

    fn at(tau: f64, y: State) -> Self {
        Self {
            xi: y[0],
            v: y[1],
            tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("initial state xi = {xi} is not finite or not above the domain bound {lower}")]
    InitialState { xi: f64, lower: f64 },
    #[error("stiff failure: step size {h:e} below minimum at tau = {tau}, state = {state:?}")]
    StiffFailure { tau: f64, state: State, h: f64 },
    #[error("step budget of {max_steps} exhausted at tau = {tau}")]
    TooManySteps { tau: f64, max_steps: u64 },
    #[error("invalid survival grid {0:?}: need finite ascending ranges and at least 2 points per axis")]
    Grid(GridSpec),
    #[error("classification needs a horizon of at least 50 periods, got {max_periods}")]
    ShortHorizon { max_periods: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Survived,
    Stiction,
    LeftDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub status: Status,
    pub stiction_tau: Option<f64>,
    /// Elapsed time in periods (forcing period when driven, natural period
    /// otherwise), at most the requested horizon.
    pub periods_elapsed: f64,
    pub final_state: SimState,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub max_periods: f64,
    pub controls: Controls,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_periods: DEFAULT_MAX_PERIODS,
            controls: Controls::default(),
        }
    }
}

/// (dξ/dτ, dv/dτ) at the given state.
pub fn rhs<D: Dynamics + ?Sized>(system: &D, state: &SimState) -> Result<(f64, f64), DomainError> {
    let [dx, dv] = system.derivatives(state.tau, &[state.xi, state.v])?;
    Ok((dx, dv))
}

/// Integrates from `initial` until stiction, exit from the model domain, or
/// `max_periods` periods after `initial.tau`.
pub fn integrate<D: Dynamics + ?Sized>(
    system: &D,
    initial: SimState,
    opts: &RunOptions,
) -> Result<TrajectoryOutcome, DynamicsError> {
    run(system, initial, opts, None)
}

/// Like [`integrate`], also returning the state sampled every `sample_dt`
/// (plus the final state).
pub fn integrate_path<D: Dynamics + ?Sized>(
    system: &D,
    initial: SimState,
    opts: &RunOptions,
    sample_dt: f64,
) -> Result<(TrajectoryOutcome, Vec<SimState>), DynamicsError> {
    let mut path = vec![initial];
    let outcome = run(system, initial, opts, Some((sample_dt, &mut path)))?;
    if path.last().is_none_or(|s| s.tau < outcome.final_state.tau) {
        path.push(outcome.final_state);
    }
    Ok((outcome, path))
}

fn run<D: Dynamics + ?Sized>(
    system: &D,
    initial: SimState,
    opts: &RunOptions,
    mut sampler: Option<(f64, &mut Vec<SimState>)>,
) -> Result<TrajectoryOutcome, DynamicsError> {
    let floor = system.absorbing_floor();
    let band = system.stiction_band();
    let period = system.period();
    let (dom_lo, _) = system.domain();
    let start = SimState::at(initial.tau, [initial.xi, initial.v]);
    if !(initial.xi > dom_lo && initial.xi.is_finite() && initial.v.is_finite()) {
        return Err(DynamicsError::InitialState {
            xi: initial.xi,
            lower: dom_lo,
        });
    }
    let elapsed = |tau: f64| (tau - initial.tau) / period;
    if initial.xi <= floor {
        return Ok(TrajectoryOutcome {
            status: Status::Stiction,
            stiction_tau: Some(initial.tau),
            periods_elapsed: 0.0,
            final_state: start,
            steps: 0,
        });
    }

    let t_end = initial.tau + opts.max_periods * period;
    let solver = DormandPrince::new(|t: f64, y: &State| system.derivatives(t, y), opts.controls);
    let mut hit: Option<(f64, State)> = None;
    let mut steps = 0u64;
    let result = solver.run(initial.tau, [initial.xi, initial.v], t_end, |s, acc| {
        steps += 1;
        let crossed = acc.y[0] <= floor;
        if let Some((dt, path)) = sampler.as_mut() {
            let limit = if crossed { f64::NEG_INFINITY } else { acc.t };
            let mut next = path.last().map_or(initial.tau, |p| p.tau) + *dt;
            while next <= limit {
                if let Ok(y) = s.substep(acc.t_prev, &acc.y_prev, &acc.k_prev, next - acc.t_prev) {
                    path.push(SimState::at(next, y));
                }
                next += *dt;
            }
        }
        if crossed {
            hit = Some(locate_floor(s, acc, floor, band, EVENT_TIME_TOL * period));
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    match result {
        Ok(end) => Ok(match hit {
            Some((t, y)) => TrajectoryOutcome {
                status: Status::Stiction,
                stiction_tau: Some(t),
                periods_elapsed: elapsed(t).min(opts.max_periods),
                final_state: SimState::at(t, y),
                steps,
            },
            None => TrajectoryOutcome {
                status: Status::Survived,
                stiction_tau: None,
                periods_elapsed: opts.max_periods,
                final_state: SimState::at(end.t, end.y),
                steps,
            },
        }),
        Err(IntegrationError::LeftDomain { t, state }) => Ok(TrajectoryOutcome {
            status: Status::LeftDomain,
            stiction_tau: None,
            periods_elapsed: elapsed(t).min(opts.max_periods),
            final_state: SimState::at(t, state),
            steps,
        }),
        Err(IntegrationError::StepUnderflow { t, state, h }) => {
            Err(DynamicsError::StiffFailure { tau: t, state, h })
        }
        Err(IntegrationError::TooManySteps { t, max_steps }) => {
            Err(DynamicsError::TooManySteps { tau: t, max_steps })
        }
    }
}

/// First time inside `acc` at which ξ ≤ floor, to time resolution `t_tol`.
/// Bisection continues past `t_tol` until the located state lies less than
/// `band` below the floor, so fast approaches still report a position near
/// the floor.
fn locate_floor<R>(s: &DormandPrince<R>, acc: &Accepted, floor: f64, band: f64, t_tol: f64) -> (f64, State)
where
    R: Fn(f64, &State) -> Result<State, DomainError>,
{
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut y_hi = acc.y;
    for _ in 0..200 {
        let fine_enough = (hi - lo) * acc.h <= t_tol;
        if fine_enough && y_hi[0] >= floor - band {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match s.substep(acc.t_prev, &acc.y_prev, &acc.k_prev, mid * acc.h) {
            Ok(ym) if ym[0] > floor => lo = mid,
            Ok(ym) => {
                hi = mid;
                y_hi = ym;
            }
            Err(_) => hi = mid,
        }
    }
    (acc.t_prev + hi * acc.h, y_hi)
}
