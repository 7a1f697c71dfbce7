//! Dormand–Prince 5(4) embedded Runge–Kutta pair with step-size control and
//! event localization by bisection on the step length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::{DomainError, State};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 5.0;
const MAX_SHRINK: f64 = 0.2;
const DOMAIN_SHRINK: f64 = 0.25;

/// Error-control settings for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Controls {
    pub rtol: f64,
    pub atol: f64,
    /// Steps shorter than this abort the integration.
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: u64,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-13,
            h_min: 1e-14,
            h_max: 0.5,
            max_steps: 50_000_000,
        }
    }
}

impl Controls {
    pub fn tight() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-15,
            h_max: 0.01,
            ..Self::default()
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow (h = {h:e}) at tau = {t}, state = {state:?}")]
    StepUnderflow { t: f64, state: State, h: f64 },
    #[error("trajectory left the model domain at tau = {t}, state = {state:?}")]
    LeftDomain { t: f64, state: State },
    #[error("step budget of {max_steps} exhausted at tau = {t}")]
    TooManySteps { t: f64, max_steps: u64 },
}

/// An accepted step from `(t_prev, y_prev)` to `(t, y)`.
#[derive(Debug, Clone, Copy)]
pub struct Accepted {
    pub t_prev: f64,
    pub y_prev: State,
    pub k_prev: State,
    pub h: f64,
    pub t: f64,
    pub y: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct RunEnd {
    pub t: f64,
    pub y: State,
    pub steps: u64,
    pub rejected: u64,
}

struct Trial {
    y: State,
    k_end: State,
    err: f64,
}

pub struct DormandPrince<R> {
    rhs: R,
    controls: Controls,
}

impl<R> DormandPrince<R>
where
    R: Fn(f64, &State) -> Result<State, DomainError>,
{
    pub fn new(rhs: R, controls: Controls) -> Self {
        Self { rhs, controls }
    }

    pub fn controls(&self) -> &Controls {
        &self.controls
    }

    pub fn rhs(&self, t: f64, y: &State) -> Result<State, DomainError> {
        (self.rhs)(t, y)
    }

    fn trial(&self, t: f64, y: &State, k1: &State, h: f64) -> Result<Trial, DomainError> {
        let f = &self.rhs;
        let at = |c: [f64; 2]| -> State { [y[0] + h * c[0], y[1] + h * c[1]] };
        let k2 = f(t + C2 * h, &at(lin(&[(A21, k1)])))?;
        let k3 = f(t + C3 * h, &at(lin(&[(A31, k1), (A32, &k2)])))?;
        let k4 = f(t + C4 * h, &at(lin(&[(A41, k1), (A42, &k2), (A43, &k3)])))?;
        let k5 = f(
            t + C5 * h,
            &at(lin(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)])),
        )?;
        let k6 = f(
            t + h,
            &at(lin(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)])),
        )?;
        let y_new = at(lin(&[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]));
        let k7 = f(t + h, &y_new)?;
        let e = lin(&[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
        let mut sum = 0.0;
        for i in 0..2 {
            let scale = self.controls.atol + self.controls.rtol * y[i].abs().max(y_new[i].abs());
            let r = h * e[i] / scale;
            sum += r * r;
        }
        Ok(Trial {
            y: y_new,
            k_end: k7,
            err: (sum / 2.0).sqrt(),
        })
    }

    /// Single step of length `h` from `(t, y)` without error control. Used to
    /// evaluate states inside an accepted step.
    pub fn substep(&self, t: f64, y: &State, k1: &State, h: f64) -> Result<State, DomainError> {
        if h == 0.0 {
            return Ok(*y);
        }
        self.trial(t, y, k1, h).map(|tr| tr.y)
    }

    fn initial_step(&self, t: f64, y: &State, k1: &State, span: f64) -> f64 {
        let c = &self.controls;
        let sc = |i: usize| c.atol + c.rtol * y[i].abs();
        let d0 = ((y[0] / sc(0)).powi(2) + (y[1] / sc(1)).powi(2)).sqrt() / 2f64.sqrt();
        let d1 = ((k1[0] / sc(0)).powi(2) + (k1[1] / sc(1)).powi(2)).sqrt() / 2f64.sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span.abs());
        let y1 = [y[0] + h0 * k1[0], y[1] + h0 * k1[1]];
        let h1 = match (self.rhs)(t + h0, &y1) {
            Ok(k2) => {
                let d2 = (((k2[0] - k1[0]) / sc(0)).powi(2) + ((k2[1] - k1[1]) / sc(1)).powi(2)).sqrt()
                    / 2f64.sqrt()
                    / h0;
                if d1.max(d2) <= 1e-15 {
                    (h0 * 1e-3).max(1e-6)
                } else {
                    (0.01 / d1.max(d2)).powf(0.2)
                }
            }
            Err(_) => h0 * 1e-2,
        };
        (100.0 * h0).min(h1).min(c.h_max).min(span.abs())
    }

    /// Integrates from `(t0, y0)` to `t_end`, calling `observer` after every
    /// accepted step. The observer may stop the run early.
    pub fn run<O>(&self, t0: f64, y0: State, t_end: f64, mut observer: O) -> Result<RunEnd, IntegrationError>
    where
        O: FnMut(&Self, &Accepted) -> Flow,
    {
        let c = self.controls;
        let mut t = t0;
        let mut y = y0;
        let mut k1 = (self.rhs)(t, &y).map_err(|_| IntegrationError::LeftDomain { t, state: y })?;
        let mut h = self.initial_step(t, &y, &k1, t_end - t);
        let (mut steps, mut rejected) = (0u64, 0u64);
        let mut last_domain_failure = false;
        while t < t_end {
            if steps >= c.max_steps {
                return Err(IntegrationError::TooManySteps {
                    t,
                    max_steps: c.max_steps,
                });
            }
            let mut last = false;
            if t + h >= t_end {
                h = t_end - t;
                last = true;
            }
            if h < c.h_min && !last {
                return Err(if last_domain_failure {
                    IntegrationError::LeftDomain { t, state: y }
                } else {
                    IntegrationError::StepUnderflow { t, state: y, h }
                });
            }
            match self.trial(t, &y, &k1, h) {
                Err(_) => {
                    rejected += 1;
                    last_domain_failure = true;
                    h *= DOMAIN_SHRINK;
                }
                Ok(tr) if tr.err <= 1.0 => {
                    last_domain_failure = false;
                    let t_new = if last { t_end } else { t + h };
                    let acc = Accepted {
                        t_prev: t,
                        y_prev: y,
                        k_prev: k1,
                        h,
                        t: t_new,
                        y: tr.y,
                    };
                    steps += 1;
                    t = t_new;
                    y = tr.y;
                    k1 = tr.k_end;
                    if observer(self, &acc) == Flow::Stop {
                        break;
                    }
                    let factor = if tr.err == 0.0 {
                        MAX_GROWTH
                    } else {
                        (SAFETY * tr.err.powf(-0.2)).clamp(MAX_SHRINK, MAX_GROWTH)
                    };
                    h = (h * factor).min(c.h_max);
                }
                Ok(tr) => {
                    rejected += 1;
                    last_domain_failure = false;
                    h *= (SAFETY * tr.err.powf(-0.2)).clamp(MAX_SHRINK, 1.0);
                }
            }
        }
        Ok(RunEnd {
            t,
            y,
            steps,
            rejected,
        })
    }

    /// Bisects on the step length of `acc` for the first point where `hit`
    /// holds, to time resolution `t_tol`. `hit` must be false at the start of
    /// the step and true at its end; sub-steps that leave the domain count as
    /// hits.
    pub fn locate<P>(&self, acc: &Accepted, hit: P, t_tol: f64) -> (f64, State)
    where
        P: Fn(&State) -> bool,
    {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut y_hi = acc.y;
        while (hi - lo) * acc.h > t_tol {
            let mid = 0.5 * (lo + hi);
            match self.substep(acc.t_prev, &acc.y_prev, &acc.k_prev, mid * acc.h) {
                Ok(ym) if !hit(&ym) => lo = mid,
                Ok(ym) => {
                    hi = mid;
                    y_hi = ym;
                }
                Err(_) => hi = mid,
            }
            if (hi - lo).abs() < f64::EPSILON {
                break;
            }
        }
        if hi < 1.0 && !hit(&y_hi) {
            // The last accepted midpoint was a domain failure; fall back to the
            // nearest evaluated hit.
            if let Ok(ym) = self.substep(acc.t_prev, &acc.y_prev, &acc.k_prev, hi * acc.h) {
                y_hi = ym;
            }
        }
        (acc.t_prev + hi * acc.h, y_hi)
    }
}

#[inline]
fn lin(terms: &[(f64, &State)]) -> State {
    let mut out = [0.0; 2];
    for (c, k) in terms {
        out[0] += c * k[0];
        out[1] += c * k[1];
    }
    out
}
