//! Analysis of the unperturbed (ε = 0) oscillator: equilibria, the potential
//! landscape, and the homoclinic orbit through the saddle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::integrator::{Controls, DormandPrince, Flow, IntegrationError};
use crate::force::{ForceError, ForceModel};
use crate::params::OscillatorParams;
use crate::system::{CasimirOscillator, ConservativeSystem, DomainError, State};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Force(#[from] ForceError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("force model not valid on ({lo:e}, {hi:e}] m")]
    ScanRange { lo: f64, hi: f64 },
    #[error("total force has {} roots at {roots:?}; at most two expected", roots.len())]
    MultipleRoots { roots: Vec<f64> },
    #[error("equilibria out of order: saddle {saddle:e} m must lie below center {center:e} m")]
    Misordered { saddle: f64, center: f64 },
    #[error("homoclinic orbit needs both a saddle and a center")]
    MissingEquilibria,
    #[error(
        "potential never returns to the saddle level right of the center (searched up to xi = {searched_to})"
    )]
    NoTurningPoint { searched_to: f64 },
    #[error("saddle at xi = {xi} is not hyperbolic (U'' = {curvature})")]
    DegenerateSaddle { xi: f64, curvature: f64 },
    #[error("homoclinic shooting failed: {reason} (tau = {tau}, state = {state:?}, distance to saddle = {distance:e})")]
    Convergence {
        reason: &'static str,
        tau: f64,
        state: State,
        distance: f64,
    },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

/// Equilibria of the conservative system, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub saddle_x: Option<f64>,
    pub center_x: Option<f64>,
    /// U(saddle) in joules, with U(x) = κ(x−L₀)²/2 + W(x).
    pub potential_at_saddle: Option<f64>,
}

impl EquilibriumSet {
    pub fn is_empty(&self) -> bool {
        self.saddle_x.is_none() && self.center_x.is_none()
    }

    pub fn saddle_xi(&self, l0: f64) -> Option<f64> {
        self.saddle_x.map(|x| x / l0)
    }

    pub fn center_xi(&self, l0: f64) -> Option<f64> {
        self.center_x.map(|x| x / l0)
    }
}

pub const DEFAULT_SCAN_POINTS: usize = 2048;

/// Scans g(x) = κ(L₀−x) − F(x) on `scan_points` points over
/// (max(d₀, x_min), L₀], refines every sign change by bisection and
/// classifies the roots by the sign of U''.
pub fn find_equilibria(
    params: &OscillatorParams,
    force: &dyn ForceModel,
    scan_points: usize,
) -> Result<EquilibriumSet, AnalysisError> {
    let (kappa, l0) = (params.kappa(), params.l0());
    let range = force.valid_range();
    let lo = params.d0().max(range.min).max(0.0);
    let hi = l0;
    if range.max < hi || lo >= hi {
        return Err(AnalysisError::ScanRange { lo, hi });
    }
    let g = |x: f64| -> Result<f64, ForceError> { Ok(kappa * (l0 - x) - force.force(x)?) };
    let n = scan_points.max(2);
    let grid: Vec<f64> = (1..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / n as f64
            }
        })
        .collect();
    let values = grid.iter().map(|&x| g(x)).collect::<Result<Vec<_>, _>>()?;

    let mut roots = Vec::new();
    for i in 0..n {
        if values[i] == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if i + 1 < n && values[i + 1] != 0.0 && values[i].signum() != values[i + 1].signum() {
            roots.push(bisect_root(&g, grid[i], grid[i + 1], values[i])?);
        }
    }
    if roots.len() > 2 {
        return Err(AnalysisError::MultipleRoots { roots });
    }

    let potential = |x: f64| -> Result<f64, ForceError> {
        Ok(0.5 * kappa * (x - l0) * (x - l0) + force.potential_primitive(x)?)
    };
    let mut set = EquilibriumSet::default();
    for &x in &roots {
        let curvature = kappa + force.force_gradient(x)?;
        if curvature < 0.0 {
            set.saddle_x = Some(x);
            set.potential_at_saddle = Some(potential(x)?);
        } else {
            set.center_x = Some(x);
        }
    }
    if let (Some(s), Some(c)) = (set.saddle_x, set.center_x) {
        if s >= c {
            return Err(AnalysisError::Misordered { saddle: s, center: c });
        }
    }
    Ok(set)
}

/// Bisection to full double precision; returns the bracket end with the
/// smaller residual.
fn bisect_root<G>(g: &G, mut a: f64, mut b: f64, mut ga: f64) -> Result<f64, ForceError>
where
    G: Fn(f64) -> Result<f64, ForceError>,
{
    let mut gb = g(b)?;
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
    }
    Ok(if ga.abs() <= gb.abs() { a } else { b })
}

/// Dimensionless potential U(ξ) = (ξ−1)²/2 + W(L₀ξ)/(κL₀²).
pub fn potential_energy(
    xi: f64,
    params: &OscillatorParams,
    force: &dyn ForceModel,
) -> Result<f64, AnalysisError> {
    let w = force.potential_primitive(params.l0() * xi)?;
    Ok(0.5 * (xi - 1.0) * (xi - 1.0) + w / (params.kappa() * params.l0() * params.l0()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomoclinicOptions {
    /// Integration stops once |ξ − ξ_saddle| drops below this value.
    pub tol_saddle: f64,
    /// Upper bound on the uniform resampling step.
    pub dt: f64,
    /// Give up if the saddle is not reached within this time.
    pub max_time: f64,
    pub controls: Controls,
}

impl Default for HomoclinicOptions {
    fn default() -> Self {
        Self {
            tol_saddle: 1e-6,
            dt: 1e-3,
            max_time: 1e3,
            controls: Controls::tight(),
        }
    }
}

/// Homoclinic orbit sampled on a uniform grid τ_j = (j − N/2)·dτ, j < N,
/// N = 2^k. The grid is periodic with period N·dτ: sample 0 stands for both
/// ends ±T, so it holds x(T) and the odd-symmetric mean velocity 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicOrbit {
    pub tau: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub dtau: f64,
    pub saddle_xi: f64,
    pub center_xi: f64,
    pub turning_xi: f64,
    /// ⟨v²⟩ = ∫ v_h² dτ.
    pub msv: f64,
    pub tol_saddle: f64,
    /// Unstable eigenvalue √(−U''(ξ_saddle)).
    pub saddle_rate: f64,
    /// Time at which the numerical integration handed over to the
    /// linearized saddle approach.
    pub integrated_until: f64,
    pub saddle_energy: f64,
    pub center_energy: f64,
}

impl HomoclinicOrbit {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Half-length T of the sampled window.
    pub fn half_span(&self) -> f64 {
        0.5 * self.dtau * self.len() as f64
    }

    /// Largest |E − U(saddle)| over the samples, relative to the well depth.
    pub fn max_energy_deviation(&self, system: &dyn ConservativeSystem) -> Result<f64, DomainError> {
        let depth = (self.saddle_energy - self.center_energy).abs();
        let mut worst = 0.0f64;
        for (x, v) in self.x.iter().zip(&self.v) {
            let e = system.energy(&[*x, *v])?;
            worst = worst.max((e - self.saddle_energy).abs() / depth);
        }
        Ok(worst)
    }

    /// Same orbit expressed in the time unit s·(old unit): τ' = τ/s and
    /// v' = s·v. Positions are unchanged.
    pub fn rescale_time(&self, s: f64) -> Self {
        Self {
            tau: self.tau.iter().map(|t| t / s).collect(),
            v: self.v.iter().map(|v| v * s).collect(),
            dtau: self.dtau / s,
            msv: self.msv * s,
            saddle_rate: self.saddle_rate * s,
            integrated_until: self.integrated_until / s,
            saddle_energy: self.saddle_energy * s * s,
            center_energy: self.center_energy * s * s,
            ..self.clone()
        }
    }

    /// Bounding box [(ξ_lo, ξ_hi), (v_lo, v_hi)] of the orbit.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let fold = |vals: &[f64]| {
            vals.iter()
                .fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], &v| {
                    [lo.min(v), hi.max(v)]
                })
        };
        let mut xb = fold(&self.x);
        xb[0] = xb[0].min(self.saddle_xi);
        (xb, fold(&self.v))
    }
}

/// Homoclinic orbit of the Casimir oscillator with the given equilibria.
pub fn compute_homoclinic(
    eq: &EquilibriumSet,
    params: &OscillatorParams,
    force: std::sync::Arc<dyn ForceModel>,
    opts: &HomoclinicOptions,
) -> Result<HomoclinicOrbit, AnalysisError> {
    let l0 = params.l0();
    let (saddle, center) = match (eq.saddle_xi(l0), eq.center_xi(l0)) {
        (Some(s), Some(c)) => (s, c),
        _ => return Err(AnalysisError::MissingEquilibria),
    };
    let system = CasimirOscillator::new(params, force, 0.0);
    homoclinic_orbit(&system, saddle, center, opts)
}

/// Shoots the homoclinic orbit of `system` from its far turning point to the
/// saddle, closes the approach with the saddle's linearization, mirrors it to
/// negative time and resamples onto a uniform power-of-two grid.
pub fn homoclinic_orbit(
    system: &dyn ConservativeSystem,
    saddle_xi: f64,
    center_xi: f64,
    opts: &HomoclinicOptions,
) -> Result<HomoclinicOrbit, AnalysisError> {
    let saddle_energy = system.potential(saddle_xi)?;
    let center_energy = system.potential(center_xi)?;
    let curvature = system.curvature(saddle_xi)?;
    if !(curvature < 0.0) {
        return Err(AnalysisError::DegenerateSaddle {
            xi: saddle_xi,
            curvature,
        });
    }
    let rate = (-curvature).sqrt();
    let turning = far_turning_point(system, saddle_xi, center_xi, saddle_energy)?;

    // Forward half: from (ξ_t, 0) towards the saddle.
    let mut samples: Vec<[f64; 4]> = Vec::new();
    let a0 = system.acceleration(turning)?;
    samples.push([0.0, turning, 0.0, a0]);
    let solver = DormandPrince::new(
        |_t: f64, y: &State| Ok([y[1], system.acceleration(y[0])?]),
        opts.controls,
    );
    let tol = opts.tol_saddle;
    let mut failure: Option<(&'static str, f64, State)> = None;
    let mut reached: Option<(f64, State)> = None;
    solver.run(0.0, [turning, 0.0], opts.max_time, |s, acc| {
        let [xi, v] = acc.y;
        if xi - saddle_xi < tol {
            let (t, y) = s.locate(acc, |y| y[0] - saddle_xi < tol, 1e-12);
            reached = Some((t, y));
            return Flow::Stop;
        }
        if v > 0.0 {
            failure = Some(("orbit turned back before reaching the saddle", acc.t, acc.y));
            return Flow::Stop;
        }
        let a = s.rhs(acc.t, &acc.y).map(|d| d[1]).unwrap_or(f64::NAN);
        samples.push([acc.t, xi, v, a]);
        Flow::Continue
    })?;
    if let Some((reason, tau, state)) = failure {
        return Err(AnalysisError::Convergence {
            reason,
            tau,
            state,
            distance: (state[0] - saddle_xi).abs(),
        });
    }
    let (t_hand, y_hand) = match reached {
        Some(r) => r,
        None => {
            let last = samples.last().copied().unwrap_or([0.0, turning, 0.0, 0.0]);
            return Err(AnalysisError::Convergence {
                reason: "maximum time exceeded",
                tau: last[0],
                state: [last[1], last[2]],
                distance: (last[1] - saddle_xi).abs(),
            });
        }
    };
    if t_hand > samples.last().map_or(0.0, |s| s[0]) {
        let a = system.acceleration(y_hand[0])?;
        samples.push([t_hand, y_hand[0], y_hand[1], a]);
    }

    // Linearized approach ξ − ξ_s = δ·e^{−λ(τ−τ_h)} until δ ≤ tol².
    let delta_hand = y_hand[0] - saddle_xi;
    let tail_floor = tol * tol;
    let tail_span = if delta_hand > tail_floor {
        (delta_hand / tail_floor).ln() / rate
    } else {
        0.0
    };
    let half_span = t_hand + tail_span;

    let mut n = 8usize;
    while 2.0 * half_span / n as f64 > opts.dt {
        n *= 2;
    }
    let dtau = 2.0 * half_span / n as f64;
    let half = n / 2;
    let mut tau = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut cursor = 0usize;
    for j in 0..=half {
        let t = j as f64 * dtau;
        let (xj, vj) = if t <= t_hand {
            while cursor + 2 < samples.len() && samples[cursor + 1][0] < t {
                cursor += 1;
            }
            hermite(&samples[cursor], &samples[(cursor + 1).min(samples.len() - 1)], t)
        } else {
            let decay = (-rate * (t - t_hand)).exp();
            (saddle_xi + delta_hand * decay, -rate * delta_hand * decay)
        };
        if j < half {
            tau[half + j] = t;
            x[half + j] = xj;
            v[half + j] = vj;
        }
        if j > 0 {
            tau[half - j] = -t;
            x[half - j] = xj;
            v[half - j] = -vj;
        }
    }
    v[0] = 0.0;
    let msv = v.iter().map(|u| u * u).sum::<f64>() * dtau;

    Ok(HomoclinicOrbit {
        tau,
        x,
        v,
        dtau,
        saddle_xi,
        center_xi,
        turning_xi: turning,
        msv,
        tol_saddle: tol,
        saddle_rate: rate,
        integrated_until: t_hand,
        saddle_energy,
        center_energy,
    })
}

fn hermite(a: &[f64; 4], b: &[f64; 4], t: f64) -> (f64, f64) {
    let h = b[0] - a[0];
    if h <= 0.0 {
        return (a[1], a[2]);
    }
    let s = (t - a[0]) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let x = h00 * a[1] + h01 * b[1] + h * (h10 * a[2] + h11 * b[2]);
    let v = h00 * a[2] + h01 * b[2] + h * (h10 * a[3] + h11 * b[3]);
    (x, v)
}

/// Solves U(ξ) = U(ξ_saddle) for ξ > ξ_center.
pub fn far_turning_point(
    system: &dyn ConservativeSystem,
    saddle_xi: f64,
    center_xi: f64,
    level: f64,
) -> Result<f64, AnalysisError> {
    let (_, dom_hi) = system.domain();
    let excess = |xi: f64| system.potential(xi).map(|u| u - level);
    let mut lo = center_xi;
    let mut step = 0.05 * (center_xi - saddle_xi).abs().max(1e-3);
    let hi = loop {
        let trial = lo + step;
        if trial > dom_hi {
            // Last chance: the domain edge itself.
            if dom_hi > lo && excess(dom_hi)? >= 0.0 {
                break dom_hi;
            }
            return Err(AnalysisError::NoTurningPoint {
                searched_to: dom_hi.min(trial),
            });
        }
        if excess(trial)? >= 0.0 {
            break trial;
        }
        lo = trial;
        step *= 2.0;
        if !step.is_finite() || trial > 1e6 {
            return Err(AnalysisError::NoTurningPoint { searched_to: trial });
        }
    };
    let (mut a, mut b) = (lo, hi);
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if excess(m)? < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let (ea, eb) = (excess(a)?.abs(), excess(b)?.abs());
    Ok(if ea < eb { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::{IdealCasimir, NoForce};
    use crate::params::{Epsilon, PhysicalInputs};
    use std::f64::consts::PI;
    use std::sync::Arc;

    pub(crate) fn section_two(kappa: f64) -> OscillatorParams {
        let omega0 = 2.0 * PI * 3.0e5;
        OscillatorParams::new(PhysicalInputs {
            kappa,
            l0: 1e-7,
            omega0,
            area: 1e-10,
            d0: 0.0,
            q: 500.0,
            f0: 1e-9,
            omega: 1.05 * omega0,
            epsilon: Epsilon::Off,
        })
        .unwrap()
    }

    /// Independent root finder: plain bisection of κ(L₀−x) − C/x⁴ on a
    /// hand-picked bracket.
    fn oracle_root(kappa: f64, lo: f64, hi: f64) -> f64 {
        let c = crate::force::casimir_coefficient(1e-10);
        let g = |x: f64| kappa * (1e-7 - x) - c / x.powi(4);
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(m).signum() == g(a).signum() {
                a = m
            } else {
                b = m
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn ideal_casimir_equilibria() {
        let p = section_two(0.5);
        let f = IdealCasimir::new(1e-10).unwrap();
        let eq = find_equilibria(&p, &f, DEFAULT_SCAN_POINTS).unwrap();
        let (s, c) = (eq.saddle_x.unwrap(), eq.center_x.unwrap());
        // Frozen from the bisection oracle: saddle 47.0817 nm, center 97.0715 nm.
        let (s_ref, c_ref) = (oracle_root(0.5, 40e-9, 60e-9), oracle_root(0.5, 90e-9, 99.9e-9));
        assert!(((s - s_ref) / s_ref).abs() < 1e-12, "{s:e} vs {s_ref:e}");
        assert!(((c - c_ref) / c_ref).abs() < 1e-12, "{c:e} vs {c_ref:e}");
        assert!((s - 47.0817e-9).abs() < 1e-13, "saddle {s:e}");
        assert!((c - 97.0715e-9).abs() < 1e-13, "center {c:e}");
        assert!(s < c && c <= p.l0());
        for x in [s, c] {
            let residual = p.kappa() * (p.l0() - x) - f.force(x).unwrap();
            assert!(
                residual.abs() < 1e-15 * p.kappa() * p.l0(),
                "residual {residual:e}"
            );
        }
        assert!(p.kappa() + f.force_gradient(s).unwrap() < 0.0);
        assert!(p.kappa() + f.force_gradient(c).unwrap() > 0.0);
        assert!(eq.potential_at_saddle.is_some());
    }

    #[test]
    fn spring_only_center_at_rest_length() {
        let p = section_two(0.5);
        let eq = find_equilibria(&p, &NoForce, DEFAULT_SCAN_POINTS).unwrap();
        assert_eq!(eq.center_x, Some(p.l0()));
        assert_eq!(eq.saddle_x, None);
    }

    #[test]
    fn weak_spring_has_no_equilibria() {
        let p = section_two(1e-4);
        let f = IdealCasimir::new(1e-10).unwrap();
        let eq = find_equilibria(&p, &f, DEFAULT_SCAN_POINTS).unwrap();
        assert!(eq.is_empty());
        assert!(matches!(
            compute_homoclinic(&eq, &p, Arc::new(f), &HomoclinicOptions::default()),
            Err(AnalysisError::MissingEquilibria)
        ));
    }

    #[test]
    fn potential_values() {
        let p = section_two(0.5);
        assert_eq!(potential_energy(1.0, &p, &NoForce).unwrap(), 0.0);
        assert!((potential_energy(0.9, &p, &NoForce).unwrap() - 0.005).abs() < 1e-15);
        let f = IdealCasimir::new(1e-10).unwrap();
        let eq = find_equilibria(&p, &f, DEFAULT_SCAN_POINTS).unwrap();
        let us = potential_energy(eq.saddle_xi(p.l0()).unwrap(), &p, &f).unwrap();
        let uc = potential_energy(eq.center_xi(p.l0()).unwrap(), &p, &f).unwrap();
        assert!(us > uc);
        let us_si = eq.potential_at_saddle.unwrap() / (p.kappa() * p.l0() * p.l0());
        assert!((us - us_si).abs() < 1e-14);
    }

    #[test]
    fn casimir_homoclinic_conserves_energy() {
        let p = section_two(0.5);
        let force: Arc<dyn ForceModel> = Arc::new(IdealCasimir::new(1e-10).unwrap());
        let eq = find_equilibria(&p, force.as_ref(), DEFAULT_SCAN_POINTS).unwrap();
        let orbit = compute_homoclinic(&eq, &p, force.clone(), &HomoclinicOptions::default()).unwrap();
        let system = CasimirOscillator::new(&p, force, 0.0);
        let dev = orbit.max_energy_deviation(&system).unwrap();
        assert!(dev < 1e-8, "energy deviation {dev:e}");
        assert!(orbit.len().is_power_of_two());
        assert!(orbit.dtau <= 1e-3);
        assert!(orbit.turning_xi > orbit.center_xi);
        assert!(orbit.msv > 0.0);
        let n = orbit.len();
        let h = n / 2;
        assert_eq!(orbit.tau[h], 0.0);
        assert_eq!(orbit.x[h], orbit.turning_xi);
        assert_eq!(orbit.v[h], 0.0);
        for j in 1..h {
            assert_eq!(orbit.x[h + j], orbit.x[h - j]);
            assert_eq!(orbit.v[h + j], -orbit.v[h - j]);
        }
        assert!((orbit.x[0] - orbit.saddle_xi).abs() < orbit.tol_saddle);
        let lo = orbit.x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = orbit.x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= orbit.saddle_xi && hi == orbit.turning_xi);
    }

    #[test]
    fn msv_stable_under_grid_refinement() {
        let p = section_two(0.5);
        let force: Arc<dyn ForceModel> = Arc::new(IdealCasimir::new(1e-10).unwrap());
        let eq = find_equilibria(&p, force.as_ref(), DEFAULT_SCAN_POINTS).unwrap();
        let coarse = compute_homoclinic(&eq, &p, force.clone(), &HomoclinicOptions::default()).unwrap();
        let fine_opts = HomoclinicOptions {
            dt: coarse.dtau / 2.0 * 1.000001,
            ..HomoclinicOptions::default()
        };
        let fine = compute_homoclinic(&eq, &p, force, &fine_opts).unwrap();
        assert_eq!(fine.len(), 2 * coarse.len());
        assert!(((fine.msv - coarse.msv) / fine.msv).abs() < 1e-7);
    }
}
