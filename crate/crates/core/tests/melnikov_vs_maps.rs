//! Survival-map blur against the Melnikov verdict, away from the threshold.

use std::f64::consts::PI;
use std::sync::Arc;

use casimir_chaos::conservative::{
    compute_homoclinic, find_equilibria, HomoclinicOptions, HomoclinicOrbit, DEFAULT_SCAN_POINTS,
};
use casimir_chaos::duffing::{
    duffing_homoclinic_exact, duffing_threshold_exact, symmetric_grid, DuffingParams, DuffingSystem,
};
use casimir_chaos::dynamics::{
    classify_chaos, survival_map, ChaosClass, GridSpec, RunOptions, DEFAULT_STICTION_DELTA,
};
use casimir_chaos::force::{ForceModel, IdealCasimir};
use casimir_chaos::melnikov::{melnikov_function, MelnikovAnalysis, Verdict};
use casimir_chaos::params::{Epsilon, OscillatorParams, PhysicalInputs};
use casimir_chaos::system::CasimirOscillator;

const F0: f64 = 2e-9;
const KAPPA: f64 = 0.5;
const L0: f64 = 100e-9;

fn params(epsilon: Epsilon, q: f64, omega_ratio: f64) -> OscillatorParams {
    let omega0 = 2.0 * PI * 300e3;
    OscillatorParams::new(PhysicalInputs {
        kappa: KAPPA,
        l0: L0,
        omega0,
        area: 1e-10,
        d0: 0.0,
        q,
        f0: F0,
        omega: omega_ratio * omega0,
        epsilon,
    })
    .unwrap()
}

fn ideal() -> Arc<dyn ForceModel> {
    Arc::new(IdealCasimir::new(1e-10).unwrap())
}

fn ideal_orbit() -> HomoclinicOrbit {
    let p = params(Epsilon::Off, 1.0, 1.0);
    let eq = find_equilibria(&p, ideal().as_ref(), DEFAULT_SCAN_POINTS).unwrap();
    compute_homoclinic(&eq, &p, ideal(), &HomoclinicOptions::default()).unwrap()
}

fn expected(verdict: Verdict) -> ChaosClass {
    match verdict {
        Verdict::Chaotic => ChaosClass::Blurred,
        _ => ChaosClass::Sharp,
    }
}

#[test]
fn ideal_threshold_is_finite_and_small_alpha_is_chaotic() {
    let orbit = ideal_orbit();
    let analysis = MelnikovAnalysis::new(&orbit).unwrap();
    let alpha_th = analysis.threshold(1.05).unwrap();
    assert!(alpha_th.is_finite() && alpha_th > 0.0);
    let t0 = symmetric_grid(64, 3.0);
    let m = melnikov_function(&orbit, 0.005, 1.05, &t0).unwrap();
    assert_eq!(m.verdict, Verdict::Chaotic);
    assert!(m.values.iter().any(|&v| v > 0.0) && m.values.iter().any(|&v| v < 0.0));
    let regular = melnikov_function(&orbit, 2.0 * alpha_th, 1.05, &t0).unwrap();
    assert_eq!(regular.verdict, Verdict::Regular);
    assert!(regular.values.iter().all(|&v| v < 0.0));
}

#[test]
fn casimir_matrix_agrees_with_melnikov() {
    let orbit = ideal_orbit();
    let analysis = MelnikovAnalysis::new(&orbit).unwrap();
    let f = F0 / (KAPPA * L0);
    let grid = GridSpec::around_orbit(&orbit, 1.3, 80, 80);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut compared = 0;
    for omega in [0.8, 1.05, 1.4] {
        let alpha_th = analysis.threshold(omega).unwrap();
        for ratio in [0.25, 0.95, 1.5] {
            let alpha = ratio * alpha_th;
            let verdict = Verdict::from_balance(alpha * orbit.msv, alpha_th * orbit.msv);
            if (ratio - 1.0f64).abs() < 0.1 {
                continue;
            }
            let system = CasimirOscillator::new(
                &params(Epsilon::On, 1.0 / (alpha * f), omega),
                ideal(),
                DEFAULT_STICTION_DELTA,
            );
            let map = survival_map(&system, &grid, &RunOptions::default(), workers).unwrap();
            let c = classify_chaos(&map).unwrap();
            assert_eq!(
                c.class,
                expected(verdict),
                "Omega {omega}, alpha {ratio} alpha_th: blur {:?}",
                c.blur_fraction
            );
            compared += 1;
        }
    }
    assert_eq!(compared, 6);
}

#[test]
fn duffing_maps_follow_closed_form_threshold() {
    let orbit = duffing_homoclinic_exact(&symmetric_grid(1 << 14, 40.0)).unwrap();
    let grid = GridSpec::around_orbit(&orbit, 1.3, 80, 80);
    let (forcing, omega) = (0.1, 1.0);
    let alpha_th = duffing_threshold_exact(omega);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for (ratio, class) in [(1.2, ChaosClass::Sharp), (0.5, ChaosClass::Blurred)] {
        let p = DuffingParams::new(ratio * alpha_th * forcing, forcing, omega).unwrap();
        let map = survival_map(
            &DuffingSystem::new(p, 1.0),
            &grid,
            &RunOptions::default(),
            workers,
        )
        .unwrap();
        let c = classify_chaos(&map).unwrap();
        assert_eq!(
            c.class, class,
            "delta/F = {ratio} alpha_th: blur {:?}",
            c.blur_fraction
        );
    }
}

#[test]
fn conservative_duffing_map_is_sharp() {
    let orbit = duffing_homoclinic_exact(&symmetric_grid(1 << 14, 40.0)).unwrap();
    let grid = GridSpec::around_orbit(&orbit, 1.3, 60, 60);
    let map = survival_map(&DuffingSystem::conservative(), &grid, &RunOptions::default(), 2).unwrap();
    let c = classify_chaos(&map).unwrap();
    // Orbits just outside the separatrix linger near the saddle before
    // reaching the far floor at -1, so a few shell cells are intermediate.
    assert_eq!(c.class, ChaosClass::Sharp, "blur {:?}", c.blur_fraction);
}
