//! Acceptance gate: one PASS/FAIL line per criterion. Lines go straight to
//! the process stdout so they show up even when the test passes.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use casimir_chaos::conservative::{
    compute_homoclinic, find_equilibria, potential_energy, HomoclinicOptions, HomoclinicOrbit,
    DEFAULT_SCAN_POINTS,
};
use casimir_chaos::duffing::duffing_homoclinic_numeric;
use casimir_chaos::dynamics::{
    classify_chaos, integrate_path, survival_map, ChaosClass, GridSpec, RunOptions, SimState, Status,
    SurvivalMap, DEFAULT_STICTION_DELTA,
};
use casimir_chaos::force::{casimir_coefficient, ForceModel, IdealCasimir, TabulatedForce};
use casimir_chaos::melnikov::{threshold_curve, MelnikovAnalysis, Verdict};
use casimir_chaos::params::{Epsilon, OscillatorParams, PhysicalInputs};
use casimir_chaos::system::{CasimirOscillator, ConservativeSystem};

const KAPPA: f64 = 0.5;
const L0: f64 = 100e-9;
const AREA: f64 = 1e-10;
const NM: f64 = 1e-9;
/// Drive amplitude used for the driven maps: f = F0/(κL0) = 0.04.
const F0: f64 = 2e-9;
const OMEGA: f64 = 1.05;
const GRID: usize = 300;
const INFLATE: f64 = 1.3;

struct Outcome {
    passed: bool,
    detail: String,
}

fn params(epsilon: Epsilon, q: f64, d0: f64) -> OscillatorParams {
    let omega0 = 2.0 * PI * 300e3;
    OscillatorParams::new(PhysicalInputs {
        kappa: KAPPA,
        l0: L0,
        omega0,
        area: AREA,
        d0,
        q,
        f0: F0,
        omega: OMEGA * omega0,
        epsilon,
    })
    .expect("valid parameters")
}

fn ideal() -> Arc<dyn ForceModel> {
    Arc::new(IdealCasimir::new(AREA).unwrap())
}

fn orbit_for(p: &OscillatorParams, force: Arc<dyn ForceModel>, opts: &HomoclinicOptions) -> HomoclinicOrbit {
    let eq = find_equilibria(p, force.as_ref(), DEFAULT_SCAN_POINTS).expect("equilibria");
    compute_homoclinic(&eq, p, force, opts).expect("homoclinic orbit")
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Radical inverse in base `b`; points k = 1.. of the (2, 3) Halton sequence.
fn halton(mut k: usize, b: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while k > 0 {
        f /= b as f64;
        r += f * (k % b) as f64;
        k /= b;
    }
    r
}

fn interface(map: &SurvivalMap) -> Vec<(usize, usize)> {
    let (nx, nv) = (map.grid.nx, map.grid.nv);
    let mut cells = Vec::new();
    for iv in 0..nv {
        for ix in 0..nx {
            let here = map.survived(iv, ix);
            let differs = (ix > 0 && map.survived(iv, ix - 1) != here)
                || (ix + 1 < nx && map.survived(iv, ix + 1) != here)
                || (iv > 0 && map.survived(iv - 1, ix) != here)
                || (iv + 1 < nv && map.survived(iv + 1, ix) != here);
            if differs {
                cells.push((iv, ix));
            }
        }
    }
    cells
}

fn changed_fraction(a: &SurvivalMap, b: &SurvivalMap) -> f64 {
    let alive = |m: &SurvivalMap, i: usize| m.values[i] >= m.max_periods;
    let changed = (0..a.values.len())
        .filter(|&i| alive(a, i) != alive(b, i))
        .count();
    changed as f64 / a.values.len() as f64
}

/// Criterion 1: Duffing end-to-end against the closed forms.
fn duffing_end_to_end() -> Outcome {
    let orbit = duffing_homoclinic_numeric(&HomoclinicOptions::default()).expect("Duffing orbit");
    let x_err = orbit
        .tau
        .iter()
        .zip(&orbit.x)
        .map(|(t, x)| (x - SQRT_2 / t.cosh()).abs())
        .fold(0.0, f64::max);
    let msv_err = (orbit.msv - 4.0 / 3.0).abs();
    let omegas: Vec<f64> = (0..20).map(|k| 0.5 + 1.5 * k as f64 / 19.0).collect();
    let curve = threshold_curve(&orbit, &omegas, workers()).expect("threshold curve");
    let alpha_err = omegas
        .iter()
        .zip(&curve.alpha_threshold)
        .map(|(&w, &a)| rel(a, 0.75 * SQRT_2 * PI * w / (PI * w / 2.0).cosh()))
        .fold(0.0, f64::max);
    Outcome {
        passed: alpha_err <= 1e-2 && x_err <= 1e-6 && msv_err <= 1e-6,
        detail: format!(
            "max rel alpha_th error {alpha_err:.2e} (<= 1e-2), max |x_h - sqrt2 sech| {x_err:.2e} (<= 1e-6), |msv - 4/3| {msv_err:.2e} (<= 1e-6)"
        ),
    }
}

/// Criterion 2: Conservative basin: the map boundary follows the homoclinic contour.
fn conservative_basin() -> (Outcome, SurvivalMap) {
    let p = params(Epsilon::Off, 1.0, 0.0);
    let force = ideal();
    let orbit = orbit_for(&p, force.clone(), &HomoclinicOptions::default());
    let system = CasimirOscillator::new(&p, force.clone(), DEFAULT_STICTION_DELTA);
    let grid = GridSpec::around_orbit(&orbit, INFLATE, GRID, GRID);
    let map = survival_map(&system, &grid, &RunOptions::default(), workers()).expect("map");

    let saddle_energy = potential_energy(orbit.saddle_xi, &p, force.as_ref()).unwrap();
    let (xs, vs) = (grid.xs(), grid.vs());
    let inside: Vec<Vec<bool>> = vs
        .iter()
        .map(|&v| {
            xs.iter()
                .map(|&x| {
                    x > orbit.saddle_xi
                        && 0.5 * v * v + potential_energy(x, &p, force.as_ref()).unwrap() < saddle_energy
                })
                .collect()
        })
        .collect();

    let boundary = interface(&map);
    let near_contour = boundary
        .iter()
        .filter(|&&(iv, ix)| {
            let here = inside[iv][ix];
            (iv.saturating_sub(1)..=(iv + 1).min(GRID - 1))
                .any(|k| (ix.saturating_sub(1)..=(ix + 1).min(GRID - 1)).any(|j| inside[k][j] != here))
        })
        .count();
    let fraction = near_contour as f64 / boundary.len() as f64;
    let stuck_inside = (0..GRID)
        .flat_map(|iv| (0..GRID).map(move |ix| (iv, ix)))
        .filter(|&(iv, ix)| inside[iv][ix] && !map.survived(iv, ix))
        .count();
    (
        Outcome {
            passed: fraction >= 0.99 && stuck_inside == 0 && !boundary.is_empty(),
            detail: format!(
                "{near_contour}/{} boundary cells within one cell of the homoclinic contour ({:.4}%, >= 99%), {stuck_inside} inside cells stuck (== 0), {} failed cells",
                boundary.len(),
                100.0 * fraction,
                map.warnings
            ),
        },
        map,
    )
}

/// Criterion 3: Maps above and below the Melnikov threshold classify as predicted.
fn melnikov_consistency() -> Outcome {
    let orbit = orbit_for(
        &params(Epsilon::Off, 1.0, 0.0),
        ideal(),
        &HomoclinicOptions::default(),
    );
    let amp = MelnikovAnalysis::new(&orbit)
        .unwrap()
        .amplitude(OMEGA)
        .unwrap()
        .amplitude;
    let alpha_th = amp / orbit.msv;
    let f = F0 / (KAPPA * L0);
    let grid = GridSpec::around_orbit(&orbit, INFLATE, GRID, GRID);
    let mut parts = vec![format!("alpha_th(1.05) = {alpha_th:.6}")];
    let mut passed = alpha_th.is_finite() && alpha_th > 0.0;
    for (ratio, expect) in [(1.5, ChaosClass::Sharp), (0.25, ChaosClass::Blurred)] {
        let alpha = ratio * alpha_th;
        let p = params(Epsilon::On, 1.0 / (alpha * f), 0.0);
        let system = CasimirOscillator::new(&p, ideal(), DEFAULT_STICTION_DELTA);
        let map = survival_map(&system, &grid, &RunOptions::default(), workers()).expect("map");
        let c = classify_chaos(&map).expect("classification");
        let blur = c.blur_fraction.unwrap_or(f64::NAN);
        let verdict = Verdict::from_balance(alpha * orbit.msv, amp);
        let ok = match expect {
            ChaosClass::Sharp => c.class == ChaosClass::Sharp && blur < 0.005 && verdict == Verdict::Regular,
            _ => c.class == ChaosClass::Blurred && blur >= 0.05 && verdict == Verdict::Chaotic,
        };
        passed &= ok;
        parts.push(format!(
            "alpha = {ratio} alpha_th: {:?}, blur {:.3}% ({}), Melnikov {:?}",
            c.class,
            100.0 * blur,
            if expect == ChaosClass::Sharp {
                "< 0.5%"
            } else {
                ">= 5%"
            },
            verdict
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

/// Samples F(x) on `n` log-spaced points of [lo, hi].
fn synthetic_table(lo: f64, hi: f64, d0: f64, force: impl Fn(f64) -> f64, name: &str) -> TabulatedForce {
    let n = 400;
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            (x, force(x))
        })
        .collect();
    TabulatedForce::from_samples(&samples, d0, name).expect("table")
}

/// Criterion 4: A stronger force with d0 > 0 yields a higher threshold than the flat
/// ideal table.
fn rough_versus_flat() -> Outcome {
    let c = casimir_coefficient(AREA);
    let opts = HomoclinicOptions::default();
    let flat: Arc<dyn ForceModel> = Arc::new(synthetic_table(
        2.0 * NM,
        300.0 * NM,
        0.0,
        |x| c / x.powi(4),
        "flat",
    ));
    let flat_p = params(Epsilon::Off, 1.0, 0.0);
    let flat_orbit = orbit_for(&flat_p, flat.clone(), &opts);
    let threshold = |o: &HomoclinicOrbit| MelnikovAnalysis::new(o).unwrap().threshold(OMEGA).unwrap();
    let flat_alpha = threshold(&flat_orbit);

    let mut passed = true;
    let mut parts = vec![format!("flat alpha_th {flat_alpha:.6}")];
    type Law = Box<dyn Fn(f64) -> f64>;
    let roughs: [(&str, f64, Law); 2] = [
        (
            "1.5 C/x^4, d0 = 20 nm",
            20.0 * NM,
            Box::new(move |x: f64| 1.5 * c / x.powi(4)),
        ),
        (
            "1.5 C/(x-d0)^4, d0 = 10 nm",
            10.0 * NM,
            Box::new(move |x: f64| 1.5 * c / (x - 10.0 * NM).powi(4)),
        ),
    ];
    for (label, d0, law) in roughs {
        let rough: Arc<dyn ForceModel> = Arc::new(synthetic_table(d0 + 2.0 * NM, 300.0 * NM, d0, law, label));
        let p = params(Epsilon::Off, 1.0, d0);
        let orbit = orbit_for(&p, rough.clone(), &opts);
        // Precondition: rough > flat over both homoclinic ranges.
        let lo = orbit.saddle_xi.min(flat_orbit.saddle_xi) * L0;
        let hi = orbit.turning_xi.max(flat_orbit.turning_xi) * L0;
        let dominates = (0..=1000).all(|k| {
            let x = lo + (hi - lo) * k as f64 / 1000.0;
            rough.force(x).unwrap() > flat.force(x).unwrap()
        });
        let alpha = threshold(&orbit);
        passed &= dominates && alpha > flat_alpha;
        parts.push(format!(
            "{label}: alpha_th {alpha:.6} {} flat (rough > flat on homoclinic range: {dominates})",
            if alpha > flat_alpha { ">" } else { "<=" }
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

/// Criterion 5: Numerical hygiene.
fn hygiene(conservative_map: &SurvivalMap) -> Outcome {
    let p = params(Epsilon::Off, 1.0, 0.0);
    let force = ideal();
    let orbit = orbit_for(&p, force.clone(), &HomoclinicOptions::default());
    let system = CasimirOscillator::new(&p, force.clone(), DEFAULT_STICTION_DELTA);
    let mut parts = Vec::new();
    let mut passed = true;

    // Energy drift over 100 natural periods for 1000 in-loop initial
    // conditions, relative to the well depth U(saddle) - U(center).
    let es = system.potential(orbit.saddle_xi).unwrap();
    let depth = es - system.potential(orbit.center_xi).unwrap();
    let ([x_lo, x_hi], [v_lo, v_hi]) = orbit.bounding_box();
    let mut ics = Vec::new();
    let mut k = 1;
    while ics.len() < 1000 {
        let xi = x_lo + (x_hi - x_lo) * halton(k, 2);
        let v = v_lo + (v_hi - v_lo) * halton(k, 3);
        k += 1;
        if xi > orbit.saddle_xi && system.energy(&[xi, v]).unwrap() < es {
            ics.push((xi, v));
        }
    }
    let opts = RunOptions::default();
    let mut drift: f64 = 0.0;
    let mut not_survived = 0;
    for &(xi, v) in &ics {
        let e0 = system.energy(&[xi, v]).unwrap();
        let (out, path) = integrate_path(&system, SimState::new(xi, v), &opts, 2.0 * PI).expect("trajectory");
        if out.status != Status::Survived {
            not_survived += 1;
        }
        for s in &path {
            drift = drift.max((system.energy(&[s.xi, s.v]).unwrap() - e0).abs() / depth);
        }
    }
    let ok = drift < 1e-6 && not_survived == 0;
    passed &= ok;
    parts.push(format!(
        "energy drift {drift:.2e} (< 1e-6) over {} ICs",
        ics.len()
    ));

    // Hilbert vs quadrature on Ω ∈ [0.1, 5] for the ideal and Duffing orbits.
    let omegas: Vec<f64> = (0..50).map(|k| 0.1 + 4.9 * k as f64 / 49.0).collect();
    let duffing = duffing_homoclinic_numeric(&HomoclinicOptions::default()).unwrap();
    let mut hilbert_err: f64 = 0.0;
    for o in [&orbit, &duffing] {
        let analysis = MelnikovAnalysis::new(o).unwrap();
        for &w in &omegas {
            let a = analysis.amplitude(w).expect("amplitudes agree");
            hilbert_err = hilbert_err.max(rel(a.hilbert_amplitude, a.amplitude));
        }
    }
    passed &= hilbert_err <= 1e-5;
    parts.push(format!("Hilbert vs quadrature {hilbert_err:.2e} (<= 1e-5)"));

    // Orbit sampled with N and 2N points.
    let fine_opts = HomoclinicOptions {
        dt: 0.5 * HomoclinicOptions::default().dt,
        ..HomoclinicOptions::default()
    };
    let fine = orbit_for(&p, force.clone(), &fine_opts);
    let (coarse_a, fine_a) = (
        MelnikovAnalysis::new(&orbit).unwrap(),
        MelnikovAnalysis::new(&fine).unwrap(),
    );
    let refine_err = omegas
        .iter()
        .map(|&w| {
            rel(
                fine_a.amplitude(w).unwrap().amplitude,
                coarse_a.amplitude(w).unwrap().amplitude,
            )
        })
        .fold(0.0, f64::max);
    let doubled = fine.len() == 2 * orbit.len();
    passed &= refine_err <= 1e-6 && doubled;
    parts.push(format!(
        "N={} vs 2N={} A(Omega) {refine_err:.2e} (<= 1e-6)",
        orbit.len(),
        fine.len()
    ));

    // Worker-count determinism on a driven, blurred map.
    let alpha_th = coarse_a.threshold(OMEGA).unwrap();
    let f = F0 / (KAPPA * L0);
    let driven = |alpha: f64| {
        CasimirOscillator::new(
            &params(Epsilon::On, 1.0 / (alpha * f), 0.0),
            ideal(),
            DEFAULT_STICTION_DELTA,
        )
    };
    let small = GridSpec::around_orbit(&orbit, INFLATE, 100, 100);
    let blurred = driven(0.25 * alpha_th);
    let maps: Vec<Vec<u8>> = [1, 2, 8]
        .iter()
        .map(|&w| survival_map(&blurred, &small, &opts, w).unwrap().to_bytes())
        .collect();
    let identical = maps.windows(2).all(|m| m[0] == m[1]);
    passed &= identical;
    parts.push(format!("1/2/8-worker maps identical: {identical}"));

    // Doubling the stiction offset δ.
    let doubled_delta = system.with_stiction_delta(2.0 * DEFAULT_STICTION_DELTA);
    let cons_map = survival_map(&doubled_delta, &conservative_map.grid, &opts, workers()).unwrap();
    let cons_change = changed_fraction(conservative_map, &cons_map);
    let sharp = driven(1.5 * alpha_th);
    let a = survival_map(&sharp, &small, &opts, workers()).unwrap();
    let b = survival_map(
        &sharp.with_stiction_delta(2.0 * DEFAULT_STICTION_DELTA),
        &small,
        &opts,
        workers(),
    )
    .unwrap();
    let driven_change = changed_fraction(&a, &b);
    passed &= cons_change < 1e-3 && driven_change < 1e-3;
    parts.push(format!(
        "delta doubling changes {:.3}% (conservative 300x300) and {:.3}% (driven 100x100) of cells (< 0.1%)",
        100.0 * cons_change,
        100.0 * driven_change
    ));

    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn report(index: usize, name: &str, start: Instant, outcome: &Outcome) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{} criterion {index} ({name}, {:.0} s): {}",
        if outcome.passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        outcome.detail
    );
}

#[test]
fn acceptance() {
    let _ = writeln!(std::io::stdout().lock());
    let mut failed = Vec::new();

    let t = Instant::now();
    let o = duffing_end_to_end();
    report(1, "Duffing end-to-end", t, &o);
    if !o.passed {
        failed.push(1);
    }

    let t = Instant::now();
    let (o, conservative_map) = conservative_basin();
    report(2, "conservative basin", t, &o);
    if !o.passed {
        failed.push(2);
    }

    let t = Instant::now();
    let o = melnikov_consistency();
    report(3, "Melnikov vs simulation", t, &o);
    if !o.passed {
        failed.push(3);
    }

    let t = Instant::now();
    let o = rough_versus_flat();
    report(4, "rough vs flat", t, &o);
    if !o.passed {
        failed.push(4);
    }

    let t = Instant::now();
    let o = hygiene(&conservative_map);
    report(5, "numerical hygiene", t, &o);
    if !o.passed {
        failed.push(5);
    }

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
