//! Survival-time maps over grids of initial conditions and their
//! sharp/blurred classification.

use serde::{Deserialize, Serialize};

use super::{integrate, DynamicsError, RunOptions, SimState, Status};
use crate::conservative::HomoclinicOrbit;
use crate::system::Dynamics;

/// Value stored for cells whose integration failed.
pub const FAILED_CELL: f64 = -1.0;
/// Minimum horizon for which [`classify_chaos`] is meaningful.
pub const MIN_CLASSIFY_PERIODS: f64 = 50.0;
/// Chebyshev radius of the boundary shell around the interface.
pub const SHELL_RADIUS: usize = 3;
/// Blur fraction at or above which a map counts as blurred.
pub const BLUR_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// [lo, hi] in units of L₀.
    pub x_range: [f64; 2],
    /// [lo, hi] in units of L₀ω₀.
    pub v_range: [f64; 2],
    pub nx: usize,
    pub nv: usize,
}

impl GridSpec {
    /// Bounding box of the orbit with each half-width scaled by `inflate`
    /// about its centre.
    pub fn around_orbit(orbit: &HomoclinicOrbit, inflate: f64, nx: usize, nv: usize) -> Self {
        let (xb, vb) = orbit.bounding_box();
        let grow = |[lo, hi]: [f64; 2]| {
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo) * inflate);
            [mid - half, mid + half]
        };
        Self {
            x_range: grow(xb),
            v_range: grow(vb),
            nx,
            nv,
        }
    }

    /// Inclusive, evenly spaced samples of `range`.
    fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
        let step = (range[1] - range[0]) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    range[1]
                } else {
                    range[0] + step * i as f64
                }
            })
            .collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_range, self.nx)
    }

    pub fn vs(&self) -> Vec<f64> {
        Self::axis(self.v_range, self.nv)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok_range = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] < r[1];
        if self.nx < 2 || self.nv < 2 || !ok_range(self.x_range) || !ok_range(self.v_range) {
            return Err(DynamicsError::Grid(*self));
        }
        Ok(())
    }
}

/// Periods to stiction for each grid cell, capped at `max_periods`.
/// `values` is row-major with one row per velocity sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalMap {
    pub grid: GridSpec,
    pub max_periods: f64,
    pub values: Vec<f64>,
    /// Cells whose integration failed and hold [`FAILED_CELL`].
    pub warnings: usize,
}

impl SurvivalMap {
    pub fn get(&self, iv: usize, ix: usize) -> f64 {
        self.values[iv * self.grid.nx + ix]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.values.chunks(self.grid.nx)
    }

    pub fn survived(&self, iv: usize, ix: usize) -> bool {
        self.get(iv, ix) >= self.max_periods
    }

    /// Byte image of the values, for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

fn cell_value<D: Dynamics + ?Sized>(
    system: &D,
    xi: f64,
    v: f64,
    opts: &RunOptions,
) -> Result<f64, DynamicsError> {
    let outcome = integrate(system, SimState::new(xi, v), opts)?;
    Ok(match outcome.status {
        Status::Survived => opts.max_periods,
        Status::Stiction | Status::LeftDomain => outcome.periods_elapsed.min(opts.max_periods),
    })
}

/// Integrates every cell of `grid` on `workers` threads. Cells are split
/// into contiguous blocks, one per worker, and every cell is computed the
/// same way regardless of the split, so the map is bit-identical for any
/// worker count.
pub fn survival_map<D: Dynamics + ?Sized>(
    system: &D,
    grid: &GridSpec,
    opts: &RunOptions,
    workers: usize,
) -> Result<SurvivalMap, DynamicsError> {
    grid.validate()?;
    let (xs, vs) = (grid.xs(), grid.vs());
    let cells = grid.nx * grid.nv;
    let workers = workers.clamp(1, cells);
    let block = cells.div_ceil(workers);
    let compute = |range: std::ops::Range<usize>| -> Vec<f64> {
        range
            .map(|c| {
                let (iv, ix) = (c / grid.nx, c % grid.nx);
                cell_value(system, xs[ix], vs[iv], opts).unwrap_or(FAILED_CELL)
            })
            .collect()
    };
    let values: Vec<f64> = if workers == 1 {
        compute(0..cells)
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let range = (w * block).min(cells)..((w + 1) * block).min(cells);
                    let compute = &compute;
                    scope.spawn(move || compute(range))
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("survival-map worker panicked"))
                .collect()
        })
    };
    let warnings = values.iter().filter(|&&v| v == FAILED_CELL).count();
    Ok(SurvivalMap {
        grid: *grid,
        max_periods: opts.max_periods,
        values,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaosClass {
    Sharp,
    Blurred,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: ChaosClass,
    /// Intermediate cells over shell cells; absent when not applicable.
    pub blur_fraction: Option<f64>,
    pub shell_cells: usize,
    pub intermediate_cells: usize,
    pub interface_cells: usize,
}

/// Measures how blurred the survived/stiction border is: the share of cells
/// within [`SHELL_RADIUS`] of the interface whose survival time lies in
/// [2, max_periods). Failed cells count as stiction.
pub fn classify_chaos(map: &SurvivalMap) -> Result<Classification, DynamicsError> {
    if map.max_periods < MIN_CLASSIFY_PERIODS {
        return Err(DynamicsError::ShortHorizon {
            max_periods: map.max_periods,
        });
    }
    let (nx, nv) = (map.grid.nx, map.grid.nv);
    let alive: Vec<bool> = map.values.iter().map(|&p| p >= map.max_periods).collect();
    let survivors = alive.iter().filter(|&&a| a).count();
    if survivors == 0 || survivors == alive.len() {
        return Ok(Classification {
            class: ChaosClass::NotApplicable,
            blur_fraction: None,
            shell_cells: 0,
            intermediate_cells: 0,
            interface_cells: 0,
        });
    }

    let idx = |iv: usize, ix: usize| iv * nx + ix;
    let mut interface = vec![false; alive.len()];
    for iv in 0..nv {
        for ix in 0..nx {
            let here = alive[idx(iv, ix)];
            let differs = (ix > 0 && alive[idx(iv, ix - 1)] != here)
                || (ix + 1 < nx && alive[idx(iv, ix + 1)] != here)
                || (iv > 0 && alive[idx(iv - 1, ix)] != here)
                || (iv + 1 < nv && alive[idx(iv + 1, ix)] != here);
            interface[idx(iv, ix)] = differs;
        }
    }
    let interface_cells = interface.iter().filter(|&&b| b).count();

    // Chebyshev dilation as two separable passes.
    let r = SHELL_RADIUS;
    let mut rows = vec![false; alive.len()];
    for iv in 0..nv {
        for ix in 0..nx {
            let (lo, hi) = (ix.saturating_sub(r), (ix + r).min(nx - 1));
            rows[idx(iv, ix)] = (lo..=hi).any(|j| interface[idx(iv, j)]);
        }
    }
    let mut shell = vec![false; alive.len()];
    for iv in 0..nv {
        for ix in 0..nx {
            let (lo, hi) = (iv.saturating_sub(r), (iv + r).min(nv - 1));
            shell[idx(iv, ix)] = (lo..=hi).any(|k| rows[idx(k, ix)]);
        }
    }

    let shell_cells = shell.iter().filter(|&&b| b).count();
    let intermediate_cells = shell
        .iter()
        .zip(&map.values)
        .filter(|(&s, &p)| s && p >= 2.0 && p < map.max_periods)
        .count();
    let fraction = intermediate_cells as f64 / shell_cells as f64;
    Ok(Classification {
        class: if fraction >= BLUR_THRESHOLD {
            ChaosClass::Blurred
        } else {
            ChaosClass::Sharp
        },
        blur_fraction: Some(fraction),
        shell_cells,
        intermediate_cells,
        interface_cells,
    })
}
