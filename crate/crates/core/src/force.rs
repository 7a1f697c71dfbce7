//! Attractive surface-force laws F(x) and their primitives W(x), W' = F.
//!
//! Two implementations: the ideal-metal parallel-plate Casimir law, and a
//! tabulated curve for material or roughness corrected forces computed
//! elsewhere. Evaluation outside a model's valid range is always an error.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::interp::MonotoneCubic;
use crate::quadrature;

/// Reduced Planck constant, J·s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

const MIN_TABLE_ROWS: usize = 4;

#[derive(Debug, Error)]
pub enum ForceError {
    #[error("separation {x:e} m outside valid range [{min:e}, {max:e}] m")]
    Domain { x: f64, min: f64, max: f64 },
    #[error("invalid force model parameter: {0}")]
    Parameter(String),
    #[error("force table line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("cannot read force table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Closed interval of separations (metres) on which a model may be evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidRange {
    pub min: f64,
    pub max: f64,
}

impl ValidRange {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    fn check(&self, x: f64) -> Result<(), ForceError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(ForceError::Domain {
                x,
                min: self.min,
                max: self.max,
            })
        }
    }
}

pub trait ForceModel: Send + Sync + fmt::Debug {
    /// Attractive force magnitude in newtons.
    fn force(&self, x: f64) -> Result<f64, ForceError>;

    /// dF/dx in N/m.
    fn force_gradient(&self, x: f64) -> Result<f64, ForceError>;

    /// Antiderivative W of the force, in joules.
    fn potential_primitive(&self, x: f64) -> Result<f64, ForceError>;

    fn valid_range(&self) -> ValidRange;

    /// Minimum attainable separation d₀ (0 for flat surfaces).
    fn contact_distance(&self) -> f64;

    /// Short identifier recorded in output metadata.
    fn id(&self) -> String;
}

/// π²ħc·A/240 for an ideal-metal plate pair of area `area`.
pub fn casimir_coefficient(area: f64) -> f64 {
    PI * PI * HBAR * SPEED_OF_LIGHT * area / 240.0
}

/// Ideal-metal Casimir force between parallel plates.
pub fn ideal_force(x: f64, area: f64) -> Result<f64, ForceError> {
    IdealCasimir::new(area)?.force(x)
}

/// F(x) = C/x⁴ with W(x) = −C/(3x³).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealCasimir {
    area: f64,
    coefficient: f64,
}

impl IdealCasimir {
    pub fn new(area: f64) -> Result<Self, ForceError> {
        if !(area.is_finite() && area > 0.0) {
            return Err(ForceError::Parameter(format!("area must be > 0, got {area}")));
        }
        Ok(Self {
            area,
            coefficient: casimir_coefficient(area),
        })
    }

    /// Same law with a different prefactor, C → scale·C.
    pub fn scaled(area: f64, scale: f64) -> Result<Self, ForceError> {
        let mut m = Self::new(area)?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(ForceError::Parameter(format!("scale must be > 0, got {scale}")));
        }
        m.coefficient *= scale;
        Ok(m)
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn area(&self) -> f64 {
        self.area
    }
}

impl ForceModel for IdealCasimir {
    fn force(&self, x: f64) -> Result<f64, ForceError> {
        self.valid_range().check(x)?;
        let x2 = x * x;
        Ok(self.coefficient / (x2 * x2))
    }

    fn force_gradient(&self, x: f64) -> Result<f64, ForceError> {
        self.valid_range().check(x)?;
        Ok(-4.0 * self.coefficient / x.powi(5))
    }

    fn potential_primitive(&self, x: f64) -> Result<f64, ForceError> {
        self.valid_range().check(x)?;
        Ok(-self.coefficient / (3.0 * x * x * x))
    }

    fn valid_range(&self) -> ValidRange {
        ValidRange {
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
        }
    }

    fn contact_distance(&self) -> f64 {
        0.0
    }

    fn id(&self) -> String {
        format!("ideal(area={:e},C={:e})", self.area, self.coefficient)
    }
}

/// The spring-only limit: no surface force at all.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoForce;

impl ForceModel for NoForce {
    fn force(&self, x: f64) -> Result<f64, ForceError> {
        self.valid_range().check(x)?;
        Ok(0.0)
    }

    fn force_gradient(&self, x: f64) -> Result<f64, ForceError> {
        self.valid_range().check(x)?;
        Ok(0.0)
    }

    fn potential_primitive(&self, x: f64) -> Result<f64, ForceError> {
        self.valid_range().check(x)?;
        Ok(0.0)
    }

    fn valid_range(&self) -> ValidRange {
        ValidRange {
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
        }
    }

    fn contact_distance(&self) -> f64 {
        0.0
    }

    fn id(&self) -> String {
        "none".to_string()
    }
}

/// Force curve given as samples, interpolated with a monotone cubic in
/// (ln x, ln F). The primitive is anchored at W(x_max) = 0.
#[derive(Debug, Clone)]
pub struct TabulatedForce {
    x: Vec<f64>,
    f: Vec<f64>,
    d0: f64,
    log_spline: MonotoneCubic,
    /// tail[k] = ∫_{x_k}^{x_max} F dx
    tail: Vec<f64>,
    source: String,
}

const PRIMITIVE_REL_TOL: f64 = 1e-14;

impl TabulatedForce {
    /// Builds a model from `(x, F)` samples; errors cite 1-based row numbers.
    pub fn from_samples(
        samples: &[(f64, f64)],
        d0: f64,
        source: impl Into<String>,
    ) -> Result<Self, ForceError> {
        let lines: Vec<usize> = (1..=samples.len()).collect();
        Self::build(samples, &lines, d0, source.into())
    }

    fn build(samples: &[(f64, f64)], lines: &[usize], d0: f64, source: String) -> Result<Self, ForceError> {
        if !(d0.is_finite() && d0 >= 0.0) {
            return Err(ForceError::Parameter(format!("d0 must be >= 0, got {d0}")));
        }
        if samples.len() < MIN_TABLE_ROWS {
            return Err(ForceError::Format {
                line: lines.last().copied().unwrap_or(0),
                message: format!(
                    "table has {} data rows, at least {MIN_TABLE_ROWS} required",
                    samples.len()
                ),
            });
        }
        for (i, &(x, f)) in samples.iter().enumerate() {
            let line = lines[i];
            if !(x.is_finite() && x > 0.0 && f.is_finite() && f > 0.0) {
                return Err(ForceError::Format {
                    line,
                    message: format!("x and F must be positive reals, got ({x}, {f})"),
                });
            }
            if x <= d0 {
                return Err(ForceError::Format {
                    line,
                    message: format!("x = {x:e} m not above contact distance d0 = {d0:e} m"),
                });
            }
            if i > 0 {
                let (xp, fp) = samples[i - 1];
                if x == xp {
                    return Err(ForceError::Format {
                        line,
                        message: format!("duplicate x = {x:e}"),
                    });
                }
                if x < xp {
                    return Err(ForceError::Format {
                        line,
                        message: format!("x = {x:e} not ascending (previous {xp:e})"),
                    });
                }
                if f >= fp {
                    return Err(ForceError::Format {
                        line,
                        message: format!("F = {f:e} not strictly decreasing (previous {fp:e})"),
                    });
                }
            }
        }
        let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let f: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let log_spline = MonotoneCubic::new(
            x.iter().map(|v| v.ln()).collect(),
            f.iter().map(|v| v.ln()).collect(),
        );
        let mut model = Self {
            x,
            f,
            d0,
            log_spline,
            tail: Vec::new(),
            source,
        };
        let n = model.x.len();
        let mut tail = vec![0.0; n];
        for k in (0..n - 1).rev() {
            tail[k] = tail[k + 1] + model.integral_in_interval(model.x[k], k);
        }
        model.tail = tail;
        Ok(model)
    }

    /// ∫_x^{x_{k+1}} F, with the integrand written in u = ln x.
    fn integral_in_interval(&self, x: f64, k: usize) -> f64 {
        let (u0, u1) = (x.ln(), self.log_spline.knots()[k + 1]);
        let spline = &self.log_spline;
        quadrature::integrate(
            &|u: f64| (spline.eval(u) + u).exp(),
            u0,
            u1,
            PRIMITIVE_REL_TOL,
            0.0,
        )
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.f.iter().copied())
    }

    fn knot_index(&self, x: f64) -> Option<usize> {
        self.x.binary_search_by(|v| v.total_cmp(&x)).ok()
    }
}

impl ForceModel for TabulatedForce {
    fn force(&self, x: f64) -> Result<f64, ForceError> {
        self.valid_range().check(x)?;
        if let Some(k) = self.knot_index(x) {
            return Ok(self.f[k]);
        }
        Ok(self.log_spline.eval(x.ln()).exp())
    }

    fn force_gradient(&self, x: f64) -> Result<f64, ForceError> {
        let f = self.force(x)?;
        Ok(f * self.log_spline.derivative(x.ln()) / x)
    }

    fn potential_primitive(&self, x: f64) -> Result<f64, ForceError> {
        self.valid_range().check(x)?;
        if let Some(k) = self.knot_index(x) {
            return Ok(-self.tail[k]);
        }
        let k = self.log_spline.interval(x.ln());
        Ok(-(self.integral_in_interval(x, k) + self.tail[k + 1]))
    }

    fn valid_range(&self) -> ValidRange {
        ValidRange {
            min: self.x[0],
            max: *self.x.last().expect("table is non-empty"),
        }
    }

    fn contact_distance(&self) -> f64 {
        self.d0
    }

    fn id(&self) -> String {
        format!("table:{}", self.source)
    }
}

/// Reads a two-column `x_m,F_N` CSV force table. Lines starting with `#` and
/// blank lines are skipped; the first remaining line must be the header.
pub fn load_force_table(path: impl AsRef<Path>, d0: f64) -> Result<TabulatedForce, ForceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ForceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_force_table(&text, d0, path.display().to_string())
}

pub fn parse_force_table(
    text: &str,
    d0: f64,
    source: impl Into<String>,
) -> Result<TabulatedForce, ForceError> {
    let mut header_seen = false;
    let mut samples = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(ForceError::Format {
                line,
                message: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        if !header_seen {
            if cols != ["x_m", "F_N"] {
                return Err(ForceError::Format {
                    line,
                    message: format!("expected header `x_m,F_N`, found `{trimmed}`"),
                });
            }
            header_seen = true;
            continue;
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| ForceError::Format {
                line,
                message: format!("`{s}` is not a real number"),
            })
        };
        samples.push((parse(cols[0])?, parse(cols[1])?));
        lines.push(line);
    }
    if !header_seen {
        return Err(ForceError::Format {
            line: 0,
            message: "missing header row `x_m,F_N`".to_string(),
        });
    }
    TabulatedForce::build(&samples, &lines, d0, source.into())
}
