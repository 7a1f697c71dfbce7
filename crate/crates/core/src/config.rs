//! Run configuration: a TOML file with flat SI physical keys and a few
//! sections, plus `key = value` overrides that take precedence.
//!
//! ```toml
//! kappa = 0.5
//! L0 = 100e-9
//! omega0_hz = 300e3
//! area = 1e-10
//! force = "ideal"          # or "table:path/to/table.csv"
//!
//! [grid]
//! nx = 300
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conservative::HomoclinicOptions;
use crate::dynamics::integrator::Controls;
use crate::dynamics::{RunOptions, DEFAULT_MAX_PERIODS, DEFAULT_STICTION_DELTA};
use crate::force::{parse_force_table, ForceError, ForceModel, IdealCasimir};
use crate::output::sha256_hex;
use crate::params::{Epsilon, OscillatorParams, ParamError, PhysicalInputs};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Syntax(String),
    #[error("config key `{key}`: {constraint}")]
    Invalid { key: String, constraint: String },
    #[error("unit-suffix mismatch: `{0}` and `{1}` both given; use exactly one")]
    UnitMismatch(String, String),
    #[error("config key `{0}` is required")]
    Missing(&'static str),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Force(#[from] ForceError),
}

fn invalid(key: &str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kappa: Option<f64>,
    #[serde(rename = "L0")]
    l0: Option<f64>,
    omega0: Option<f64>,
    omega0_hz: Option<f64>,
    area: Option<f64>,
    d0: Option<f64>,
    #[serde(rename = "Q")]
    q: Option<f64>,
    #[serde(rename = "F0")]
    f0: Option<f64>,
    omega: Option<f64>,
    omega_hz: Option<f64>,
    omega_ratio: Option<f64>,
    epsilon: Option<u8>,
    force: Option<String>,
    out_dir: Option<PathBuf>,
    grid: Option<GridConfig>,
    integrator: Option<IntegratorConfig>,
    homoclinic: Option<HomoclinicConfig>,
    threshold: Option<ThresholdConfig>,
    melnikov: Option<MelnikovConfig>,
    trajectory: Option<TrajectoryConfig>,
}

/// Survival-map grid. Missing ranges default to the homoclinic bounding box
/// with half-widths scaled by `inflate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_range: Option<[f64; 2]>,
    pub nx: usize,
    pub nv: usize,
    pub inflate: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_range: None,
            v_range: None,
            nx: 300,
            nv: 300,
            inflate: 1.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: u64,
    /// Stiction offset δ above d₀/L₀.
    pub stiction_delta: f64,
    pub max_periods: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let c = Controls::default();
        Self {
            rtol: c.rtol,
            atol: c.atol,
            h_min: c.h_min,
            h_max: c.h_max,
            max_steps: c.max_steps,
            stiction_delta: DEFAULT_STICTION_DELTA,
            max_periods: DEFAULT_MAX_PERIODS,
        }
    }
}

impl IntegratorConfig {
    pub fn controls(&self) -> Controls {
        Controls {
            rtol: self.rtol,
            atol: self.atol,
            h_min: self.h_min,
            h_max: self.h_max,
            max_steps: self.max_steps,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            max_periods: self.max_periods,
            controls: self.controls(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomoclinicConfig {
    pub tol_saddle: f64,
    pub dt: f64,
    pub max_time: f64,
}

impl Default for HomoclinicConfig {
    fn default() -> Self {
        let h = HomoclinicOptions::default();
        Self {
            tol_saddle: h.tol_saddle,
            dt: h.dt,
            max_time: h.max_time,
        }
    }
}

impl HomoclinicConfig {
    pub fn options(&self) -> HomoclinicOptions {
        HomoclinicOptions {
            tol_saddle: self.tol_saddle,
            dt: self.dt,
            max_time: self.max_time,
            ..HomoclinicOptions::default()
        }
    }
}

/// Ω grid for threshold curves: `points` values evenly spaced on
/// [omega_min, omega_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            omega_min: 0.1,
            omega_max: 5.0,
            points: 200,
        }
    }
}

impl ThresholdConfig {
    pub fn omegas(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.omega_min];
        }
        let step = (self.omega_max - self.omega_min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.omega_max
                } else {
                    self.omega_min + step * k as f64
                }
            })
            .collect()
    }
}

/// M(t₀) sampling. `alpha` defaults to γω₀L₀/F₀ of the physical drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MelnikovConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub periods: f64,
    pub samples: usize,
}

impl Default for MelnikovConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            periods: 2.0,
            samples: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub xi0: f64,
    pub v0: f64,
    pub sample_dt: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            xi0: 0.9,
            v0: 0.0,
            sample_dt: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForceSelection {
    Ideal,
    Table(PathBuf),
}

impl ForceSelection {
    fn parse(raw: &str) -> Result<Self, ConfigError> {
        match raw.trim() {
            "ideal" => Ok(Self::Ideal),
            other => match other.strip_prefix("table:") {
                Some(path) if !path.is_empty() => Ok(Self::Table(PathBuf::from(path))),
                _ => Err(invalid(
                    "force",
                    format!("expected \"ideal\" or \"table:<path>\", got {other:?}"),
                )),
            },
        }
    }

    fn render(&self) -> String {
        match self {
            Self::Ideal => "ideal".into(),
            Self::Table(p) => format!("table:{}", p.display()),
        }
    }
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: OscillatorParams,
    /// True when Q, F₀ or ω were not given and placeholders were filled in
    /// (allowed only for ε = 0, where they do not enter the dynamics).
    pub drive_placeholders: bool,
    pub force: ForceSelection,
    /// Base directory for relative table paths.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub grid: GridConfig,
    pub integrator: IntegratorConfig,
    pub homoclinic: HomoclinicConfig,
    pub threshold: ThresholdConfig,
    pub melnikov: MelnikovConfig,
    pub trajectory: TrajectoryConfig,
}

/// Counterparts of keys that carry the same quantity in other units.
fn unit_group(key: &str) -> &'static [&'static str] {
    match key {
        "omega0" | "omega0_hz" => &["omega0", "omega0_hz"],
        "omega" | "omega_hz" | "omega_ratio" => &["omega", "omega_hz", "omega_ratio"],
        _ => &[],
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(value.to_string())),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Applies `key=value` overrides; dotted keys address sections. An
/// override replaces any unit variant of the same quantity.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[(String, String)]) -> Result<(), ConfigError> {
    for (key, value) in overrides {
        let path: Vec<&str> = key.split('.').collect();
        let (last, parents) = path.split_last().expect("split yields one element");
        let mut node = &mut *table;
        for part in parents {
            let entry = node
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = match entry {
                toml::Value::Table(t) => t,
                _ => return Err(invalid(key, "is not a section")),
            };
        }
        if parents.is_empty() {
            for other in unit_group(last) {
                node.remove(*other);
            }
        }
        node.insert(last.to_string(), override_value(value));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_path(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_with(&text, overrides, &base)
    }

    pub fn from_str_with(
        text: &str,
        overrides: &[(String, String)],
        base_dir: &Path,
    ) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        apply_overrides(&mut table, overrides)?;
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
        Self::from_raw(raw, base_dir)
    }

    fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        let kappa = raw.kappa.ok_or(ConfigError::Missing("kappa"))?;
        let l0 = raw.l0.ok_or(ConfigError::Missing("L0"))?;
        let area = raw.area.ok_or(ConfigError::Missing("area"))?;
        let omega0 = match (raw.omega0, raw.omega0_hz) {
            (Some(_), Some(_)) => return Err(ConfigError::UnitMismatch("omega0".into(), "omega0_hz".into())),
            (Some(w), None) => w,
            (None, Some(hz)) => 2.0 * PI * hz,
            (None, None) => return Err(ConfigError::Missing("omega0")),
        };
        let given: Vec<&str> = [
            ("omega", raw.omega.is_some()),
            ("omega_hz", raw.omega_hz.is_some()),
            ("omega_ratio", raw.omega_ratio.is_some()),
        ]
        .iter()
        .filter(|(_, g)| *g)
        .map(|(k, _)| *k)
        .collect();
        if given.len() > 1 {
            return Err(ConfigError::UnitMismatch(given[0].into(), given[1].into()));
        }
        let omega = raw
            .omega
            .or(raw.omega_hz.map(|hz| 2.0 * PI * hz))
            .or(raw.omega_ratio.map(|r| r * omega0));
        let epsilon = match raw.epsilon.unwrap_or(0) {
            0 => Epsilon::Off,
            1 => Epsilon::On,
            e => return Err(invalid("epsilon", format!("must be 0 or 1, got {e}"))),
        };
        let placeholders = raw.q.is_none() || raw.f0.is_none() || omega.is_none();
        if placeholders && epsilon.is_on() {
            let key = if raw.q.is_none() {
                "Q"
            } else if raw.f0.is_none() {
                "F0"
            } else {
                "omega"
            };
            return Err(invalid(key, "required when epsilon = 1"));
        }
        let params = OscillatorParams::new(PhysicalInputs {
            kappa,
            l0,
            omega0,
            area,
            d0: raw.d0.unwrap_or(0.0),
            q: raw.q.unwrap_or(1.0),
            f0: raw.f0.unwrap_or(0.0),
            omega: omega.unwrap_or(omega0),
            epsilon,
        })?;
        let force = ForceSelection::parse(raw.force.as_deref().unwrap_or("ideal"))?;

        let grid = raw.grid.unwrap_or_default();
        if grid.nx < 2 || grid.nv < 2 {
            return Err(invalid("grid.nx/grid.nv", "need at least 2 points per axis"));
        }
        for (key, range) in [("grid.x_range", grid.x_range), ("grid.v_range", grid.v_range)] {
            if let Some([lo, hi]) = range {
                if !(lo < hi) {
                    return Err(invalid(key, "must be [lo, hi] with lo < hi"));
                }
            }
        }
        if !(grid.inflate >= 1.0) {
            return Err(invalid("grid.inflate", "must be >= 1"));
        }
        if let Some([lo, _]) = grid.x_range {
            if lo * l0 <= params.d0() {
                return Err(invalid("grid.x_range", "lower end must lie above d0/L0"));
            }
        }
        let integrator = raw.integrator.unwrap_or_default();
        for (key, v) in [
            ("integrator.rtol", integrator.rtol),
            ("integrator.atol", integrator.atol),
            ("integrator.h_min", integrator.h_min),
            ("integrator.h_max", integrator.h_max),
            ("integrator.stiction_delta", integrator.stiction_delta),
            ("integrator.max_periods", integrator.max_periods),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, "must be positive and finite"));
            }
        }
        if integrator.h_min >= integrator.h_max {
            return Err(invalid("integrator.h_min", "must be below integrator.h_max"));
        }
        let homoclinic = raw.homoclinic.unwrap_or_default();
        if !(homoclinic.tol_saddle > 0.0 && homoclinic.tol_saddle < 0.1) {
            return Err(invalid("homoclinic.tol_saddle", "must lie in (0, 0.1)"));
        }
        if !(homoclinic.dt > 0.0 && homoclinic.max_time > 0.0) {
            return Err(invalid("homoclinic.dt", "dt and max_time must be positive"));
        }
        let threshold = raw.threshold.unwrap_or_default();
        if !(threshold.omega_min > 0.0 && threshold.omega_max >= threshold.omega_min && threshold.points >= 1)
            || (threshold.points > 1 && threshold.omega_max == threshold.omega_min)
        {
            return Err(invalid(
                "threshold",
                "need 0 < omega_min < omega_max and points >= 1",
            ));
        }
        let melnikov = raw.melnikov.unwrap_or_default();
        if melnikov.alpha.is_some_and(|a| !(a >= 0.0)) {
            return Err(invalid("melnikov.alpha", "must be >= 0"));
        }
        if !(melnikov.periods > 0.0) || melnikov.samples < 2 {
            return Err(invalid("melnikov", "periods must be positive and samples >= 2"));
        }
        let trajectory = raw.trajectory.unwrap_or_default();
        if !(trajectory.sample_dt > 0.0) || !(trajectory.xi0 * l0 > params.d0()) {
            return Err(invalid(
                "trajectory",
                "sample_dt must be positive and xi0 above d0/L0",
            ));
        }
        Ok(Self {
            params,
            drive_placeholders: placeholders,
            force,
            base_dir: base_dir.to_path_buf(),
            out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            grid,
            integrator,
            homoclinic,
            threshold,
            melnikov,
            trajectory,
        })
    }

    /// Builds the selected force model; table paths are relative to the
    /// config file.
    pub fn force_model(&self) -> Result<std::sync::Arc<dyn ForceModel>, ConfigError> {
        Ok(match &self.force {
            ForceSelection::Ideal => std::sync::Arc::new(IdealCasimir::new(self.params.area())?),
            ForceSelection::Table(p) => {
                let path = if p.is_absolute() {
                    p.clone()
                } else {
                    self.base_dir.join(p)
                };
                let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                // Identified by name and content so the id does not depend
                // on where the table was read from.
                let name = path
                    .file_name()
                    .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
                let source = format!("{name} sha256:{}", sha256_hex(text.as_bytes()));
                std::sync::Arc::new(parse_force_table(&text, self.params.d0(), source)?)
            }
        })
    }

    /// Effective configuration as TOML; parsing it back yields an equal
    /// `RunConfig`. Placeholder drive values are omitted.
    pub fn to_toml(&self) -> String {
        let p = &self.params;
        let force = match &self.force {
            ForceSelection::Table(path) if path.is_relative() => {
                let joined = self.base_dir.join(path);
                ForceSelection::Table(std::path::absolute(&joined).unwrap_or(joined)).render()
            }
            other => other.render(),
        };
        let raw = RawConfig {
            kappa: Some(p.kappa()),
            l0: Some(p.l0()),
            omega0: Some(p.omega0()),
            area: Some(p.area()),
            d0: Some(p.d0()),
            q: (!self.drive_placeholders).then(|| p.quality_factor()),
            f0: (!self.drive_placeholders).then(|| p.drive_amplitude()),
            omega: (!self.drive_placeholders).then(|| p.omega()),
            epsilon: Some(if p.epsilon().is_on() { 1 } else { 0 }),
            force: Some(force),
            out_dir: Some(self.out_dir.clone()),
            grid: Some(self.grid),
            integrator: Some(self.integrator),
            homoclinic: Some(self.homoclinic),
            threshold: Some(self.threshold),
            melnikov: Some(self.melnikov),
            trajectory: Some(self.trajectory),
            ..RawConfig::default()
        };
        toml::to_string(&raw).expect("config serializes")
    }

    /// Writes `effective_config.toml` into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<PathBuf, std::io::Error> {
        fs::create_dir_all(dir)?;
        let path = dir.join("effective_config.toml");
        fs::write(&path, self.to_toml())?;
        Ok(path)
    }
}
