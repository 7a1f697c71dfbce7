use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use casimir_chaos::config::RunConfig;
use casimir_chaos::conservative::{
    compute_homoclinic, find_equilibria, potential_energy, HomoclinicOrbit, DEFAULT_SCAN_POINTS,
};
use casimir_chaos::duffing;
use casimir_chaos::dynamics::{classify_chaos, integrate_path, survival_map, GridSpec, SimState};
use casimir_chaos::force::ForceModel;
use casimir_chaos::melnikov::{melnikov_function, threshold_curve, MelnikovAnalysis, Verdict};
use casimir_chaos::output::{emit_artifact, emit_json, survival_map_table, threshold_table, CsvTable};
use casimir_chaos::system::CasimirOscillator;

#[derive(Parser)]
#[command(
    name = "casimir-chaos",
    version,
    about = "Chaos thresholds and stiction maps for a driven Casimir oscillator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Print the saddle and centre as JSON.
    Equilibria,
    /// Write the homoclinic orbit (tau, x_h, v_h).
    Homoclinic,
    /// Write the Melnikov threshold curve alpha_th(Omega).
    Threshold,
    /// Write M(t0) samples for the configured alpha and Omega.
    Melnikov,
    /// Write one sampled trajectory.
    Trajectory,
    /// Write a periods-to-stiction map over a grid of initial conditions.
    SurvivalMap,
    /// Check the numerical pipeline against the Duffing closed forms.
    DuffingValidate,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Accepted for scripting symmetry; nothing here uses random numbers.
    #[arg(long, global = true)]
    seedless: bool,
    /// Override any config field, e.g. `--set grid.nx=100`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(flatten)]
    fields: FieldFlags,
}

/// Top-level config fields, overridable by name.
#[derive(Args)]
struct FieldFlags {
    #[arg(long, global = true)]
    kappa: Option<String>,
    #[arg(long = "L0", global = true)]
    l0: Option<String>,
    #[arg(long, global = true)]
    omega0: Option<String>,
    #[arg(long, global = true)]
    omega0_hz: Option<String>,
    #[arg(long, global = true)]
    area: Option<String>,
    #[arg(long, global = true)]
    d0: Option<String>,
    #[arg(long = "Q", global = true)]
    q: Option<String>,
    #[arg(long = "F0", global = true)]
    f0: Option<String>,
    #[arg(long, global = true)]
    omega: Option<String>,
    #[arg(long, global = true)]
    omega_hz: Option<String>,
    #[arg(long, global = true)]
    omega_ratio: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    force: Option<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let f = &self.fields;
        let mut out: Vec<(String, String)> = [
            ("kappa", &f.kappa),
            ("L0", &f.l0),
            ("omega0", &f.omega0),
            ("omega0_hz", &f.omega0_hz),
            ("area", &f.area),
            ("d0", &f.d0),
            ("Q", &f.q),
            ("F0", &f.f0),
            ("omega", &f.omega),
            ("omega_hz", &f.omega_hz),
            ("omega_ratio", &f.omega_ratio),
            ("epsilon", &f.epsilon),
            ("force", &f.force),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect();
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(dir) = &self.out {
            out.push(("out_dir".into(), format!("{:?}", dir.display().to_string())));
        }
        Ok(out)
    }

    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    fn load(&self) -> Result<RunConfig> {
        let path = self
            .config
            .as_deref()
            .context("--config is required for this subcommand")?;
        let config = RunConfig::from_path(path, &self.overrides()?)
            .with_context(|| format!("invalid configuration {}", path.display()))?;
        config
            .echo(&config.out_dir)
            .with_context(|| format!("cannot write effective config to {}", config.out_dir.display()))?;
        Ok(config)
    }
}

/// Force model, oscillator and homoclinic orbit shared by most subcommands.
struct Setup {
    config: RunConfig,
    force: Arc<dyn ForceModel>,
    orbit: HomoclinicOrbit,
}

impl Setup {
    fn new(config: RunConfig) -> Result<Self> {
        let force = config.force_model()?;
        let eq = find_equilibria(&config.params, force.as_ref(), DEFAULT_SCAN_POINTS)?;
        let orbit = compute_homoclinic(&eq, &config.params, force.clone(), &config.homoclinic.options())
            .context("homoclinic orbit")?;
        Ok(Self { config, force, orbit })
    }

    fn oscillator(&self) -> CasimirOscillator {
        CasimirOscillator::new(
            &self.config.params,
            self.force.clone(),
            self.config.integrator.stiction_delta,
        )
    }

    fn omega_ratio(&self) -> f64 {
        self.config.params.omega() / self.config.params.omega0()
    }

    /// α from `[melnikov] alpha`, else from the physical drive.
    fn alpha(&self) -> Option<f64> {
        self.config
            .melnikov
            .alpha
            .or_else(|| self.config.params.nondimensionalize().alpha)
    }

    fn orbit_meta(&self) -> serde_json::Value {
        let o = &self.orbit;
        json!({
            "saddle_xi": o.saddle_xi,
            "center_xi": o.center_xi,
            "turning_xi": o.turning_xi,
            "msv": o.msv,
            "tol_saddle": o.tol_saddle,
            "dtau": o.dtau,
            "samples": o.len(),
        })
    }
}

fn equilibria(config: RunConfig) -> Result<()> {
    let force = config.force_model()?;
    let eq = find_equilibria(&config.params, force.as_ref(), DEFAULT_SCAN_POINTS)?;
    let l0 = config.params.l0();
    let potential = |xi: Option<f64>| -> Result<Option<f64>> {
        xi.map(|x| potential_energy(x, &config.params, force.as_ref()))
            .transpose()
            .map_err(Into::into)
    };
    let value = json!({
        "force": force.id(),
        "saddle_x": eq.saddle_x,
        "center_x": eq.center_x,
        "saddle_xi": eq.saddle_xi(l0),
        "center_xi": eq.center_xi(l0),
        "potential_at_saddle": eq.potential_at_saddle,
        "U_saddle": potential(eq.saddle_xi(l0))?,
        "U_center": potential(eq.center_xi(l0))?,
    });
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn homoclinic(setup: &Setup) -> Result<()> {
    let o = &setup.orbit;
    let mut table = CsvTable::new(&["tau", "x_h", "v_h"]).with_header("force", setup.force.id());
    table.rows = (0..o.len()).map(|j| vec![o.tau[j], o.x[j], o.v[j]]).collect();
    let (csv, _) = emit_artifact(&setup.config.out_dir, "homoclinic", &table, &setup.orbit_meta())?;
    println!("{}", csv.display());
    Ok(())
}

fn threshold(setup: &Setup, workers: usize) -> Result<()> {
    let omegas = setup.config.threshold.omegas();
    let curve = threshold_curve(&setup.orbit, &omegas, workers)?;
    let meta = json!({
        "msv": setup.orbit.msv,
        "orbit": setup.orbit_meta(),
        "force": setup.force.id(),
        "params": setup.config.params,
    });
    let (csv, _) = emit_artifact(
        &setup.config.out_dir,
        "threshold",
        &threshold_table(&curve),
        &meta,
    )?;
    println!("{}", csv.display());
    Ok(())
}

fn melnikov(setup: &Setup) -> Result<()> {
    let alpha = setup
        .alpha()
        .context("no alpha: set [melnikov] alpha or a driven configuration with F0 > 0")?;
    let omega = setup.omega_ratio();
    let m = &setup.config.melnikov;
    let span = m.periods * 2.0 * std::f64::consts::PI / omega;
    let t0: Vec<f64> = (0..m.samples)
        .map(|k| span * k as f64 / (m.samples - 1) as f64)
        .collect();
    let mf = melnikov_function(&setup.orbit, alpha, omega, &t0)?;
    let mut table = CsvTable::new(&["t0", "M"]);
    table.rows = mf.t0.iter().zip(&mf.values).map(|(t, v)| vec![*t, *v]).collect();
    let meta = json!({
        "alpha": alpha,
        "omega_over_omega0": omega,
        "amplitude": mf.amplitude,
        "phase": mf.phase,
        "msv": mf.msv,
        "verdict": mf.verdict,
        "force": setup.force.id(),
    });
    let (csv, _) = emit_artifact(&setup.config.out_dir, "melnikov", &table, &meta)?;
    println!("{}", csv.display());
    Ok(())
}

fn trajectory(config: RunConfig) -> Result<()> {
    let force = config.force_model()?;
    let system = CasimirOscillator::new(&config.params, force.clone(), config.integrator.stiction_delta);
    let t = &config.trajectory;
    let (outcome, path) = integrate_path(
        &system,
        SimState::new(t.xi0, t.v0),
        &config.integrator.run_options(),
        t.sample_dt,
    )?;
    let mut table = CsvTable::new(&["tau", "xi", "v"]);
    table.rows = path.iter().map(|s| vec![s.tau, s.xi, s.v]).collect();
    let meta = json!({ "outcome": outcome, "force": force.id(), "params": config.params });
    let (csv, _) = emit_artifact(&config.out_dir, "trajectory", &table, &meta)?;
    println!("{}", csv.display());
    Ok(())
}

fn survival(setup: &Setup, workers: usize) -> Result<()> {
    let g = &setup.config.grid;
    let auto = GridSpec::around_orbit(&setup.orbit, g.inflate, g.nx, g.nv);
    let grid = GridSpec {
        x_range: g.x_range.unwrap_or(auto.x_range),
        v_range: g.v_range.unwrap_or(auto.v_range),
        nx: g.nx,
        nv: g.nv,
    };
    let system = setup.oscillator();
    let map = survival_map(&system, &grid, &setup.config.integrator.run_options(), workers)?;
    if map.warnings > 0 {
        eprintln!("warning: {} cells failed to integrate and hold -1", map.warnings);
    }
    let classification = classify_chaos(&map).ok();
    let driven = setup.config.params.epsilon().is_on();
    let melnikov = match (driven, setup.alpha()) {
        (true, Some(alpha)) => {
            let omega = setup.omega_ratio();
            let amp = MelnikovAnalysis::new(&setup.orbit)?.amplitude(omega)?;
            json!({
                "alpha": alpha,
                "alpha_threshold": amp.amplitude / setup.orbit.msv,
                "verdict": Verdict::from_balance(alpha * setup.orbit.msv, amp.amplitude),
            })
        }
        _ => serde_json::Value::Null,
    };
    let meta = json!({
        "params": setup.config.params,
        "dimensionless": setup.config.params.nondimensionalize(),
        "force": setup.force.id(),
        "grid": grid,
        "max_periods": map.max_periods,
        "stiction_delta": setup.config.integrator.stiction_delta,
        "failed_cells": map.warnings,
        "classification": classification,
        "blur_fraction": classification.and_then(|c| c.blur_fraction),
        "melnikov": melnikov,
    });
    let (csv, _) = emit_artifact(
        &setup.config.out_dir,
        "survival_map",
        &survival_map_table(&map),
        &meta,
    )?;
    println!("{}", csv.display());
    Ok(())
}

fn duffing_validate(common: &Common) -> Result<bool> {
    let (opts, out_dir) = match &common.config {
        Some(_) => {
            let config = common.load()?;
            (config.homoclinic.options(), config.out_dir)
        }
        None => (
            Default::default(),
            common.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        ),
    };
    let report = duffing::validate(&opts, common.workers())?;
    let path = out_dir.join("duffing_report.json");
    emit_json(&path, &report)?;
    for c in &report.checks {
        println!(
            "{} {}: residual {:e} (tolerance {:e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.tolerance
        );
    }
    println!("{}", path.display());
    Ok(report.passed)
}

fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    let workers = common.workers();
    match cli.command {
        Command::DuffingValidate => return duffing_validate(common),
        Command::Equilibria => equilibria(common.load()?)?,
        Command::Trajectory => trajectory(common.load()?)?,
        Command::Homoclinic => homoclinic(&Setup::new(common.load()?)?)?,
        Command::Threshold => threshold(&Setup::new(common.load()?)?, workers)?,
        Command::Melnikov => melnikov(&Setup::new(common.load()?)?)?,
        Command::SurvivalMap => survival(&Setup::new(common.load()?)?, workers)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
