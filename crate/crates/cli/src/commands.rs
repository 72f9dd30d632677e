use std::time::Instant;

use etdiode_core::verify::{mms_spatial_order, mms_temporal_order, ConvergenceReport, MmsSetup, StudyMode};
use etdiode_core::{
    compute_scaled, iv_sweep_with, run_to_steady_state, run_transient_with, MonitorRecord, PhysicalParams,
};
use serde::{Deserialize, Serialize};

use crate::args::{MmsArgs, RunArgs, ScaleArgs, SweepArgs};
use crate::config::{load, load_physical, Loaded, RunConfig, RunManifest};
use crate::error::{CliError, CliResult, EXIT_FAILURE, EXIT_OK};
use crate::output::{self, note};

fn load_run(args: &RunArgs) -> CliResult<(Loaded, RunConfig)> {
    let loaded = load(&args.config)?;
    let mut cfg = loaded.config.clone();
    if let Some(s) = args.scheme {
        cfg.scheme = s.into();
    }
    if let Some(max) = args.max_steps {
        cfg.steady.max_steps = max;
        if !cfg.run_to_steady && cfg.grid.steps() > max {
            cfg.grid.t_end = max as f64 * cfg.grid.dt;
        }
    }
    cfg.device()?;
    Ok((loaded, cfg))
}

pub fn simulate(args: &RunArgs, quiet: bool) -> CliResult<u8> {
    let start = Instant::now();
    let (_, cfg) = load_run(args)?;
    let device = cfg.device()?;
    let mut manifest = RunManifest::new("simulate", cfg.clone());
    manifest.timings.load = start.elapsed().as_secs_f64();

    let solve = Instant::now();
    let traj = if cfg.run_to_steady {
        run_to_steady_state(&device, &cfg.steady, &cfg.schedule)?
    } else {
        run_transient_with(&device, &cfg.schedule)?
    };
    manifest.timings.solve = solve.elapsed().as_secs_f64();
    note(quiet, format!("{} steps, max {} Newton iterations per step", traj.steps(), traj.max_newton_iterations()));

    let write = Instant::now();
    output::ensure_dir(&args.out)?;
    let x = device.grid.positions();
    for (k, s) in &traj.snapshots {
        let name = format!("profiles_t{k}.csv");
        output::write_profile(&args.out.join(&name), &x, s)?;
        manifest.outputs.push(name);
    }
    let mut log = Vec::with_capacity(traj.monitor_log.len() + 1);
    if let Some((_, init)) = traj.snapshots.first() {
        log.push(MonitorRecord::of(init));
    }
    log.extend_from_slice(&traj.monitor_log);
    output::write_monitors(&args.out.join("monitors.csv"), &log)?;
    manifest.outputs.push("monitors.csv".into());
    manifest.timings.write = write.elapsed().as_secs_f64();
    output::write_json(&args.out.join("manifest.json"), &manifest)?;
    note(quiet, format!("wrote {} snapshots to {}", traj.snapshots.len(), args.out.display()));
    Ok(EXIT_OK)
}

pub fn sweep(args: &SweepArgs, quiet: bool) -> CliResult<u8> {
    let start = Instant::now();
    let (loaded, cfg) = load_run(&args.run)?;
    let biases = args.biases.clone().or(loaded.biases).unwrap_or_default();
    if biases.is_empty() {
        return Err(CliError::Usage("sweep needs a non-empty --biases list, e.g. --biases 0.2,1.0".into()));
    }
    let device = cfg.device()?;
    let mut manifest = RunManifest::new("sweep", cfg.clone());
    manifest.biases = Some(biases.clone());
    manifest.timings.load = start.elapsed().as_secs_f64();

    let solve = Instant::now();
    let points = iv_sweep_with(&device, &biases, &cfg.steady);
    manifest.timings.solve = solve.elapsed().as_secs_f64();

    let write = Instant::now();
    output::ensure_dir(&args.run.out)?;
    output::write_iv(&args.run.out.join("iv.csv"), &points)?;
    manifest.outputs.push("iv.csv".into());
    manifest.timings.write = write.elapsed().as_secs_f64();
    output::write_json(&args.run.out.join("manifest.json"), &manifest)?;

    let failed = points.iter().filter(|p| !p.is_ok()).count();
    for p in points.iter().filter(|p| !p.is_ok()) {
        eprintln!("bias {} V failed: {}", p.bias_volts, p.error.as_deref().unwrap_or_default());
    }
    note(quiet, format!("{} of {} bias points converged", points.len() - failed, points.len()));
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn default_base_nodes() -> usize {
    51
}
fn default_levels() -> usize {
    4
}
fn default_dt_factor() -> f64 {
    1.0
}
fn default_base_dt() -> f64 {
    4e-3
}
fn default_temporal_nodes() -> usize {
    201
}
fn default_window() -> [f64; 2] {
    [1.9, 2.1]
}
fn default_mode() -> StudyMode {
    StudyMode::Spatial
}

/// Settings of `etdiode mms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsStudy {
    #[serde(default)]
    pub setup: MmsSetup,
    #[serde(default = "default_mode")]
    pub mode: StudyMode,
    /// Coarsest grid of the spatial study; level `j` has `(base − 1) 2^j + 1` nodes.
    #[serde(default = "default_base_nodes")]
    pub base_nodes: usize,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Spatial study time step as a multiple of Δx².
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    /// Coarsest time step of the temporal study.
    #[serde(default = "default_base_dt")]
    pub base_dt: f64,
    #[serde(default = "default_temporal_nodes")]
    pub temporal_nodes: usize,
    /// Accepted range of every observed order.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

impl Default for MmsStudy {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl MmsStudy {
    pub fn smoke() -> Self {
        Self {
            setup: MmsSetup { amplitude: 0.0, ..Default::default() },
            base_nodes: 11,
            levels: 3,
            base_dt: 0.02,
            temporal_nodes: 21,
            ..Default::default()
        }
    }

    pub fn run(&self) -> CliResult<ConvergenceReport> {
        Ok(match self.mode {
            StudyMode::Spatial => mms_spatial_order(self.base_nodes, self.levels, self.dt_factor, &self.setup)?,
            StudyMode::Temporal => mms_temporal_order(self.base_dt, self.levels, self.temporal_nodes, &self.setup)?,
        })
    }

    /// Exact reproduction (all errors zero) passes without an order.
    pub fn passes(&self, report: &ConvergenceReport) -> bool {
        report.max_error() == 0.0 || report.orders_within(self.window[0], self.window[1])
    }
}

#[derive(Debug, Serialize)]
struct MmsOutput<'a> {
    version: &'static str,
    study: &'a MmsStudy,
    pass: bool,
    report: &'a ConvergenceReport,
}

pub fn mms(args: &MmsArgs, quiet: bool) -> CliResult<u8> {
    let mut study = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None if args.smoke => MmsStudy::smoke(),
        None => MmsStudy::default(),
    };
    if args.smoke {
        study.setup.amplitude = 0.0;
    }
    if let Some(s) = args.scheme {
        study.setup.scheme = s.into();
    }
    if let Some(m) = args.mode {
        study.mode = m.into();
    }
    if let Some(max) = args.max_steps {
        let finest = match study.mode {
            StudyMode::Spatial => {
                let nodes = (study.base_nodes - 1) * (1 << (study.levels - 1)) + 1;
                let dx = 1.0 / (nodes - 1) as f64;
                (study.setup.t_final / (study.dt_factor * dx * dx)).ceil() as usize
            }
            StudyMode::Temporal => {
                let dt = study.base_dt
                    / (1usize << (study.levels - 1)) as f64
                    / etdiode_core::verify::TEMPORAL_REFERENCE_FACTOR as f64;
                (study.setup.t_final / dt).ceil() as usize
            }
        };
        if finest > max {
            return Err(CliError::Usage(format!(
                "study needs {finest} steps on its finest level, over --max-steps {max}"
            )));
        }
    }

    let report = study.run()?;
    let pass = study.passes(&report);
    output::ensure_dir(&args.out)?;
    output::write_convergence(&args.out.join("convergence.csv"), &report)?;
    let doc = MmsOutput { version: env!("CARGO_PKG_VERSION"), study: &study, pass, report: &report };
    output::write_json(&args.out.join("convergence.json"), &doc)?;
    note(quiet, report.to_string());
    note(quiet, format!("orders within [{}, {}]: {pass}", study.window[0], study.window[1]));
    Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
}

pub fn scale(args: &ScaleArgs) -> CliResult<u8> {
    let physical = match &args.config {
        Some(path) => load_physical(path)?,
        None => PhysicalParams::default(),
    };
    let scaled = compute_scaled(&physical)?;
    println!("{}", serde_json::to_string_pretty(&scaled)?);
    Ok(EXIT_OK)
}
