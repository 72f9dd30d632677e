//! CSV and JSON writers. All floats are written with 17 significant
//! digits so that a reader recovers the exact `f64`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use etdiode_core::verify::ConvergenceReport;
use etdiode_core::{IvPoint, MonitorRecord, State};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const PROFILE_HEADER: [&str; 4] = ["x", "n", "theta", "V"];
pub const MONITOR_HEADER: [&str; 5] = ["t", "min_n", "max_n", "min_theta", "max_theta"];
pub const IV_HEADER: [&str; 6] =
    ["bias_volts", "bias_scaled", "current", "flux_uniformity", "newton_iters_total", "status"];
pub const CONVERGENCE_HEADER: [&str; 15] = [
    "nodes",
    "dx",
    "dt",
    "steps",
    "err_n_l2",
    "err_n_max",
    "err_theta_l2",
    "err_theta_max",
    "err_V_l2",
    "err_V_max",
    "order_n",
    "order_theta",
    "order_V",
    "newton_iters_max",
    "reference",
];

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)))
}

pub fn write_profile(path: &Path, x: &[f64], s: &State) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(PROFILE_HEADER)?;
    for (i, &xi) in x.iter().enumerate().take(s.len()) {
        w.write_record([fmt(xi), fmt(s.n[i]), fmt(s.theta[i]), fmt(s.v[i])])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_monitors(path: &Path, log: &[MonitorRecord]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(MONITOR_HEADER)?;
    for r in log {
        w.write_record([fmt(r.t), fmt(r.min_n), fmt(r.max_n), fmt(r.min_theta), fmt(r.max_theta)])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_iv(path: &Path, points: &[IvPoint]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(IV_HEADER)?;
    for p in points {
        let status = p.error.as_deref().map_or_else(|| "ok".to_owned(), |e| format!("error: {e}"));
        w.write_record([
            fmt(p.bias_volts),
            fmt(p.bias_scaled),
            fmt(p.current),
            fmt(p.flux_uniformity),
            p.newton_iters_total.to_string(),
            status,
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_convergence(path: &Path, report: &ConvergenceReport) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    let reference = match report.reference {
        etdiode_core::verify::ErrorReference::Manufactured => "manufactured".to_owned(),
        etdiode_core::verify::ErrorReference::FineStep { dt } => format!("fine_step dt={}", fmt(dt)),
    };
    let opt = |o: Option<f64>| o.map(fmt).unwrap_or_default();
    for (j, l) in report.levels.iter().enumerate() {
        let order = j.checked_sub(1).map(|k| report.orders[k]);
        w.write_record([
            l.nodes.to_string(),
            fmt(l.dx),
            fmt(l.dt),
            l.steps.to_string(),
            fmt(l.n.l2),
            fmt(l.n.max),
            fmt(l.theta.l2),
            fmt(l.theta.max),
            fmt(l.v.l2),
            fmt(l.v.max),
            opt(order.and_then(|o| o.n)),
            opt(order.and_then(|o| o.theta)),
            opt(order.and_then(|o| o.v)),
            l.newton_iters_max.to_string(),
            reference.clone(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Prints progress unless quiet.
pub fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        let _ = writeln!(std::io::stderr(), "{}", msg.as_ref());
    }
}
