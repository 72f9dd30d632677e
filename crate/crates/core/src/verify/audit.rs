use std::fmt;

use serde::{Deserialize, Serialize};

use crate::driver::{MonitorRecord, Trajectory};
use crate::model::{MonitorBounds, State};

/// Slack on the temperature envelope.
pub const THETA_SLACK: f64 = 1e-8;
/// Slack on density positivity.
pub const DENSITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NegativeDensity,
    TemperatureBelowMin,
    TemperatureAboveMax,
    DensityBelowEnvelope,
    DensityAboveEnvelope,
}

/// A monitored quantity leaving its envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: usize,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at node {} (t = {}): value {:.6e}, bound {:.6e}",
            self.kind, self.node, self.t, self.value, self.bound
        )
    }
}

fn hard(r: &MonitorRecord, b: &MonitorBounds) -> Option<Violation> {
    let v = |kind, node, value, bound| Some(Violation { kind, node, t: r.t, value, bound });
    if !(r.min_n >= -DENSITY_SLACK) {
        return v(ViolationKind::NegativeDensity, r.argmin_n, r.min_n, 0.0);
    }
    if !(r.min_theta >= b.m - THETA_SLACK) {
        return v(ViolationKind::TemperatureBelowMin, r.argmin_theta, r.min_theta, b.m);
    }
    if !(r.max_theta <= b.big_m + THETA_SLACK) {
        return v(ViolationKind::TemperatureAboveMax, r.argmax_theta, r.max_theta, b.big_m);
    }
    None
}

fn soft(r: &MonitorRecord, b: &MonitorBounds) -> Option<Violation> {
    let lower = b.k0 * (-b.alpha * r.t).exp();
    let upper = b.big_k0 * (b.beta * r.t).exp();
    if r.min_n < lower {
        Some(Violation {
            kind: ViolationKind::DensityBelowEnvelope,
            node: r.argmin_n,
            t: r.t,
            value: r.min_n,
            bound: lower,
        })
    } else if r.max_n > upper {
        Some(Violation {
            kind: ViolationKind::DensityAboveEnvelope,
            node: r.argmax_n,
            t: r.t,
            value: r.max_n,
            bound: upper,
        })
    } else {
        None
    }
}

/// First hard violation in `state`, if any.
pub fn check_hard(state: &State, bounds: &MonitorBounds) -> Option<Violation> {
    hard(&MonitorRecord::of(state), bounds)
}

/// Verdicts over a whole trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorAudit {
    pub bounds: MonitorBounds,
    pub steps: usize,
    /// `n ≥ 0` and `m ≤ θ ≤ M` at every step.
    pub hard_pass: bool,
    /// `k0 e^{-αt} ≤ n ≤ K0 e^{βt}` at every step; informational.
    pub soft_pass: bool,
    pub hard_violations: Vec<Violation>,
    pub soft_violations: Vec<Violation>,
    /// Extremes over the whole run.
    pub min_n: f64,
    pub max_n: f64,
    pub min_theta: f64,
    pub max_theta: f64,
}

/// Checks every logged step against the envelopes. Never fails.
pub fn audit_monitors(traj: &Trajectory, bounds: &MonitorBounds) -> MonitorAudit {
    let mut audit = MonitorAudit {
        bounds: *bounds,
        steps: traj.monitor_log.len(),
        hard_pass: true,
        soft_pass: true,
        hard_violations: Vec::new(),
        soft_violations: Vec::new(),
        min_n: f64::INFINITY,
        max_n: f64::NEG_INFINITY,
        min_theta: f64::INFINITY,
        max_theta: f64::NEG_INFINITY,
    };
    for r in &traj.monitor_log {
        audit.min_n = audit.min_n.min(r.min_n);
        audit.max_n = audit.max_n.max(r.max_n);
        audit.min_theta = audit.min_theta.min(r.min_theta);
        audit.max_theta = audit.max_theta.max(r.max_theta);
        if let Some(v) = hard(r, bounds) {
            audit.hard_pass = false;
            audit.hard_violations.push(v);
        }
        if let Some(v) = soft(r, bounds) {
            audit.soft_pass = false;
            audit.soft_violations.push(v);
        }
    }
    audit
}
