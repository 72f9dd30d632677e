//! Time marching, steady states, terminal current and bias sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, MmsForcing, STRIDE};
use crate::error::{Error, Result};
use crate::model::{DeviceConfig, MonitorBounds, State};
use crate::scaling::scale_voltage;
use crate::solver::{newton_solve, NewtonOptions, NewtonReport};
use crate::verify::check_hard;

/// Maximum number of Δt halvings when a step fails to converge.
pub const MAX_HALVINGS: u32 = 4;

/// Newton solves performed for one nominal time step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepReport {
    /// One entry per (sub)step that was accepted.
    pub solves: Vec<NewtonReport>,
    /// Depth of Δt halving needed, 0 if the nominal step converged.
    pub halvings: u32,
}

impl StepReport {
    pub fn max_iterations(&self) -> usize {
        self.solves.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    pub fn total_iterations(&self) -> usize {
        self.solves.iter().map(|r| r.iterations).sum()
    }
}

/// Extremes of the unknowns after one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub min_n: f64,
    pub argmin_n: usize,
    pub max_n: f64,
    pub argmax_n: usize,
    pub min_theta: f64,
    pub argmin_theta: usize,
    pub max_theta: f64,
    pub argmax_theta: usize,
}

fn arg_extremes(v: &[f64]) -> (f64, usize, f64, usize) {
    let mut out = (f64::INFINITY, 0, f64::NEG_INFINITY, 0);
    for (i, &x) in v.iter().enumerate() {
        if x < out.0 || x.is_nan() {
            out.0 = x;
            out.1 = i;
        }
        if x > out.2 {
            out.2 = x;
            out.3 = i;
        }
    }
    out
}

impl MonitorRecord {
    pub fn of(s: &State) -> Self {
        let (min_n, argmin_n, max_n, argmax_n) = arg_extremes(&s.n);
        let (min_theta, argmin_theta, max_theta, argmax_theta) = arg_extremes(&s.theta);
        Self { t: s.t, min_n, argmin_n, max_n, argmax_n, min_theta, argmin_theta, max_theta, argmax_theta }
    }
}

/// Output of a time march.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    /// `(step index, state)` pairs in increasing time.
    pub snapshots: Vec<(usize, State)>,
    pub newton_reports: Vec<StepReport>,
    pub monitor_log: Vec<MonitorRecord>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.monitor_log.len()
    }

    pub fn final_state(&self) -> Option<&State> {
        self.snapshots.last().map(|(_, s)| s)
    }

    pub fn max_newton_iterations(&self) -> usize {
        self.newton_reports.iter().map(StepReport::max_iterations).max().unwrap_or(0)
    }

    pub fn total_newton_iterations(&self) -> usize {
        self.newton_reports.iter().map(StepReport::total_iterations).sum()
    }
}

/// Which intermediate states a march keeps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Steps 0, 1, 10, 100, ... plus the final one.
    #[default]
    Geometric,
    /// Every `k`-th step plus the final one.
    Every { k: usize },
    /// Only the initial and final states.
    Ends,
}

impl Schedule {
    fn keeps(&self, step: usize) -> bool {
        match self {
            Self::Geometric => {
                let mut p = 1;
                while p < step {
                    p *= 10;
                }
                step == 0 || p == step
            }
            Self::Every { k } => *k > 0 && step.is_multiple_of(*k),
            Self::Ends => step == 0,
        }
    }
}

/// Stopping rule for steady-state marches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyOptions {
    /// Threshold on `max |n^k − n^{k−1}| / Δt` (and the same for θ).
    pub rate_tol: f64,
    pub max_steps: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { rate_tol: 1e-8, max_steps: 1_000_000 }
    }
}

/// Implicit time stepper for one device configuration.
pub struct Stepper<'a> {
    asm: Assembler,
    forcing: MmsForcing<'a>,
    newton: NewtonOptions,
    enforce: Option<MonitorBounds>,
    initial_density: Vec<f64>,
    bias: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &DeviceConfig, forcing: MmsForcing<'a>) -> Result<Self> {
        let asm = Assembler::new(cfg)?;
        let enforce = if cfg.monitor.enforce { Some(cfg.monitor_bounds()?) } else { None };
        Ok(Self {
            asm,
            forcing,
            newton: cfg.newton,
            enforce,
            initial_density: cfg.initial_density()?,
            bias: cfg.bias_scaled,
        })
    }

    pub fn assembler(&self) -> &Assembler {
        &self.asm
    }

    pub fn set_enforced_bounds(&mut self, bounds: Option<MonitorBounds>) {
        self.enforce = bounds;
    }

    /// Initial state with `n = n_I` and `V`, `θ` solving their (elliptic)
    /// equations for that density. Newton starts from `θ_L` and the linear
    /// potential between the contacts.
    pub fn initial_state(&self) -> Result<State> {
        let x = self.asm.positions();
        let guess = State {
            n: self.initial_density.clone(),
            theta: self.asm.lattice().to_vec(),
            v: x.iter().map(|&xi| xi * self.bias).collect(),
            t: 0.0,
        };
        self.consistent_state(guess)
    }

    /// Keeps `guess.n` and solves the Poisson and temperature equations
    /// at `guess.t` for `V` and `θ`, starting from the guessed values.
    pub fn consistent_state(&self, guess: State) -> Result<State> {
        let nodes = self.asm.nodes();
        guess.check_len(nodes)?;
        let t = guess.t;
        let frozen = guess.pack();
        let asm = &self.asm;
        let forcing = self.forcing;
        let residual = |xk: &[f64]| {
            let mut r = vec![0.0; xk.len()];
            asm.residual_packed(xk, t, &frozen, forcing, &mut r);
            for i in 1..nodes - 1 {
                r[STRIDE * i] = xk[STRIDE * i] - frozen[STRIDE * i];
            }
            Ok(r)
        };
        let jacobian = |xk: &[f64]| {
            let mut j = asm.jacobian_packed(xk);
            for i in 1..nodes - 1 {
                j.zero_row(STRIDE * i);
                j.set(STRIDE * i, STRIDE * i, 1.0);
            }
            Ok(j)
        };
        let opts = self.newton_options(&self.asm, &frozen, &frozen);
        let (mut x0, _) = newton_solve(residual, jacobian, frozen.clone(), &opts)?;
        for i in 0..nodes {
            x0[STRIDE * i] = frozen[STRIDE * i];
        }
        for (node, b) in [0, nodes - 1].into_iter().zip(asm.boundary_at(t, forcing)) {
            x0[STRIDE * node] = b.n;
            x0[STRIDE * node + 1] = b.v;
            x0[STRIDE * node + 2] = b.theta;
        }
        Ok(State::unpack(&x0, t))
    }

    /// Newton options with the tolerance raised to the residual's round-off
    /// floor, which exceeds the absolute tolerance at large biases.
    fn newton_options(&self, asm: &Assembler, xk: &[f64], xo: &[f64]) -> NewtonOptions {
        let floor = asm.roundoff_floor(xk, xo);
        NewtonOptions { tol_residual: self.newton.tol_residual.max(floor), ..self.newton }
    }

    fn solve(&self, asm: &Assembler, prev: &State, t_new: f64) -> Result<(State, NewtonReport)> {
        let old = prev.pack();
        let mut guess = old.clone();
        let last = asm.nodes() - 1;
        let contacts = asm.boundary_at(t_new, self.forcing);
        let pin = |x: &mut [f64]| {
            for (node, b) in [0, last].into_iter().zip(contacts) {
                x[STRIDE * node] = b.n;
                x[STRIDE * node + 1] = b.v;
                x[STRIDE * node + 2] = b.theta;
            }
        };
        pin(&mut guess);
        let residual = |xk: &[f64]| {
            let mut r = vec![0.0; xk.len()];
            asm.residual_packed(xk, t_new, &old, self.forcing, &mut r);
            Ok(r)
        };
        let jacobian = |xk: &[f64]| Ok(asm.jacobian_packed(xk));
        let opts = self.newton_options(asm, &guess, &old);
        let (mut x, report) = newton_solve(residual, jacobian, guess, &opts)?;
        // Dirichlet rows are satisfied to round-off; store the exact values
        pin(&mut x);
        Ok((State::unpack(&x, t_new), report))
    }

    fn advance(&self, asm: &Assembler, prev: &State, t_new: f64, depth: u32, report: &mut StepReport) -> Result<State> {
        match self.solve(asm, prev, t_new) {
            Ok((s, r)) => {
                report.solves.push(r);
                Ok(s)
            }
            Err(Error::NoConvergence(_)) if depth < MAX_HALVINGS => {
                report.halvings = report.halvings.max(depth + 1);
                let half = asm.with_time_step(0.5 * asm.dt());
                let t_mid = 0.5 * (prev.t + t_new);
                let mid = self.advance(&half, prev, t_mid, depth + 1, report)?;
                self.advance(&half, &mid, t_new, depth + 1, report)
            }
            Err(e) => Err(e),
        }
    }

    /// One nominal step to `t_new`; halves Δt on Newton failure.
    pub fn step_to(&self, prev: &State, t_new: f64) -> Result<(State, StepReport)> {
        let mut report = StepReport::default();
        let asm = if (t_new - prev.t - self.asm.dt()).abs() <= 1e-12 * self.asm.dt().max(t_new.abs()) {
            self.asm.clone()
        } else {
            self.asm.with_time_step(t_new - prev.t)
        };
        match self.advance(&asm, prev, t_new, 0, &mut report) {
            Ok(s) => Ok((s, report)),
            Err(e @ Error::NoConvergence(_)) => {
                Err(Error::StepFailure { t: t_new, retries: MAX_HALVINGS, source: Box::new(e) })
            }
            Err(e) => Err(Error::StepFailure { t: t_new, retries: report.halvings, source: Box::new(e) }),
        }
    }

    pub fn step(&self, prev: &State) -> Result<(State, StepReport)> {
        self.step_to(prev, prev.t + self.asm.dt())
    }

    fn check(&self, s: &State) -> Result<()> {
        match self.enforce.as_ref().and_then(|b| check_hard(s, b)) {
            Some(v) => Err(Error::MonitorViolation(v)),
            None => Ok(()),
        }
    }

    /// Marches `steps` nominal steps from `init`.
    pub fn march(&self, init: State, steps: usize, schedule: &Schedule) -> Result<Trajectory> {
        self.march_until(init, steps, schedule, |_, _| false).map(|(t, _)| t)
    }

    /// Marches until `stop(prev, next)` holds or `max_steps` is reached.
    /// Returns whether the stop condition fired.
    pub fn march_until(
        &self,
        init: State,
        max_steps: usize,
        schedule: &Schedule,
        mut stop: impl FnMut(&State, &State) -> bool,
    ) -> Result<(Trajectory, bool)> {
        let t0 = init.t;
        let dt = self.asm.dt();
        let mut traj = Trajectory { snapshots: vec![(0, init.clone())], ..Default::default() };
        let mut cur = init;
        let mut stopped = false;
        for k in 1..=max_steps {
            let (next, report) = self.step_to(&cur, t0 + k as f64 * dt)?;
            traj.monitor_log.push(MonitorRecord::of(&next));
            traj.newton_reports.push(report);
            self.check(&next)?;
            stopped = stop(&cur, &next);
            cur = next;
            if stopped || k == max_steps {
                traj.snapshots.push((k, cur));
                break;
            }
            if schedule.keeps(k) {
                traj.snapshots.push((k, cur.clone()));
            }
        }
        Ok((traj, stopped))
    }
}

/// One nominal step of the plain device problem.
pub fn step(prev: &State, cfg: &DeviceConfig) -> Result<(State, StepReport)> {
    Stepper::new(cfg, None)?.step(prev)
}

/// Marches from the initial state to `t_end`.
pub fn run_transient(cfg: &DeviceConfig) -> Result<Trajectory> {
    run_transient_with(cfg, &Schedule::default())
}

pub fn run_transient_with(cfg: &DeviceConfig, schedule: &Schedule) -> Result<Trajectory> {
    let stepper = Stepper::new(cfg, None)?;
    let init = stepper.initial_state()?;
    if let Some(v) = stepper.enforce.as_ref().and_then(|b| check_hard(&init, b)) {
        return Err(Error::MonitorViolation(v));
    }
    stepper.march(init, cfg.grid.steps(), schedule)
}

/// Largest `|n^k − n^{k−1}| / Δt` and `|θ^k − θ^{k−1}| / Δt`.
pub fn time_derivative_norm(prev: &State, next: &State) -> f64 {
    let dt = next.t - prev.t;
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    d(&next.n, &prev.n).max(d(&next.theta, &prev.theta)) / dt
}

/// Marches until the discrete time derivative drops below `opts.rate_tol`.
/// The final snapshot is the steady state.
pub fn run_to_steady_state(cfg: &DeviceConfig, opts: &SteadyOptions, schedule: &Schedule) -> Result<Trajectory> {
    let stepper = Stepper::new(cfg, None)?;
    let init = stepper.initial_state()?;
    let mut rate = f64::INFINITY;
    let (traj, reached) = stepper.march_until(init, opts.max_steps, schedule, |a, b| {
        rate = time_derivative_norm(a, b);
        rate <= opts.rate_tol
    })?;
    if !reached {
        return Err(Error::NoSteadyState { steps: opts.max_steps, rate });
    }
    Ok(traj)
}

pub fn steady_state(cfg: &DeviceConfig) -> Result<State> {
    let traj = run_to_steady_state(cfg, &SteadyOptions::default(), &Schedule::Ends)?;
    Ok(traj.final_state().cloned().expect("march keeps the final state"))
}

/// Particle flux `(nθ)_x + n V_x` on the `N − 1` cell faces.
pub fn current_density(state: &State, cfg: &DeviceConfig) -> Result<Vec<f64>> {
    state.check_len(cfg.grid.nodes)?;
    let dx = cfg.grid.dx();
    Ok((0..state.len() - 1)
        .map(|i| {
            let diffusion = state.n[i + 1] * state.theta[i + 1] - state.n[i] * state.theta[i];
            let drift = 0.5 * (state.n[i + 1] + state.n[i]) * (state.v[i + 1] - state.v[i]);
            (diffusion + drift) / dx
        })
        .collect())
}

/// Largest deviation from the mean face current, relative to the mean `|J|`.
pub fn flux_uniformity(faces: &[f64]) -> f64 {
    let len = faces.len() as f64;
    let mean = faces.iter().sum::<f64>() / len;
    let mean_abs = faces.iter().map(|j| j.abs()).sum::<f64>() / len;
    let dev = faces.iter().map(|j| (j - mean).abs()).fold(0.0, f64::max);
    if mean_abs > 0.0 {
        dev / mean_abs
    } else {
        0.0
    }
}

/// One point of a current-voltage characteristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub bias_volts: f64,
    pub bias_scaled: f64,
    /// Mean face current at steady state; NaN when the point failed.
    pub current: f64,
    pub flux_uniformity: f64,
    pub newton_iters_total: usize,
    /// `None` on success, otherwise the failure message.
    pub error: Option<String>,
}

impl IvPoint {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn iv_point(cfg: &DeviceConfig, volts: f64, opts: &SteadyOptions) -> IvPoint {
    let bias_scaled = scale_voltage(volts, &cfg.scaled);
    let mut point = IvPoint {
        bias_volts: volts,
        bias_scaled,
        current: f64::NAN,
        flux_uniformity: f64::NAN,
        newton_iters_total: 0,
        error: None,
    };
    let cfg = DeviceConfig { bias_scaled, ..cfg.clone() };
    let result = run_to_steady_state(&cfg, opts, &Schedule::Ends).and_then(|traj| {
        let faces = current_density(traj.final_state().expect("final state"), &cfg)?;
        Ok((traj.total_newton_iterations(), faces))
    });
    match result {
        Ok((iters, faces)) => {
            point.current = faces.iter().sum::<f64>() / faces.len() as f64;
            point.flux_uniformity = flux_uniformity(&faces);
            point.newton_iters_total = iters;
        }
        Err(e) => point.error = Some(e.to_string()),
    }
    point
}

/// Steady-state current for each bias (in volts); points run in parallel.
pub fn iv_sweep(cfg: &DeviceConfig, biases_volts: &[f64]) -> Vec<IvPoint> {
    iv_sweep_with(cfg, biases_volts, &SteadyOptions::default())
}

pub fn iv_sweep_with(cfg: &DeviceConfig, biases_volts: &[f64], opts: &SteadyOptions) -> Vec<IvPoint> {
    biases_volts.par_iter().map(|&u| iv_point(cfg, u, opts)).collect()
}
