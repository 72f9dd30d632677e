//! Manufactured-solution convergence studies.
//!
//! The exact fields are
//!
//! ```text
//! n*(x, t) = 1 + a/2 · sin(πx) e^{-t}
//! θ*(x, t) = 1 + a/4 · cos(πx) e^{-t}
//! V*(x, t) = a · x(1 − x) e^{-t}
//! ```
//!
//! and the sources are the continuous operators applied to them:
//!
//! ```text
//! f_n = n_t − (nθ)_xx − (n V_x)_x
//!     = n_t − (n_xx θ + 2 n_x θ_x + n θ_xx) − (n_x V_x + n V_xx)
//! f_V = −λ² V_xx − (n − C)
//! f_θ = κ0 (nθ θ_x)_x − n/τ (θ − θ_L)
//!     = κ0 ((n_x θ + n θ_x) θ_x + nθ θ_xx) − n/τ (θ − θ_L)
//! ```

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::SourceTerms;
use crate::driver::{Schedule, Stepper};
use crate::error::{Error, Result};
use crate::model::{DeviceConfig, DopingProfile, Grid1D, LatticeProfile, MonitorConfig, NodeValues, Scheme, State};
use crate::scaling::ScaledParams;
use crate::solver::NewtonOptions;

/// Closed-form fields and their derivatives at one point.
#[derive(Debug, Clone, Copy)]
struct Jet {
    n: f64,
    n_x: f64,
    n_xx: f64,
    n_t: f64,
    th: f64,
    th_x: f64,
    th_xx: f64,
    v_x: f64,
    v_xx: f64,
}

/// Manufactured solution for κ(n, θ) = nθ.
///
/// The inherent `temperature` is the field θ*; the forcing of the energy
/// equation is `SourceTerms::temperature`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedSolution {
    pub amplitude: f64,
    pub scaled: ScaledParams,
    pub doping: DopingProfile,
    pub lattice: LatticeProfile,
}

impl ManufacturedSolution {
    pub fn new(amplitude: f64, scaled: ScaledParams, doping: DopingProfile, lattice: LatticeProfile) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(Error::InvalidParameter { name: "amplitude", reason: format!("{amplitude} not in [0, 1)") });
        }
        Ok(Self { amplitude, scaled, doping, lattice })
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        1.0 + 0.5 * self.amplitude * (PI * x).sin() * (-t).exp()
    }

    pub fn temperature(&self, x: f64, t: f64) -> f64 {
        1.0 + 0.25 * self.amplitude * (PI * x).cos() * (-t).exp()
    }

    pub fn potential(&self, x: f64, t: f64) -> f64 {
        self.amplitude * x * (1.0 - x) * (-t).exp()
    }

    pub fn state(&self, grid: &Grid1D, t: f64) -> State {
        let x = grid.positions();
        State {
            n: x.iter().map(|&x| self.density(x, t)).collect(),
            theta: x.iter().map(|&x| self.temperature(x, t)).collect(),
            v: x.iter().map(|&x| self.potential(x, t)).collect(),
            t,
        }
    }

    fn jet(&self, x: f64, t: f64) -> Jet {
        let a = self.amplitude;
        let e = (-t).exp();
        let (s, c) = (PI * x).sin_cos();
        Jet {
            n: 1.0 + 0.5 * a * s * e,
            n_x: 0.5 * a * PI * c * e,
            n_xx: -0.5 * a * PI * PI * s * e,
            n_t: -0.5 * a * s * e,
            th: 1.0 + 0.25 * a * c * e,
            th_x: -0.25 * a * PI * s * e,
            th_xx: -0.25 * a * PI * PI * c * e,
            v_x: a * (1.0 - 2.0 * x) * e,
            v_xx: -2.0 * a * e,
        }
    }
}

impl SourceTerms for ManufacturedSolution {
    fn continuity(&self, x: f64, t: f64) -> f64 {
        let j = self.jet(x, t);
        let diffusion = j.n_xx * j.th + 2.0 * j.n_x * j.th_x + j.n * j.th_xx;
        let drift = j.n_x * j.v_x + j.n * j.v_xx;
        j.n_t - diffusion - drift
    }

    fn poisson(&self, x: f64, t: f64) -> f64 {
        let j = self.jet(x, t);
        let c = self.doping.at(x).unwrap_or(f64::NAN);
        -self.scaled.lambda2 * j.v_xx - (j.n - c)
    }

    fn temperature(&self, x: f64, t: f64) -> f64 {
        let j = self.jet(x, t);
        let lattice = self.lattice.at(x).unwrap_or(f64::NAN);
        let conduction = (j.n_x * j.th + j.n * j.th_x) * j.th_x + j.n * j.th * j.th_xx;
        self.scaled.kappa0 * conduction - j.n / self.scaled.tau * (j.th - lattice)
    }

    fn boundary(&self, t: f64) -> Option<[NodeValues; 2]> {
        let at = |x| NodeValues { n: self.density(x, t), v: self.potential(x, t), theta: self.temperature(x, t) };
        Some([at(0.0), at(1.0)])
    }
}

/// Shared settings of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsSetup {
    pub amplitude: f64,
    pub scheme: Scheme,
    pub t_final: f64,
    pub scaled: ScaledParams,
    pub doping: DopingProfile,
    pub lattice: LatticeProfile,
}

impl Default for MmsSetup {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            scheme: Scheme::ConsistentTrapezoidal,
            t_final: 0.1,
            scaled: ScaledParams::default(),
            doping: DopingProfile::Constant { value: 1.0 },
            lattice: LatticeProfile::Constant { value: 1.0 },
        }
    }
}

/// Node spacing at which the default Newton tolerance is used unchanged.
const REFERENCE_DX: f64 = 1.0 / 200.0;

impl MmsSetup {
    pub fn solution(&self) -> Result<ManufacturedSolution> {
        ManufacturedSolution::new(self.amplitude, self.scaled, self.doping.clone(), self.lattice.clone())
    }

    /// Device configuration for one refinement level. The Newton tolerance
    /// grows with `1/Δx²` on fine grids, following the round-off floor of
    /// the second differences.
    pub fn config(&self, nodes: usize, dt: f64) -> DeviceConfig {
        let grid = Grid1D { nodes, dt, t_end: self.t_final };
        let ratio = REFERENCE_DX / grid.dx();
        DeviceConfig {
            grid,
            doping: self.doping.clone(),
            lattice: self.lattice.clone(),
            bias_scaled: 0.0,
            scaled: self.scaled,
            scheme: self.scheme,
            newton: NewtonOptions { tol_residual: 1e-10 * (ratio * ratio).max(1.0), ..Default::default() },
            monitor: MonitorConfig { enforce: false, ..Default::default() },
        }
    }
}

/// Discrete errors for one unknown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub max: f64,
}

/// Errors on one grid, Dirichlet nodes excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelErrors {
    pub nodes: usize,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub n: ErrorNorms,
    pub theta: ErrorNorms,
    pub v: ErrorNorms,
    pub newton_iters_max: usize,
}

/// Observed orders between two consecutive levels, from the L² errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedOrder {
    pub n: Option<f64>,
    pub theta: Option<f64>,
    pub v: Option<f64>,
}

impl ObservedOrder {
    pub fn all(&self) -> [Option<f64>; 3] {
        [self.n, self.theta, self.v]
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.all().iter().all(|o| o.is_some_and(|p| (lo..=hi).contains(&p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    Spatial,
    Temporal,
}

/// What the level errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorReference {
    /// The closed-form fields.
    Manufactured,
    /// A run on the same grid with this (much smaller) time step, so that
    /// only the temporal error remains.
    FineStep { dt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mode: StudyMode,
    pub setup: MmsSetup,
    pub reference: ErrorReference,
    pub levels: Vec<LevelErrors>,
    /// One entry per refinement pair.
    pub orders: Vec<ObservedOrder>,
}

impl ConvergenceReport {
    /// True when every order of every pair lies in `[lo, hi]`.
    pub fn orders_within(&self, lo: f64, hi: f64) -> bool {
        !self.orders.is_empty() && self.orders.iter().all(|o| o.within(lo, hi))
    }

    pub fn max_error(&self) -> f64 {
        self.levels.iter().flat_map(|l| [l.n.max, l.theta.max, l.v.max]).fold(0.0, f64::max)
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ord = |o: Option<f64>| o.map_or("-".to_string(), |p| format!("{p:.3}"));
        writeln!(f, "{:?} convergence, scheme {:?}, amplitude {}", self.mode, self.setup.scheme, self.setup.amplitude)?;
        writeln!(
            f,
            "{:>6} {:>11} {:>11} {:>11} {:>11} {:>7} {:>7} {:>7}",
            "N", "dt", "err_n", "err_theta", "err_V", "p_n", "p_theta", "p_V"
        )?;
        for (k, l) in self.levels.iter().enumerate() {
            let o = if k == 0 { ObservedOrder { n: None, theta: None, v: None } } else { self.orders[k - 1] };
            writeln!(
                f,
                "{:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>7} {:>7} {:>7}",
                l.nodes,
                l.dt,
                l.n.l2,
                l.theta.l2,
                l.v.l2,
                ord(o.n),
                ord(o.theta),
                ord(o.v)
            )?;
        }
        Ok(())
    }
}

fn norms(num: &[f64], exact: &[f64], dx: f64) -> ErrorNorms {
    let inner = 1..num.len() - 1;
    let diffs = || num[inner.clone()].iter().zip(&exact[inner.clone()]).map(|(a, b)| a - b);
    ErrorNorms { l2: (dx * diffs().map(|d| d * d).sum::<f64>()).sqrt(), max: diffs().fold(0.0, |m, d| m.max(d.abs())) }
}

/// Final state of the forced problem on one grid, plus the largest Newton
/// iteration count of the run.
///
/// The march starts from the exact density; `V` and `θ` are made consistent
/// with the discrete elliptic equations so the first trapezoidal step does
/// not average with a perturbed algebraic state.
pub fn solve_level(setup: &MmsSetup, nodes: usize, dt: f64) -> Result<(State, usize)> {
    let mms = setup.solution()?;
    let cfg = setup.config(nodes, dt);
    cfg.validate()?;
    let stepper = Stepper::new(&cfg, Some(&mms))?;
    let init = stepper.consistent_state(mms.state(&cfg.grid, 0.0))?;
    let traj = stepper.march(init, cfg.grid.steps(), &Schedule::Ends)?;
    let iters = traj.max_newton_iterations();
    let (_, last) = traj.snapshots.into_iter().last().expect("final state");
    Ok((last, iters))
}

fn level_errors(nodes: usize, dt: f64, steps: usize, num: &State, reference: &State, iters: usize) -> LevelErrors {
    let dx = 1.0 / (nodes - 1) as f64;
    LevelErrors {
        nodes,
        dx,
        dt,
        steps,
        n: norms(&num.n, &reference.n, dx),
        theta: norms(&num.theta, &reference.theta, dx),
        v: norms(&num.v, &reference.v, dx),
        newton_iters_max: iters,
    }
}

/// Errors against the manufactured solution at `t_final`.
pub fn run_level(setup: &MmsSetup, nodes: usize, dt: f64) -> Result<LevelErrors> {
    let (last, iters) = solve_level(setup, nodes, dt)?;
    let grid = Grid1D { nodes, dt, t_end: setup.t_final };
    let exact = setup.solution()?.state(&grid, last.t);
    Ok(level_errors(nodes, dt, grid.steps(), &last, &exact, iters))
}

fn order(coarse: f64, fine: f64, ratio: f64) -> Option<f64> {
    let p = (coarse / fine).ln() / ratio.ln();
    p.is_finite().then_some(p)
}

fn orders(levels: &[LevelErrors], h: impl Fn(&LevelErrors) -> f64) -> Vec<ObservedOrder> {
    levels
        .windows(2)
        .map(|w| {
            let r = h(&w[0]) / h(&w[1]);
            ObservedOrder {
                n: order(w[0].n.l2, w[1].n.l2, r),
                theta: order(w[0].theta.l2, w[1].theta.l2, r),
                v: order(w[0].v.l2, w[1].v.l2, r),
            }
        })
        .collect()
}

/// Time step that divides `t_final` into an integer number of steps no
/// longer than `target`.
fn fitting_dt(t_final: f64, target: f64) -> f64 {
    t_final / (t_final / target).ceil()
}

/// Spatial study on `N_j = (base_nodes − 1) 2^j + 1` with `Δt ≈ c Δx²`.
pub fn mms_spatial_order(
    base_nodes: usize,
    levels: usize,
    dt_factor: f64,
    setup: &MmsSetup,
) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::InvalidParameter {
            name: "levels",
            reason: format!("need at least 3 levels, got {levels}"),
        });
    }
    if !(dt_factor > 0.0 && dt_factor <= 1.0) {
        return Err(Error::InvalidParameter { name: "dt_factor", reason: format!("{dt_factor} not in (0, 1]") });
    }
    let grids: Vec<(usize, f64)> = (0..levels)
        .map(|j| {
            let nodes = (base_nodes - 1) * (1 << j) + 1;
            let dx = 1.0 / (nodes - 1) as f64;
            (nodes, fitting_dt(setup.t_final, dt_factor * dx * dx))
        })
        .collect();
    let levels = grids.par_iter().map(|&(nodes, dt)| run_level(setup, nodes, dt)).collect::<Result<Vec<_>>>()?;
    let orders = orders(&levels, |l| l.dx);
    Ok(ConvergenceReport {
        mode: StudyMode::Spatial,
        setup: setup.clone(),
        reference: ErrorReference::Manufactured,
        levels,
        orders,
    })
}

/// Refinement factor between the finest level and the temporal reference run.
pub const TEMPORAL_REFERENCE_FACTOR: usize = 32;

/// Temporal study on a fixed grid with `Δt_j = base_dt / 2^j`.
///
/// Errors are taken against a run on the same grid with a time step
/// [`TEMPORAL_REFERENCE_FACTOR`] times smaller than the finest level, which
/// cancels the spatial error that otherwise dominates on any affordable grid.
pub fn mms_temporal_order(base_dt: f64, levels: usize, nodes: usize, setup: &MmsSetup) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::InvalidParameter {
            name: "levels",
            reason: format!("need at least 3 levels, got {levels}"),
        });
    }
    let mut dts: Vec<f64> = (0..levels).map(|j| fitting_dt(setup.t_final, base_dt / (1 << j) as f64)).collect();
    let ref_dt = fitting_dt(setup.t_final, dts[levels - 1] / TEMPORAL_REFERENCE_FACTOR as f64);
    dts.push(ref_dt);
    let mut runs = dts.par_iter().map(|&dt| solve_level(setup, nodes, dt)).collect::<Result<Vec<_>>>()?;
    let (reference, _) = runs.pop().expect("reference run");
    let levels: Vec<LevelErrors> = runs
        .iter()
        .zip(&dts)
        .map(|((last, iters), &dt)| {
            level_errors(nodes, dt, (setup.t_final / dt).round() as usize, last, &reference, *iters)
        })
        .collect();
    let orders = orders(&levels, |l| l.dt);
    Ok(ConvergenceReport {
        mode: StudyMode::Temporal,
        setup: setup.clone(),
        reference: ErrorReference::FineStep { dt: ref_dt },
        levels,
        orders,
    })
}
