//! Transient solver for a simplified 1D energy-transport model of
//! semiconductors.
//!
//! The unknowns are the electron density `n`, the electron temperature `θ`
//! and the potential `V` on `[0, 1]`:
//!
//! ```text
//! ∂t n − ∂x(∂x(nθ) + n ∂x V) = 0
//! κ0 ∂x(nθ ∂x θ)             = n/τ (θ − θ_L(x))
//! −λ² ∂xx V                   = n − C(x)
//! ```
//!
//! with Dirichlet contacts at both ends. Space is discretized with central
//! differences, time with the trapezoidal rule, and every step is solved
//! with a damped Newton iteration on a banded Jacobian.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a <= b)` also rejects NaN

pub mod assembly;
pub mod driver;
pub mod error;
pub mod model;
pub mod scaling;
pub mod solver;
pub mod verify;

pub use assembly::{Assembler, MmsForcing, SourceTerms, ZeroSource};
pub use driver::{
    current_density, flux_uniformity, iv_sweep, iv_sweep_with, run_to_steady_state, run_transient, run_transient_with,
    steady_state, step, IvPoint, MonitorRecord, Schedule, SteadyOptions, StepReport, Stepper, Trajectory,
};
pub use error::{Error, Result};
pub use model::{
    monitor_bounds, DeviceConfig, DopingProfile, Grid1D, LatticeProfile, MonitorBounds, MonitorConfig, NodeValues,
    Scheme, State, Table,
};
pub use scaling::{compute_scaled, scale_voltage, unscale_voltage, PhysicalParams, ScaledParams};
pub use solver::{banded_solve, newton_solve, BandedMatrix, Damping, NewtonOptions, NewtonReport};
