//! Verification harness: manufactured solutions and invariant audits.

mod audit;
mod mms;

pub use audit::{audit_monitors, check_hard, MonitorAudit, Violation, ViolationKind, DENSITY_SLACK, THETA_SLACK};
pub use mms::{
    mms_spatial_order, mms_temporal_order, run_level, solve_level, ConvergenceReport, ErrorNorms, ErrorReference,
    LevelErrors, ManufacturedSolution, MmsSetup, ObservedOrder, StudyMode, TEMPORAL_REFERENCE_FACTOR,
};
