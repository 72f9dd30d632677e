mod common;

use common::{min_ratio, paper_config};
use etdiode_core::verify::{ManufacturedSolution, ViolationKind};
use etdiode_core::*;

#[test]
fn first_step_of_cooling_diode_respects_bounds() {
    let cfg = paper_config(LatticeProfile::Cooling, 0.2);
    let stepper = Stepper::new(&cfg, None).unwrap();
    let init = stepper.initial_state().unwrap();
    let (next, report) = stepper.step(&init).unwrap();
    assert!(report.solves[0].converged);
    assert!((next.t - 1.25e-4).abs() < 1e-18);
    for i in 0..next.len() {
        assert!(next.n[i].is_finite() && next.v[i].is_finite());
        assert!(next.n[i] >= 0.0);
        assert!(next.theta[i] >= 0.5 - 1e-8 && next.theta[i] <= 0.625 + 1e-8);
    }
}

fn residual_at_exact(nodes: usize, dt: f64) -> f64 {
    let setup = verify::MmsSetup::default();
    let mms: ManufacturedSolution = setup.solution().unwrap();
    let cfg = setup.config(nodes, dt);
    let asm = Assembler::new(&cfg).unwrap();
    let t = 0.05;
    let old = mms.state(&cfg.grid, t - dt);
    let new = mms.state(&cfg.grid, t);
    let r = asm.residual(&new, &old, Some(&mms)).unwrap();
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn exact_manufactured_state_has_truncation_sized_residual() {
    let coarse = residual_at_exact(51, 2e-3);
    let fine = residual_at_exact(101, 1e-3);
    // O(Δx² + Δt²): halving both divides the residual by about four
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}, coarse {coarse:e}, fine {fine:e}");
    assert!(coarse < 1e-2);
}

#[test]
fn equilibrium_snapshots_are_identical() {
    let cfg = DeviceConfig::equilibrium(41, 1e-3, 0.2);
    let traj = run_transient_with(&cfg, &Schedule::Every { k: 20 }).unwrap();
    assert_eq!(traj.steps(), 200);
    assert_eq!(traj.snapshots.len(), 11);
    let first = &traj.snapshots[0].1;
    for (_, s) in &traj.snapshots {
        assert_eq!(s.n, first.n);
        assert_eq!(s.theta, first.theta);
        assert_eq!(s.v, first.v);
    }
    assert!(traj.snapshots.windows(2).all(|w| w[1].1.t > w[0].1.t));
}

#[test]
fn cooling_steady_state_is_hotter_than_lattice() {
    let cfg = paper_config(LatticeProfile::Cooling, 0.2);
    let s = steady_state(&cfg).unwrap();
    let lattice = cfg.lattice_nodes().unwrap();
    for (i, (th, tl)) in s.theta.iter().zip(&lattice).enumerate().skip(1).take(s.len() - 2) {
        assert!(*th >= tl - 1e-8, "node {i}: {th} < {tl}");
    }
}

#[test]
fn equilibrium_steady_state_needs_one_step() {
    let cfg = DeviceConfig::equilibrium(21, 1e-3, 1.0);
    let traj = run_to_steady_state(&cfg, &SteadyOptions::default(), &Schedule::Ends).unwrap();
    assert_eq!(traj.steps(), 1);
}

#[test]
fn steady_state_budget_exhaustion() {
    let cfg = paper_config(LatticeProfile::Heating, 0.2);
    let opts = SteadyOptions { max_steps: 5, ..Default::default() };
    assert!(matches!(run_to_steady_state(&cfg, &opts, &Schedule::Ends), Err(Error::NoSteadyState { steps: 5, .. })));
}

#[test]
fn high_bias_depletes_left_contact_region() {
    for lattice in [LatticeProfile::Cooling, LatticeProfile::Heating] {
        let cfg = paper_config(lattice, 1.0);
        let s = steady_state(&cfg).unwrap();
        let left = min_ratio(&cfg, &s.n, 0.0, 0.2);
        let right = min_ratio(&cfg, &s.n, 0.8, 1.0);
        assert!(left < 0.91 && left < right, "left {left}, right {right}");
    }
}

#[test]
fn steady_state_independent_of_time_step() {
    let cfg = paper_config(LatticeProfile::Cooling, 1.0);
    let a = steady_state(&cfg).unwrap();
    let mut coarse = cfg.clone();
    coarse.grid.dt = 2.5e-4;
    let b = steady_state(&coarse).unwrap();
    let diff = a.n.iter().zip(&b.n).chain(a.theta.iter().zip(&b.theta)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-6, "diff {diff:e}");
}

#[test]
fn steady_current_is_uniform() {
    let cfg = paper_config(LatticeProfile::Heating, 1.0);
    let s = steady_state(&cfg).unwrap();
    let j = current_density(&s, &cfg).unwrap();
    assert_eq!(j.len(), 200);
    assert!(flux_uniformity(&j) <= 1e-6);
    assert!(j[0] > 0.0);
}

#[test]
fn iv_sweep_examples() {
    let eq = DeviceConfig::equilibrium(21, 1e-3, 1.0);
    let p = iv_sweep(&eq, &[0.0]);
    assert_eq!(p.len(), 1);
    assert!(p[0].is_ok());
    assert!(p[0].current.abs() < 1e-10);

    let cfg = paper_config(LatticeProfile::Heating, 0.0);
    let pts = iv_sweep(&cfg, &[0.2, 1.0, 0.2]);
    assert!(pts.iter().all(IvPoint::is_ok));
    assert!(pts[1].current > pts[0].current);
    assert_eq!(pts[0], pts[2]);
    assert!((pts[0].bias_scaled - 7.735).abs() < 1e-2);
}

#[test]
fn iv_sweep_records_failures_and_continues() {
    let cfg = paper_config(LatticeProfile::Heating, 0.0);
    let opts = SteadyOptions { max_steps: 3, ..Default::default() };
    let pts = iv_sweep_with(&cfg, &[0.2, 0.0], &opts);
    assert!(!pts[0].is_ok());
    assert!(pts[0].current.is_nan());
    // the flat-bias point is not stationary either (the doping is not),
    // but the sweep still returns a row for it
    assert_eq!(pts.len(), 2);
}

#[test]
fn runs_are_bit_reproducible() {
    let mut cfg = paper_config(LatticeProfile::Cooling, 1.0);
    cfg.grid.t_end = 0.01;
    assert_eq!(run_transient(&cfg).unwrap(), run_transient(&cfg).unwrap());
}

#[test]
fn monitor_violation_aborts_with_location() {
    let mut cfg = paper_config(LatticeProfile::Cooling, 0.2);
    cfg.grid.t_end = 0.01;
    let mut stepper = Stepper::new(&cfg, None).unwrap();
    let mut bounds = cfg.monitor_bounds().unwrap();
    bounds.big_m = 0.6;
    stepper.set_enforced_bounds(Some(bounds));
    let init = stepper.initial_state().unwrap();
    match stepper.march(init, 10, &Schedule::Ends) {
        Err(Error::MonitorViolation(v)) => {
            assert_eq!(v.kind, ViolationKind::TemperatureAboveMax);
            assert!(v.node == 0 || v.node == 200, "contacts hold θ = 0.625, got node {}", v.node);
            assert!((v.t - 1.25e-4).abs() < 1e-15);
        }
        other => panic!("expected violation, got {other:?}"),
    }
}

#[test]
fn heating_temperature_stays_in_envelope() {
    let cfg = paper_config(LatticeProfile::Heating, 1.0);
    let traj = run_to_steady_state(&cfg, &SteadyOptions::default(), &Schedule::Ends).unwrap();
    let audit = verify::audit_monitors(&traj, &cfg.monitor_bounds().unwrap());
    assert!(audit.hard_pass, "{:?}", audit.hard_violations.first());
    assert!(audit.min_theta >= 1.0 - 1e-8 && audit.max_theta <= 1.75 + 1e-8);
}
