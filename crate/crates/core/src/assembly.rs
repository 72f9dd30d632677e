//! Discrete residual of one implicit time step and its banded Jacobian.
//!
//! Unknowns are interleaved per node as `(n_i, V_i, θ_i)`, so row `3i`
//! holds the continuity equation, `3i + 1` Poisson and `3i + 2` the
//! temperature equation. Three-point stencils then give a lower and upper
//! bandwidth of 5.

use crate::error::Result;
use crate::model::{DeviceConfig, NodeValues, Scheme, State};
use crate::solver::BandedMatrix;

/// Unknowns per node.
pub const STRIDE: usize = 3;
/// Half-bandwidth of the Jacobian under interleaved ordering.
pub const BANDWIDTH: usize = 5;

/// Right-hand-side sources added to the three equations, plus optional
/// time-dependent contact values.
pub trait SourceTerms: Send + Sync {
    fn continuity(&self, x: f64, t: f64) -> f64;
    fn poisson(&self, x: f64, t: f64) -> f64;
    fn temperature(&self, x: f64, t: f64) -> f64;

    /// Overrides the contact values of the device at time `t`.
    fn boundary(&self, _t: f64) -> Option<[NodeValues; 2]> {
        None
    }
}

/// Sources that vanish identically.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSource;

impl SourceTerms for ZeroSource {
    fn continuity(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn poisson(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn temperature(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Optional forcing; `None` is the plain device problem.
pub type MmsForcing<'a> = Option<&'a dyn SourceTerms>;

/// Per-level weights of the diffusion and drift terms in the continuity row.
#[derive(Debug, Clone, Copy)]
struct Weights {
    diff_new: f64,
    diff_old: f64,
    drift_new: f64,
    drift_old: f64,
    /// Forcing is evaluated at `t_k - source_lag * dt`.
    source_lag: f64,
}

impl Weights {
    fn of(scheme: Scheme) -> Self {
        match scheme {
            Scheme::ConsistentTrapezoidal => {
                Self { diff_new: 0.5, diff_old: 0.5, drift_new: 0.5, drift_old: 0.5, source_lag: 0.5 }
            }
            Scheme::PaperLiteral => {
                Self { diff_new: 1.0, diff_old: 1.0, drift_new: 0.5, drift_old: 0.5, source_lag: 0.5 }
            }
            Scheme::ImplicitEuler => {
                Self { diff_new: 1.0, diff_old: 0.0, drift_new: 1.0, drift_old: 0.0, source_lag: 0.0 }
            }
        }
    }
}

#[inline]
fn n(x: &[f64], i: usize) -> f64 {
    x[STRIDE * i]
}
#[inline]
fn v(x: &[f64], i: usize) -> f64 {
    x[STRIDE * i + 1]
}
#[inline]
fn th(x: &[f64], i: usize) -> f64 {
    x[STRIDE * i + 2]
}
#[inline]
fn g(x: &[f64], i: usize) -> f64 {
    n(x, i) * th(x, i)
}

/// Grid-resolved coefficients of the discrete problem.
#[derive(Debug, Clone)]
pub struct Assembler {
    nodes: usize,
    dx: f64,
    dt: f64,
    lambda2: f64,
    tau: f64,
    kappa0: f64,
    scheme: Scheme,
    weights: Weights,
    x: Vec<f64>,
    doping: Vec<f64>,
    lattice: Vec<f64>,
    boundary: [NodeValues; 2],
}

impl Assembler {
    pub fn new(cfg: &DeviceConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            nodes: cfg.grid.nodes,
            dx: cfg.grid.dx(),
            dt: cfg.grid.dt,
            lambda2: cfg.scaled.lambda2,
            tau: cfg.scaled.tau,
            kappa0: cfg.scaled.kappa0,
            scheme: cfg.scheme,
            weights: Weights::of(cfg.scheme),
            x: cfg.grid.positions(),
            doping: cfg.doping_nodes()?,
            lattice: cfg.lattice_nodes()?,
            boundary: cfg.boundary_values()?,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn doping(&self) -> &[f64] {
        &self.doping
    }

    pub fn lattice(&self) -> &[f64] {
        &self.lattice
    }

    /// Copy with a different time step.
    pub fn with_time_step(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    /// Contact values at time `t`, honoring forcing overrides.
    pub fn boundary_at(&self, t: f64, forcing: MmsForcing<'_>) -> [NodeValues; 2] {
        forcing.and_then(|f| f.boundary(t)).unwrap_or(self.boundary)
    }

    fn diffusion(&self, x: &[f64], i: usize) -> f64 {
        (g(x, i + 1) - 2.0 * g(x, i) + g(x, i - 1)) / (self.dx * self.dx)
    }

    fn drift(&self, x: &[f64], i: usize) -> f64 {
        ((n(x, i + 1) + n(x, i)) * (v(x, i + 1) - v(x, i)) - (n(x, i) + n(x, i - 1)) * (v(x, i) - v(x, i - 1)))
            / (2.0 * self.dx * self.dx)
    }

    fn continuity_row(&self, xk: &[f64], xo: &[f64], i: usize, tk: f64, forcing: MmsForcing<'_>) -> f64 {
        let w = &self.weights;
        let mut r =
            (n(xk, i) - n(xo, i)) / self.dt - w.diff_new * self.diffusion(xk, i) - w.drift_new * self.drift(xk, i);
        if w.diff_old != 0.0 || w.drift_old != 0.0 {
            r -= w.diff_old * self.diffusion(xo, i) + w.drift_old * self.drift(xo, i);
        }
        if let Some(f) = forcing {
            r -= f.continuity(self.x[i], tk - w.source_lag * self.dt);
        }
        r
    }

    fn poisson_row(&self, xk: &[f64], i: usize, tk: f64, forcing: MmsForcing<'_>) -> f64 {
        let lap = (v(xk, i + 1) - 2.0 * v(xk, i) + v(xk, i - 1)) / (self.dx * self.dx);
        let mut r = -self.lambda2 * lap - (n(xk, i) - self.doping[i]);
        if let Some(f) = forcing {
            r -= f.poisson(self.x[i], tk);
        }
        r
    }

    fn temperature_row(&self, xk: &[f64], i: usize, tk: f64, forcing: MmsForcing<'_>) -> f64 {
        let k = self.kappa0 / (2.0 * self.dx * self.dx);
        let right = (g(xk, i + 1) + g(xk, i)) * (th(xk, i + 1) - th(xk, i));
        let left = (g(xk, i) + g(xk, i - 1)) * (th(xk, i) - th(xk, i - 1));
        let mut r = k * (right - left) - n(xk, i) / self.tau * (th(xk, i) - self.lattice[i]);
        if let Some(f) = forcing {
            r -= f.temperature(self.x[i], tk);
        }
        r
    }

    /// Full residual on interleaved vectors; `out` has length `3N`.
    pub fn residual_packed(&self, xk: &[f64], tk: f64, xo: &[f64], forcing: MmsForcing<'_>, out: &mut [f64]) {
        let last = self.nodes - 1;
        let bc = self.boundary_at(tk, forcing);
        for (node, b) in [(0, bc[0]), (last, bc[1])] {
            out[STRIDE * node] = n(xk, node) - b.n;
            out[STRIDE * node + 1] = v(xk, node) - b.v;
            out[STRIDE * node + 2] = th(xk, node) - b.theta;
        }
        for i in 1..last {
            out[STRIDE * i] = self.continuity_row(xk, xo, i, tk, forcing);
            out[STRIDE * i + 1] = self.poisson_row(xk, i, tk, forcing);
            out[STRIDE * i + 2] = self.temperature_row(xk, i, tk, forcing);
        }
    }

    /// Round-off level of the residual: `ε` times the largest row sum of
    /// absolute stencil terms at the two levels.
    pub fn roundoff_floor(&self, xk: &[f64], xo: &[f64]) -> f64 {
        let h2 = self.dx * self.dx;
        let w = &self.weights;
        let ga = |x: &[f64], i: usize| (n(x, i) * th(x, i)).abs();
        let diff = |x: &[f64], i: usize| (ga(x, i + 1) + 2.0 * ga(x, i) + ga(x, i - 1)) / h2;
        let drift = |x: &[f64], i: usize| {
            let (vl, vc, vr) = (v(x, i - 1).abs(), v(x, i).abs(), v(x, i + 1).abs());
            ((n(x, i + 1) + n(x, i)).abs() * (vr + vc) + (n(x, i) + n(x, i - 1)).abs() * (vc + vl)) / (2.0 * h2)
        };
        let mut worst = 0.0f64;
        for i in 1..self.nodes - 1 {
            let continuity = (n(xk, i).abs() + n(xo, i).abs()) / self.dt
                + w.diff_new * diff(xk, i)
                + w.diff_old * diff(xo, i)
                + w.drift_new * drift(xk, i)
                + w.drift_old * drift(xo, i);
            let poisson = self.lambda2 * (v(xk, i + 1).abs() + 2.0 * v(xk, i).abs() + v(xk, i - 1).abs()) / h2
                + n(xk, i).abs()
                + self.doping[i].abs();
            let k = self.kappa0 / (2.0 * h2);
            let temperature = k
                * ((ga(xk, i + 1) + ga(xk, i)) * (th(xk, i + 1).abs() + th(xk, i).abs())
                    + (ga(xk, i) + ga(xk, i - 1)) * (th(xk, i).abs() + th(xk, i - 1).abs()))
                + n(xk, i).abs() / self.tau * (th(xk, i).abs() + self.lattice[i].abs());
            worst = worst.max(continuity).max(poisson).max(temperature);
        }
        f64::EPSILON * worst
    }

    /// Analytic Jacobian of [`Self::residual_packed`] with respect to the new level.
    pub fn jacobian_packed(&self, xk: &[f64]) -> BandedMatrix {
        let nodes = self.nodes;
        let mut jac = BandedMatrix::zeros(STRIDE * nodes, BANDWIDTH, BANDWIDTH);
        for r in 0..STRIDE {
            jac.set(r, r, 1.0);
            let last = STRIDE * (nodes - 1) + r;
            jac.set(last, last, 1.0);
        }
        let h2 = self.dx * self.dx;
        let w = &self.weights;
        let (cn, cv, ct) = (|j: usize| STRIDE * j, |j: usize| STRIDE * j + 1, |j: usize| STRIDE * j + 2);
        for i in 1..nodes - 1 {
            let (im, ip) = (i - 1, i + 1);

            // continuity
            let row = cn(i);
            let d = w.diff_new / h2;
            let a = w.drift_new / (2.0 * h2);
            let (dv_r, dv_l) = (v(xk, ip) - v(xk, i), v(xk, i) - v(xk, im));
            let (s_r, s_l) = (n(xk, ip) + n(xk, i), n(xk, i) + n(xk, im));
            jac.set(row, cn(im), -d * th(xk, im) + a * dv_l);
            jac.set(row, cn(i), 1.0 / self.dt + 2.0 * d * th(xk, i) - a * (dv_r - dv_l));
            jac.set(row, cn(ip), -d * th(xk, ip) - a * dv_r);
            jac.set(row, ct(im), -d * n(xk, im));
            jac.set(row, ct(i), 2.0 * d * n(xk, i));
            jac.set(row, ct(ip), -d * n(xk, ip));
            jac.set(row, cv(im), -a * s_l);
            jac.set(row, cv(i), a * (s_r + s_l));
            jac.set(row, cv(ip), -a * s_r);

            // Poisson
            let row = cv(i);
            let l = self.lambda2 / h2;
            jac.set(row, cv(im), -l);
            jac.set(row, cv(i), 2.0 * l);
            jac.set(row, cv(ip), -l);
            jac.set(row, cn(i), -1.0);

            // temperature
            let row = ct(i);
            let k = self.kappa0 / (2.0 * h2);
            let (dt_r, dt_l) = (th(xk, ip) - th(xk, i), th(xk, i) - th(xk, im));
            let (f_r, f_l) = (g(xk, ip) + g(xk, i), g(xk, i) + g(xk, im));
            jac.set(row, cn(ip), k * th(xk, ip) * dt_r);
            jac.set(row, cn(i), k * th(xk, i) * (dt_r - dt_l) - (th(xk, i) - self.lattice[i]) / self.tau);
            jac.set(row, cn(im), -k * th(xk, im) * dt_l);
            jac.set(row, ct(ip), k * (n(xk, ip) * dt_r + f_r));
            jac.set(row, ct(i), k * (n(xk, i) * (dt_r - dt_l) - f_r - f_l) - n(xk, i) / self.tau);
            jac.set(row, ct(im), k * (f_l - n(xk, im) * dt_l));
        }
        jac
    }

    fn check(&self, s: &State) -> Result<()> {
        s.check_len(self.nodes)
    }

    /// Per-node continuity residual; contact rows hold `n − n_D`.
    pub fn residual_continuity(&self, k: &State, km1: &State, forcing: MmsForcing<'_>) -> Result<Vec<f64>> {
        self.check(k)?;
        self.check(km1)?;
        Ok(self.family(k, km1, forcing, 0))
    }

    /// Per-node temperature residual; contact rows hold `θ − θ_D`.
    pub fn residual_temperature(&self, k: &State, forcing: MmsForcing<'_>) -> Result<Vec<f64>> {
        self.check(k)?;
        Ok(self.family(k, k, forcing, 2))
    }

    /// Per-node Poisson residual; contact rows hold `V − V_D`.
    pub fn residual_poisson(&self, k: &State, forcing: MmsForcing<'_>) -> Result<Vec<f64>> {
        self.check(k)?;
        Ok(self.family(k, k, forcing, 1))
    }

    fn family(&self, k: &State, km1: &State, forcing: MmsForcing<'_>, component: usize) -> Vec<f64> {
        let mut out = vec![0.0; STRIDE * self.nodes];
        self.residual_packed(&k.pack(), k.t, &km1.pack(), forcing, &mut out);
        out.into_iter().skip(component).step_by(STRIDE).collect()
    }

    /// Interleaved residual of the coupled step.
    pub fn residual(&self, k: &State, km1: &State, forcing: MmsForcing<'_>) -> Result<Vec<f64>> {
        self.check(k)?;
        self.check(km1)?;
        let mut out = vec![0.0; STRIDE * self.nodes];
        self.residual_packed(&k.pack(), k.t, &km1.pack(), forcing, &mut out);
        Ok(out)
    }

    pub fn jacobian(&self, k: &State) -> Result<BandedMatrix> {
        self.check(k)?;
        Ok(self.jacobian_packed(&k.pack()))
    }
}

pub fn residual_continuity(k: &State, km1: &State, cfg: &DeviceConfig, forcing: MmsForcing<'_>) -> Result<Vec<f64>> {
    Assembler::new(cfg)?.residual_continuity(k, km1, forcing)
}

pub fn residual_temperature(k: &State, cfg: &DeviceConfig, forcing: MmsForcing<'_>) -> Result<Vec<f64>> {
    Assembler::new(cfg)?.residual_temperature(k, forcing)
}

pub fn residual_poisson(k: &State, cfg: &DeviceConfig, forcing: MmsForcing<'_>) -> Result<Vec<f64>> {
    Assembler::new(cfg)?.residual_poisson(k, forcing)
}

/// The Jacobian depends only on the new level; `km1` is accepted for symmetry
/// with the residual and checked for size.
pub fn assemble_jacobian(k: &State, km1: &State, cfg: &DeviceConfig) -> Result<BandedMatrix> {
    let asm = Assembler::new(cfg)?;
    km1.check_len(asm.nodes())?;
    asm.jacobian(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DopingProfile, LatticeProfile};
    use crate::scaling::ScaledParams;
    use proptest::prelude::*;

    fn unit_cfg(nodes: usize, dt: f64) -> DeviceConfig {
        let mut cfg = DeviceConfig::equilibrium(nodes, dt, 1.0);
        cfg.scaled = ScaledParams { lambda2: 1.0, tau: 1.0, kappa0: 1.0, ..ScaledParams::default() };
        cfg
    }

    fn state(n: &[f64], theta: &[f64], v: &[f64]) -> State {
        State { n: n.to_vec(), theta: theta.to_vec(), v: v.to_vec(), t: 0.0 }
    }

    #[test]
    fn uniform_equilibrium_has_zero_residual() {
        let cfg = DeviceConfig::equilibrium(11, 1e-3, 1.0);
        let s = State::uniform(11, 1.0, 1.0, 0.0);
        let r = Assembler::new(&cfg).unwrap().residual(&s, &s, None).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn continuity_hand_stencil() {
        let cfg = unit_cfg(3, 1.0);
        let s = state(&[1.0, 2.0, 1.0], &[1.0; 3], &[0.0; 3]);
        let r = residual_continuity(&s, &s, &cfg, None).unwrap();
        assert_eq!(r[1], 8.0);
        // contacts pinned to C = 1
        assert_eq!((r[0], r[2]), (0.0, 0.0));

        let mut literal = cfg.clone();
        literal.scheme = Scheme::PaperLiteral;
        assert_eq!(residual_continuity(&s, &s, &literal, None).unwrap()[1], 16.0);
    }

    #[test]
    fn temperature_hand_stencil() {
        let mut cfg = unit_cfg(3, 1.0);
        cfg.lattice = LatticeProfile::Constant { value: 1.5 };
        let s = state(&[1.0; 3], &[1.0, 1.5, 2.0], &[0.0; 3]);
        let r = residual_temperature(&s, &cfg, None).unwrap();
        assert!((r[1] - 1.0).abs() < 1e-15, "{}", r[1]);

        let flat = state(&[1.0; 3], &[1.5; 3], &[0.0; 3]);
        assert!(residual_temperature(&flat, &cfg, None).unwrap()[1] == 0.0);
    }

    struct Const(f64);
    impl SourceTerms for Const {
        fn continuity(&self, _: f64, _: f64) -> f64 {
            self.0
        }
        fn poisson(&self, _: f64, _: f64) -> f64 {
            self.0
        }
        fn temperature(&self, _: f64, _: f64) -> f64 {
            self.0
        }
    }

    #[test]
    fn zero_density_leaves_only_forcing() {
        let cfg = unit_cfg(5, 1.0);
        let s = state(&[0.0; 5], &[1.0, 2.0, 0.5, 3.0, 1.0], &[0.0; 5]);
        let r = residual_temperature(&s, &cfg, Some(&Const(0.75))).unwrap();
        for ri in &r[1..4] {
            assert_eq!(*ri, -0.75);
        }
    }

    #[test]
    fn poisson_hand_stencil() {
        let cfg = unit_cfg(3, 1.0);
        let s = state(&[1.0; 3], &[1.0; 3], &[0.0, 1.0, 0.0]);
        assert_eq!(residual_poisson(&s, &cfg, None).unwrap()[1], 8.0);

        let lin: Vec<f64> = (0..7).map(|i| 0.3 + i as f64 / 6.0 * 2.0).collect();
        let mut cfg = unit_cfg(7, 1.0);
        cfg.bias_scaled = 2.0;
        let s = state(&[1.0; 7], &[1.0; 7], &lin);
        assert!(residual_poisson(&s, &cfg, None).unwrap()[1..6].iter().all(|r| r.abs() < 1e-12));

        let mut cfg = unit_cfg(5, 1.0);
        cfg.scaled.lambda2 = 0.123;
        let s = state(&[2.0; 5], &[1.0; 5], &[0.0; 5]);
        assert!(residual_poisson(&s, &cfg, None).unwrap()[1..4].iter().all(|&r| r == -1.0));
    }

    #[test]
    fn zero_forcing_is_bit_identical() {
        let mut cfg = DeviceConfig::ballistic_diode(LatticeProfile::Cooling, 3.0);
        cfg.grid.nodes = 21;
        let asm = Assembler::new(&cfg).unwrap();
        let k = wobbly(21, 0.3);
        let mut o = wobbly(21, 0.7);
        o.t = -1e-3;
        assert_eq!(asm.residual(&k, &o, None).unwrap(), asm.residual(&k, &o, Some(&ZeroSource)).unwrap());
    }

    #[test]
    fn forcing_cancels_residual() {
        // a source equal to the unforced residual annihilates it
        struct Table(Vec<f64>, Vec<f64>, Vec<f64>, f64);
        impl SourceTerms for Table {
            fn continuity(&self, x: f64, _: f64) -> f64 {
                self.0[(x / self.3).round() as usize]
            }
            fn poisson(&self, x: f64, _: f64) -> f64 {
                self.1[(x / self.3).round() as usize]
            }
            fn temperature(&self, x: f64, _: f64) -> f64 {
                self.2[(x / self.3).round() as usize]
            }
        }
        let cfg = DeviceConfig::ballistic_diode(LatticeProfile::Heating, 5.0);
        let asm = Assembler::new(&cfg).unwrap();
        let (k, o) = (wobbly(201, 0.1), wobbly(201, 0.2));
        let f = Table(
            asm.residual_continuity(&k, &o, None).unwrap(),
            asm.residual_poisson(&k, None).unwrap(),
            asm.residual_temperature(&k, None).unwrap(),
            asm.dx(),
        );
        let r = asm.residual(&k, &o, Some(&f)).unwrap();
        let interior = &r[STRIDE..STRIDE * 200];
        assert!(interior.iter().all(|&x| x == 0.0));
    }

    fn wobbly(nodes: usize, phase: f64) -> State {
        let x = |i: usize| i as f64 / (nodes - 1) as f64;
        State {
            n: (0..nodes).map(|i| 1.0 + 0.3 * (7.0 * x(i) + phase).sin()).collect(),
            theta: (0..nodes).map(|i| 1.0 + 0.2 * (5.0 * x(i) - phase).cos()).collect(),
            v: (0..nodes).map(|i| 3.0 * x(i) + 0.1 * (11.0 * x(i) * phase).sin()).collect(),
            t: 0.0,
        }
    }

    #[test]
    fn poisson_rows_of_jacobian() {
        let cfg = DeviceConfig::equilibrium(11, 1e-3, 1.0);
        let asm = Assembler::new(&cfg).unwrap();
        let jac = asm.jacobian(&State::uniform(11, 1.0, 1.0, 0.0)).unwrap();
        let l = cfg.scaled.lambda2 / (asm.dx() * asm.dx());
        let row = STRIDE * 4 + 1;
        assert_eq!(jac.get(row, STRIDE * 3 + 1), -l);
        assert_eq!(jac.get(row, STRIDE * 5 + 1), -l);
        assert_eq!(jac.get(row, row), 2.0 * l);
        assert_eq!(jac.get(row, STRIDE * 4), -1.0);
        for r in [0, 1, 2, 30, 31, 32] {
            assert_eq!(jac.row_nnz(r), 1);
            assert_eq!(jac.get(r, r), 1.0);
        }
        assert_eq!(jac.lower_bandwidth(), BANDWIDTH);
        assert_eq!(jac.upper_bandwidth(), BANDWIDTH);
    }

    #[test]
    fn discrete_conservation_telescopes() {
        let cfg = DeviceConfig::ballistic_diode(LatticeProfile::Cooling, 7.0);
        let asm = Assembler::new(&cfg).unwrap();
        let (k, o) = (wobbly(201, 0.4), wobbly(201, 0.9));
        let r = asm.residual_continuity(&k, &o, None).unwrap();
        let lhs: f64 = (1..200).map(|i| (k.n[i] - o.n[i]) / asm.dt() - r[i]).sum();
        let jk = crate::driver::current_density(&k, &cfg).unwrap();
        let jo = crate::driver::current_density(&o, &cfg).unwrap();
        let rhs = 0.5 * ((jk[199] - jk[0]) + (jo[199] - jo[0])) / asm.dx();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    /// Central-difference Jacobian column by column.
    fn fd_jacobian(asm: &Assembler, xk: &[f64], xo: &[f64]) -> Vec<Vec<f64>> {
        let m = xk.len();
        let mut cols = vec![vec![0.0; m]; m];
        let (mut rp, mut rm) = (vec![0.0; m], vec![0.0; m]);
        let mut x = xk.to_vec();
        for j in 0..m {
            let h = 1e-7 * xk[j].abs().max(1.0);
            x[j] = xk[j] + h;
            asm.residual_packed(&x, 0.0, xo, None, &mut rp);
            x[j] = xk[j] - h;
            asm.residual_packed(&x, 0.0, xo, None, &mut rm);
            x[j] = xk[j];
            for i in 0..m {
                cols[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        cols
    }

    fn jacobian_error(cfg: &DeviceConfig, xk: &[f64], xo: &[f64]) -> f64 {
        let asm = Assembler::new(cfg).unwrap();
        let fd = fd_jacobian(&asm, xk, xo);
        let an = asm.jacobian_packed(xk);
        let scale = an.max_abs();
        let mut worst = 0.0f64;
        for (i, row) in fd.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                worst = worst.max((an.get(i, j) - f).abs() / scale);
            }
        }
        worst
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn analytic_jacobian_matches_finite_differences(
            nodes in 3usize..=21,
            vals in proptest::collection::vec(0.1f64..2.0, 126),
            scheme in prop_oneof![Just(Scheme::ConsistentTrapezoidal), Just(Scheme::PaperLiteral), Just(Scheme::ImplicitEuler)],
        ) {
            let mut cfg = DeviceConfig::ballistic_diode(LatticeProfile::Heating, 1.0);
            cfg.grid.nodes = nodes;
            cfg.grid.dt = 1e-3;
            cfg.scheme = scheme;
            cfg.doping = DopingProfile::BallisticDiode;
            let xk = &vals[..3 * nodes];
            let xo = &vals[63..63 + 3 * nodes];
            prop_assert!(jacobian_error(&cfg, xk, xo) < 1e-6);
        }

        #[test]
        fn poisson_translation_invariant(shift in -10.0f64..10.0, phase in 0.0f64..3.0) {
            let cfg = DeviceConfig::ballistic_diode(LatticeProfile::Cooling, 2.0);
            let s = wobbly(201, phase);
            let mut t = s.clone();
            t.v.iter_mut().for_each(|v| *v += shift);
            let (a, b) = (residual_poisson(&s, &cfg, None).unwrap(), residual_poisson(&t, &cfg, None).unwrap());
            for i in 1..200 {
                prop_assert!((a[i] - b[i]).abs() < 1e-7 * (1.0 + a[i].abs()));
            }
        }
    }
}
