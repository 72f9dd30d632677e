//! Discrete problem definition: grid, device profiles, boundary data and
//! the invariant envelopes of the existence theory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::scaling::ScaledParams;
use crate::solver::NewtonOptions;

fn check_unit_interval(x: f64) -> Result<()> {
    // tolerate round-off from i * dx
    if (-1e-12..=1.0 + 1e-12).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfDomain(x))
    }
}

/// Uniform grid on [0, 1] plus the time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1D {
    /// Number of nodes, including both contacts.
    pub nodes: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl Grid1D {
    pub fn new(nodes: usize, dt: f64, t_end: f64) -> Result<Self> {
        let g = Self { nodes, dt, t_end };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 3 {
            return Err(Error::InvalidParameter {
                name: "nodes",
                reason: format!("need at least 3 grid nodes, got {}", self.nodes),
            });
        }
        ensure_positive("dt", self.dt)?;
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must be finite and non-negative, got {}", self.t_end),
            });
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.nodes - 1) as f64
    }

    /// Node `i`; the last node is exactly 1.
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            1.0
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    /// Number of nominal steps needed to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Piecewise-linear table over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Table {
    points: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for Table {
    type Error = Error;

    fn try_from(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Table("need at least two points".into()));
        }
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::Table("abscissae must be strictly increasing".into()));
        }
        let (first, last) = (points[0][0], points[points.len() - 1][0]);
        if first > 1e-12 || last < 1.0 - 1e-12 {
            return Err(Error::Table(format!("table covers [{first}, {last}], not [0, 1]")));
        }
        if let Some(p) = points.iter().find(|p| !(p[1].is_finite() && p[1] > 0.0)) {
            return Err(Error::Table(format!("value {} at x = {} is not strictly positive", p[1], p[0])));
        }
        Ok(Self { points })
    }
}

impl From<Table> for Vec<[f64; 2]> {
    fn from(t: Table) -> Self {
        t.points
    }
}

impl Table {
    /// Reads `x,value` rows; a leading header row is skipped.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut points = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Table(format!("row {}: expected 2 columns, found {}", row + 1, record.len())));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(v)) => points.push([x, v]),
                _ if row == 0 => continue,
                _ => return Err(Error::Table(format!("row {}: unparsable number", row + 1))),
            }
        }
        Self::try_from(points)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        let k = p.partition_point(|q| q[0] <= x).clamp(1, p.len() - 1);
        let ([x0, y0], [x1, y1]) = (p[k - 1], p[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Doping concentration `C(x)` in units of `C_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DopingProfile {
    /// n⁺–n–n⁺ structure: `1 + 0.25 (tanh(100x − 60) − tanh(100x − 40))`.
    BallisticDiode,
    Constant {
        value: f64,
    },
    Tabulated {
        points: Table,
    },
}

impl DopingProfile {
    pub fn at(&self, x: f64) -> Result<f64> {
        check_unit_interval(x)?;
        Ok(match self {
            Self::BallisticDiode => 1.0 + 0.25 * ((100.0 * x - 60.0).tanh() - (100.0 * x - 40.0).tanh()),
            Self::Constant { value } => *value,
            Self::Tabulated { points } => points.eval(x),
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => ensure_positive("doping.value", *value),
            _ => Ok(()),
        }
    }
}

/// Lattice temperature `θ_L(x)` in units of `T0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeProfile {
    /// `½(x − ½)² + ½`, colder in the channel than at the contacts.
    Cooling,
    /// `7/4 − 3(x − ½)²`, hotter in the channel.
    Heating,
    Constant {
        value: f64,
    },
    Tabulated {
        points: Table,
    },
}

impl LatticeProfile {
    pub fn at(&self, x: f64) -> Result<f64> {
        check_unit_interval(x)?;
        let d = x - 0.5;
        Ok(match self {
            Self::Cooling => 0.5 * d * d + 0.5,
            Self::Heating => 1.75 - 3.0 * d * d,
            Self::Constant { value } => *value,
            Self::Tabulated { points } => points.eval(x),
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => ensure_positive("lattice.value", *value),
            _ => Ok(()),
        }
    }
}

/// Time discretization of the continuity equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Trapezoidal rule with the ½ weight on both diffusion and drift.
    #[default]
    ConsistentTrapezoidal,
    /// The diffusion sum of both levels without the ½ weight.
    PaperLiteral,
    /// Backward Euler reference, used to anchor the temporal-order study.
    #[doc(hidden)]
    ImplicitEuler,
}

/// Inputs of the invariant envelopes that are not fixed by the device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Lower slope of the conductivity for large densities.
    pub kappa1: f64,
    /// Density threshold below which the conductivity is linear.
    pub n_star_lo: f64,
    /// Density threshold above which the slope bound holds.
    pub n_star_hi: f64,
    /// Abort a run when the hard temperature/positivity envelope is left.
    pub enforce: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { kappa1: 1.0, n_star_lo: 1.0, n_star_hi: 1.0, enforce: true }
    }
}

/// Everything needed to pose the discrete problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub grid: Grid1D,
    pub doping: DopingProfile,
    pub lattice: LatticeProfile,
    /// Applied bias in thermal voltages; the right contact sits at this potential.
    pub bias_scaled: f64,
    #[serde(default)]
    pub scaled: ScaledParams,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub newton: NewtonOptions,
    #[serde(default)]
    pub monitor: MonitorConfig,
}

/// Values of the three unknowns at a single node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeValues {
    pub n: f64,
    pub v: f64,
    pub theta: f64,
}

impl DeviceConfig {
    /// Paper-style ballistic diode at the given scaled bias, N = 201, Δt = 1.25e-4.
    pub fn ballistic_diode(lattice: LatticeProfile, bias_scaled: f64) -> Self {
        Self {
            grid: Grid1D { nodes: 201, dt: 1.25e-4, t_end: 1.0 },
            doping: DopingProfile::BallisticDiode,
            lattice,
            bias_scaled,
            scaled: ScaledParams::default(),
            scheme: Scheme::default(),
            newton: NewtonOptions::default(),
            monitor: MonitorConfig::default(),
        }
    }

    /// Flat device (C ≡ 1, θ_L ≡ 1) with no bias; its uniform state is stationary.
    pub fn equilibrium(nodes: usize, dt: f64, t_end: f64) -> Self {
        Self {
            grid: Grid1D { nodes, dt, t_end },
            doping: DopingProfile::Constant { value: 1.0 },
            lattice: LatticeProfile::Constant { value: 1.0 },
            bias_scaled: 0.0,
            scaled: ScaledParams::default(),
            scheme: Scheme::default(),
            newton: NewtonOptions::default(),
            monitor: MonitorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.doping.validate()?;
        self.lattice.validate()?;
        self.scaled.validate()?;
        self.newton.validate()?;
        ensure_positive("monitor.kappa1", self.monitor.kappa1)?;
        ensure_positive("monitor.n_star_lo", self.monitor.n_star_lo)?;
        ensure_positive("monitor.n_star_hi", self.monitor.n_star_hi)?;
        if !self.bias_scaled.is_finite() {
            return Err(Error::InvalidParameter { name: "bias_scaled", reason: "must be finite".into() });
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn doping_nodes(&self) -> Result<Vec<f64>> {
        (0..self.grid.nodes).map(|i| self.doping.at(self.grid.x(i))).collect()
    }

    pub fn lattice_nodes(&self) -> Result<Vec<f64>> {
        (0..self.grid.nodes).map(|i| self.lattice.at(self.grid.x(i))).collect()
    }

    /// Contact values at x = 0 and x = 1.
    pub fn boundary_values(&self) -> Result<[NodeValues; 2]> {
        Ok([
            NodeValues { n: self.doping.at(0.0)?, v: 0.0, theta: self.lattice.at(0.0)? },
            NodeValues { n: self.doping.at(1.0)?, v: self.bias_scaled, theta: self.lattice.at(1.0)? },
        ])
    }

    /// Initial density, equal to the doping.
    pub fn initial_density(&self) -> Result<Vec<f64>> {
        self.doping_nodes()
    }
}

/// Nodal unknowns at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub n: Vec<f64>,
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn uniform(nodes: usize, n: f64, theta: f64, v: f64) -> Self {
        Self { n: vec![n; nodes], theta: vec![theta; nodes], v: vec![v; nodes], t: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn check_len(&self, nodes: usize) -> Result<()> {
        for len in [self.n.len(), self.theta.len(), self.v.len()] {
            if len != nodes {
                return Err(Error::SizeMismatch { expected: nodes, found: len });
            }
        }
        Ok(())
    }

    /// Interleaved `(n_i, V_i, θ_i)` vector.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.len());
        for i in 0..self.len() {
            out.extend_from_slice(&[self.n[i], self.v[i], self.theta[i]]);
        }
        out
    }

    pub fn unpack(packed: &[f64], t: f64) -> Self {
        let nodes = packed.len() / 3;
        let mut s =
            Self { n: Vec::with_capacity(nodes), theta: Vec::with_capacity(nodes), v: Vec::with_capacity(nodes), t };
        for c in packed.chunks_exact(3) {
            s.n.push(c[0]);
            s.v.push(c[1]);
            s.theta.push(c[2]);
        }
        s
    }

    pub fn max_abs_diff(&self, other: &State) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        d(&self.n, &other.n).max(d(&self.theta, &other.theta)).max(d(&self.v, &other.v))
    }
}

/// Envelopes for the temperature and the density.
///
/// `m ≤ θ ≤ M` and `n ≥ 0` are hard invariants; `k0 e^{-αt} ≤ n ≤ K0 e^{βt}`
/// is only reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorBounds {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub k0: f64,
    #[serde(rename = "K0")]
    pub big_k0: f64,
    pub alpha: f64,
    pub beta: f64,
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Evaluates the envelope constants on the grid nodes.
pub fn monitor_bounds(cfg: &DeviceConfig, kappa1: f64, n_star_lo: f64, n_star_hi: f64) -> Result<MonitorBounds> {
    ensure_positive("kappa1", kappa1)?;
    let lattice = cfg.lattice_nodes()?;
    let doping = cfg.doping_nodes()?;
    let initial = cfg.initial_density()?;
    let [left, right] = cfg.boundary_values()?;

    let (lat_lo, lat_hi) = min_max(&lattice);
    let (_, c_hi) = min_max(&doping);
    let (ni_lo, ni_hi) = min_max(&initial);
    let (td_lo, td_hi) = (left.theta.min(right.theta), left.theta.max(right.theta));
    let (nd_lo, nd_hi) = (left.n.min(right.n), left.n.max(right.n));

    let big_m = lat_hi.max(td_hi);
    let s = &cfg.scaled;
    Ok(MonitorBounds {
        m: lat_lo.min(td_lo),
        big_m,
        k0: n_star_lo.min(ni_lo).min(nd_lo),
        big_k0: n_star_hi.max(ni_hi).max(nd_hi).max(c_hi),
        alpha: lat_hi / s.tau + 1.0 / s.lambda2,
        beta: big_m / (s.tau * kappa1),
    })
}

impl DeviceConfig {
    /// [`monitor_bounds`] with the configured thresholds.
    pub fn monitor_bounds(&self) -> Result<MonitorBounds> {
        monitor_bounds(self, self.monitor.kappa1, self.monitor.n_star_lo, self.monitor.n_star_hi)
    }
}
