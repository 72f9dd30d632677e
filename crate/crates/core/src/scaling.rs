//! Physical device constants and their dimensionless counterparts.
//!
//! Densities are scaled by `C_max`, lengths by `L`, temperatures by `T0`,
//! potentials by the thermal voltage `k_B T0 / q` and times by
//! `t* = sqrt(m_n L² / (k_B T0))`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Physical device parameters in SI units.
///
/// Field names follow the usual symbols so that parameter files read like
/// the parameter table of a device datasheet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct PhysicalParams {
    /// Boltzmann constant (J/K).
    pub k_B: f64,
    /// Vacuum permittivity (F/m).
    pub eps0: f64,
    /// Relative permittivity.
    pub eps_r: f64,
    /// Electron rest mass (kg).
    pub m0: f64,
    /// Elementary charge (C).
    pub q: f64,
    /// Maximum doping concentration (1/m³).
    pub C_max: f64,
    /// Device temperature (K).
    pub T0: f64,
    /// Device length (m).
    pub L: f64,
    /// Effective mass ratio, `m_n = m_eff_ratio * m0`.
    pub m_eff_ratio: f64,
    /// Momentum relaxation time (s).
    pub tau0: f64,
    /// Dimensionless heat-conductivity prefactor.
    pub kappa0_scaled: f64,
}

impl Default for PhysicalParams {
    /// GaAs ballistic diode, 75 nm, 300 K.
    fn default() -> Self {
        Self {
            k_B: 1.3807e-23,
            eps0: 8.8542e-12,
            eps_r: 11.7,
            m0: 9.11e-31,
            q: 1.602e-19,
            C_max: 1e24,
            T0: 300.0,
            L: 75e-9,
            m_eff_ratio: 0.067,
            tau0: 0.9e-12,
            kappa0_scaled: 4.88e-2,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("k_B", self.k_B)?;
        ensure_positive("eps0", self.eps0)?;
        ensure_positive("eps_r", self.eps_r)?;
        ensure_positive("m0", self.m0)?;
        ensure_positive("q", self.q)?;
        ensure_positive("C_max", self.C_max)?;
        ensure_positive("T0", self.T0)?;
        ensure_positive("L", self.L)?;
        ensure_positive("m_eff_ratio", self.m_eff_ratio)?;
        ensure_positive("tau0", self.tau0)?;
        ensure_positive("kappa0_scaled", self.kappa0_scaled)?;
        if self.eps_r < 1.0 {
            return Err(Error::InvalidParameter {
                name: "eps_r",
                reason: format!("relative permittivity must be >= 1, got {}", self.eps_r),
            });
        }
        if self.m_eff_ratio > 1.0 {
            return Err(Error::InvalidParameter {
                name: "m_eff_ratio",
                reason: format!("effective mass ratio must lie in (0, 1], got {}", self.m_eff_ratio),
            });
        }
        Ok(())
    }

    /// Effective electron mass `m_n` (kg).
    pub fn effective_mass(&self) -> f64 {
        self.m_eff_ratio * self.m0
    }
}

/// Dimensionless parameters consumed by the discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledParams {
    /// Squared scaled Debye length.
    pub lambda2: f64,
    /// Scaled energy relaxation time.
    pub tau: f64,
    /// Heat-conductivity prefactor.
    pub kappa0: f64,
    /// Reference time (s).
    pub t_star: f64,
    /// Thermal voltage (V).
    pub u_thermal: f64,
}

impl ScaledParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("lambda2", self.lambda2)?;
        ensure_positive("tau", self.tau)?;
        ensure_positive("kappa0", self.kappa0)?;
        ensure_positive("t_star", self.t_star)?;
        ensure_positive("u_thermal", self.u_thermal)
    }
}

impl Default for ScaledParams {
    fn default() -> Self {
        compute_scaled(&PhysicalParams::default()).expect("default parameters are valid")
    }
}

/// Converts SI device parameters into the dimensionless set.
///
/// The squared Debye length is `eps0 eps_r k_B T0 / (q² C_max L²)`, the
/// standard scaling when potentials are measured in thermal voltages.
pub fn compute_scaled(p: &PhysicalParams) -> Result<ScaledParams> {
    p.validate()?;
    let thermal_energy = p.k_B * p.T0;
    let t_star = (p.effective_mass() * p.L * p.L / thermal_energy).sqrt();
    Ok(ScaledParams {
        lambda2: p.eps0 * p.eps_r * thermal_energy / (p.q * p.q * p.C_max * p.L * p.L),
        tau: p.tau0 / t_star,
        kappa0: p.kappa0_scaled,
        t_star,
        u_thermal: thermal_energy / p.q,
    })
}

/// Applied voltage in volts to thermal-voltage units.
pub fn scale_voltage(volts: f64, s: &ScaledParams) -> f64 {
    volts / s.u_thermal
}

/// Inverse of [`scale_voltage`].
pub fn unscale_voltage(scaled: f64, s: &ScaledParams) -> f64 {
    scaled * s.u_thermal
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn default_parameters_reproduce_table_values() {
        let s = compute_scaled(&PhysicalParams::default()).unwrap();
        assert!(rel(s.tau, 3.126) < 5e-3, "tau = {}", s.tau);
        assert!(rel(s.lambda2, 3.0e-3) < 2e-2, "lambda2 = {}", s.lambda2);
        assert!(rel(s.lambda2, 2.97e-3) < 5e-3, "lambda2 = {}", s.lambda2);
        assert_eq!(s.kappa0, 4.88e-2);
    }

    #[test]
    fn doubling_length_quarters_debye_and_doubles_time() {
        let p = PhysicalParams::default();
        let q = PhysicalParams { L: 2.0 * p.L, ..p };
        let (a, b) = (compute_scaled(&p).unwrap(), compute_scaled(&q).unwrap());
        assert!(rel(b.lambda2, a.lambda2 / 4.0) < 1e-15);
        assert!(rel(b.t_star, 2.0 * a.t_star) < 1e-15);
    }

    #[test]
    fn temperature_scaling_law() {
        let p = PhysicalParams::default();
        let c = 1.7;
        let q = PhysicalParams { T0: c * p.T0, ..p };
        let (a, b) = (compute_scaled(&p).unwrap(), compute_scaled(&q).unwrap());
        assert!(rel(b.u_thermal, c * a.u_thermal) < 1e-14);
        assert!(rel(b.t_star, a.t_star / c.sqrt()) < 1e-14);
    }

    #[test]
    fn voltage_scaling() {
        let s = ScaledParams::default();
        assert_eq!(scale_voltage(0.0, &s), 0.0);
        // 1.3807e-23 * 300 / 1.602e-19 = 0.025855805... V
        let ut = 1.3807e-23 * 300.0 / 1.602e-19;
        assert!(rel(s.u_thermal, ut) < 1e-12);
        assert!(rel(scale_voltage(0.2, &s), 7.735) < 1e-3);
        assert!(rel(scale_voltage(1.0, &s), 38.68) < 1e-3);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        let p = PhysicalParams { q: 0.0, ..Default::default() };
        assert!(matches!(compute_scaled(&p), Err(Error::InvalidParameter { name: "q", .. })));
        let p = PhysicalParams { L: -1.0, ..Default::default() };
        assert!(compute_scaled(&p).is_err());
        let p = PhysicalParams { eps_r: 0.5, ..Default::default() };
        assert!(compute_scaled(&p).is_err());
        let p = PhysicalParams { m_eff_ratio: 1.5, ..Default::default() };
        assert!(compute_scaled(&p).is_err());
    }

    #[test]
    fn missing_field_is_named() {
        let mut v = serde_json::to_value(PhysicalParams::default()).unwrap();
        v.as_object_mut().unwrap().remove("tau0");
        let err = serde_json::from_value::<PhysicalParams>(v).unwrap_err();
        assert!(err.to_string().contains("tau0"), "{err}");
    }

    proptest::proptest! {
        #[test]
        fn voltage_round_trip(u in -50.0f64..50.0, t0 in 50.0f64..600.0) {
            let s = compute_scaled(&PhysicalParams { T0: t0, ..Default::default() }).unwrap();
            let back = unscale_voltage(scale_voltage(u, &s), &s);
            proptest::prop_assert!((back - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(1e-300));
        }
    }
}
