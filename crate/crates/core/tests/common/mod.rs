#![allow(dead_code)]

use etdiode_core::{scale_voltage, DeviceConfig, LatticeProfile, ScaledParams};

pub fn paper_config(lattice: LatticeProfile, volts: f64) -> DeviceConfig {
    DeviceConfig::ballistic_diode(lattice, scale_voltage(volts, &ScaledParams::default()))
}

/// Minimum of n/C over nodes with x in [lo, hi].
pub fn min_ratio(cfg: &DeviceConfig, n: &[f64], lo: f64, hi: f64) -> f64 {
    let c = cfg.doping_nodes().unwrap();
    let x = cfg.grid.positions();
    (0..n.len())
        .filter(|&i| x[i] >= lo - 1e-12 && x[i] <= hi + 1e-12)
        .map(|i| n[i] / c[i])
        .fold(f64::INFINITY, f64::min)
}
