//! Run configuration files and manifests.

use std::fs;
use std::path::{Path, PathBuf};

use etdiode_core::{
    compute_scaled, scale_voltage, DeviceConfig, DopingProfile, Grid1D, LatticeProfile, MonitorConfig, NewtonOptions,
    PhysicalParams, Schedule, Scheme, SteadyOptions, Table,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn yes() -> bool {
    true
}

/// User-facing description of one device run.
///
/// Biases are given in volts and physical inputs are scaled on load. A
/// tabulated profile may come from a CSV file; the path is resolved
/// relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub physical: PhysicalParams,
    #[serde(default)]
    pub bias_volts: f64,
    pub grid: Grid1D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doping: Option<DopingProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doping_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_csv: Option<PathBuf>,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub newton: NewtonOptions,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default)]
    pub schedule: Schedule,
    /// March until the stationary test fires instead of stopping at `t_end`.
    #[serde(default = "yes")]
    pub run_to_steady: bool,
    #[serde(default)]
    pub steady: SteadyOptions,
}

impl RunConfig {
    /// Loads profile CSVs and fills every default, so that the result no
    /// longer depends on files other than itself.
    pub fn materialize(mut self, base: &Path) -> CliResult<Self> {
        if let Some(p) = self.doping_csv.take() {
            self.doping = Some(DopingProfile::Tabulated { points: Table::from_csv(base.join(p))? });
        }
        if let Some(p) = self.lattice_csv.take() {
            self.lattice = Some(LatticeProfile::Tabulated { points: Table::from_csv(base.join(p))? });
        }
        self.doping.get_or_insert(DopingProfile::BallisticDiode);
        if self.lattice.is_none() {
            return Err(CliError::Config("missing field `lattice` (or `lattice_csv`)".into()));
        }
        self.device()?;
        Ok(self)
    }

    /// The solver-level configuration. Requires a materialized config.
    pub fn device(&self) -> CliResult<DeviceConfig> {
        let scaled = compute_scaled(&self.physical)?;
        let cfg = DeviceConfig {
            grid: self.grid,
            doping: self.doping.clone().unwrap_or(DopingProfile::BallisticDiode),
            lattice: self.lattice.clone().ok_or_else(|| CliError::Config("missing field `lattice`".into()))?,
            bias_scaled: scale_voltage(self.bias_volts, &scaled),
            scaled,
            scheme: self.scheme,
            newton: self.newton,
            monitor: self.monitor,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Wall-clock timings of a command, in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load: f64,
    pub solve: f64,
    pub write: f64,
}

/// Written next to every output set. Passing it back as `--config`
/// reproduces the data files byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub scheme: Scheme,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biases: Option<Vec<f64>>,
    pub outputs: Vec<String>,
    pub timings: Timings,
}

impl RunManifest {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            scheme: config.scheme,
            config,
            biases: None,
            outputs: Vec::new(),
            timings: Timings::default(),
        }
    }
}

/// Contents of a `--config` file: a run config, or a manifest from which
/// the config and the bias list of a sweep are taken.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub biases: Option<Vec<f64>>,
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Reads a run config or a manifest and materializes it.
pub fn load(path: &Path) -> CliResult<Loaded> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = parse(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let is_manifest = value.get("command").is_some() && value.get("config").is_some();
    if is_manifest {
        let m: RunManifest = parse(&text, path)?;
        Ok(Loaded { config: m.config.materialize(base)?, biases: m.biases })
    } else {
        let c: RunConfig = parse(&text, path)?;
        Ok(Loaded { config: c.materialize(base)?, biases: None })
    }
}

/// Reads physical parameters; every field is required.
pub fn load_physical(path: &Path) -> CliResult<PhysicalParams> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text, path)
}
