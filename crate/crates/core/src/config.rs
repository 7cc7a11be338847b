//! Run configuration: a strict TOML document. Every key must be present and
//! unknown keys are rejected, so a typo never silently falls back to a
//! default. `RunConfig::default()` holds the reference values and
//! [`DEFAULT_CONFIG_TOML`] is the same document as text.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseConfig, OpenSystemRates};
use crate::physics::PhysicalConstants;
use crate::pulse::{Calibration, ModeConfig, SimConfig};

pub const DEFAULT_CONFIG_TOML: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Shots per scan point.
    pub shots: usize,
    /// Directory for data files and manifests.
    pub out_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub n_max: usize,
    pub default_mode: String,
    pub detection_error: f64,
    pub modes: BTreeMap<String, ModeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub constants: PhysicalConstants,
    pub trap: TrapSection,
    pub calibration: Calibration,
    pub noise: NoiseConfig,
    pub rates: OpenSystemRates,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            run: RunSection { seed: 1, shots: 100, out_dir: "out".into() },
            constants: sim.constants,
            trap: TrapSection {
                n_max: sim.n_max,
                default_mode: sim.default_mode,
                detection_error: sim.detection_error,
                modes: sim.modes,
            },
            calibration: sim.calibration,
            noise: sim.noise,
            rates: sim.rates,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            constants: self.constants.clone(),
            n_max: self.trap.n_max,
            modes: self.trap.modes.clone(),
            default_mode: self.trap.default_mode.clone(),
            noise: self.noise.clone(),
            rates: self.rates.clone(),
            calibration: self.calibration.clone(),
            detection_error: self.trap.detection_error,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.shots == 0 {
            return Err(Error::Config("run.shots must be > 0".into()));
        }
        if self.trap.n_max == 0 {
            return Err(Error::Config("trap.n_max must be > 0".into()));
        }
        self.sim().validate().map_err(|e| Error::Config(e.to_string()))
    }
}
