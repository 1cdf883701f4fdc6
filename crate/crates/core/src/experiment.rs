//! Experiment configuration shared by the command line and the browser demo.
//! Defaults reproduce the reference run: α = 0.1, ρ = 0.04, Gaussian noise,
//! 10⁵ trials per hypothesis.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Format, DEFAULT_PRECISION};
use crate::model::{NoiseModel, TestConfig};
use crate::oracle::DEFAULT_GRID_POINTS;

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 12_345;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Laplace,
}

impl NoiseKind {
    pub fn model(self) -> NoiseModel {
        match self {
            NoiseKind::Gaussian => NoiseModel::Gaussian,
            NoiseKind::Laplace => NoiseModel::laplace(),
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseKind::Gaussian),
            "laplace" => Ok(NoiseKind::Laplace),
            other => Err(Error::InvalidNoise(format!(
                "unknown noise `{other}` (expected gaussian or laplace)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSection {
    pub rho: f64,
    pub alpha: f64,
    pub noise: NoiseKind,
    /// Horizon; `None` uses 50 × ⌈T/(2ρ)⌉.
    pub max_steps: Option<usize>,
}

impl Default for TestSection {
    fn default() -> Self {
        TestSection {
            rho: 0.04,
            alpha: 0.1,
            noise: NoiseKind::Gaussian,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub enabled: bool,
    pub grid_points: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            enabled: true,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub rho: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory receiving the output files.
    pub path: PathBuf,
    pub format: Format,
    /// Fractional digits in scientific notation.
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            path: PathBuf::from("out"),
            format: Format::Csv,
            precision: DEFAULT_PRECISION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub test: TestSection,
    /// Trajectories per hypothesis.
    pub trials: u64,
    pub master_seed: u64,
    pub oracle: OracleSection,
    pub sweep: Option<Vec<SweepEntry>>,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            test: TestSection::default(),
            trials: DEFAULT_TRIALS,
            master_seed: DEFAULT_SEED,
            oracle: OracleSection::default(),
            sweep: None,
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Checks every field and builds the test configuration.
    pub fn test_config(&self) -> Result<TestConfig> {
        let mut c = TestConfig::new(self.test.rho, self.test.alpha, self.test.noise.model())?;
        if let Some(n) = self.test.max_steps {
            c = c.with_max_steps(n)?;
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<TestConfig> {
        if self.trials == 0 {
            return Err(Error::Domain {
                name: "trials",
                value: 0.0,
                domain: "[1, ∞)",
            });
        }
        if self.oracle.grid_points < 3 {
            return Err(Error::Domain {
                name: "grid_points",
                value: self.oracle.grid_points as f64,
                domain: "[3, ∞)",
            });
        }
        if !(1..=17).contains(&self.output.precision) {
            return Err(Error::Domain {
                name: "precision",
                value: self.output.precision as f64,
                domain: "[1, 17]",
            });
        }
        for s in self.sweep.iter().flatten() {
            TestConfig::new(s.rho, s.alpha, NoiseModel::Gaussian)?;
        }
        self.test_config()
    }

    /// Sweep points, falling back to the default ρ values at this α.
    pub fn sweep_points(&self) -> Vec<(f64, f64)> {
        match &self.sweep {
            Some(s) => s.iter().map(|e| (e.rho, e.alpha)).collect(),
            None => crate::verify::SWEEP_RHOS.iter().map(|&r| (r, self.test.alpha)).collect(),
        }
    }
}
