use std::fs;
use std::path::Path;

use sprt_info::experiment::{ExperimentConfig, NoiseKind};
use sprt_info::io::Format;

use crate::commands::Failure;
use crate::Overrides;

/// Reads a configuration file; the format follows the extension (TOML by default).
pub fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
pub fn to_toml(c: &ExperimentConfig) -> Result<String, Failure> {
    toml::to_string(c).map_err(|e| Failure::Config(e.to_string()))
}

/// Configuration file (or defaults) with the flags applied on top, validated.
pub fn resolve(o: &Overrides) -> Result<ExperimentConfig, Failure> {
    let mut c = match &o.config {
        Some(p) => load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = o.alpha {
        c.test.alpha = v;
    }
    if let Some(v) = o.rho {
        c.test.rho = v;
    }
    if let Some(v) = o.trials {
        c.trials = v;
    }
    if let Some(v) = o.seed {
        c.master_seed = v;
    }
    if let Some(v) = o.max_steps {
        c.test.max_steps = Some(v);
    }
    if let Some(v) = &o.noise {
        c.test.noise = v.parse::<NoiseKind>().map_err(|e| Failure::Config(e.to_string()))?;
    }
    if let Some(v) = o.grid_points {
        c.oracle.grid_points = v;
    }
    if let Some(v) = &o.out {
        c.output.path = v.clone();
    }
    if let Some(v) = &o.format {
        c.output.format = v.parse::<Format>().map_err(|e| Failure::Config(e.to_string()))?;
    }
    if let Some(v) = o.precision {
        c.output.precision = v;
    }
    c.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(c)
}
