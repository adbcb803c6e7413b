use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

use robust_qdr::conic::SolverSettings;

/// Environment variable naming the default settings file.
pub const CONFIG_ENV: &str = "ROBUST_QDR_CONFIG";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    solver: SolverSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_iter: Option<u32>,
}

/// Solver settings from the optional file, overridden by any flag given.
pub fn resolve_settings(
    path: Option<&Path>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_iter: Option<u32>,
) -> anyhow::Result<SolverSettings> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| robust_qdr::Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
            toml::from_str::<ConfigFile>(&text)
                .map_err(|e| robust_qdr::Error::Schema(e.to_string()))
                .with_context(|| format!("reading settings from {}", p.display()))?
        }
        None => ConfigFile::default(),
    };
    let mut settings = SolverSettings::default();
    if let Some(v) = abs_tol.or(file.solver.abs_tol) {
        settings.abs_tol = v;
    }
    if let Some(v) = rel_tol.or(file.solver.rel_tol) {
        settings.rel_tol = v;
    }
    if let Some(v) = max_iter.or(file.solver.max_iter) {
        settings.max_iter = v;
    }
    for (name, v) in [("abs_tol", settings.abs_tol), ("rel_tol", settings.rel_tol)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(robust_qdr::Error::Invalid(format!("solver.{name} must be positive, got {v}")).into());
        }
    }
    if settings.max_iter == 0 {
        return Err(robust_qdr::Error::Invalid("solver.max_iter must be at least 1".into()).into());
    }
    Ok(settings)
}
