//! Model spec files: one JSON object holding the environment matrix, restart
//! distribution, economic rates, and optional solver overrides.
//!
//! ```json
//! {
//!   "n": 2,
//!   "T": [[-10.0, 5.0], [4.0, -12.0]],
//!   "pi": [0.4, 0.6],
//!   "c": 15.0,
//!   "delta": 0.1,
//!   "beta": 1.0,
//!   "h": 0.001,
//!   "x_max": 30.0,
//!   "tol": 1e-8
//! }
//! ```
//!
//! `h`, `x_max`, and `tol` are optional and fall back to the solver
//! defaults; command-line flags override both.

use std::fmt;
use std::path::Path;

use divbarrier::phase_type::{PhaseTypeError, PhaseTypeModel};
use divbarrier::solver::{RiskModel, SolverConfig};
use divbarrier::valuefn::Grid;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
    pub c: f64,
    pub delta: f64,
    pub beta: f64,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

/// Spec rejection with the offending field named.
#[derive(Debug)]
pub struct SpecError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for SpecError {}

fn field_of(err: &PhaseTypeError) -> &'static str {
    match err {
        PhaseTypeError::RestartNotProbability(_) => "pi",
        _ => "T",
    }
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Build the validated risk model, naming the offending field on error.
    pub fn build_model(&self) -> Result<RiskModel, SpecError> {
        if self.t.len() != self.n {
            return Err(SpecError {
                field: "T",
                message: format!("expected {} rows, found {}", self.n, self.t.len()),
            });
        }
        if self.pi.len() != self.n {
            return Err(SpecError {
                field: "pi",
                message: format!("expected {} entries, found {}", self.n, self.pi.len()),
            });
        }
        let env = PhaseTypeModel::validate(&self.t, &self.pi).map_err(|e| SpecError {
            field: field_of(&e),
            message: e.to_string(),
        })?;
        RiskModel::new(self.c, self.delta, self.beta, env).map_err(|e| SpecError {
            field: match e.name {
                "premium rate c" => "c",
                "discount rate delta" => "delta",
                _ => "beta",
            },
            message: e.to_string(),
        })
    }

    /// Solver config from the spec's overrides, then the command line's.
    pub fn build_config(
        &self,
        cli_h: Option<f64>,
        cli_xmax: Option<f64>,
        cli_tol: Option<f64>,
    ) -> Result<SolverConfig, SpecError> {
        let defaults = SolverConfig::default();
        let h = cli_h.or(self.h).unwrap_or(defaults.grid.spacing());
        let x_max = cli_xmax.or(self.x_max).unwrap_or(defaults.grid.x_max());
        let tol = cli_tol.or(self.tol).unwrap_or(defaults.tol);
        let grid = Grid::from_spacing(x_max, h).map_err(|e| SpecError {
            field: "h",
            message: e.to_string(),
        })?;
        if tol.is_nan() || tol <= 0.0 {
            return Err(SpecError {
                field: "tol",
                message: format!("must be positive, got {tol}"),
            });
        }
        Ok(SolverConfig {
            grid,
            tol,
            ..defaults
        })
    }
}
