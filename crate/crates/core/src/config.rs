//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, ExponentSet};
use crate::error::{Error, Result};
use crate::initial_data::{Perturbation, Shape};
use crate::lane_emden::{scale_to_mass, solve_dimensionless, LaneEmdenProfile};
use crate::solver::SolverConfig;
use crate::star_state::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaneEmdenConfig {
    /// Total mass `M`.
    pub mass: f64,
    /// Tolerance on the first zero `ξ₁`.
    pub root_tol: f64,
}

impl Default for LaneEmdenConfig {
    fn default() -> Self {
        Self {
            mass: 5.0,
            root_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// Smallness threshold on `ℰ(0)`; larger data still runs but is flagged.
    pub delta_bar: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { delta_bar: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Defaults to `(2γ - 2 - θ)/8`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iota: Option<f64>,
    /// Interior interval `[0, l R̄]`.
    pub l: f64,
    /// Defaults to `{0, (2-γ)/2, 2-γ}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_grid: Option<Vec<f64>>,
    /// Start of the decay fit window.
    pub fit_t_min: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            iota: None,
            l: 0.5,
            b_grid: None,
            fit_t_min: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub emit_plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            emit_plots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub lane_emden: LaneEmdenConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_perturbation")]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_perturbation() -> Perturbation {
    Perturbation::displacement(1e-3, Shape::Uniform)
}

impl RunConfig {
    pub fn new(model: ModelParams) -> Self {
        Self {
            model,
            lane_emden: LaneEmdenConfig::default(),
            solver: SolverConfig::default(),
            perturbation: default_perturbation(),
            stability: StabilityConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.solver.validate()?;
        self.perturbation.validate()?;
        let le = &self.lane_emden;
        if !(le.mass > 0.0 && le.mass.is_finite()) {
            return Err(Error::param("lane_emden.mass", format!("mass must be positive, got {}", le.mass)));
        }
        if !(le.root_tol > 0.0 && le.root_tol <= 1e-6) {
            return Err(Error::param(
                "lane_emden.root_tol",
                format!("root_tol must satisfy 0 < root_tol <= 1e-6, got {}", le.root_tol),
            ));
        }
        if !(self.stability.delta_bar > 0.0) {
            return Err(Error::param("stability.delta_bar", "delta_bar must be positive"));
        }
        let d = &self.diagnostics;
        if !(d.l > 0.0 && d.l < 1.0) {
            return Err(Error::param("diagnostics.l", format!("l must satisfy 0 < l < 1, got {}", d.l)));
        }
        if !(d.fit_t_min >= 0.0) {
            return Err(Error::param("diagnostics.fit_t_min", "fit_t_min must be non-negative"));
        }
        self.exponents()?;
        Ok(())
    }

    pub fn iota(&self) -> f64 {
        self.diagnostics
            .iota
            .unwrap_or_else(|| diagnostics::default_iota(self.model.gamma, self.model.theta))
    }

    pub fn exponents(&self) -> Result<ExponentSet> {
        let e = diagnostics::exponents(&self.model, self.iota())?;
        match &self.diagnostics.b_grid {
            Some(b) => e.with_b_grid(b.clone()),
            None => Ok(e),
        }
    }

    /// Equilibrium profile on the solver grid.
    pub fn profile(&self) -> Result<LaneEmdenProfile> {
        let n = 1.0 / (self.model.gamma - 1.0);
        let emden = solve_dimensionless(n, self.lane_emden.root_tol)?;
        scale_to_mass(&emden, self.model.gamma, self.lane_emden.mass, self.solver.n)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_config(config: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, config.to_toml()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\ngamma = 1.5\ntheta = 0.5\nnu1 = 1\nnu2 = 1\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.lane_emden, LaneEmdenConfig::default());
        assert_eq!(c.iota(), diagnostics::default_iota(1.5, 0.5));
        assert_eq!(c.exponents().unwrap().b_grid, diagnostics::default_b_grid(1.5));
    }

    #[test]
    fn theta_above_half_gamma_is_rejected() {
        let err = RunConfig::from_toml(&MINIMAL.replace("theta = 0.5", "theta = 0.9")).unwrap_err();
        assert!(err.to_string().contains("theta must satisfy 0 < theta <= gamma/2"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn gamma_below_four_thirds_is_rejected() {
        let err = RunConfig::from_toml(&MINIMAL.replace("gamma = 1.5", "gamma = 1.3")).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}[solver]\ncfll = 0.3\n")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("cfll"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_info() {
        let err = RunConfig::from_toml("[model]\ngamma = = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::from_toml(MINIMAL).unwrap();
        c.diagnostics.iota = Some(0.01);
        c.diagnostics.b_grid = Some(vec![0.0, 0.25]);
        c.perturbation = Perturbation::velocity_bump(
            2e-3,
            Shape::Gaussian {
                center: 0.3,
                width: 0.1,
            },
        );
        c.solver.t_end = 0.1 + 0.2;
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn iota_out_of_range_names_the_key() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}[diagnostics]\niota = 0.5\n")).unwrap_err();
        assert!(err.to_string().contains("iota"), "{err}");
    }
}
