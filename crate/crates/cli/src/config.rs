//! Run-configuration file format and validation.
//!
//! Configurations are TOML. Parse errors carry the offending line; validation
//! errors name the field. A run is rejected unless it is self-consistent:
//! the delay is `n_tau * dt` (an explicit `tau` must match), `t_end` is a
//! whole number of steps, and in `localized` mode the data respect the
//! half-box support convention that makes the periodic truncation of the
//! real line meaningful.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use kdvb_core::coefficients::{CoefficientSpec, DampingRegime, HypothesisInput};
use kdvb_core::field::Field;
use kdvb_core::grid::Grid;
use kdvb_core::history::HistoryInit;
use kdvb_core::solver::SolverConfig;

/// How the box relates to the underlying problem on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    /// Data emulate decaying functions on the line: initial data must vanish
    /// (below 1e-12) outside |x| <= L/2 and coefficients must be effectively
    /// constant there.
    #[default]
    Localized,
    /// Data are genuinely periodic (sines, constants); support checks are
    /// skipped.
    Periodic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub half_width: f64,
    pub node_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub n_tau: usize,
    /// Optional echo of the delay; must equal `n_tau * dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub nonlinear: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    pub lambda0: CoefficientSpec<f64>,
    pub lambda: CoefficientSpec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSection {
    pub p: f64,
    pub alpha0: f64,
    pub alpha: f64,
    pub regime: DampingRegime,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Extra snapshots every this many records; 0 keeps endpoints only.
    #[serde(default)]
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Force-enable the exact Fourier comparison (auto-detected otherwise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    /// Force-enable the scalar delay-ODE comparison (auto-detected otherwise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_ode: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd: Option<FdSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdSection {
    /// Oracle mesh refinement relative to the run grid (power of two, >= 2).
    #[serde(default = "default_node_factor")]
    pub node_factor: usize,
    /// Comparison horizon; defaults to the run's `t_end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

fn default_node_factor() -> usize {
    2
}

/// One simulation/certification run, as read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub label: String,
    #[serde(default)]
    pub mode: DomainMode,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub time: TimeSection,
    pub model: ModelSection,
    pub coefficients: CoefficientsSection,
    pub initial: HistoryInit<f64>,
    pub hypothesis: HypothesisSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

/// A validated configuration with everything sampled onto the grid.
#[derive(Debug)]
pub struct LoadedRun {
    pub raw: RunConfig,
    pub grid: Arc<Grid<f64>>,
    pub lambda0: Field<f64>,
    pub lambda: Field<f64>,
    pub hypothesis: HypothesisInput<f64>,
    pub solver: SolverConfig<f64>,
    pub n_steps: u64,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| err("config", e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn tau(&self) -> f64 {
        self.time.n_tau as f64 * self.time.dt
    }

    /// Validates every invariant and samples the coefficient fields.
    pub fn load(self) -> Result<LoadedRun, ConfigError> {
        let grid = Grid::<f64>::new(self.grid.half_width, self.grid.node_count)
            .map_err(|e| err("grid", e.to_string()))?;

        if !(self.time.dt.is_finite() && self.time.dt > 0.0) {
            return Err(err(
                "time.dt",
                format!("must be positive, got {}", self.time.dt),
            ));
        }
        if self.time.n_tau == 0 {
            return Err(err("time.n_tau", "must be at least 1"));
        }
        if self.time.record_stride == 0 {
            return Err(err("time.record_stride", "must be at least 1"));
        }
        let tau = self.tau();
        if let Some(stated) = self.time.tau {
            if (stated - tau).abs() > 1e-12 * stated.abs().max(1.0) {
                return Err(err(
                    "time.tau",
                    format!(
                        "stated tau = {stated} does not equal n_tau * dt = {tau}; \
                         the delay is derived from (n_tau, dt)"
                    ),
                ));
            }
        }
        if !(self.time.t_end.is_finite() && self.time.t_end >= self.time.dt) {
            return Err(err(
                "time.t_end",
                format!("need t_end >= dt, got {}", self.time.t_end),
            ));
        }
        let ratio = self.time.t_end / self.time.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(err(
                "time.t_end",
                format!(
                    "t_end = {} is not a whole number of steps of dt = {}",
                    self.time.t_end, self.time.dt
                ),
            ));
        }

        let hypothesis = HypothesisInput {
            tau,
            p: self.hypothesis.p,
            alpha0: self.hypothesis.alpha0,
            alpha: self.hypothesis.alpha,
            regime: self.hypothesis.regime,
        };
        hypothesis
            .validate()
            .map_err(|e| err("hypothesis", e.to_string()))?;

        let lambda0 = self
            .coefficients
            .lambda0
            .sample(&grid)
            .map_err(|e| err("coefficients.lambda0", e.to_string()))?;
        let lambda = self
            .coefficients
            .lambda
            .sample(&grid)
            .map_err(|e| err("coefficients.lambda", e.to_string()))?;
        let initial_field = self
            .initial
            .initial_field(&grid, self.time.n_tau, self.time.dt)
            .map_err(|e| err("initial", e.to_string()))?;

        if self.mode == DomainMode::Localized {
            let support = initial_field.max_outside_half_box();
            if support > 1e-12 {
                return Err(err(
                    "initial.spatial",
                    format!(
                        "localized mode requires |u0| < 1e-12 outside |x| <= L/2; \
                         found {support:e} (enlarge L or switch mode to \"periodic\")"
                    ),
                ));
            }
            for (name, f) in [
                ("coefficients.lambda0", &lambda0),
                ("coefficients.lambda", &lambda),
            ] {
                let baseline = f.values()[0]; // value at x = -L
                let half = grid.half_width() * 0.5;
                let deviation = grid
                    .nodes()
                    .iter()
                    .zip(f.values())
                    .filter(|(x, _)| x.abs() > half)
                    .map(|(_, v)| (v - baseline).abs())
                    .fold(0.0f64, f64::max);
                if deviation > 1e-12 {
                    return Err(err(
                        name,
                        format!(
                            "localized mode requires coefficients effectively constant \
                             outside |x| <= L/2; found deviation {deviation:e}"
                        ),
                    ));
                }
            }
        }

        if let Some(fd) = &self.oracle.fd {
            if fd.node_factor < 2 || !fd.node_factor.is_power_of_two() {
                return Err(err(
                    "oracle.fd.node_factor",
                    format!("must be a power of two >= 2, got {}", fd.node_factor),
                ));
            }
            if let Some(t) = fd.t_end {
                if !(t.is_finite() && t > 0.0 && t <= self.time.t_end) {
                    return Err(err(
                        "oracle.fd.t_end",
                        format!("must lie in (0, t_end of the run], got {t}"),
                    ));
                }
            }
        }

        let solver = SolverConfig {
            grid: Arc::clone(&grid),
            dt: self.time.dt,
            n_tau: self.time.n_tau,
            t_end: self.time.t_end,
            nonlinear: self.model.nonlinear,
            lambda0: lambda0.clone(),
            lambda: lambda.clone(),
            initial_history: self.initial.clone(),
            record_stride: self.time.record_stride,
            snapshot_stride: self.output.snapshot_stride,
        };
        let n_steps = solver.validate().map_err(|e| err("time", e.to_string()))?;

        Ok(LoadedRun {
            raw: self,
            grid,
            lambda0,
            lambda,
            hypothesis,
            solver,
            n_steps,
        })
    }
}
