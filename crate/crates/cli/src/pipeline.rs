//! Orchestration: run a configuration, certify it, analyze the record and
//! write the artifacts (series CSV, certificate, report, oracle comparison).
//!
//! Artifacts are byte-deterministic for a fixed configuration and seed:
//! series values are printed in shortest-round-trip scientific notation and
//! JSON field order follows the struct definitions.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use kdvb_core::coefficients::{certify, StabilityCertificate};
use kdvb_core::diagnostics::{
    self, decay_report, verify_bt_bound, DecayReport, InequalityCheck, SimulationRecord,
};
use kdvb_core::field::Field;
use kdvb_core::grid::Grid;
use kdvb_core::oracle::{
    delay_ode_reference, exact_linear_constant, fd_rk4_reference, FdOracleConfig,
};
use kdvb_core::solver::run;

use crate::config::LoadedRun;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum PipelineError {
    /// Configuration or usage problem (exit code 2).
    Usage(String),
    /// The run or an analysis failed (exit code 1).
    Run(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Usage(m) => write!(f, "{m}"),
            PipelineError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for PipelineError {}

fn run_err(e: impl fmt::Display) -> PipelineError {
    PipelineError::Run(e.to_string())
}

/// Everything `simulate` produces, in memory plus on disk.
pub struct SimulateOutcome {
    pub record: SimulationRecord<f64>,
    pub certificate: StabilityCertificate<f64>,
    pub decay: Option<DecayReport<f64>>,
    pub decay_note: Option<String>,
    pub bt_bound: Option<InequalityCheck<f64>>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    version: &'a str,
    label: &'a str,
    config: &'a crate::config::RunConfig,
    summary: Summary,
    certificate: &'a StabilityCertificate<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decay: Option<&'a DecayReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decay_note: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bt_bound: Option<&'a InequalityCheck<f64>>,
}

#[derive(Serialize)]
struct Summary {
    final_time: f64,
    final_energy: f64,
    final_lyapunov: f64,
    initial_lyapunov: f64,
    mass_drift: f64,
    max_identity_residual: f64,
}

#[derive(Serialize)]
struct CertificateFile<'a> {
    version: &'a str,
    label: &'a str,
    config: &'a crate::config::RunConfig,
    certificate: &'a StabilityCertificate<f64>,
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)
        .map_err(|e| PipelineError::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(run_err)?;
    text.push('\n');
    fs::write(path, text).map_err(run_err)
}

fn write_series_csv(path: &Path, record: &SimulationRecord<f64>) -> Result<(), PipelineError> {
    let mut out = Vec::with_capacity(record.len() * 96);
    out.extend_from_slice(b"t,E,calE,mass,linf,ux_l2,identity_residual\n");
    for i in 0..record.len() {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            record.times[i],
            record.e_series[i],
            record.cal_e_series[i],
            record.mass_series[i],
            record.linf_series[i],
            record.ux_l2_series[i],
            record.identity_residual_series[i],
        )
        .map_err(run_err)?;
    }
    fs::write(path, out).map_err(run_err)
}

/// Runs the simulation, certifies the coefficients, checks the decay bound
/// and writes `series.csv`, `certificate.json` and `report.json` under
/// `out_dir/<label>/`.
pub fn simulate(loaded: &LoadedRun, out_dir: &Path) -> Result<SimulateOutcome, PipelineError> {
    let dir = out_dir.join(&loaded.raw.label);
    ensure_dir(&dir)?;

    let certificate =
        certify(&loaded.lambda0, &loaded.lambda, &loaded.hypothesis).map_err(run_err)?;
    let record = run(&loaded.solver).map_err(run_err)?;

    let (decay, decay_note) = match certificate.gamma {
        Some(gamma) => {
            match decay_report(&record, gamma, 0.6, diagnostics::default_decay_tolerance()) {
                Ok(report) => (Some(report), None),
                Err(e) => (None, Some(format!("decay analysis unavailable: {e}"))),
            }
        }
        None => (
            None,
            Some("certificate did not pass; no certified rate to check".into()),
        ),
    };
    let bt_bound = if loaded.raw.model.nonlinear {
        None
    } else {
        Some(verify_bt_bound(&record, &loaded.lambda0, &loaded.lambda).map_err(run_err)?)
    };

    let series_path = dir.join("series.csv");
    write_series_csv(&series_path, &record)?;

    let cert_path = dir.join("certificate.json");
    write_json(
        &cert_path,
        &CertificateFile {
            version: VERSION,
            label: &loaded.raw.label,
            config: &loaded.raw,
            certificate: &certificate,
        },
    )?;

    let mass_drift = record
        .mass_series
        .iter()
        .map(|m| (m - record.mass_series[0]).abs())
        .fold(0.0f64, f64::max);
    let max_resid = record
        .identity_residual_series
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let report_path = dir.join("report.json");
    write_json(
        &report_path,
        &ReportFile {
            version: VERSION,
            label: &loaded.raw.label,
            config: &loaded.raw,
            summary: Summary {
                final_time: record.final_time(),
                final_energy: *record.e_series.last().unwrap(),
                final_lyapunov: *record.cal_e_series.last().unwrap(),
                initial_lyapunov: record.cal_e_series[0],
                mass_drift,
                max_identity_residual: max_resid,
            },
            certificate: &certificate,
            decay: decay.as_ref(),
            decay_note: decay_note.as_deref(),
            bt_bound: bt_bound.as_ref(),
        },
    )?;

    Ok(SimulateOutcome {
        record,
        certificate,
        decay,
        decay_note,
        bt_bound,
        files: vec![series_path, cert_path, report_path],
    })
}

/// Certification alone; writes `certificate.json`.
pub fn certify_only(
    loaded: &LoadedRun,
    out_dir: &Path,
) -> Result<(StabilityCertificate<f64>, PathBuf), PipelineError> {
    let dir = out_dir.join(&loaded.raw.label);
    ensure_dir(&dir)?;
    let certificate =
        certify(&loaded.lambda0, &loaded.lambda, &loaded.hypothesis).map_err(run_err)?;
    let path = dir.join("certificate.json");
    write_json(
        &path,
        &CertificateFile {
            version: VERSION,
            label: &loaded.raw.label,
            config: &loaded.raw,
            certificate: &certificate,
        },
    )?;
    Ok((certificate, path))
}

#[derive(Debug, Serialize)]
pub struct ComparisonOutcome {
    pub oracle: &'static str,
    pub compare_time: f64,
    pub rel_l2_error: f64,
    pub max_abs_error: f64,
    pub detail: String,
}

#[derive(Serialize)]
struct ComparisonFile<'a> {
    version: &'a str,
    label: &'a str,
    config: &'a crate::config::RunConfig,
    comparison: &'a ComparisonOutcome,
}

fn is_constant(f: &Field<f64>) -> Option<f64> {
    let v0 = f.values()[0];
    f.values().iter().all(|&v| v == v0).then_some(v0)
}

/// Restriction of a finer field onto the run grid (node-aligned subsampling).
fn restrict(fine: &Field<f64>, coarse: &Arc<Grid<f64>>) -> Field<f64> {
    let factor = fine.grid().node_count() / coarse.node_count();
    let values: Vec<f64> = (0..coarse.node_count())
        .map(|j| fine.values()[j * factor])
        .collect();
    Field::from_values(Arc::clone(coarse), values).expect("restriction of finite field")
}

/// Compares the run against the first applicable oracle (exact Fourier,
/// scalar delay ODE, then finite differences) and writes `comparison.json`.
pub fn compare_oracle(
    loaded: &LoadedRun,
    out_dir: &Path,
) -> Result<ComparisonOutcome, PipelineError> {
    let lambda0_const = is_constant(&loaded.lambda0);
    let lambda_const = is_constant(&loaded.lambda);
    let oracle_cfg = &loaded.raw.oracle;

    let outcome = match (lambda0_const, lambda_const) {
        (Some(l0), Some(l))
            if l == 0.0 && !loaded.raw.model.nonlinear && oracle_cfg.exact.unwrap_or(true) =>
        {
            compare_exact(loaded, l0)?
        }
        (Some(l0), Some(l))
            if oracle_cfg.delay_ode.unwrap_or(true) && constant_initial(loaded).is_some() =>
        {
            compare_delay_ode(loaded, l0, l)?
        }
        _ if oracle_cfg.fd.is_some() => compare_fd(loaded)?,
        _ => {
            return Err(PipelineError::Usage(
                "no applicable oracle: the exact Fourier oracle needs a linear run with \
                 constant lambda0 and lambda = 0; the delay-ODE oracle needs spatially \
                 constant coefficients and data; otherwise add an [oracle.fd] section"
                    .into(),
            ))
        }
    };

    let dir = out_dir.join(&loaded.raw.label);
    ensure_dir(&dir)?;
    write_json(
        &dir.join("comparison.json"),
        &ComparisonFile {
            version: VERSION,
            label: &loaded.raw.label,
            config: &loaded.raw,
            comparison: &outcome,
        },
    )?;
    Ok(outcome)
}

fn constant_initial(loaded: &LoadedRun) -> Option<f64> {
    let field = loaded
        .raw
        .initial
        .initial_field(&loaded.grid, loaded.raw.time.n_tau, loaded.raw.time.dt)
        .ok()?;
    is_constant(&field)
}

fn compare_exact(loaded: &LoadedRun, lambda0: f64) -> Result<ComparisonOutcome, PipelineError> {
    let record = run(&loaded.solver).map_err(run_err)?;
    let t = record.final_time();
    let exact = exact_linear_constant(record.initial_field(), lambda0, t).map_err(run_err)?;
    let diff = record.final_field().sub(&exact).map_err(run_err)?;
    let rel = diff.l2_norm() / exact.l2_norm().max(f64::MIN_POSITIVE);
    Ok(ComparisonOutcome {
        oracle: "exact_fourier",
        compare_time: t,
        rel_l2_error: rel,
        max_abs_error: diff.linf_norm(),
        detail: format!("constant lambda0 = {lambda0}, per-mode exponential factors"),
    })
}

fn compare_delay_ode(
    loaded: &LoadedRun,
    lambda0: f64,
    lambda: f64,
) -> Result<ComparisonOutcome, PipelineError> {
    let record = run(&loaded.solver).map_err(run_err)?;
    let t = record.final_time();
    let tau = loaded.raw.tau();
    let n_tau = loaded.raw.time.n_tau;
    let dt = loaded.raw.time.dt;
    // scalar history: the (constant) value of each slot
    let buf = loaded
        .raw
        .initial
        .build(&loaded.grid, n_tau, dt)
        .map_err(run_err)?;
    let slot_values: Vec<f64> = (0..=n_tau).map(|i| buf.slot(i).values()[0]).collect();
    let history = move |s: f64| -> f64 {
        let idx = ((s + tau) / dt).round() as usize;
        slot_values[idx.min(n_tau)]
    };
    let reference = delay_ode_reference(lambda0, lambda, tau, history, t, dt).map_err(run_err)?;

    let mean = record.final_field().mass() / (2.0 * loaded.grid.half_width());
    let err = (mean - reference.final_value()).abs();
    let rel = err / reference.final_value().abs().max(f64::MIN_POSITIVE);
    Ok(ComparisonOutcome {
        oracle: "delay_ode_steps",
        compare_time: t,
        rel_l2_error: rel,
        max_abs_error: err,
        detail: format!(
            "spatial mean {mean:e} vs method-of-steps value {:e}",
            reference.final_value()
        ),
    })
}

fn compare_fd(loaded: &LoadedRun) -> Result<ComparisonOutcome, PipelineError> {
    let fd_section = loaded.raw.oracle.fd.as_ref().expect("checked by caller");
    let t_compare = fd_section.t_end.unwrap_or(loaded.raw.time.t_end);

    // spectral run truncated to the comparison horizon
    let mut solver_cfg = loaded.solver.clone();
    solver_cfg.t_end = t_compare;
    let ratio = t_compare / solver_cfg.dt;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
        return Err(PipelineError::Usage(format!(
            "oracle.fd.t_end = {t_compare} is not a whole number of solver steps"
        )));
    }
    let spectral = run(&solver_cfg).map_err(run_err)?;

    // oracle grid and step: refine the mesh, then pick the largest dt that
    // divides tau and respects both the explicit CFL bound and dt_main/4
    let n_fd = loaded.grid.node_count() * fd_section.node_factor;
    let fd_grid = Grid::<f64>::new(loaded.grid.half_width(), n_fd).map_err(run_err)?;
    let dx = fd_grid.spacing();
    let limit = (0.05 * dx * dx * dx).min(loaded.raw.time.dt / 4.0);
    let tau = loaded.raw.tau();
    let n_tau_fd = (tau / limit).ceil() as usize;
    let dt_fd = tau / n_tau_fd as f64;
    let steps = t_compare / dt_fd;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(PipelineError::Usage(format!(
            "oracle.fd.t_end = {t_compare} is not a whole number of oracle steps \
             (dt_fd = {dt_fd:e}); pick a t_end commensurate with tau"
        )));
    }

    let (spatial, temporal) = match &loaded.raw.initial {
        kdvb_core::history::HistoryInit::Separable { spatial, temporal } => {
            (spatial.clone(), *temporal)
        }
        kdvb_core::history::HistoryInit::PerSlot { .. } => {
            return Err(PipelineError::Usage(
                "the finite-difference oracle needs a separable initial history".into(),
            ))
        }
    };
    let fd_cfg = FdOracleConfig {
        dt: dt_fd,
        n_tau: n_tau_fd,
        t_end: t_compare,
        nonlinear: loaded.raw.model.nonlinear,
        lambda0: loaded
            .raw
            .coefficients
            .lambda0
            .sample(&fd_grid)
            .map_err(run_err)?,
        lambda: loaded
            .raw
            .coefficients
            .lambda
            .sample(&fd_grid)
            .map_err(run_err)?,
        history_spatial: spatial.sample(&fd_grid).map_err(run_err)?,
        history_temporal: temporal,
        grid: fd_grid,
    };
    let fd = fd_rk4_reference(&fd_cfg).map_err(run_err)?;

    let restricted = restrict(fd.final_field(), &loaded.grid);
    let diff = spectral.final_field().sub(&restricted).map_err(run_err)?;
    let rel = diff.l2_norm() / spectral.final_field().l2_norm().max(f64::MIN_POSITIVE);
    Ok(ComparisonOutcome {
        oracle: "fd_rk4",
        compare_time: t_compare,
        rel_l2_error: rel,
        max_abs_error: diff.linf_norm(),
        detail: format!(
            "central differences on {n_fd} nodes, dt = {dt_fd:e} ({n_tau_fd} steps per delay)"
        ),
    })
}
