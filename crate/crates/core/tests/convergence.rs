//! Order-of-accuracy checks for the time stepper.

use std::sync::Arc;

use kdvb_core::coefficients::CoefficientSpec;
use kdvb_core::field::Field;
use kdvb_core::grid::Grid;
use kdvb_core::history::{HistoryInit, TimeProfile};
use kdvb_core::solver::{run, SolverConfig};

fn bump(amplitude: f64, center: f64, width: f64) -> CoefficientSpec<f64> {
    CoefficientSpec::GaussianBump {
        amplitude,
        center,
        width,
    }
}

/// Nonlinear delayed configuration with spatially varying damping, so the
/// fully explicit code path is exercised (constant damping folds into the
/// exponential instead).
fn nonlinear_delayed_config(
    grid: &Arc<Grid<f64>>,
    dt: f64,
    n_tau: usize,
    t_end: f64,
) -> SolverConfig<f64> {
    SolverConfig {
        grid: Arc::clone(grid),
        dt,
        n_tau,
        t_end,
        nonlinear: true,
        lambda0: CoefficientSpec::Sum {
            terms: vec![
                CoefficientSpec::Constant { value: 0.8 },
                bump(0.4, 0.5, 0.8),
            ],
        }
        .sample(grid)
        .unwrap(),
        lambda: bump(0.4, -0.5, 0.8).sample(grid).unwrap(),
        initial_history: HistoryInit::Separable {
            spatial: bump(0.5, 0.0, 1.2),
            temporal: TimeProfile::Exponential { rate: 0.5 },
        },
        record_stride: 1000,
        snapshot_stride: 0,
    }
}

/// Self-convergence of the full nonlinear delayed scheme is second order:
/// halving dt (with n_tau doubled so tau is fixed) shrinks the change in the
/// final state by about 4x.
#[test]
fn nonlinear_delayed_scheme_is_second_order_in_dt() {
    let grid = Grid::<f64>::new(16.0, 128).unwrap();
    let t_end = 0.8;
    let tau_steps = [(2e-3, 100), (1e-3, 200), (5e-4, 400)];

    let finals: Vec<Field<f64>> = tau_steps
        .iter()
        .map(|&(dt, n_tau)| {
            let cfg = nonlinear_delayed_config(&grid, dt, n_tau, t_end);
            run(&cfg).unwrap().final_field().clone()
        })
        .collect();

    let d1 = finals[0].sub(&finals[1]).unwrap().l2_norm();
    let d2 = finals[1].sub(&finals[2]).unwrap().l2_norm();
    let ratio = d1 / d2;
    assert!(
        (3.5..=4.5).contains(&ratio),
        "self-convergence ratio {ratio} (d1 = {d1:e}, d2 = {d2:e})"
    );
}

/// The running energy-identity residual shrinks ~4x when dt halves at fixed
/// record stride.
#[test]
fn identity_residual_is_second_order_in_dt() {
    let grid = Grid::<f64>::new(16.0, 128).unwrap();
    let t_end = 1.0;
    let resid = |dt: f64, n_tau: usize| -> f64 {
        let mut cfg = nonlinear_delayed_config(&grid, dt, n_tau, t_end);
        cfg.record_stride = 1;
        let rec = run(&cfg).unwrap();
        rec.identity_residual_series
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()))
    };
    let r1 = resid(2e-3, 100);
    let r2 = resid(1e-3, 200);
    let ratio = r1 / r2;
    assert!(
        (3.0..=5.0).contains(&ratio),
        "residual ratio {ratio} (r1 = {r1:e}, r2 = {r2:e})"
    );
}
