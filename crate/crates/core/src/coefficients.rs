//! Coefficient construction and the stability certificate.
//!
//! The damping hypotheses are verified exactly as stated for the model
//!
//! ```text
//! u_t + u_xxx - u_xx + lambda0(x) u + lambda(x) u(t - tau) (+ u u_x) = 0 :
//! ```
//!
//! * positive damping: `lambda0(x) >= alpha0 > 0` almost everywhere, and the
//!   delay coefficient admits a splitting
//!   `((e^tau + 1)/2) |lambda(x)| <= alpha + beta(x)` with `0 <= alpha < alpha0`
//!   and `||beta||_p < ((alpha0 - alpha)/c_p)^(1 - 1/(2p))`;
//! * indefinite damping: `lambda0(x) >= alpha0 - beta0(x)` with
//!   `||beta0||_p < (alpha0/c_p)^(1 - 1/(2p))` and
//!   `||beta0 + beta||_p < ((alpha0 - alpha)/c_p)^(1 - 1/(2p))`.
//!
//! When the checks pass, the Lyapunov functional decays at the certified rate
//!
//! ```text
//! gamma = min{ 2 (alpha0 - alpha - c_p ||beta||_p^(2p/(2p-1))), 1 }
//! ```
//!
//! (with `||beta0 + beta||_p` in place of `||beta||_p` in the indefinite
//! regime), where `c_p = (1 - 1/(2p)) (2/p)^(1/(2p-1))`.
//!
//! `beta` and `beta0` are not free inputs: this module constructs the
//! pointwise-smallest admissible choices, which minimizes the `L^p` norms and
//! therefore maximizes the certified rate for the supplied `alpha`. Choosing
//! `alpha` (and `p`) is left to the caller; a coarse sweep is usually enough.
//!
//! Essential infima/suprema over the real line are approximated by minima and
//! maxima over grid samples. Refine by doubling the node count and comparing
//! certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldData};
use crate::grid::{grid_mismatch, Grid};
use crate::scalar::{cast, Scalar};
use std::sync::Arc;

/// Declarative description of a coefficient profile, sampled onto a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec<T: Scalar> {
    Constant {
        value: T,
    },
    /// `amplitude * exp(-((x - center)/width)^2)`
    GaussianBump {
        amplitude: T,
        center: T,
        width: T,
    },
    /// `value` on `[lower, upper]` (inclusive), zero elsewhere.
    Indicator {
        lower: T,
        upper: T,
        value: T,
    },
    /// Linear interpolation through `points`, clamped to the end values
    /// outside the table range.
    PiecewiseLinear {
        points: Vec<(T, T)>,
    },
    /// Linear interpolation through `points`, zero outside the table range.
    Samples {
        points: Vec<(T, T)>,
    },
    /// Pointwise sum of sub-profiles, e.g. a constant baseline minus a bump.
    Sum {
        terms: Vec<CoefficientSpec<T>>,
    },
    /// `amplitude * sin(mode * pi * x / L + phase)`; exactly periodic on the
    /// box, intended for periodic-mode initial data.
    Harmonic {
        amplitude: T,
        mode: i64,
        phase: T,
    },
}

impl<T: Scalar> CoefficientSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let bad =
            |name: &'static str, message: String| Err(Error::InvalidParameter { name, message });
        match self {
            CoefficientSpec::Constant { value } => {
                if !value.is_finite() {
                    return bad("value", "constant value must be finite".into());
                }
            }
            CoefficientSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                if !(amplitude.is_finite() && center.is_finite() && width.is_finite()) {
                    return bad("gaussian_bump", "parameters must be finite".into());
                }
                if *width <= T::zero() {
                    return bad("width", format!("bump width must be positive, got {width}"));
                }
            }
            CoefficientSpec::Indicator {
                lower,
                upper,
                value,
            } => {
                if !(lower.is_finite() && upper.is_finite() && value.is_finite()) {
                    return bad("indicator", "parameters must be finite".into());
                }
                if lower > upper {
                    return bad("indicator", "lower endpoint exceeds upper endpoint".into());
                }
            }
            CoefficientSpec::PiecewiseLinear { points } | CoefficientSpec::Samples { points } => {
                if points.len() < 2 {
                    return bad("points", "need at least two breakpoints".into());
                }
                for w in points.windows(2) {
                    if !(w[0].0.is_finite() && w[0].1.is_finite()) || w[1].0 <= w[0].0 {
                        return bad(
                            "points",
                            "breakpoints must be finite and strictly increasing in x".into(),
                        );
                    }
                }
                let last = points.last().unwrap();
                if !(last.0.is_finite() && last.1.is_finite()) {
                    return bad("points", "breakpoints must be finite".into());
                }
            }
            CoefficientSpec::Sum { terms } => {
                if terms.is_empty() {
                    return bad("terms", "sum needs at least one term".into());
                }
                for t in terms {
                    t.validate()?;
                }
            }
            CoefficientSpec::Harmonic {
                amplitude, phase, ..
            } => {
                if !(amplitude.is_finite() && phase.is_finite()) {
                    return bad("harmonic", "parameters must be finite".into());
                }
            }
        }
        Ok(())
    }

    /// Pointwise evaluation at `x` (harmonics need the box half-width).
    fn eval(&self, x: T, half_width: T) -> T {
        match self {
            CoefficientSpec::Constant { value } => *value,
            CoefficientSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let z = (x - *center) / *width;
                *amplitude * (-z * z).exp()
            }
            CoefficientSpec::Indicator {
                lower,
                upper,
                value,
            } => {
                if x >= *lower && x <= *upper {
                    *value
                } else {
                    T::zero()
                }
            }
            CoefficientSpec::PiecewiseLinear { points } => interp(points, x, true),
            CoefficientSpec::Samples { points } => interp(points, x, false),
            CoefficientSpec::Sum { terms } => terms
                .iter()
                .map(|t| t.eval(x, half_width))
                .fold(T::zero(), |a, b| a + b),
            CoefficientSpec::Harmonic {
                amplitude,
                mode,
                phase,
            } => {
                let k = T::PI() * cast::<T>(*mode as f64) / half_width;
                *amplitude * (k * x + *phase).sin()
            }
        }
    }

    /// Samples the profile at the grid nodes.
    pub fn sample(&self, grid: &Arc<Grid<T>>) -> Result<Field<T>> {
        self.validate()?;
        let half = grid.half_width();
        Field::from_fn(Arc::clone(grid), |x| self.eval(x, half))
    }
}

fn interp<T: Scalar>(points: &[(T, T)], x: T, clamp: bool) -> T {
    let first = points.first().unwrap();
    let last = points.last().unwrap();
    if x < first.0 {
        return if clamp { first.1 } else { T::zero() };
    }
    if x >= last.0 {
        return if clamp || x == last.0 {
            last.1
        } else {
            T::zero()
        };
    }
    let idx = points.partition_point(|&(px, _)| px <= x);
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    let t = (x - x0) / (x1 - x0);
    y0 + (y1 - y0) * t
}

/// Which damping regime the certificate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingRegime {
    /// `lambda0 >= alpha0 > 0` everywhere.
    PositiveDamping,
    /// `lambda0` may change sign; controlled through `beta0`.
    IndefiniteDamping,
}

/// User-supplied constants entering the hypotheses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HypothesisInput<T: Scalar> {
    /// Delay length (time units).
    pub tau: T,
    /// Lebesgue exponent of the beta splitting, `1 <= p < infinity`.
    pub p: T,
    /// Uniform damping level `alpha0 > 0`.
    pub alpha0: T,
    /// Delay allowance `0 <= alpha < alpha0`.
    pub alpha: T,
    pub regime: DampingRegime,
}

impl<T: Scalar> HypothesisInput<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                message: format!("delay must be positive and finite, got {}", self.tau),
            });
        }
        if !(self.p.is_finite() && self.p >= T::one()) {
            return Err(Error::InvalidParameter {
                name: "p",
                message: format!("exponent must satisfy 1 <= p < infinity, got {}", self.p),
            });
        }
        if !(self.alpha0.is_finite() && self.alpha0 > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "alpha0",
                message: format!("alpha0 must be positive, got {}", self.alpha0),
            });
        }
        if !(self.alpha.is_finite() && self.alpha >= T::zero() && self.alpha < self.alpha0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                message: format!(
                    "alpha must satisfy 0 <= alpha < alpha0, got alpha = {}, alpha0 = {}",
                    self.alpha, self.alpha0
                ),
            });
        }
        Ok(())
    }
}

/// `c_p = (1 - 1/(2p)) * (2/p)^(1/(2p-1))` for `1 <= p < infinity`.
pub fn compute_cp<T: Scalar>(p: T) -> Result<T> {
    if !(p.is_finite() && p >= T::one()) {
        return Err(Error::InvalidParameter {
            name: "p",
            message: format!("c_p requires 1 <= p < infinity, got {p}"),
        });
    }
    let one = T::one();
    let two = cast::<T>(2.0);
    let two_p = two * p;
    Ok((one - one / two_p) * (two / p).powf(one / (two_p - one)))
}

/// Smallest pointwise `beta` making the delay splitting hold:
/// `beta(x) = max(0, ((e^tau + 1)/2) |lambda(x)| - alpha)`.
pub fn minimal_beta<T: Scalar>(lambda: &Field<T>, tau: T, alpha: T) -> Field<T> {
    let factor = (tau.exp() + T::one()) / cast::<T>(2.0);
    let values = lambda
        .values()
        .iter()
        .map(|&l| (factor * l.abs() - alpha).max(T::zero()))
        .collect();
    Field::from_values(Arc::clone(lambda.grid()), values).expect("finite by construction")
}

/// Smallest pointwise `beta0` making `lambda0 >= alpha0 - beta0` hold:
/// `beta0(x) = max(0, alpha0 - lambda0(x))`.
pub fn minimal_beta0<T: Scalar>(lambda0: &Field<T>, alpha0: T) -> Field<T> {
    let values = lambda0
        .values()
        .iter()
        .map(|&l| (alpha0 - l).max(T::zero()))
        .collect();
    Field::from_values(Arc::clone(lambda0.grid()), values).expect("finite by construction")
}

/// Verified hypotheses plus the certified decay rate and every intermediate
/// constant, echoed at full precision.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityCertificate<T: Scalar> {
    pub passed: bool,
    pub regime: DampingRegime,
    pub p: T,
    pub tau: T,
    pub alpha0: T,
    pub alpha: T,
    pub c_p: T,
    /// Sampled minimum of `lambda0` over the grid nodes.
    pub lambda0_min: T,
    /// `||beta||_p`, or `||beta0 + beta||_p` in the indefinite regime.
    pub beta_norm: T,
    /// Right-hand side `((alpha0 - alpha)/c_p)^(1 - 1/(2p))`.
    pub bound: T,
    /// `||beta0||_p` (indefinite regime only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0_norm: Option<T>,
    /// Right-hand side `(alpha0/c_p)^(1 - 1/(2p))` (indefinite regime only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0_bound: Option<T>,
    /// Certified exponential rate in `(0, 1]`; absent when a check failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<T>,
    #[serde(serialize_with = "serialize_field")]
    pub beta_field: Field<T>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "serialize_opt_field"
    )]
    pub beta0_field: Option<Field<T>>,
    pub failure_reasons: Vec<String>,
}

fn serialize_field<S, T>(f: &Field<T>, s: S) -> std::result::Result<S::Ok, S::Error>
where
    S: serde::Serializer,
    T: Scalar + Serialize,
{
    FieldData::from(f).serialize(s)
}

fn serialize_opt_field<S, T>(f: &Option<Field<T>>, s: S) -> std::result::Result<S::Ok, S::Error>
where
    S: serde::Serializer,
    T: Scalar + Serialize,
{
    f.as_ref().map(FieldData::from).serialize(s)
}

fn decay_bound<T: Scalar>(alpha0: T, alpha: T, p: T, c_p: T) -> T {
    let exponent = T::one() - T::one() / (cast::<T>(2.0) * p);
    ((alpha0 - alpha) / c_p).powf(exponent)
}

fn decay_rate<T: Scalar>(alpha0: T, alpha: T, p: T, c_p: T, beta_norm: T) -> T {
    // (2p-1)/(2p) * (2/p)^(1/(2p-1)) is exactly c_p again.
    let two_p = cast::<T>(2.0) * p;
    let raw = cast::<T>(2.0) * (alpha0 - alpha - c_p * beta_norm.powf(two_p / (two_p - T::one())));
    raw.min(T::one())
}

/// Verifies the damping hypotheses on sampled coefficients and computes the
/// certified rate. Failed checks yield `passed = false` with one reason per
/// violated inequality; hard errors are reserved for malformed inputs.
pub fn certify<T: Scalar>(
    lambda0: &Field<T>,
    lambda: &Field<T>,
    hyp: &HypothesisInput<T>,
) -> Result<StabilityCertificate<T>> {
    hyp.validate()?;
    if !lambda0.shares_grid(lambda) {
        return Err(grid_mismatch(lambda0.grid(), lambda.grid()));
    }

    let c_p = compute_cp(hyp.p)?;
    let lambda0_min = lambda0
        .values()
        .iter()
        .copied()
        .fold(T::infinity(), |a, b| if b < a { b } else { a });
    let bound = decay_bound(hyp.alpha0, hyp.alpha, hyp.p, c_p);

    let mut reasons = Vec::new();
    let beta = minimal_beta(lambda, hyp.tau, hyp.alpha);

    let (beta_norm, beta0_norm, beta0_bound, beta0_field) = match hyp.regime {
        DampingRegime::PositiveDamping => {
            if lambda0_min < hyp.alpha0 {
                reasons.push(format!(
                    "uniform damping hypothesis violated: sampled min lambda0 = {lambda0_min:e} \
                     is below alpha0 = {:e}",
                    hyp.alpha0
                ));
            }
            (beta.lp_norm(hyp.p)?, None, None, None)
        }
        DampingRegime::IndefiniteDamping => {
            let beta0 = minimal_beta0(lambda0, hyp.alpha0);
            let b0_norm = beta0.lp_norm(hyp.p)?;
            let b0_bound = decay_bound(hyp.alpha0, T::zero(), hyp.p, c_p);
            if b0_norm >= b0_bound {
                reasons.push(format!(
                    "indefinite-damping bound violated: ||beta0||_p = {b0_norm:e} \
                     >= (alpha0/c_p)^(1-1/(2p)) = {b0_bound:e}"
                ));
            }
            let combined = beta0.add(&beta)?;
            (
                combined.lp_norm(hyp.p)?,
                Some(b0_norm),
                Some(b0_bound),
                Some(beta0),
            )
        }
    };

    if beta_norm >= bound {
        let label = match hyp.regime {
            DampingRegime::PositiveDamping => "||beta||_p",
            DampingRegime::IndefiniteDamping => "||beta0 + beta||_p",
        };
        reasons.push(format!(
            "delay-coefficient norm bound violated: {label} = {beta_norm:e} \
             >= ((alpha0 - alpha)/c_p)^(1-1/(2p)) = {bound:e}"
        ));
    }

    let gamma = decay_rate(hyp.alpha0, hyp.alpha, hyp.p, c_p, beta_norm);
    if reasons.is_empty() && gamma <= T::zero() {
        reasons.push(format!("certified rate is not positive: gamma = {gamma:e}"));
    }

    let passed = reasons.is_empty();
    Ok(StabilityCertificate {
        passed,
        regime: hyp.regime,
        p: hyp.p,
        tau: hyp.tau,
        alpha0: hyp.alpha0,
        alpha: hyp.alpha,
        c_p,
        lambda0_min,
        beta_norm,
        bound,
        beta0_norm,
        beta0_bound,
        gamma: passed.then_some(gamma),
        beta_field: beta,
        beta0_field,
        failure_reasons: reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Arc<Grid<f64>> {
        Grid::new(16.0, 512).unwrap()
    }

    #[test]
    fn sample_constant_and_indicator() {
        let g = grid();
        let ones = CoefficientSpec::Constant { value: 1.0 }.sample(&g).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));

        let ind = CoefficientSpec::Indicator {
            lower: 0.0,
            upper: 1.0,
            value: 1.0,
        }
        .sample(&g)
        .unwrap();
        for (x, v) in g.nodes().iter().zip(ind.values()) {
            let expected = if (0.0..=1.0).contains(x) { 1.0 } else { 0.0 };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn sample_bump_peak_value() {
        let g = grid();
        let bump = CoefficientSpec::GaussianBump {
            amplitude: 2.0,
            center: 0.0,
            width: 1.0,
        }
        .sample(&g)
        .unwrap();
        // x = 0 is a node of this grid.
        let idx = g.nodes().iter().position(|&x| x == 0.0).unwrap();
        assert_eq!(bump.values()[idx], 2.0);
    }

    #[test]
    fn sample_tables_interpolate() {
        let g = grid();
        let pl = CoefficientSpec::PiecewiseLinear {
            points: vec![(-1.0, 0.0), (1.0, 2.0)],
        }
        .sample(&g)
        .unwrap();
        let idx0 = g.nodes().iter().position(|&x| x == 0.0).unwrap();
        assert!((pl.values()[idx0] - 1.0).abs() < 1e-14);
        // clamped outside
        assert_eq!(pl.values()[0], 0.0);
        assert_eq!(*pl.values().last().unwrap(), 2.0);

        let sm = CoefficientSpec::Samples {
            points: vec![(-1.0, 1.0), (1.0, 1.0)],
        }
        .sample(&g)
        .unwrap();
        // zero outside the table range
        assert_eq!(sm.values()[0], 0.0);
        assert!((sm.values()[idx0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn malformed_specs_rejected() {
        let g = grid();
        assert!(CoefficientSpec::GaussianBump {
            amplitude: 1.0,
            center: 0.0,
            width: 0.0
        }
        .sample(&g)
        .is_err());
        assert!(CoefficientSpec::<f64>::PiecewiseLinear {
            points: vec![(0.0, 1.0)]
        }
        .sample(&g)
        .is_err());
        assert!(CoefficientSpec::<f64>::Samples {
            points: vec![(1.0, 0.0), (0.0, 1.0)]
        }
        .sample(&g)
        .is_err());
    }

    #[test]
    fn cp_values_in_f32() {
        assert_eq!(compute_cp(1.0f32).unwrap(), 1.0);
        assert!((compute_cp(2.0f32).unwrap() - 0.75).abs() < 1e-6);
    }

    #[test]
    fn cp_values() {
        assert_eq!(compute_cp(1.0f64).unwrap(), 1.0);
        assert_eq!(compute_cp(2.0f64).unwrap(), 0.75);
        assert!(compute_cp(0.5f64).is_err());
        assert!(compute_cp(f64::INFINITY).is_err());
        // verbose form of the same constant, as an independent route
        let p = 3.0f64;
        let verbose = (1.0 - 1.0 / (2.0 * p)) * (2.0f64 / p).powf(1.0 / (2.0 * p - 1.0));
        assert!((compute_cp(p).unwrap() - verbose).abs() < 1e-15);
    }

    #[test]
    fn cp_stays_in_unit_interval() {
        let mut p = 1.0f64;
        while p <= 64.0 {
            let cp = compute_cp(p).unwrap();
            assert!(cp > 0.0 && cp <= 1.0, "c_p out of range at p = {p}: {cp}");
            p += 0.5;
        }
    }

    #[test]
    fn minimal_beta_vanishes_at_threshold() {
        let g = grid();
        let lambda = CoefficientSpec::Constant { value: 0.2 }.sample(&g).unwrap();
        // (e^(ln 3) + 1)/2 = 2, and 2 * 0.2 - 0.4 = 0.
        let beta = minimal_beta(&lambda, 3.0f64.ln(), 0.4);
        assert!(beta.linf_norm() < 1e-12);

        let zero = Field::zeros(Arc::clone(&g));
        assert_eq!(minimal_beta(&zero, 1.0, 0.0).linf_norm(), 0.0);
    }

    #[test]
    fn minimal_beta_small_tau_limit() {
        let g = grid();
        let lambda = CoefficientSpec::Indicator {
            lower: -1.0,
            upper: 1.0,
            value: 1.0,
        }
        .sample(&g)
        .unwrap();
        // (e^tau + 1)/2 -> 1 as tau -> 0+, so beta -> max(0, 1 - alpha) on the support.
        let beta = minimal_beta(&lambda, 1e-12, 0.25);
        assert!((beta.linf_norm() - 0.75).abs() < 1e-9);
    }

    #[test]
    fn minimal_beta0_examples() {
        let g = grid();
        let l0 = CoefficientSpec::Constant { value: 1.0 }.sample(&g).unwrap();
        assert_eq!(minimal_beta0(&l0, 1.0).linf_norm(), 0.0);

        let dip = Field::from_fn(Arc::clone(&g), |x| 1.0 - 2.0 * (-x * x).exp()).unwrap();
        let beta0 = minimal_beta0(&dip, 1.0);
        for (x, v) in g.nodes().iter().zip(beta0.values()) {
            assert!((v - 2.0 * (-x * x).exp()).abs() < 1e-12);
        }
    }

    fn hyp(
        p: f64,
        alpha0: f64,
        alpha: f64,
        tau: f64,
        regime: DampingRegime,
    ) -> HypothesisInput<f64> {
        HypothesisInput {
            tau,
            p,
            alpha0,
            alpha,
            regime,
        }
    }

    #[test]
    fn certify_constant_coefficients() {
        let g = grid();
        let l0 = CoefficientSpec::Constant { value: 1.0 }.sample(&g).unwrap();
        let l = CoefficientSpec::Constant { value: 0.2 }.sample(&g).unwrap();
        let cert = certify(
            &l0,
            &l,
            &hyp(2.0, 1.0, 0.4, 3.0f64.ln(), DampingRegime::PositiveDamping),
        )
        .unwrap();
        assert!(cert.passed, "{:?}", cert.failure_reasons);
        assert!(cert.beta_field.linf_norm() < 1e-12);
        assert!((cert.gamma.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn certify_matches_hand_arithmetic() {
        // Construct lambda so that the minimal beta is an indicator with
        // ||beta||_2 = 0.3 exactly, then check every derived constant.
        let g = grid();
        let tau = 3.0f64.ln();
        let factor = (tau.exp() + 1.0) / 2.0; // = 2
        let alpha = 0.25;
        let alpha0 = 0.75;
        let p = 2.0;

        let n_nodes = g
            .nodes()
            .iter()
            .filter(|x| (0.0..=1.0).contains(*x))
            .count();
        let measure = n_nodes as f64 * g.spacing();
        let beta_value = 0.3 / measure.sqrt();

        let lambda = Field::from_fn(Arc::clone(&g), |x| {
            let beta = if (0.0..=1.0).contains(&x) {
                beta_value
            } else {
                0.0
            };
            (alpha + beta) / factor
        })
        .unwrap();
        let lambda0 = CoefficientSpec::Constant { value: alpha0 }
            .sample(&g)
            .unwrap();

        let cert = certify(
            &lambda0,
            &lambda,
            &hyp(p, alpha0, alpha, tau, DampingRegime::PositiveDamping),
        )
        .unwrap();
        assert!(cert.passed, "{:?}", cert.failure_reasons);
        assert!((cert.beta_norm - 0.3).abs() < 1e-12);
        // bound = (0.5/0.75)^(3/4), gamma = min{2(0.5 - 0.75*0.3^(4/3)), 1}
        let bound = (0.5f64 / 0.75).powf(0.75);
        let gamma = (2.0 * (0.5 - 0.75 * 0.3f64.powf(4.0 / 3.0))).min(1.0);
        assert!((bound - 0.737788).abs() < 1e-5);
        assert!((gamma - 0.698750).abs() < 1e-5);
        assert!((cert.bound - bound).abs() < 1e-12);
        assert!((cert.gamma.unwrap() - gamma).abs() < 1e-12);
    }

    #[test]
    fn certify_rejects_alpha_at_alpha0() {
        let g = grid();
        let l0 = CoefficientSpec::Constant { value: 1.0 }.sample(&g).unwrap();
        let l = Field::zeros(Arc::clone(&g));
        let h = hyp(2.0, 1.0, 1.0, 1.0, DampingRegime::PositiveDamping);
        assert!(certify(&l0, &l, &h).is_err());
    }

    #[test]
    fn certify_flags_low_lambda0() {
        let g = grid();
        let l0 = CoefficientSpec::Constant { value: 0.5 }.sample(&g).unwrap();
        let l = Field::zeros(Arc::clone(&g));
        let cert = certify(
            &l0,
            &l,
            &hyp(2.0, 1.0, 0.0, 1.0, DampingRegime::PositiveDamping),
        )
        .unwrap();
        assert!(!cert.passed);
        assert!(cert.gamma.is_none());
        assert!(cert.failure_reasons[0].contains("lambda0"));
    }

    #[test]
    fn zero_delay_coefficient_certifies_at_clamped_rate() {
        let g = grid();
        let l = Field::zeros(Arc::clone(&g));
        for p in [1.0, 1.5, 2.0, 4.0, 8.0] {
            for alpha0 in [0.3, 0.5, 1.0, 2.0] {
                let l0 = CoefficientSpec::Constant { value: alpha0 }
                    .sample(&g)
                    .unwrap();
                let cert = certify(
                    &l0,
                    &l,
                    &hyp(p, alpha0, 0.0, 0.7, DampingRegime::PositiveDamping),
                )
                .unwrap();
                assert!(cert.passed);
                let expected = (2.0 * alpha0).min(1.0);
                assert!((cert.gamma.unwrap() - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn positive_regime_implies_indefinite_with_same_rate() {
        let g = grid();
        let l0 = CoefficientSpec::Constant { value: 0.8 }.sample(&g).unwrap();
        let l = CoefficientSpec::GaussianBump {
            amplitude: 0.2,
            center: 0.5,
            width: 1.0,
        }
        .sample(&g)
        .unwrap();
        let pos = certify(
            &l0,
            &l,
            &hyp(2.0, 0.8, 0.3, 1.0, DampingRegime::PositiveDamping),
        )
        .unwrap();
        let ind = certify(
            &l0,
            &l,
            &hyp(2.0, 0.8, 0.3, 1.0, DampingRegime::IndefiniteDamping),
        )
        .unwrap();
        assert!(pos.passed && ind.passed);
        assert_eq!(ind.beta0_norm.unwrap(), 0.0);
        assert_eq!(pos.gamma.unwrap(), ind.gamma.unwrap());
    }

    #[test]
    fn indefinite_regime_certifies_sign_changing_lambda0() {
        let g = grid();
        let l0 =
            Field::from_fn(Arc::clone(&g), |x| 1.0 - 1.2 * (-(x / 0.3).powi(2)).exp()).unwrap();
        assert!(l0.values().iter().copied().fold(f64::INFINITY, f64::min) < 0.0);
        let l = CoefficientSpec::GaussianBump {
            amplitude: 0.1,
            center: 0.0,
            width: 1.0,
        }
        .sample(&g)
        .unwrap();
        let cert = certify(
            &l0,
            &l,
            &hyp(2.0, 1.0, 0.2, 1.0, DampingRegime::IndefiniteDamping),
        )
        .unwrap();
        assert!(cert.passed, "{:?}", cert.failure_reasons);
        // beta vanishes here, so the rate comes from ||beta0||_2 alone.
        let b0 = cert.beta0_norm.unwrap();
        let gamma = (2.0 * (0.8 - 0.75 * b0.powf(4.0 / 3.0))).min(1.0);
        assert!((cert.gamma.unwrap() - gamma).abs() < 1e-12);
        assert!(cert.gamma.unwrap() > 0.59 && cert.gamma.unwrap() < 0.61);
    }

    proptest! {
        #[test]
        fn minimal_beta_monotone(amp in 0.0f64..2.0, alpha1 in 0.0f64..1.0, d_alpha in 0.0f64..1.0,
                                 tau1 in 0.05f64..2.0, d_tau in 0.0f64..2.0) {
            let g = Grid::<f64>::new(8.0, 64).unwrap();
            let lambda = CoefficientSpec::GaussianBump { amplitude: amp, center: 0.0, width: 1.0 }
                .sample(&g).unwrap();
            let base = minimal_beta(&lambda, tau1, alpha1);
            prop_assert!(base.values().iter().all(|&v| v >= 0.0));
            // nonincreasing in alpha
            let more_alpha = minimal_beta(&lambda, tau1, alpha1 + d_alpha);
            for (a, b) in base.values().iter().zip(more_alpha.values()) {
                prop_assert!(b <= a);
            }
            // nondecreasing in tau
            let more_tau = minimal_beta(&lambda, tau1 + d_tau, alpha1);
            for (a, b) in base.values().iter().zip(more_tau.values()) {
                prop_assert!(b >= a);
            }
        }

        #[test]
        fn certified_rate_never_exceeds_one(
            amp in 0.0f64..0.2, alpha0 in 0.5f64..4.0, frac in 0.0f64..0.9, p in 1.0f64..6.0,
        ) {
            let g = Grid::<f64>::new(8.0, 64).unwrap();
            let l0 = CoefficientSpec::Constant { value: alpha0 }.sample(&g).unwrap();
            let l = CoefficientSpec::GaussianBump { amplitude: amp, center: 0.0, width: 0.8 }
                .sample(&g).unwrap();
            let h = HypothesisInput {
                tau: 0.5,
                p,
                alpha0,
                alpha: alpha0 * frac,
                regime: DampingRegime::PositiveDamping,
            };
            let cert = certify(&l0, &l, &h).unwrap();
            if let Some(gamma) = cert.gamma {
                prop_assert!(gamma > 0.0 && gamma <= 1.0);
            }
        }
    }
}
