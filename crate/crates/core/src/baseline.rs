//! Per-series likelihood-ratio test of ARCH(1) against constant variance.
//!
//! Each series gets its own AR(1) by conditional least squares. The
//! residuals are scored under a constant-variance Gaussian and under a
//! Gaussian ARCH(1) fitted by maximum likelihood; twice the log-likelihood
//! gain is referred to χ²₁.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::cls_ar1;
use crate::stats::{chi2_1_sf, mean, LineFit};

/// Upper bound on `α₁` during the likelihood search.
pub const ALPHA1_MAX: f64 = 5.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gaussian log-likelihood of `residuals` with per-point variances.
pub fn gaussian_loglik(residuals: &[f64], sigma2: &[f64]) -> Result<f64> {
    if residuals.len() != sigma2.len() {
        return Err(Error::LengthMismatch {
            left: residuals.len(),
            right: sigma2.len(),
        });
    }
    let mut ll = 0.0;
    for (index, (&e, &s2)) in residuals.iter().zip(sigma2).enumerate() {
        if !(s2 > 0.0) {
            return Err(Error::NonPositiveVariance { index, value: s2 });
        }
        ll += -0.5 * LN_2PI - 0.5 * s2.ln() - e * e / (2.0 * s2);
    }
    Ok(ll)
}

/// Maximum-likelihood ARCH(1) fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arch1MleFit {
    pub alpha0: f64,
    pub alpha1: f64,
    /// Conditional log-likelihood over `t = 2..n`.
    pub loglik: f64,
    pub converged: bool,
}

// Conditional ARCH(1) log-likelihood; `e` is already scaled.
fn arch1_loglik(e: &[f64], alpha0: f64, alpha1: f64) -> f64 {
    let mut ll = 0.0;
    for w in e.windows(2) {
        let s2 = alpha0 + alpha1 * w[0] * w[0];
        ll += -0.5 * LN_2PI - 0.5 * s2.ln() - w[1] * w[1] / (2.0 * s2);
    }
    ll
}

fn to_params(theta: [f64; 2]) -> (f64, f64) {
    let alpha0 = theta[0].exp();
    let alpha1 = ALPHA1_MAX / (1.0 + (-theta[1]).exp());
    (alpha0, alpha1)
}

fn from_params(alpha0: f64, alpha1: f64) -> [f64; 2] {
    let p = alpha1 / ALPHA1_MAX;
    [alpha0.ln(), (p / (1.0 - p)).ln()]
}

struct SimplexResult {
    point: [f64; 2],
    value: f64,
    converged: bool,
}

/// Nelder–Mead minimisation in two dimensions.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: F, start: [f64; 2], step: f64) -> SimplexResult {
    const MAX_ITER: usize = 2000;
    const F_TOL: f64 = 1e-11;
    const X_TOL: f64 = 1e-4;

    let eval = |x: [f64; 2]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut values = simplex.map(eval);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    for _ in 0..MAX_ITER {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);

        let spread = (values[2] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .map(|p| (p[0] - simplex[0][0]).abs().max((p[1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        // A loose simplex-size test: along α₁ → 0 the logit coordinate is flat
        // and only the function spread is meaningful.
        if spread <= F_TOL * (1.0 + values[0].abs())
            && size <= X_TOL * (1.0 + simplex[0][0].abs().max(simplex[0][1].abs()))
        {
            return SimplexResult {
                point: simplex[0],
                value: values[0],
                converged: true,
            };
        }

        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let reflected = lerp(centroid, simplex[2], -1.0);
        let fr = eval(reflected);
        if fr < values[0] {
            let expanded = lerp(centroid, simplex[2], -2.0);
            let fe = eval(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let (contracted, fc) = if fr < values[2] {
                let c = lerp(centroid, reflected, 0.5);
                (c, eval(c))
            } else {
                let c = lerp(centroid, simplex[2], 0.5);
                (c, eval(c))
            };
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = lerp(simplex[0], simplex[k], 0.5);
                    values[k] = eval(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    SimplexResult {
        point: simplex[best],
        value: values[best],
        converged: false,
    }
}

/// Fits a Gaussian ARCH(1) to `residuals` by conditional maximum likelihood
/// over `α₀ > 0`, `0 ≤ α₁ ≤ ALPHA1_MAX`.
///
/// The search runs on `(ln α₀, logit(α₁/ALPHA1_MAX))` from four starts; the
/// closed-form constant-variance point (`α₁ = 0`) is also a candidate, so
/// the result never scores below the homoskedastic fit.
pub fn fit_arch1_mle(residuals: &[f64]) -> Result<Arch1MleFit> {
    if residuals.len() < 8 {
        return Err(Error::TooShort {
            required: 8,
            actual: residuals.len(),
        });
    }
    if residuals.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidConfig("residuals must be finite".into()));
    }
    // Work on unit-scale data; the likelihood shifts by -(n-1)·ln(scale).
    let mean_sq = mean(&residuals.iter().map(|e| e * e).collect::<Vec<_>>());
    let scale = mean_sq.sqrt();
    let e: Vec<f64> = residuals.iter().map(|v| v / scale).collect();
    let lag_sq: Vec<f64> = e[..e.len() - 1].iter().map(|v| v * v).collect();
    let spread = lag_sq.iter().fold(0.0f64, |m, v| m.max(*v)) - lag_sq.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(scale > 0.0) || !(spread > 1e-12) {
        return Err(Error::DegenerateRegressor);
    }
    let shift = -((e.len() - 1) as f64) * scale.ln();

    let boundary_a0 = mean(&e[1..].iter().map(|v| v * v).collect::<Vec<_>>());
    let boundary = Arch1MleFit {
        alpha0: boundary_a0,
        alpha1: 0.0,
        loglik: arch1_loglik(&e, boundary_a0, 0.0),
        converged: true,
    };

    let objective = |theta: [f64; 2]| {
        let (a0, a1) = to_params(theta);
        -arch1_loglik(&e, a0, a1)
    };
    let mut best: Option<Arch1MleFit> = None;
    for a1_start in [1e-3, 0.2, 0.5, 0.9 * ALPHA1_MAX] {
        let a0_start = (1.0 - a1_start).max(0.05);
        let run = nelder_mead(objective, from_params(a0_start, a1_start), 0.5);
        if !run.converged || !run.value.is_finite() {
            continue;
        }
        let (alpha0, alpha1) = to_params(run.point);
        let cand = Arch1MleFit {
            alpha0,
            alpha1,
            loglik: -run.value,
            converged: true,
        };
        if best.map_or(true, |b| cand.loglik > b.loglik) {
            best = Some(cand);
        }
    }
    let best = best.ok_or(Error::NonConvergence)?;
    let best = if boundary.loglik >= best.loglik { boundary } else { best };
    Ok(Arch1MleFit {
        alpha0: best.alpha0 * mean_sq,
        alpha1: best.alpha1,
        loglik: best.loglik + shift,
        converged: best.converged,
    })
}

/// Outcome of the univariate likelihood-ratio test on one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub ar_intercept: f64,
    pub ar_phi: f64,
    /// `|φ̂| ≥ 1`
    pub nonstationary: bool,
    pub loglik_null: f64,
    pub loglik_alt: f64,
    pub arch: Arch1MleFit,
}

impl LrTest {
    pub fn ar_fit(&self) -> LineFit {
        LineFit {
            intercept: self.ar_intercept,
            slope: self.ar_phi,
        }
    }
}

/// Likelihood-ratio statistic to p-value.
pub fn lr_p_value(statistic: f64) -> f64 {
    chi2_1_sf(statistic)
}

/// AR(1) by conditional least squares, then LR test of ARCH(1) on the
/// residuals at level `significance`.
pub fn lr_test_arch(series: &[f64], significance: f64) -> Result<LrTest> {
    if series.len() < 10 {
        return Err(Error::TooShort {
            required: 10,
            actual: series.len(),
        });
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "significance must lie in (0, 1), got {significance}"
        )));
    }
    let ar = cls_ar1(series)?;
    let resid: Vec<f64> = series
        .windows(2)
        .map(|w| w[1] - ar.intercept - ar.slope * w[0])
        .collect();

    // Null scored on the same points as the conditional ARCH likelihood.
    let scored = &resid[1..];
    let s2 = mean(&scored.iter().map(|e| e * e).collect::<Vec<_>>());
    let loglik_null = gaussian_loglik(scored, &vec![s2; scored.len()])?;
    let arch = fit_arch1_mle(&resid)?;
    let statistic = (2.0 * (arch.loglik - loglik_null)).max(0.0);
    let p_value = lr_p_value(statistic);
    Ok(LrTest {
        statistic,
        p_value,
        reject: p_value < significance,
        ar_intercept: ar.intercept,
        ar_phi: ar.slope,
        nonstationary: ar.slope.abs() >= 1.0,
        loglik_null,
        loglik_alt: arch.loglik,
        arch,
    })
}
