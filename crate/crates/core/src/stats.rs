//! Small numerical kernels shared by the estimators.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Intercept and slope of a simple least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares of `y` on `x` with an intercept.
///
/// Uses centred sums, so the slope is `S_xy / S_xx` and the intercept
/// `ȳ - slope·x̄`. Returns [`Error::DegenerateRegressor`] when `x` is
/// constant; callers pick their own fallback.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: x.len(),
        });
    }
    let x_bar = mean(x);
    let y_bar = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - x_bar;
        sxx += dx * dx;
        sxy += dx * (yi - y_bar);
    }
    // Relative test: a regressor whose spread is lost in rounding is constant.
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if !(sxx > 0.0) || sxx.sqrt() <= 1e-12 * scale * (x.len() as f64).sqrt() {
        return Err(Error::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        intercept: y_bar - slope * x_bar,
        slope,
    })
}

/// Arithmetic mean. `NaN` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divisor `n`).
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Order-statistic percentile: the `j`-th smallest sample with
/// `j = clamp(ceil(q·B), 1, B)`.
///
/// The returned value is always one of the inputs.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "percentile level must lie in (0, 1), got {q}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[order_index(sorted.len(), q)])
}

/// Several percentiles from a single sort.
pub fn percentiles(samples: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    levels
        .iter()
        .map(|&q| {
            if q > 0.0 && q < 1.0 {
                Ok(sorted[order_index(sorted.len(), q)])
            } else {
                Err(Error::InvalidConfig(format!(
                    "percentile level must lie in (0, 1), got {q}"
                )))
            }
        })
        .collect()
}

// Zero-based index of the ceil(q·B)-th order statistic. The product is
// nudged down by a few ulps so that e.g. 0.0125 * 400 lands on 5, not 6.
fn order_index(len: usize, q: f64) -> usize {
    let raw = q * len as f64;
    let j = (raw - raw.abs() * 4.0 * f64::EPSILON).ceil() as usize;
    j.clamp(1, len) - 1
}

/// Upper tail of the χ² distribution with one degree of freedom,
/// `P(χ²₁ > x) = erfc(√(x/2))`.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    erfc((x / 2.0).sqrt())
}

/// Binomial standard error `√(p(1-p)/n)` of a Monte Carlo rejection rate.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}
