//! Parametric-bootstrap test for cluster-level ARCH(1) volatility.
//!
//! The observed panel is fitted once. Replicate panels are then simulated
//! from the fitted model (common `φ̂`, per-series `λ̂ᵢ`, cluster ARCH pairs,
//! Gaussian innovations) starting at each series' first observation, and
//! every replicate is re-fitted. Each cluster's `α̂₁` replicates give a
//! percentile interval at Bonferroni-corrected levels `α/(2m)` and
//! `1 - α/(2m)`; the cluster is declared volatile when zero falls outside.
//!
//! By default the replicate variances follow the ARCH recursion on the
//! replicate's own innovations ([`VariancePath::Recursive`]). Rebuilding
//! them along the observed squared residuals ([`VariancePath::Observed`])
//! is kept for comparison; those replicates are heteroskedastic but carry
//! no ARCH feedback, so their `α̂₁` stays near zero whatever the data.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{backfit, BackfitOptions, FittedModel};
use crate::panel::Panel;
use crate::rng::{derive_seed, rng_for, Stream};
use crate::stats::{mean, percentiles};

/// How replicate innovation variances are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariancePath {
    /// `σ*²[t] = α̂ₖ₀ + α̂ₖ₁·u*²[t-1]`, driven by the replicate's own
    /// innovations, so each replicate is an ARCH(1) process at the fitted
    /// parameters. Negative `α̂ₖ₁` is treated as zero.
    #[default]
    Recursive,
    /// `σ̂²[t] = α̂ₖ₀ + α̂ₖ₁·û²[t-1]` along the observed squared residuals
    /// (see [`reconstruct_variances`]).
    Observed,
}

/// Extra attempts, each with a fresh seed, for a replicate whose fit fails.
pub const REPLICATE_RETRIES: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    /// Number of bootstrap replicates `B`.
    pub replicates: usize,
    /// Familywise significance level.
    pub alpha: f64,
    /// Variance floor as a multiple of the pooled variance of `r***`.
    pub variance_floor: f64,
    #[serde(default)]
    pub variance_path: VariancePath,
    pub seed: u64,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            replicates: 500,
            alpha: 0.05,
            variance_floor: 1e-8,
            variance_path: VariancePath::default(),
            seed: 0,
        }
    }
}

impl TestOptions {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 20 {
            return Err(Error::InvalidConfig(format!(
                "at least 20 bootstrap replicates are required, got {}",
                self.replicates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::InvalidConfig("variance_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Test outcome for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTest {
    pub cluster: usize,
    pub name: String,
    pub size: usize,
    pub alpha0_hat: f64,
    pub alpha1_hat: f64,
    pub boot_alpha1: Vec<f64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub reject: bool,
}

/// Decision rule shared by every cluster: reject when zero is outside the
/// closed interval.
pub fn excludes_zero(lower: f64, upper: f64) -> bool {
    !(lower <= 0.0 && 0.0 <= upper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityTestResult {
    pub clusters: Vec<ClusterTest>,
    pub alpha: f64,
    /// `α / m`
    pub corrected_level: f64,
    pub lower_level: f64,
    pub upper_level: f64,
    pub replicates_requested: usize,
    /// Replicates that failed even after retries; excluded from intervals.
    pub failed_replicates: usize,
    pub fit: FittedModel,
}

impl VolatilityTestResult {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn any_reject(&self) -> bool {
        self.clusters.iter().any(|c| c.reject)
    }
}

/// Percentile levels `(α/(2m), 1 - α/(2m))`.
pub fn bonferroni_levels(alpha: f64, m: usize) -> (f64, f64) {
    let tail = alpha / (2.0 * m as f64);
    (tail, 1.0 - tail)
}

/// Conditional variances `max(α̂ₖ₀ + α̂ₖ₁·û²[t-1], floor)` for `t = 2..T`.
///
/// `û = r***` starts at `t = 2`, so the lag needed at `t = 2` is replaced by
/// the series mean of `û²`.
pub fn reconstruct_variances(fitted: &FittedModel, panel: &Panel, floor: f64) -> Array2<f64> {
    let r3 = &fitted.residuals_star3;
    let (n, len) = r3.dim();
    let mut out = Array2::zeros((n, len));
    for i in 0..n {
        let arch = fitted.arch_hat[panel.cluster_of()[i]];
        let u2: Vec<f64> = r3.row(i).iter().map(|r| r * r).collect();
        let start = mean(&u2);
        for j in 0..len {
            let lag = if j == 0 { start } else { u2[j - 1] };
            out[[i, j]] = (arch.alpha0 + arch.alpha1 * lag).max(floor);
        }
    }
    out
}

/// One bootstrap panel: `Y*[1] = Y[1]`, then
/// `Y*[t] = φ̂·Y*[t-1] + λ̂ᵢ + u*[t]` with `u*[t] ~ N(0, σ̂²[t])`.
pub fn generate_replicate(fitted: &FittedModel, panel: &Panel, sigma2: &Array2<f64>, seed: u64) -> Result<Panel> {
    let (n, t) = panel.values().dim();
    if sigma2.dim() != (n, t - 1) {
        return Err(Error::InvalidPanel(format!(
            "variance matrix is {:?}, expected ({n}, {})",
            sigma2.dim(),
            t - 1
        )));
    }
    if fitted.lambda_hat.len() != n {
        return Err(Error::LengthMismatch {
            left: fitted.lambda_hat.len(),
            right: n,
        });
    }
    let mut values = Array2::zeros((n, t));
    for i in 0..n {
        let mut rng = rng_for(seed, Stream::Series, i as u64);
        let mut y = panel.values()[[i, 0]];
        values[[i, 0]] = y;
        for j in 1..t {
            let z: f64 = rng.sample(StandardNormal);
            y = fitted.phi_hat * y + fitted.lambda_hat[i] + z * sigma2[[i, j - 1]].sqrt();
            values[[i, j]] = y;
        }
    }
    panel.with_values(values)
}

/// One bootstrap panel whose innovations follow ARCH(1) at the fitted
/// cluster parameters: `σ*²[t] = max(α̂ₖ₀ + max(α̂ₖ₁, 0)·u*²[t-1], floor)`.
/// The lag at `t = 2` is the series mean of the observed `û²`.
pub fn generate_recursive_replicate(fitted: &FittedModel, panel: &Panel, floor: f64, seed: u64) -> Result<Panel> {
    let (n, t) = panel.values().dim();
    if fitted.lambda_hat.len() != n || fitted.residuals_star3.nrows() != n {
        return Err(Error::LengthMismatch {
            left: fitted.lambda_hat.len(),
            right: n,
        });
    }
    let mut values = Array2::zeros((n, t));
    for i in 0..n {
        let arch = fitted.arch_hat[panel.cluster_of()[i]];
        let slope = arch.alpha1.max(0.0);
        let mut rng = rng_for(seed, Stream::Series, i as u64);
        let mut lag_sq =
            fitted.residuals_star3.row(i).iter().map(|r| r * r).sum::<f64>() / fitted.residuals_star3.ncols() as f64;
        let mut y = panel.values()[[i, 0]];
        values[[i, 0]] = y;
        for j in 1..t {
            let z: f64 = rng.sample(StandardNormal);
            let u = z * (arch.alpha0 + slope * lag_sq).max(floor).sqrt();
            y = fitted.phi_hat * y + fitted.lambda_hat[i] + u;
            values[[i, j]] = y;
            lag_sq = u * u;
        }
    }
    panel.with_values(values)
}

enum ReplicateSource<'a> {
    Observed(&'a Array2<f64>),
    Recursive(f64),
}

fn replicate_alpha1(
    fitted: &FittedModel,
    panel: &Panel,
    source: &ReplicateSource<'_>,
    backfit_options: &BackfitOptions,
    test_seed: u64,
    index: u64,
) -> Option<Vec<f64>> {
    let options = BackfitOptions {
        seed: derive_seed(test_seed, Stream::ReplicateBackfit, index),
        ..*backfit_options
    };
    let base = derive_seed(test_seed, Stream::Replicate, index);
    (0..=REPLICATE_RETRIES).find_map(|attempt| {
        let seed = derive_seed(base, Stream::Replicate, attempt);
        let replicate = match source {
            ReplicateSource::Observed(sigma2) => generate_replicate(fitted, panel, sigma2, seed),
            ReplicateSource::Recursive(floor) => generate_recursive_replicate(fitted, panel, *floor, seed),
        }
        .ok()?;
        let fit = backfit(&replicate, &options).ok()?;
        let a1: Vec<f64> = fit.arch_hat.iter().map(|a| a.alpha1).collect();
        a1.iter().all(|v| v.is_finite()).then_some(a1)
    })
}

/// Runs the full bootstrap test on `panel`.
pub fn bootstrap_test(
    panel: &Panel,
    backfit_options: &BackfitOptions,
    test_options: &TestOptions,
) -> Result<VolatilityTestResult> {
    backfit_options.validate()?;
    test_options.validate()?;
    let fitted = backfit(panel, backfit_options)?;

    let pooled: Vec<f64> = fitted.residuals_star3.iter().copied().collect();
    let pooled_var = crate::stats::variance(&pooled);
    let floor = (test_options.variance_floor * pooled_var).max(f64::MIN_POSITIVE);
    let sigma2;
    let source = match test_options.variance_path {
        VariancePath::Observed => {
            sigma2 = reconstruct_variances(&fitted, panel, floor);
            ReplicateSource::Observed(&sigma2)
        }
        VariancePath::Recursive => ReplicateSource::Recursive(floor),
    };

    let draws: Vec<Option<Vec<f64>>> = (0..test_options.replicates as u64)
        .into_par_iter()
        .map(|b| replicate_alpha1(&fitted, panel, &source, backfit_options, test_options.seed, b))
        .collect();
    let failed = draws.iter().filter(|d| d.is_none()).count();
    let draws: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    if draws.is_empty() {
        return Err(Error::ReplicatesFailed {
            attempted: test_options.replicates,
        });
    }

    let m = panel.n_clusters();
    let (lower_level, upper_level) = bonferroni_levels(test_options.alpha, m);
    let clusters = panel
        .clusters()
        .into_iter()
        .map(|c| {
            let boot: Vec<f64> = draws.iter().map(|d| d[c.index]).collect();
            let ci = percentiles(&boot, &[lower_level, upper_level])?;
            let est = fitted.arch_hat[c.index];
            Ok(ClusterTest {
                cluster: c.index,
                size: c.size(),
                name: c.name,
                alpha0_hat: est.alpha0,
                alpha1_hat: est.alpha1,
                boot_alpha1: boot,
                ci_lower: ci[0],
                ci_upper: ci[1],
                reject: excludes_zero(ci[0], ci[1]),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(VolatilityTestResult {
        clusters,
        alpha: test_options.alpha,
        corrected_level: test_options.alpha / m as f64,
        lower_level,
        upper_level,
        replicates_requested: test_options.replicates,
        failed_replicates: failed,
        fit: fitted,
    })
}
