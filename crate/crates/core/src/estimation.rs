//! Backfitting estimation of the clustered AR(1)–ARCH(1) panel model.
//!
//! One cycle of the algorithm, given current random effects `λ̂`:
//!
//! 1. `r*  = Y - λ̂` (the series purged of its random effect);
//! 2. per-series conditional least squares of `r*[t]` on `r*[t-1]` gives
//!    `φ̂ᵢ`; an ordinary bootstrap over the `φ̂ᵢ` gives the common `φ̂`;
//! 3. `r** = Y[t] - φ̂·Y[t-1]` and `r*** = r** - λ̂`;
//! 4. per-series OLS of `r***²[t]` on `r***²[t-1]` gives ARCH(1) pairs,
//!    which are averaged within each cluster.
//!
//! The first cycle starts from `λ̂ᵢ = mean(Yᵢ)`; later cycles take `λ̂ᵢ` as
//! the mean of the previous cycle's `r**ᵢ`. Cycles repeat until no
//! parameter moves by `ε` or more.
//!
//! The bootstrap over `φ̂ᵢ` reuses one seed for every cycle, so the
//! iteration is a deterministic map and can actually settle.

use ndarray::{s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::rng::{rng_for, Stream};
use crate::stats::{mean, ols_fit, LineFit};

/// Tuning for [`backfit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackfitOptions {
    /// Bootstrap resamples `R` drawn from the per-series `φ̂ᵢ`.
    pub resamples: usize,
    /// Convergence tolerance on the largest parameter change.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for BackfitOptions {
    fn default() -> Self {
        Self {
            resamples: 500,
            epsilon: 1e-4,
            max_iterations: 50,
            seed: 0,
        }
    }
}

impl BackfitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::InvalidConfig("resamples must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Unconstrained ARCH(1) coefficients as estimated by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchEstimate {
    pub alpha0: f64,
    pub alpha1: f64,
}

/// Output of the ordinary bootstrap over per-series AR estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiBootstrap {
    pub phi_hat: f64,
    pub phi_boot: Vec<f64>,
}

/// The three residual panels, each `N × (T-1)` covering `t = 2..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `Y[t] - λ̂`
    pub star: Array2<f64>,
    /// `Y[t] - φ̂·Y[t-1]`
    pub star2: Array2<f64>,
    /// `Y[t] - λ̂ - φ̂·Y[t-1]`
    pub star3: Array2<f64>,
}

/// Converged (or iteration-capped) backfitting output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub phi_hat: f64,
    pub phi_boot: Vec<f64>,
    /// Conditional least-squares slope per series; `None` where the series
    /// was degenerate and left out of the bootstrap.
    pub phi_per_series: Vec<Option<f64>>,
    pub lambda_hat: Vec<f64>,
    pub arch_per_series: Vec<ArchEstimate>,
    pub arch_hat: Vec<ArchEstimate>,
    pub residuals_star3: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest parameter change in the final cycle (`∞` after one cycle).
    pub last_change: f64,
}

/// Starting random effects: the mean of each series.
pub fn initialize_random_effects(panel: &Panel) -> Vec<f64> {
    row_means(panel.values())
}

/// Random effects from a residual panel: the per-series residual mean.
pub fn estimate_random_effects(residuals: &Array2<f64>) -> Vec<f64> {
    row_means(residuals)
}

fn row_means(m: &Array2<f64>) -> Vec<f64> {
    m.mean_axis(Axis(1)).map(|a| a.to_vec()).unwrap_or_default()
}

/// Conditional least squares for an AR(1) with intercept: regresses
/// `y[t]` on `y[t-1]` for `t = 2..T`.
pub fn cls_ar1(series: &[f64]) -> Result<LineFit> {
    if series.len() < 3 {
        return Err(Error::TooShort {
            required: 3,
            actual: series.len(),
        });
    }
    let n = series.len();
    ols_fit(&series[..n - 1], &series[1..])
}

/// Ordinary bootstrap of the mean of `estimates`: `resamples` draws of size
/// `N` with replacement. `phi_hat` is the mean of the resample means.
pub fn bootstrap_phi(estimates: &[f64], resamples: usize, seed: u64) -> Result<PhiBootstrap> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    if resamples == 0 {
        return Err(Error::InvalidConfig("resamples must be at least 1".into()));
    }
    let n = estimates.len();
    let mut rng = rng_for(seed, Stream::PhiBootstrap, 0);
    let phi_boot: Vec<f64> = (0..resamples)
        .map(|_| {
            let sum: f64 = (0..n).map(|_| estimates[rng.random_range(0..n)]).sum();
            sum / n as f64
        })
        .collect();
    Ok(PhiBootstrap {
        phi_hat: mean(&phi_boot),
        phi_boot,
    })
}

/// Residual panels for `t = 2..T` at the given `λ̂` and `φ̂`.
pub fn compute_residuals(panel: &Panel, lambda_hat: &[f64], phi_hat: f64) -> Residuals {
    let y = panel.values();
    let t = y.ncols();
    let current = y.slice(s![.., 1..]);
    let lagged = y.slice(s![.., ..t - 1]);
    let lambda = ndarray::ArrayView1::from(lambda_hat).insert_axis(Axis(1));

    let star = &current - &lambda;
    let star2 = &current - &(&lagged * phi_hat);
    let star3 = &star2 - &lambda;
    Residuals { star, star2, star3 }
}

/// ARCH(1) by OLS of `û²[t]` on `û²[t-1]` where `û = r***`. A constant
/// `û²` has no usable regressor and yields `(mean û², 0)`.
pub fn arch_ols_per_series(r_star3: &[f64]) -> ArchEstimate {
    let u2: Vec<f64> = r_star3.iter().map(|r| r * r).collect();
    if u2.len() < 3 {
        return ArchEstimate {
            alpha0: mean(&u2),
            alpha1: 0.0,
        };
    }
    match ols_fit(&u2[..u2.len() - 1], &u2[1..]) {
        Ok(fit) => ArchEstimate {
            alpha0: fit.intercept,
            alpha1: fit.slope,
        },
        Err(_) => ArchEstimate {
            alpha0: mean(&u2),
            alpha1: 0.0,
        },
    }
}

/// Cluster-level ARCH pairs: the mean of the member estimates.
pub fn aggregate_cluster_arch(per_series: &[ArchEstimate], panel: &Panel) -> Result<Vec<ArchEstimate>> {
    if per_series.len() != panel.n_series() {
        return Err(Error::LengthMismatch {
            left: per_series.len(),
            right: panel.n_series(),
        });
    }
    panel
        .clusters()
        .iter()
        .map(|c| {
            if c.members.is_empty() {
                return Err(Error::InvalidPanel(format!("cluster '{}' is empty", c.name)));
            }
            let n = c.members.len() as f64;
            let (a0, a1) = c.members.iter().fold((0.0, 0.0), |(a0, a1), &j| {
                (a0 + per_series[j].alpha0, a1 + per_series[j].alpha1)
            });
            Ok(ArchEstimate {
                alpha0: a0 / n,
                alpha1: a1 / n,
            })
        })
        .collect()
}

struct Cycle {
    phi: PhiBootstrap,
    phi_per_series: Vec<Option<f64>>,
    residuals: Residuals,
    arch_per_series: Vec<ArchEstimate>,
    arch_hat: Vec<ArchEstimate>,
}

fn run_cycle(panel: &Panel, lambda: &[f64], options: &BackfitOptions) -> Result<Cycle> {
    let y = panel.values();
    let lambda_col = ndarray::ArrayView1::from(lambda).insert_axis(Axis(1));
    let adjusted = y - &lambda_col;

    let phi_per_series: Vec<Option<f64>> = adjusted
        .rows()
        .into_iter()
        .map(|row| {
            let row = row.to_vec();
            cls_ar1(&row).ok().map(|f| f.slope)
        })
        .collect();
    let usable: Vec<f64> = phi_per_series.iter().flatten().copied().collect();
    if usable.is_empty() {
        return Err(Error::AllSeriesDegenerate);
    }
    let phi = bootstrap_phi(&usable, options.resamples, options.seed)?;

    let residuals = compute_residuals(panel, lambda, phi.phi_hat);
    let arch_per_series: Vec<ArchEstimate> = residuals
        .star3
        .rows()
        .into_iter()
        .map(|row| arch_ols_per_series(&row.to_vec()))
        .collect();
    let arch_hat = aggregate_cluster_arch(&arch_per_series, panel)?;
    Ok(Cycle {
        phi,
        phi_per_series,
        residuals,
        arch_per_series,
        arch_hat,
    })
}

fn max_change(prev: &FittedModel, phi: f64, lambda: &[f64], arch: &[ArchEstimate]) -> f64 {
    let mut d = (phi - prev.phi_hat).abs();
    for (a, b) in lambda.iter().zip(&prev.lambda_hat) {
        d = d.max((a - b).abs());
    }
    for (a, b) in arch.iter().zip(&prev.arch_hat) {
        d = d.max((a.alpha0 - b.alpha0).abs()).max((a.alpha1 - b.alpha1).abs());
    }
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

fn assemble(cycle: Cycle, lambda: Vec<f64>, iterations: usize, converged: bool, last_change: f64) -> FittedModel {
    FittedModel {
        phi_hat: cycle.phi.phi_hat,
        phi_boot: cycle.phi.phi_boot,
        phi_per_series: cycle.phi_per_series,
        lambda_hat: lambda,
        arch_per_series: cycle.arch_per_series,
        arch_hat: cycle.arch_hat,
        residuals_star3: cycle.residuals.star3,
        iterations,
        converged,
        last_change,
    }
}

/// Runs one further cycle starting from `previous`, re-estimating the
/// random effects from its `r**`.
pub fn backfit_cycle(panel: &Panel, previous: &FittedModel, options: &BackfitOptions) -> Result<FittedModel> {
    let star2 = compute_residuals(panel, &previous.lambda_hat, previous.phi_hat).star2;
    let lambda = estimate_random_effects(&star2);
    let cycle = run_cycle(panel, &lambda, options)?;
    let change = max_change(previous, cycle.phi.phi_hat, &lambda, &cycle.arch_hat);
    Ok(assemble(
        cycle,
        lambda,
        previous.iterations + 1,
        change < options.epsilon,
        change,
    ))
}

/// Fits the panel model by backfitting.
pub fn backfit(panel: &Panel, options: &BackfitOptions) -> Result<FittedModel> {
    options.validate()?;
    let lambda = initialize_random_effects(panel);
    let cycle = run_cycle(panel, &lambda, options)?;
    let mut model = assemble(cycle, lambda, 1, false, f64::INFINITY);
    while model.iterations < options.max_iterations {
        let star2 = compute_residuals(panel, &model.lambda_hat, model.phi_hat).star2;
        let lambda = estimate_random_effects(&star2);
        let cycle = run_cycle(panel, &lambda, options)?;
        let change = max_change(&model, cycle.phi.phi_hat, &lambda, &cycle.arch_hat);
        let converged = change < options.epsilon;
        model = assemble(cycle, lambda, model.iterations + 1, converged, change);
        if converged {
            break;
        }
    }
    Ok(model)
}
