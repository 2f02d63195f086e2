//! Bootstrap testing for ARCH-type volatility in clustered panels of time
//! series.
//!
//! The model is a panel AR(1) with a common autoregressive coefficient,
//! a random intercept per series, and ARCH(1) innovations whose parameters
//! are shared inside prespecified clusters:
//!
//! ```text
//! Y[i,t] = φ·Y[i,t-1] + λᵢ + u[i,t],   σ²[i,t] = α[k,0] + α[k,1]·u²[i,t-1]
//! ```
//!
//! * [`estimation::backfit`] estimates `φ`, `λᵢ` and the cluster ARCH pairs.
//! * [`nptest::bootstrap_test`] decides, cluster by cluster, whether
//!   `α[k,1] = 0` using Bonferroni-corrected percentile intervals from a
//!   parametric bootstrap.
//! * [`baseline::lr_test_arch`] is the per-series likelihood-ratio test the
//!   bootstrap test is compared against.
//! * [`dgp`] and [`montecarlo`] simulate panels and tabulate size and power.
//!
//! ```
//! use clustervol::{backfit, find_scenario, simulate_panel, BackfitOptions};
//!
//! let scenario = find_scenario("single/phi=0.6/novol").unwrap();
//! let sim = simulate_panel(&scenario).unwrap();
//! let fit = backfit(&sim.panel, &BackfitOptions::default()).unwrap();
//! assert!(fit.converged);
//! assert!((fit.phi_hat - 0.6).abs() < 0.2);
//! ```

pub mod baseline;
pub mod dgp;
pub mod error;
pub mod estimation;
pub mod montecarlo;
pub mod nptest;
pub mod panel;
pub mod rng;
pub mod stats;

pub use baseline::{fit_arch1_mle, gaussian_loglik, lr_test_arch, Arch1MleFit, LrTest};
pub use dgp::{find_scenario, scenario_catalog, simulate_panel, ArchConfig, ScenarioConfig, SimulatedPanel};
pub use error::{Error, Result};
pub use estimation::{backfit, ArchEstimate, BackfitOptions, FittedModel};
pub use montecarlo::{run_misclassification, run_scenario, summarize, ReportRecord, SizePowerRow};
pub use nptest::{bootstrap_test, ClusterTest, TestOptions, VariancePath, VolatilityTestResult};
pub use panel::{first_difference, ClusterSummary, Panel};
pub use stats::{ols_fit, percentile, LineFit};

// The guide under `book/` is compiled here so its code listings run as
// doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/backfitting.md")]
    mod backfitting {}
    #[doc = include_str!("../../../book/src/bootstrap-test.md")]
    mod bootstrap_test {}
    #[doc = include_str!("../../../book/src/baseline.md")]
    mod baseline {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
