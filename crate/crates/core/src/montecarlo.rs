//! Monte Carlo size and power study for the bootstrap test and the
//! per-series likelihood-ratio baseline.
//!
//! Replications are independent jobs whose seeds are derived from the
//! master seed and the replication index, so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::lr_test_arch;
use crate::dgp::{simulate_panel, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimation::BackfitOptions;
use crate::nptest::{bootstrap_test, TestOptions};
use crate::rng::{derive_seed, Stream};
use crate::stats::binomial_se;

/// Largest tolerated share of failed replications for a usable row.
pub const MAX_ERROR_RATE: f64 = 0.05;

/// Rejection rates for one scenario.
///
/// Nonparametric rates are per cluster. `np_power` averages the clusters
/// that are volatile by design, `np_size` the calm ones. Parametric rates
/// pool every (replication, series) decision, split by whether the series
/// itself was generated with volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePowerRow {
    pub scenario: String,
    pub replications: usize,
    pub completed: usize,
    pub volatile_clusters: Vec<bool>,
    pub np_reject_rate_per_cluster: Vec<f64>,
    pub np_power: Option<f64>,
    pub np_size: Option<f64>,
    /// Share of replications in which at least one cluster rejected.
    pub np_familywise_rate: f64,
    pub param_power: Option<f64>,
    pub param_size: Option<f64>,
    pub param_volatile_tests: usize,
    pub param_calm_tests: usize,
    /// Univariate tests that failed and were left out of the parametric rates.
    pub param_errors: usize,
    pub error_count: usize,
}

impl SizePowerRow {
    /// False when more than 5% of replications failed.
    pub fn is_valid(&self) -> bool {
        self.completed > 0 && (self.error_count as f64) <= MAX_ERROR_RATE * self.replications as f64
    }
}

struct ReplicationOutcome {
    cluster_rejects: Vec<bool>,
    // (series is volatile, rejected)
    param: Vec<Option<(bool, bool)>>,
}

fn run_replication(
    scenario: &ScenarioConfig,
    backfit_options: &BackfitOptions,
    test_options: &TestOptions,
    master_seed: u64,
    r: u64,
) -> Result<ReplicationOutcome> {
    let config = ScenarioConfig {
        seed: derive_seed(master_seed, Stream::Replication, r),
        ..scenario.clone()
    };
    let sim = simulate_panel(&config)?;
    let bo = BackfitOptions {
        seed: derive_seed(master_seed, Stream::ReplicationBackfit, r),
        ..*backfit_options
    };
    let to = TestOptions {
        seed: derive_seed(master_seed, Stream::ReplicationTest, r),
        ..*test_options
    };
    let result = bootstrap_test(&sim.panel, &bo, &to)?;
    let cluster_rejects = result.clusters.iter().map(|c| c.reject).collect();
    let param = (0..sim.panel.n_series())
        .map(|i| {
            let series = sim.panel.series(i).to_vec();
            lr_test_arch(&series, test_options.alpha)
                .ok()
                .map(|t| (sim.volatile[i], t.reject))
        })
        .collect();
    Ok(ReplicationOutcome { cluster_rejects, param })
}

fn rate(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

fn mean_where(values: &[f64], mask: &[bool], want: bool) -> Option<f64> {
    let picked: Vec<f64> = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m == want)
        .map(|(v, _)| *v)
        .collect();
    (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
}

/// Simulates and tests `replications` panels from `scenario`.
pub fn run_scenario(
    scenario: &ScenarioConfig,
    replications: usize,
    backfit_options: &BackfitOptions,
    test_options: &TestOptions,
    master_seed: u64,
) -> Result<SizePowerRow> {
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    scenario.validate()?;
    backfit_options.validate()?;
    test_options.validate()?;

    let outcomes: Vec<Result<ReplicationOutcome>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| run_replication(scenario, backfit_options, test_options, master_seed, r))
        .collect();

    let m = scenario.n_clusters();
    let mut cluster_hits = vec![0usize; m];
    let mut any_hits = 0usize;
    let mut completed = 0usize;
    let (mut vol_hits, mut vol_tests, mut calm_hits, mut calm_tests, mut param_errors) = (0, 0, 0, 0, 0);
    for outcome in outcomes.iter().flatten() {
        completed += 1;
        for (k, &rej) in outcome.cluster_rejects.iter().enumerate() {
            cluster_hits[k] += usize::from(rej);
        }
        any_hits += usize::from(outcome.cluster_rejects.iter().any(|&r| r));
        for p in &outcome.param {
            match p {
                Some((true, rej)) => {
                    vol_tests += 1;
                    vol_hits += usize::from(*rej);
                }
                Some((false, rej)) => {
                    calm_tests += 1;
                    calm_hits += usize::from(*rej);
                }
                None => param_errors += 1,
            }
        }
    }

    let per_cluster: Vec<f64> = cluster_hits
        .iter()
        .map(|&h| rate(h, completed).unwrap_or(f64::NAN))
        .collect();
    let volatile = scenario.volatile_clusters();
    Ok(SizePowerRow {
        scenario: scenario.id.clone(),
        replications,
        completed,
        np_power: mean_where(&per_cluster, &volatile, true),
        np_size: mean_where(&per_cluster, &volatile, false),
        np_familywise_rate: rate(any_hits, completed).unwrap_or(f64::NAN),
        volatile_clusters: volatile,
        np_reject_rate_per_cluster: per_cluster,
        param_power: rate(vol_hits, vol_tests),
        param_size: rate(calm_hits, calm_tests),
        param_volatile_tests: vol_tests,
        param_calm_tests: calm_tests,
        param_errors,
        error_count: replications - completed,
    })
}

/// Rejection rate of the contaminated cluster under misclassification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misclassification {
    pub row: SizePowerRow,
    pub cluster: usize,
    pub reject_rate: f64,
}

/// Runs a scenario with flipped members and reports `P(reject H₀)` for the
/// first contaminated cluster (cluster 0 when nothing is contaminated).
pub fn run_misclassification(
    scenario: &ScenarioConfig,
    replications: usize,
    backfit_options: &BackfitOptions,
    test_options: &TestOptions,
    master_seed: u64,
) -> Result<Misclassification> {
    let cluster = (0..scenario.n_clusters())
        .find(|&k| scenario.contaminated_count(k) > 0)
        .unwrap_or(0);
    let row = run_scenario(scenario, replications, backfit_options, test_options, master_seed)?;
    Ok(Misclassification {
        reject_rate: row.np_reject_rate_per_cluster[cluster],
        cluster,
        row,
    })
}

/// One line of the size/power table, with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub scenario: String,
    pub replications: usize,
    pub np_power: Option<f64>,
    pub np_power_se: Option<f64>,
    pub np_size: Option<f64>,
    pub np_size_se: Option<f64>,
    pub param_power: Option<f64>,
    pub param_power_se: Option<f64>,
    pub param_size: Option<f64>,
    pub param_size_se: Option<f64>,
    pub np_reject_rate_per_cluster: Vec<f64>,
    pub errors: usize,
    pub valid: bool,
}

/// Tabulates rows in input order. Nonparametric errors use the completed
/// replication count, parametric ones the number of univariate tests.
pub fn summarize(rows: &[SizePowerRow]) -> Result<Vec<ReportRecord>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let se = |p: Option<f64>, n: usize| p.map(|p| binomial_se(p, n));
    Ok(rows
        .iter()
        .map(|r| ReportRecord {
            scenario: r.scenario.clone(),
            replications: r.replications,
            np_power: r.np_power,
            np_power_se: se(r.np_power, r.completed),
            np_size: r.np_size,
            np_size_se: se(r.np_size, r.completed),
            param_power: r.param_power,
            param_power_se: se(r.param_power, r.param_volatile_tests),
            param_size: r.param_size,
            param_size_se: se(r.param_size, r.param_calm_tests),
            np_reject_rate_per_cluster: r.np_reject_rate_per_cluster.clone(),
            errors: r.error_count,
            valid: r.is_valid(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::find_scenario;

    fn small() -> (BackfitOptions, TestOptions) {
        (
            BackfitOptions {
                resamples: 20,
                ..Default::default()
            },
            TestOptions {
                replicates: 20,
                ..Default::default()
            },
        )
    }

    fn row(id: &str, power: Option<f64>, size: Option<f64>) -> SizePowerRow {
        SizePowerRow {
            scenario: id.into(),
            replications: 200,
            completed: 200,
            volatile_clusters: vec![true],
            np_reject_rate_per_cluster: vec![power.unwrap_or(0.0)],
            np_power: power,
            np_size: size,
            np_familywise_rate: 0.0,
            param_power: None,
            param_size: None,
            param_volatile_tests: 0,
            param_calm_tests: 0,
            param_errors: 0,
            error_count: 0,
        }
    }

    #[test]
    fn summary_preserves_order_and_rates() {
        let out = summarize(&[row("a", Some(0.5), None)]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].np_power, Some(0.5));
        assert!((out[0].np_power_se.unwrap() - 0.0354).abs() < 1e-4);
        assert_eq!(out[0].np_size_se, None);

        let out = summarize(&[row("b", Some(0.1), None), row("a", Some(0.9), None)]).unwrap();
        assert_eq!(out[0].scenario, "b");
        assert_eq!(out[1].scenario, "a");
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn validity_threshold() {
        let mut r = row("a", Some(1.0), None);
        r.error_count = 10;
        assert!(r.is_valid());
        r.error_count = 11;
        assert!(!r.is_valid());
    }

    #[test]
    fn scenario_rows_are_well_formed() {
        let (bo, to) = small();
        let sc = find_scenario("5c-1vol/phi=0.6/vol").unwrap();
        let r = run_scenario(&sc, 3, &bo, &to, 9).unwrap();
        assert_eq!(r.np_reject_rate_per_cluster.len(), 5);
        assert!(r.np_power.is_some() && r.np_size.is_some());
        assert_eq!(r.param_volatile_tests + r.param_calm_tests + r.param_errors, 3 * 50);
        for v in &r.np_reject_rate_per_cluster {
            assert!((0.0..=1.0).contains(v));
        }
        assert_eq!(r, run_scenario(&sc, 3, &bo, &to, 9).unwrap());
        assert!(run_scenario(&sc, 0, &bo, &to, 9).is_err());
    }

    #[test]
    fn zero_contamination_matches_base_scenario() {
        let (bo, to) = small();
        let base = find_scenario("single/phi=0.6/vol").unwrap();
        let mut zero = base.clone();
        zero.contamination = vec![0.0];
        let a = run_scenario(&base, 2, &bo, &to, 3).unwrap();
        let b = run_misclassification(&zero, 2, &bo, &to, 3).unwrap();
        assert_eq!(b.row, a);
        assert_eq!(b.cluster, 0);
        assert_eq!(b.reject_rate, a.np_reject_rate_per_cluster[0]);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (bo, to) = small();
        let sc = find_scenario("mis/novol+10pct/phi=0.6").unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_scenario(&sc, 4, &bo, &to, 77).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
