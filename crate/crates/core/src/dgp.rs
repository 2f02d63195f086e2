//! Simulation of clustered AR(1) panels with ARCH(1) innovations.
//!
//! Each series follows `Y[t] = φ·Y[t-1] + λ + u[t]` with
//! `u[t] = v[t]·σ[t]` and `σ²[t] = α0 + α1·u²[t-1]`, where the ARCH pair is
//! shared by every member of a cluster. `v[t]` is standard normal and drawn
//! independently per series. Twice the requested length is generated and the
//! first half discarded.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Panel, MIN_LENGTH};
use crate::rng::{rng_for, Stream};

/// ARCH(1) variance parameters for one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub alpha0: f64,
    pub alpha1: f64,
}

impl ArchConfig {
    pub const VOLATILE: ArchConfig = ArchConfig {
        alpha0: 1.0,
        alpha1: 1.0,
    };
    pub const CALM: ArchConfig = ArchConfig {
        alpha0: 1.0,
        alpha1: 0.0,
    };

    pub fn new(alpha0: f64, alpha1: f64) -> Result<Self> {
        let cfg = Self { alpha0, alpha1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha0 must be positive, got {}",
                self.alpha0
            )));
        }
        if !(self.alpha1 >= 0.0 && self.alpha1.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha1 must be non-negative, got {}",
                self.alpha1
            )));
        }
        Ok(())
    }

    pub fn is_volatile(&self) -> bool {
        self.alpha1 > 0.0
    }
}

fn default_sigma_lambda() -> f64 {
    1.0
}

fn default_flipped_alpha1() -> f64 {
    1.0
}

/// Full data-generating specification for one simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub n_series: usize,
    pub n_times: usize,
    pub phi: f64,
    /// Standard deviation of the per-series random effect (mean zero).
    #[serde(default = "default_sigma_lambda")]
    pub sigma_lambda: f64,
    pub cluster_sizes: Vec<usize>,
    pub arch_per_cluster: Vec<ArchConfig>,
    /// Per-cluster fraction of members whose volatility status is flipped.
    /// Empty means no contamination.
    #[serde(default)]
    pub contamination: Vec<f64>,
    /// `alpha1` given to flipped members of a calm cluster.
    #[serde(default = "default_flipped_alpha1")]
    pub flipped_alpha1: f64,
    /// Discarded warm-up points; `None` means `n_times`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn n_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.cluster_sizes.is_empty() {
            return bad("at least one cluster is required".into());
        }
        if self.cluster_sizes.contains(&0) {
            return bad("every cluster needs at least one member".into());
        }
        let total: usize = self.cluster_sizes.iter().sum();
        if total != self.n_series {
            return bad(format!(
                "cluster sizes sum to {total}, expected n_series = {}",
                self.n_series
            ));
        }
        if self.arch_per_cluster.len() != self.n_clusters() {
            return bad(format!(
                "{} ARCH configs for {} clusters",
                self.arch_per_cluster.len(),
                self.n_clusters()
            ));
        }
        for a in &self.arch_per_cluster {
            a.validate()?;
        }
        if self.n_times < MIN_LENGTH {
            return bad(format!("n_times must be at least {MIN_LENGTH}"));
        }
        if !self.phi.is_finite() {
            return bad("phi must be finite".into());
        }
        if !(self.sigma_lambda >= 0.0 && self.sigma_lambda.is_finite()) {
            return bad("sigma_lambda must be non-negative".into());
        }
        if !self.contamination.is_empty() {
            if self.contamination.len() != self.n_clusters() {
                return bad(format!(
                    "{} contamination fractions for {} clusters",
                    self.contamination.len(),
                    self.n_clusters()
                ));
            }
            if self.contamination.iter().any(|c| !(0.0..1.0).contains(c)) {
                return bad("contamination fractions must lie in [0, 1)".into());
            }
        }
        if !(self.flipped_alpha1 > 0.0 && self.flipped_alpha1.is_finite()) {
            return bad("flipped_alpha1 must be positive".into());
        }
        Ok(())
    }

    /// Number of flipped members in cluster `k`: `round(fraction·n_k)`.
    pub fn contaminated_count(&self, k: usize) -> usize {
        let frac = self.contamination.get(k).copied().unwrap_or(0.0);
        (frac * self.cluster_sizes[k] as f64).round() as usize
    }

    /// Whether each cluster is volatile by design (ignores contamination).
    pub fn volatile_clusters(&self) -> Vec<bool> {
        self.arch_per_cluster.iter().map(ArchConfig::is_volatile).collect()
    }

    /// Per-series cluster index and the ARCH pair each series is generated
    /// with. Clusters occupy contiguous blocks; the last members of a cluster
    /// are the flipped ones.
    pub fn series_layout(&self) -> Vec<(usize, ArchConfig)> {
        let mut out = Vec::with_capacity(self.n_series);
        for (k, (&size, arch)) in self.cluster_sizes.iter().zip(&self.arch_per_cluster).enumerate() {
            let flipped = self.contaminated_count(k).min(size);
            let flip = ArchConfig {
                alpha0: arch.alpha0,
                alpha1: if arch.is_volatile() { 0.0 } else { self.flipped_alpha1 },
            };
            for j in 0..size {
                let cfg = if j >= size - flipped { flip } else { *arch };
                out.push((k, cfg));
            }
        }
        out
    }
}

/// A simulated panel together with the latent quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub panel: Panel,
    /// True random effect of each series.
    pub lambda: Vec<f64>,
    /// Whether each series was generated with `alpha1 > 0`.
    pub volatile: Vec<bool>,
}

/// Generates one series; returns the retained points and its random effect.
fn simulate_series(cfg: &ScenarioConfig, arch: ArchConfig, series_index: usize) -> (Vec<f64>, f64) {
    let mut rng = rng_for(cfg.seed, Stream::Series, series_index as u64);
    let z: f64 = rng.sample(StandardNormal);
    let lambda = cfg.sigma_lambda * z;
    let burn = cfg.burn_in.unwrap_or(cfg.n_times);
    let mut y = lambda;
    let mut u = 0.0f64;
    let mut kept = Vec::with_capacity(cfg.n_times);
    for step in 0..burn + cfg.n_times {
        let v: f64 = rng.sample(StandardNormal);
        let sigma2 = arch.alpha0 + arch.alpha1 * u * u;
        u = v * sigma2.sqrt();
        y = cfg.phi * y + lambda + u;
        if step >= burn {
            kept.push(y);
        }
    }
    (kept, lambda)
}

/// Simulates a panel from `config`. Bit-identical for identical configs.
pub fn simulate_panel(config: &ScenarioConfig) -> Result<SimulatedPanel> {
    config.validate()?;
    let layout = config.series_layout();
    let series: Vec<(Vec<f64>, f64)> = layout
        .par_iter()
        .enumerate()
        .map(|(i, &(_, arch))| simulate_series(config, arch, i))
        .collect();

    let n = config.n_series;
    let t = config.n_times;
    let mut values = Array2::zeros((n, t));
    let mut lambda = Vec::with_capacity(n);
    for (i, (row, l)) in series.into_iter().enumerate() {
        values.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        lambda.push(l);
    }
    let cluster_of = layout.iter().map(|&(k, _)| k).collect();
    let volatile = layout.iter().map(|(_, a)| a.is_volatile()).collect();
    let names = (1..=config.n_clusters()).map(|k| k.to_string()).collect();
    let ids = (1..=n).map(|i| format!("s{i}")).collect();
    let panel = Panel::new(values, ids, cluster_of, names)?;
    Ok(SimulatedPanel {
        panel,
        lambda,
        volatile,
    })
}

const CATALOG_N: usize = 50;
const CATALOG_T: usize = 50;

fn base(id: String, phi: f64, sizes: Vec<usize>, arch: Vec<ArchConfig>, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        id,
        n_series: CATALOG_N,
        n_times: CATALOG_T,
        phi,
        sigma_lambda: default_sigma_lambda(),
        cluster_sizes: sizes,
        arch_per_cluster: arch,
        contamination: Vec::new(),
        flipped_alpha1: default_flipped_alpha1(),
        burn_in: None,
        seed,
    }
}

/// The simulation grid: twelve scenarios without misclassification
/// (three cluster layouts × two φ × volatility on/off) followed by eight
/// single-cluster scenarios with 2% or 10% of members flipped.
pub fn scenario_catalog() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    let layouts: [(&str, usize, usize); 3] = [("single", 1, 1), ("5c-1vol", 5, 1), ("5c-3vol", 5, 3)];
    for (name, m, n_vol) in layouts {
        for phi in [0.6, 0.95] {
            for volatile in [true, false] {
                let sizes = vec![CATALOG_N / m; m];
                let arch = (0..m)
                    .map(|k| {
                        if volatile && k < n_vol {
                            ArchConfig::VOLATILE
                        } else {
                            ArchConfig::CALM
                        }
                    })
                    .collect();
                let tag = if volatile { "vol" } else { "novol" };
                let seed = out.len() as u64 + 1;
                out.push(base(format!("{name}/phi={phi}/{tag}"), phi, sizes, arch, seed));
            }
        }
    }
    for (volatile, label) in [(false, "novol"), (true, "vol")] {
        for phi in [0.6, 0.95] {
            for frac in [0.02f64, 0.10] {
                let pct = (frac * 100.0).round() as u32;
                let arch = if volatile {
                    ArchConfig::VOLATILE
                } else {
                    ArchConfig::CALM
                };
                let seed = out.len() as u64 + 1;
                let mut cfg = base(
                    format!("mis/{label}+{pct}pct/phi={phi}"),
                    phi,
                    vec![CATALOG_N],
                    vec![arch],
                    seed,
                );
                cfg.contamination = vec![frac];
                out.push(cfg);
            }
        }
    }
    out
}

/// Looks up a catalog scenario by id.
pub fn find_scenario(id: &str) -> Option<ScenarioConfig> {
    scenario_catalog().into_iter().find(|s| s.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(phi: f64, n: usize, t: usize, arch: ArchConfig) -> ScenarioConfig {
        ScenarioConfig {
            id: "test".into(),
            n_series: n,
            n_times: t,
            phi,
            sigma_lambda: 0.0,
            cluster_sizes: vec![n],
            arch_per_cluster: vec![arch],
            contamination: vec![],
            flipped_alpha1: 1.0,
            burn_in: None,
            seed: 7,
        }
    }

    #[test]
    fn white_noise_has_unit_variance() {
        let sim = simulate_panel(&plain(0.0, 10, 1000, ArchConfig::CALM)).unwrap();
        let all: Vec<f64> = sim.panel.values().iter().copied().collect();
        let v = crate::stats::variance(&all);
        assert!((0.95..=1.05).contains(&v), "variance {v}");
    }

    #[test]
    fn ar1_autocorrelation_matches_phi() {
        let mut cfg = plain(0.6, 50, 2000, ArchConfig::CALM);
        cfg.sigma_lambda = 1.0;
        let sim = simulate_panel(&cfg).unwrap();
        for i in 0..50 {
            let row = sim.panel.series(i).to_vec();
            let m = crate::stats::mean(&row);
            let num: f64 = row.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
            let den: f64 = row.iter().map(|x| (x - m) * (x - m)).sum();
            let r = num / den;
            assert!((r - 0.6).abs() <= 0.05, "series {i}: {r}");
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = plain(0.6, 5, 50, ArchConfig::VOLATILE);
        let a = simulate_panel(&cfg).unwrap();
        let b = simulate_panel(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(a.panel, simulate_panel(&other).unwrap().panel);
    }

    #[test]
    fn zero_contamination_is_bit_identical() {
        let cfg = plain(0.6, 20, 50, ArchConfig::VOLATILE);
        let mut zero = cfg.clone();
        zero.contamination = vec![0.0];
        assert_eq!(simulate_panel(&cfg).unwrap(), simulate_panel(&zero).unwrap());
    }

    #[test]
    fn burn_in_doubling_leaves_distribution_unchanged() {
        let mut cfg = plain(0.95, 200, 50, ArchConfig::CALM);
        cfg.sigma_lambda = 0.0;
        let var_of = |c: &ScenarioConfig| {
            let sim = simulate_panel(c).unwrap();
            let all: Vec<f64> = sim.panel.values().iter().copied().collect();
            crate::stats::variance(&all)
        };
        let v1 = var_of(&cfg);
        cfg.burn_in = Some(100);
        let v2 = var_of(&cfg);
        // stationary variance 1 / (1 - 0.95²) ≈ 10.26
        assert!((v1 - v2).abs() / v2 < 0.15, "{v1} vs {v2}");
        assert!((v2 - 10.26).abs() / 10.26 < 0.2, "{v2}");
    }

    #[test]
    fn catalog_contents() {
        let cat = scenario_catalog();
        assert_eq!(cat.len(), 20);
        for s in &cat {
            s.validate().unwrap();
            assert_eq!((s.n_series, s.n_times), (50, 50));
        }
        let single = find_scenario("single/phi=0.6/vol").unwrap();
        assert_eq!(single.arch_per_cluster, vec![ArchConfig::VOLATILE]);

        let five = find_scenario("5c-1vol/phi=0.95/vol").unwrap();
        assert_eq!(five.n_clusters(), 5);
        let vol = five
            .arch_per_cluster
            .iter()
            .filter(|a| **a == ArchConfig::VOLATILE)
            .count();
        let calm = five.arch_per_cluster.iter().filter(|a| **a == ArchConfig::CALM).count();
        assert_eq!((vol, calm), (1, 4));

        let mis = find_scenario("mis/vol+2pct/phi=0.6").unwrap();
        assert_eq!(mis.cluster_sizes, vec![50]);
        let layout = mis.series_layout();
        let flipped = layout.iter().filter(|(_, a)| *a == ArchConfig::CALM).count();
        assert_eq!(flipped, 1);

        let mis10 = find_scenario("mis/novol+10pct/phi=0.95").unwrap();
        let sim = simulate_panel(&mis10).unwrap();
        assert_eq!(sim.volatile.iter().filter(|v| **v).count(), 5);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = plain(0.6, 10, 50, ArchConfig::CALM);
        cfg.cluster_sizes = vec![4, 4];
        assert!(simulate_panel(&cfg).is_err());
        let mut cfg = plain(
            0.6,
            10,
            50,
            ArchConfig {
                alpha0: 0.0,
                alpha1: 0.0,
            },
        );
        assert!(simulate_panel(&cfg).is_err());
        cfg.arch_per_cluster = vec![ArchConfig::CALM];
        cfg.contamination = vec![1.0];
        assert!(simulate_panel(&cfg).is_err());
    }
}
