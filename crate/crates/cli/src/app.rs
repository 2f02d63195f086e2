//! Argument parsing and subcommand dispatch for the `clustervol` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use clustervol::{
    backfit, bootstrap_test, find_scenario, first_difference, lr_test_arch, run_scenario, scenario_catalog,
    simulate_panel, summarize, BackfitOptions, Panel, ScenarioConfig, TestOptions, VariancePath,
};
use thiserror::Error;

use crate::input::{load_panel_csv, load_scenario, write_panel_csv, write_text, ClusterMap, InputError};
use crate::report::{render_report, FitReport, Format, Report, ReportError, SeriesRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "clustervol",
    version,
    about = "Bootstrap tests for ARCH volatility in clustered panels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate phi, the random effects and the cluster ARCH parameters.
    Fit {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Run the bootstrap volatility test, one decision per cluster.
    Test {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Per-series likelihood-ratio test for ARCH(1).
    Baseline {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Simulate a panel from a catalog scenario or a config file.
    Simulate {
        /// Catalog scenario id.
        #[arg(long, conflicts_with = "config")]
        scenario: Option<String>,
        /// Scenario config file (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the series-to-cluster map.
        #[arg(long)]
        clusters_out: Option<PathBuf>,
        /// Print the catalog scenario ids and exit.
        #[arg(long)]
        list: bool,
    },
    /// Monte Carlo size and power over catalog scenarios.
    Bench {
        /// Scenario ids (repeatable); all catalog scenarios when omitted.
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        /// Scenario config files (repeatable).
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// First-difference a panel CSV.
    Diff { input: PathBuf },
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// Wide panel CSV: time column, then one column per series.
    pub input: PathBuf,
    /// Cluster map file (series_id,cluster_id) or inline `a=1,b=2`.
    #[arg(long)]
    pub clusters: Option<String>,
    /// First-difference every series before use.
    #[arg(long)]
    pub diff: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Bootstrap resamples for phi.
    #[arg(long, default_value_t = 500)]
    pub resamples: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Bootstrap replicates for the volatility test.
    #[arg(long = "boot", default_value_t = 500)]
    pub boot: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = PathArg::Recursive)]
    pub variance_path: PathArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PathArg {
    Recursive,
    Observed,
}

impl FitArgs {
    fn options(&self) -> BackfitOptions {
        BackfitOptions {
            resamples: self.resamples,
            epsilon: self.epsilon,
            max_iterations: self.max_iter,
            seed: self.seed,
        }
    }
}

impl TestArgs {
    fn options(&self, seed: u64) -> TestOptions {
        TestOptions {
            replicates: self.boot,
            alpha: self.alpha,
            variance_path: match self.variance_path {
                PathArg::Recursive => VariancePath::Recursive,
                PathArg::Observed => VariancePath::Observed,
            },
            seed,
            ..TestOptions::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Model(#[from] clustervol::Error),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Usage(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        use clustervol::Error as E;
        let model = match self {
            AppError::Model(e) | AppError::Input(InputError::Model(e)) => e,
            _ => return EXIT_INPUT,
        };
        match model {
            E::DegenerateRegressor
            | E::AllSeriesDegenerate
            | E::NonPositiveVariance { .. }
            | E::NonConvergence
            | E::ReplicatesFailed { .. } => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

fn read_panel(args: &PanelArgs) -> Result<Panel, AppError> {
    let map = args.clusters.as_deref().map(ClusterMap::from_arg).transpose()?;
    let panel = load_panel_csv(&args.input, map.as_ref())?;
    Ok(if args.diff { first_difference(&panel)? } else { panel })
}

fn panel_csv(panel: &Panel) -> Result<String, AppError> {
    let mut buf = Vec::new();
    write_panel_csv(panel, &mut buf).map_err(ReportError::from)?;
    Ok(String::from_utf8(buf).expect("csv writer emits utf-8"))
}

fn scenario_by_id(id: &str) -> Result<ScenarioConfig, AppError> {
    find_scenario(id).ok_or_else(|| AppError::Usage(format!("unknown scenario '{id}' (see `simulate --list`)")))
}

fn execute(cli: &Cli) -> Result<(), AppError> {
    let out = cli.out.as_deref();
    let emit = |report: Report| -> Result<(), AppError> {
        write_text(out, &render_report(&report, cli.format)?)?;
        Ok(())
    };
    match &cli.command {
        Command::Fit { panel, fit } => {
            let panel = read_panel(panel)?;
            let model = backfit(&panel, &fit.options())?;
            emit(Report::Fit(FitReport::new(&panel, &model)))
        }
        Command::Test { panel, fit, test } => {
            let panel = read_panel(panel)?;
            let result = bootstrap_test(&panel, &fit.options(), &test.options(fit.seed))?;
            emit(Report::Test((&result).into()))
        }
        Command::Baseline { panel, alpha } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(AppError::Usage(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            let panel = read_panel(panel)?;
            let names = panel.cluster_names();
            let rows = (0..panel.n_series())
                .map(|i| {
                    let series = panel.series(i).to_vec();
                    SeriesRow::new(
                        &panel.series_ids()[i],
                        &names[panel.cluster_of()[i]],
                        &lr_test_arch(&series, *alpha),
                    )
                })
                .collect();
            emit(Report::Baseline(rows))
        }
        Command::Simulate {
            scenario,
            config,
            seed,
            clusters_out,
            list,
        } => {
            if *list {
                let ids: String = scenario_catalog().iter().map(|s| format!("{}\n", s.id)).collect();
                write_text(out, &ids)?;
                return Ok(());
            }
            let mut cfg = match (scenario, config) {
                (Some(id), None) => scenario_by_id(id)?,
                (None, Some(path)) => load_scenario(path)?,
                _ => return Err(AppError::Usage("simulate needs --scenario or --config".into())),
            };
            if let Some(seed) = seed {
                cfg.seed = *seed;
            }
            let sim = simulate_panel(&cfg)?;
            if let Some(path) = clusters_out {
                ClusterMap::from_panel(&sim.panel).write(path)?;
            }
            write_text(out, &panel_csv(&sim.panel)?)?;
            Ok(())
        }
        Command::Bench {
            scenarios,
            configs,
            reps,
            fit,
            test,
        } => {
            let mut list: Vec<ScenarioConfig> = scenarios
                .iter()
                .map(|id| scenario_by_id(id))
                .collect::<Result<_, _>>()?;
            for path in configs {
                list.push(load_scenario(path)?);
            }
            if list.is_empty() {
                list = scenario_catalog();
            }
            let bo = fit.options();
            let to = test.options(fit.seed);
            let rows = list
                .iter()
                .map(|s| run_scenario(s, *reps, &bo, &to, fit.seed))
                .collect::<Result<Vec<_>, _>>()?;
            emit(Report::SizePower(summarize(&rows)?))
        }
        Command::Diff { input } => {
            let panel = load_panel_csv(input, None)?;
            write_text(out, &panel_csv(&first_difference(&panel)?)?)?;
            Ok(())
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let work = || match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    match cli.threads {
        None => work(),
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            EXIT_INPUT
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => {
                eprintln!("error: thread pool: {e}");
                EXIT_INPUT
            }
        },
    }
}
