//! Command-line front end for `clustervol`: panel and cluster-map files,
//! report rendering, and the subcommands of the `clustervol` binary.

pub mod app;
pub mod input;
pub mod report;

pub use input::{load_panel_csv, save_panel_csv, ClusterMap, InputError};
pub use report::{render_report, ClusterTable, Format, Report};
