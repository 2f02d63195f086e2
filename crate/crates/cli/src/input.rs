//! Panel CSV, cluster map and scenario config files.
//!
//! Panels are wide: the first column is a time index, every further column
//! is one series, and the header row carries the series ids. Cluster maps
//! are two-column files `series_id,cluster_id`, or inline lists of
//! `series=cluster` pairs separated by commas.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use clustervol::{Panel, ScenarioConfig};
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: row {row}: {message}")]
    Row { path: String, row: u64, message: String },
    #[error("{0}")]
    Format(String),
    #[error("series '{0}' in the cluster map does not appear in the panel")]
    UnknownSeries(String),
    #[error("series '{0}' is missing from the cluster map")]
    Unassigned(String),
    #[error("series '{0}' is listed more than once")]
    Duplicate(String),
    #[error(transparent)]
    Model(#[from] clustervol::Error),
}

pub type Result<T> = std::result::Result<T, InputError>;

/// Series-to-cluster assignments in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterMap {
    pub entries: Vec<(String, String)>,
}

impl ClusterMap {
    /// Parses `a=1,b=1,c=2`.
    pub fn parse_inline(list: &str) -> Result<Self> {
        let entries = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|pair| {
                let (s, c) = pair
                    .split_once('=')
                    .or_else(|| pair.split_once(':'))
                    .ok_or_else(|| InputError::Format(format!("expected series=cluster, got '{pair}'")))?;
                Ok((s.trim().to_string(), c.trim().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::checked(entries)
    }

    /// Reads a `series_id,cluster_id` file with a header row.
    pub fn read(path: &Path) -> Result<Self> {
        let p = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|source| InputError::Csv {
                path: p.clone(),
                source,
            })?;
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|source| InputError::Csv {
                path: p.clone(),
                source,
            })?;
            let row = rec.position().map_or(0, |pos| pos.line());
            if rec.len() != 2 {
                return Err(InputError::Row {
                    path: p,
                    row,
                    message: format!("expected 2 fields, found {}", rec.len()),
                });
            }
            entries.push((rec[0].to_string(), rec[1].to_string()));
        }
        Self::checked(entries)
    }

    /// A file path if one exists, otherwise an inline list.
    pub fn from_arg(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.is_file() {
            Self::read(path)
        } else {
            Self::parse_inline(arg)
        }
    }

    fn checked(entries: Vec<(String, String)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (s, _) in &entries {
            if !seen.insert(s.as_str()) {
                return Err(InputError::Duplicate(s.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_panel(panel: &Panel) -> Self {
        let entries = panel
            .series_ids()
            .iter()
            .zip(panel.cluster_of())
            .map(|(s, &k)| (s.clone(), panel.cluster_names()[k].clone()))
            .collect();
        Self { entries }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let p = path.display().to_string();
        let mut w = csv::Writer::from_path(path).map_err(|source| InputError::Csv {
            path: p.clone(),
            source,
        })?;
        let csv_err = |source| InputError::Csv {
            path: p.clone(),
            source,
        };
        w.write_record(["series_id", "cluster_id"]).map_err(csv_err)?;
        for (s, c) in &self.entries {
            w.write_record([s, c]).map_err(csv_err)?;
        }
        w.flush().map_err(|source| InputError::Io {
            path: p.clone(),
            source,
        })
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null")
}

/// Loads a wide panel CSV. Without a cluster map every series goes into a
/// single cluster named `"all"`.
pub fn load_panel_csv(path: &Path, clusters: Option<&ClusterMap>) -> Result<Panel> {
    let p = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|source| InputError::Csv {
            path: p.clone(),
            source,
        })?;
    let header = rdr
        .headers()
        .map_err(|source| InputError::Csv {
            path: p.clone(),
            source,
        })?
        .clone();
    if header.len() < 2 {
        return Err(InputError::Format(format!(
            "{p}: header needs a time column and at least one series"
        )));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = ids.len();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n];
    for rec in rdr.records() {
        let rec = rec.map_err(|source| InputError::Csv {
            path: p.clone(),
            source,
        })?;
        let row = rec.position().map_or(0, |pos| pos.line());
        let row_err = |message: String| InputError::Row {
            path: p.clone(),
            row,
            message,
        };
        if rec.len() != n + 1 {
            return Err(row_err(format!("expected {} fields, found {}", n + 1, rec.len())));
        }
        for (j, cell) in rec.iter().skip(1).enumerate() {
            if is_missing(cell) {
                return Err(row_err(format!("missing value for series '{}'", ids[j])));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| row_err(format!("cannot parse '{cell}' for series '{}'", ids[j])))?;
            if !v.is_finite() {
                return Err(row_err(format!("non-finite value for series '{}'", ids[j])));
            }
            columns[j].push(v);
        }
    }

    let t = columns.first().map_or(0, Vec::len);
    let mut values = Array2::zeros((n, t));
    for (i, col) in columns.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            values[[i, j]] = *v;
        }
    }
    {
        let mut seen = std::collections::HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(InputError::Duplicate(id.clone()));
            }
        }
    }

    let (cluster_of, names) = match clusters {
        None => (vec![0; n], vec!["all".to_string()]),
        Some(map) => assign_clusters(&ids, map)?,
    };
    Ok(Panel::new(values, ids, cluster_of, names)?)
}

fn assign_clusters(ids: &[String], map: &ClusterMap) -> Result<(Vec<usize>, Vec<String>)> {
    let mut names: Vec<String> = Vec::new();
    let mut lookup = std::collections::HashMap::new();
    for (s, c) in &map.entries {
        if !ids.contains(s) {
            return Err(InputError::UnknownSeries(s.clone()));
        }
        let k = match names.iter().position(|n| n == c) {
            Some(k) => k,
            None => {
                names.push(c.clone());
                names.len() - 1
            }
        };
        lookup.insert(s.as_str(), k);
    }
    let cluster_of = ids
        .iter()
        .map(|id| {
            lookup
                .get(id.as_str())
                .copied()
                .ok_or_else(|| InputError::Unassigned(id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cluster_of, names))
}

/// Writes a panel in the wide layout read by [`load_panel_csv`]; the time
/// column runs `1..=T`. Values use the shortest round-tripping notation.
pub fn save_panel_csv(panel: &Panel, path: &Path) -> Result<()> {
    let p = path.display().to_string();
    let file = File::create(path).map_err(|source| InputError::Io {
        path: p.clone(),
        source,
    })?;
    write_panel_csv(panel, file).map_err(|source| InputError::Csv { path: p, source })
}

pub fn write_panel_csv<W: Write>(panel: &Panel, writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string()];
    header.extend(panel.series_ids().iter().cloned());
    w.write_record(&header)?;
    for t in 0..panel.n_times() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend((0..panel.n_series()).map(|i| panel.values()[[i, t]].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a scenario from TOML (`.toml`) or JSON (anything else).
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: p.clone(),
        source,
    })?;
    let cfg: ScenarioConfig = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| InputError::Format(format!("{p}: {e}")))?
    } else {
        serde_json::from_str(&text).map_err(|e| InputError::Format(format!("{p}: {e}")))?
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let p = path.display().to_string();
            let mut f = File::create(path).map_err(|source| InputError::Io {
                path: p.clone(),
                source,
            })?;
            f.write_all(text.as_bytes())
                .map_err(|source| InputError::Io { path: p, source })
        }
    }
}
