//! Dense panels of equal-length series with a cluster label per series.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest series the estimation cycle can work with: residuals start at
/// the second point and the ARCH regression needs two lagged pairs after that.
pub const MIN_LENGTH: usize = 4;

/// `N` series × `T` time points, each series assigned to one of `m` clusters.
///
/// Cluster indices are zero-based internally; `cluster_names` carries the
/// user-facing label for each index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    values: Array2<f64>,
    series_ids: Vec<String>,
    cluster_of: Vec<usize>,
    cluster_names: Vec<String>,
}

/// Members of one cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSummary {
    pub index: usize,
    pub name: String,
    pub members: Vec<usize>,
}

impl ClusterSummary {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

impl Panel {
    /// Builds a panel, checking shape, finiteness and cluster coverage.
    pub fn new(
        values: Array2<f64>,
        series_ids: Vec<String>,
        cluster_of: Vec<usize>,
        cluster_names: Vec<String>,
    ) -> Result<Self> {
        let (n, t) = values.dim();
        if n == 0 {
            return Err(Error::InvalidPanel("panel has no series".into()));
        }
        if t < MIN_LENGTH {
            return Err(Error::TooShort {
                required: MIN_LENGTH,
                actual: t,
            });
        }
        if series_ids.len() != n {
            return Err(Error::InvalidPanel(format!(
                "{} series ids for {n} series",
                series_ids.len()
            )));
        }
        if cluster_of.len() != n {
            return Err(Error::InvalidPanel(format!(
                "{} cluster labels for {n} series",
                cluster_of.len()
            )));
        }
        let m = cluster_names.len();
        let mut counts = vec![0usize; m];
        for (i, &k) in cluster_of.iter().enumerate() {
            if k >= m {
                return Err(Error::InvalidPanel(format!(
                    "series {i} assigned to cluster {k}, but only {m} clusters are named"
                )));
            }
            counts[k] += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidPanel(format!(
                "cluster '{}' has no members",
                cluster_names[k]
            )));
        }
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { series: i, time: j });
        }
        Ok(Self {
            values,
            series_ids,
            cluster_of,
            cluster_names,
        })
    }

    /// A panel whose series all belong to one cluster named `"1"`, with ids
    /// `s1..sN`.
    pub fn single_cluster(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        let ids = (1..=n).map(|i| format!("s{i}")).collect();
        Self::new(values, ids, vec![0; n], vec!["1".into()])
    }

    /// A panel with generated ids and clusters named `"1".."m"`.
    pub fn with_clusters(values: Array2<f64>, cluster_of: Vec<usize>) -> Result<Self> {
        let n = values.nrows();
        let m = cluster_of.iter().max().map_or(0, |k| k + 1);
        let ids = (1..=n).map(|i| format!("s{i}")).collect();
        let names = (1..=m).map(|k| k.to_string()).collect();
        Self::new(values, ids, cluster_of, names)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn series(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_names.len()
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn cluster_names(&self) -> &[String] {
        &self.cluster_names
    }

    pub fn clusters(&self) -> Vec<ClusterSummary> {
        let mut out: Vec<ClusterSummary> = self
            .cluster_names
            .iter()
            .enumerate()
            .map(|(index, name)| ClusterSummary {
                index,
                name: name.clone(),
                members: Vec::new(),
            })
            .collect();
        for (i, &k) in self.cluster_of.iter().enumerate() {
            out[k].members.push(i);
        }
        out
    }

    /// Same labels, new values. The shape must keep `N` rows.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        Self::new(
            values,
            self.series_ids.clone(),
            self.cluster_of.clone(),
            self.cluster_names.clone(),
        )
    }
}

/// Lag-one differences `Y[i,t+1] - Y[i,t]`; the result has one column fewer.
pub fn first_difference(panel: &Panel) -> Result<Panel> {
    let t = panel.n_times();
    if t < MIN_LENGTH + 1 {
        return Err(Error::TooShort {
            required: MIN_LENGTH + 1,
            actual: t,
        });
    }
    let v = panel.values();
    let diff = &v.slice(ndarray::s![.., 1..]) - &v.slice(ndarray::s![.., ..t - 1]);
    panel.with_values(diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Panel::single_cluster(array![[1.0, 2.0, 3.0]]),
            Err(Error::TooShort { .. })
        ));
        assert!(matches!(
            Panel::single_cluster(Array2::zeros((0, 5))),
            Err(Error::InvalidPanel(_))
        ));
        assert!(matches!(
            Panel::single_cluster(array![[1.0, f64::NAN, 3.0, 4.0]]),
            Err(Error::NonFinite { series: 0, time: 1 })
        ));
    }

    #[test]
    fn rejects_empty_cluster() {
        let v = Array2::zeros((2, 4));
        let err = Panel::new(
            v,
            vec!["a".into(), "b".into()],
            vec![0, 0],
            vec!["x".into(), "y".into()],
        );
        assert!(matches!(err, Err(Error::InvalidPanel(_))));
    }

    #[test]
    fn cluster_summaries_partition_series() {
        let p = Panel::with_clusters(Array2::zeros((5, 4)), vec![1, 0, 1, 2, 0]).unwrap();
        let c = p.clusters();
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].members, vec![1, 4]);
        assert_eq!(c[1].members, vec![0, 2]);
        assert_eq!(c[2].members, vec![3]);
        assert_eq!(c.iter().map(ClusterSummary::size).sum::<usize>(), 5);
    }

    #[test]
    fn differencing_examples() {
        let p = Panel::single_cluster(array![[1.0, 3.0, 6.0, 6.0, 10.0], [2.0; 5]]).unwrap();
        let d = first_difference(&p).unwrap();
        assert_eq!(d.values(), &array![[2.0, 3.0, 0.0, 4.0], [0.0; 4]]);
        assert_eq!(d.cluster_of(), p.cluster_of());

        let short = Panel::single_cluster(array![[1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert!(matches!(first_difference(&short), Err(Error::TooShort { .. })));
    }

    proptest! {
        #[test]
        fn differencing_inverts_and_ignores_shifts(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 8), 1..5),
            c in -1e3f64..1e3,
        ) {
            let n = rows.len();
            let flat: Vec<f64> = rows.concat();
            let v = Array2::from_shape_vec((n, 8), flat).unwrap();
            let p = Panel::single_cluster(v.clone()).unwrap();
            let d = first_difference(&p).unwrap();
            prop_assert_eq!(d.n_times(), 7);

            // cumulative sum from the first point gives back the series
            for i in 0..n {
                let mut acc = v[[i, 0]];
                for t in 0..7 {
                    acc += d.values()[[i, t]];
                    prop_assert!((acc - v[[i, t + 1]]).abs() <= 1e-9 * (1.0 + v[[i, t + 1]].abs()));
                }
            }

            let shifted = p.with_values(&v + c).unwrap();
            let ds = first_difference(&shifted).unwrap();
            for (a, b) in ds.values().iter().zip(d.values()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
