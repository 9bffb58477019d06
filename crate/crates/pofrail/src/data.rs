//! Clustered right-censored survival data.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::Scalar;

/// One subject: follow-up time, failure indicator, covariates, and the
/// position within its cluster (the AR(1) structure uses index distance).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub time: T,
    pub event: bool,
    pub covariates: Array1<T>,
    pub member_index: usize,
}

impl<T: Scalar> Observation<T> {
    pub fn new(
        time: T,
        event: bool,
        covariates: Array1<T>,
        member_index: usize,
    ) -> Result<Self> {
        if !time.is_finite() || time < T::zero() {
            return Err(Error::InvalidObservation(format!(
                "time must be finite and nonnegative, got {time}"
            )));
        }
        if covariates.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidObservation(
                "covariates must be finite".into(),
            ));
        }
        Ok(Self {
            time,
            event,
            covariates,
            member_index,
        })
    }

    /// Failure indicator as a scalar (1 failure, 0 censored).
    #[inline]
    pub fn delta(&self) -> T {
        if self.event {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// An independent cluster of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster<T> {
    pub id: String,
    pub members: Vec<Observation<T>>,
}

impl<T: Scalar> Cluster<T> {
    pub fn new(id: impl Into<String>, members: Vec<Observation<T>>) -> Result<Self> {
        let id = id.into();
        if members.is_empty() {
            return Err(Error::InvalidCluster {
                id,
                reason: "cluster must contain at least one observation".into(),
            });
        }
        let mut seen: Vec<usize> = members.iter().map(|m| m.member_index).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCluster {
                id,
                reason: "member_index values must be unique within a cluster".into(),
            });
        }
        Ok(Self { id, members })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// A full dataset of independent clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub clusters: Vec<Cluster<T>>,
    /// Study endpoint; defaults to the largest observed time.
    pub tau: T,
    /// Covariate dimension shared by every observation.
    pub p1: usize,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset, inferring `tau` as the maximum observed time when
    /// not supplied.
    pub fn new(clusters: Vec<Cluster<T>>, tau: Option<T>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidDataset(
                "dataset must contain at least one cluster".into(),
            ));
        }
        let p1 = clusters[0].members[0].covariates.len();
        let mut max_y = T::zero();
        let mut any_event = false;
        for cl in &clusters {
            for obs in &cl.members {
                if obs.covariates.len() != p1 {
                    return Err(Error::InvalidDataset(format!(
                        "cluster `{}` has covariate dimension {} but the dataset uses {}",
                        cl.id,
                        obs.covariates.len(),
                        p1
                    )));
                }
                max_y = max_y.max(obs.time);
                any_event |= obs.event;
            }
        }
        if !any_event {
            return Err(Error::InvalidDataset(
                "dataset must contain at least one failure (the baseline has no jump points \
                 otherwise)"
                    .into(),
            ));
        }
        let tau = match tau {
            Some(t) => {
                if !(t > T::zero()) || !t.is_finite() {
                    return Err(Error::InvalidDataset("tau must be positive".into()));
                }
                if t < max_y {
                    return Err(Error::InvalidDataset(format!(
                        "tau={t} is smaller than the largest observed time {max_y}"
                    )));
                }
                t
            }
            None => max_y,
        };
        Ok(Self { clusters, tau, p1 })
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_observations(&self) -> usize {
        self.clusters.iter().map(Cluster::size).sum()
    }

    pub fn n_events(&self) -> usize {
        self.clusters
            .iter()
            .flat_map(|c| c.members.iter())
            .filter(|o| o.event)
            .count()
    }

    /// Checks the configured cluster-size bound `n_i <= n0`.
    pub fn enforce_cluster_bound(&self, n0: usize) -> Result<()> {
        for cl in &self.clusters {
            if cl.size() > n0 {
                return Err(Error::InvalidDataset(format!(
                    "cluster `{}` has {} members, above the configured bound {}",
                    cl.id,
                    cl.size(),
                    n0
                )));
            }
        }
        Ok(())
    }

    /// Distinct failure times in increasing order, with ties pooled.
    pub fn distinct_failure_times(&self) -> Vec<T> {
        let mut times: Vec<T> = self
            .clusters
            .iter()
            .flat_map(|c| c.members.iter())
            .filter(|o| o.event)
            .map(|o| o.time)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        times.dedup_by(|a, b| a == b);
        times
    }
}
