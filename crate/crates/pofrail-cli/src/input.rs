//! CSV ingestion and row-level validation.
//!
//! Required columns: a cluster identifier, a nonnegative time, a 0/1 event
//! indicator, and one or more numeric covariates. An optional member-index
//! column drives the AR(1) distance; rows default to their order within the
//! cluster.

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array1;
use pofrail::{Cluster, Dataset, Observation};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct InputSchema {
    pub cluster_col: String,
    pub time_col: String,
    pub event_col: String,
    pub covariate_cols: Vec<String>,
    pub member_col: Option<String>,
}

impl Default for InputSchema {
    fn default() -> Self {
        Self {
            cluster_col: "cluster".into(),
            time_col: "time".into(),
            event_col: "event".into(),
            covariate_cols: Vec::new(),
            member_col: None,
        }
    }
}

const MAX_REPORTED_VIOLATIONS: usize = 20;

struct RawObs {
    time: f64,
    event: bool,
    covariates: Vec<f64>,
    member_index: Option<usize>,
}

/// Reads and validates a dataset. All schema violations are collected with
/// their data row numbers (first data row = 1) before failing.
pub fn read_dataset(
    path: &Path,
    schema: &InputSchema,
    tau: Option<f64>,
) -> Result<Dataset<f64>, CliError> {
    if schema.covariate_cols.is_empty() {
        return Err(CliError::Input(
            "at least one covariate column is required".into(),
        ));
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("cannot read header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("missing required column `{name}`")))
    };
    let cluster_idx = col(&schema.cluster_col)?;
    let time_idx = col(&schema.time_col)?;
    let event_idx = col(&schema.event_col)?;
    let cov_idx: Vec<usize> = schema
        .covariate_cols
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let member_idx = schema.member_col.as_deref().map(col).transpose()?;

    let mut violations: Vec<String> = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<RawObs>> = HashMap::new();

    for (row_no, record) in reader.records().enumerate() {
        let row = row_no + 1;
        let mut violate = |msg: String| {
            if violations.len() < MAX_REPORTED_VIOLATIONS {
                violations.push(format!("row {row}: {msg}"));
            }
        };
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                violate(format!("malformed record: {e}"));
                continue;
            }
        };
        let field = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();

        let cluster = field(cluster_idx);
        if cluster.is_empty() {
            violate(format!("missing value in `{}`", schema.cluster_col));
            continue;
        }
        let time = match field(time_idx).parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => t,
            Ok(t) => {
                violate(format!(
                    "`{}` must be finite and nonnegative, got {t}",
                    schema.time_col
                ));
                continue;
            }
            Err(_) => {
                violate(format!(
                    "`{}` must be a number, got `{}`",
                    schema.time_col,
                    field(time_idx)
                ));
                continue;
            }
        };
        let event = match field(event_idx).parse::<f64>() {
            Ok(v) if v == 0.0 => false,
            Ok(v) if v == 1.0 => true,
            Ok(v) => {
                violate(format!(
                    "`{}` must be 0 or 1, got {v}",
                    schema.event_col
                ));
                continue;
            }
            Err(_) => {
                violate(format!(
                    "`{}` must be 0 or 1, got `{}`",
                    schema.event_col,
                    field(event_idx)
                ));
                continue;
            }
        };
        let mut covs = Vec::with_capacity(cov_idx.len());
        let mut cov_ok = true;
        for (k, &idx) in cov_idx.iter().enumerate() {
            match field(idx).parse::<f64>() {
                Ok(v) if v.is_finite() => covs.push(v),
                _ => {
                    violate(format!(
                        "`{}` must be a finite number, got `{}`",
                        schema.covariate_cols[k],
                        field(idx)
                    ));
                    cov_ok = false;
                    break;
                }
            }
        }
        if !cov_ok {
            continue;
        }
        let member_index = match member_idx {
            None => None,
            Some(idx) => match field(idx).parse::<usize>() {
                Ok(v) => Some(v),
                Err(_) => {
                    violate(format!(
                        "`{}` must be a nonnegative integer, got `{}`",
                        schema.member_col.as_deref().unwrap_or(""),
                        field(idx)
                    ));
                    continue;
                }
            },
        };
        if !grouped.contains_key(&cluster) {
            order.push(cluster.clone());
        }
        grouped.entry(cluster).or_default().push(RawObs {
            time,
            event,
            covariates: covs,
            member_index,
        });
    }

    if !violations.is_empty() {
        return Err(CliError::Input(format!(
            "{} schema violation(s):\n  {}",
            violations.len(),
            violations.join("\n  ")
        )));
    }

    let mut clusters = Vec::with_capacity(order.len());
    for id in order {
        let raws = grouped.remove(&id).expect("grouped by construction");
        let mut members = Vec::with_capacity(raws.len());
        for (pos, raw) in raws.into_iter().enumerate() {
            let member_index = raw.member_index.unwrap_or(pos);
            members.push(
                Observation::new(
                    raw.time,
                    raw.event,
                    Array1::from_vec(raw.covariates),
                    member_index,
                )
                .map_err(|e| CliError::Input(e.to_string()))?,
            );
        }
        clusters.push(
            Cluster::new(id, members).map_err(|e| CliError::Input(e.to_string()))?,
        );
    }
    Dataset::new(clusters, tau).map_err(|e| CliError::Input(e.to_string()))
}
