//! Summary serialization: raw-unit CSV/JSON per scenario and the ×10³
//! display table for the benchmark grid.
//!
//! JSON and per-scenario CSV always carry raw units; the ×10³ convention is
//! applied only in the combined display table, whose column names carry an
//! explicit `_x1000` suffix.

use pofrail::simulate::{ScenarioConfig, SimBaseline, SummaryTable};
use serde_json::json;

use crate::commands::BenchRow;

fn baseline_string(b: &SimBaseline<f64>) -> String {
    match b {
        SimBaseline::Linear => "linear".to_string(),
        SimBaseline::Power { scale, shape } => format!("power:{scale},{shape}"),
    }
}

/// Raw-unit JSON for one scenario summary.
pub fn summary_json(cfg: &ScenarioConfig<f64>, summary: &SummaryTable<f64>) -> String {
    let params: Vec<_> = summary
        .params
        .iter()
        .map(|p| {
            json!({
                "name": p.name,
                "true_value": p.true_value,
                "bias": p.bias,
                "see": nullable(p.see),
                "sse": p.sse,
                "mse": p.mse,
                "coverage95": nullable(p.coverage95),
            })
        })
        .collect();
    let value = json!({
        "scenario": {
            "m_clusters": cfg.m_clusters,
            "cluster_size_min": cfg.cluster_size_range.0,
            "cluster_size_max": cfg.cluster_size_range.1,
            "beta_true": cfg.beta_true.to_vec(),
            "rho_true": cfg.rho_true,
            "corr_kind": cfg.corr_kind.as_str(),
            "censor_mean": cfg.censor_mean,
            "censor_cap": cfg.censor_cap,
            "baseline": baseline_string(&cfg.baseline),
            "n_reps": cfg.n_reps,
            "master_seed": cfg.master_seed,
        },
        "n_reps": summary.n_reps,
        "n_used": summary.n_used,
        "n_nonconverged": summary.n_nonconverged,
        "flagged": summary.flagged,
        "params": params,
    });
    let mut out = serde_json::to_string_pretty(&value).expect("serializable");
    out.push('\n');
    out
}

fn nullable(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        String::new()
    }
}

/// Raw-unit CSV for one scenario summary.
pub fn summary_csv(summary: &SummaryTable<f64>) -> String {
    let mut out = String::from("param,true_value,bias,see,sse,mse,coverage95\n");
    for p in &summary.params {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.name,
            cell(p.true_value),
            cell(p.bias),
            cell(p.see),
            cell(p.sse),
            cell(p.mse),
            cell(p.coverage95),
        ));
    }
    out
}

fn scaled(x: f64) -> String {
    if x.is_finite() {
        format!("{:.1}", x * 1000.0)
    } else {
        String::new()
    }
}

/// Combined benchmark table mirroring the simulation-study layout: one row
/// per scenario, Bias/SEE/SSE/MSE ×10³, coverage as a fraction.
pub fn combined_table(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "structure,censoring_pct,rho0,\
         bias_beta0_x1000,bias_beta1_x1000,\
         see_beta0_x1000,see_beta1_x1000,\
         sse_beta0_x1000,sse_beta1_x1000,\
         mse_beta0_x1000,mse_beta1_x1000,\
         coverage_beta0,coverage_beta1,\
         bias_rho_x1000,n_used,n_nonconverged,status\n",
    );
    for row in rows {
        match &row.outcome {
            Ok(s) => {
                let get = |name: &str| s.params.iter().find(|p| p.name == name);
                let b0 = get("beta0");
                let b1 = get("beta1");
                let rho = get("rho");
                let f = |v: Option<f64>| v.map(scaled).unwrap_or_default();
                let c = |v: Option<f64>| v.map(cell).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    row.structure.as_str(),
                    row.censoring,
                    row.rho,
                    f(b0.map(|p| p.bias)),
                    f(b1.map(|p| p.bias)),
                    f(b0.map(|p| p.see)),
                    f(b1.map(|p| p.see)),
                    f(b0.map(|p| p.sse)),
                    f(b1.map(|p| p.sse)),
                    f(b0.map(|p| p.mse)),
                    f(b1.map(|p| p.mse)),
                    c(b0.map(|p| p.coverage95)),
                    c(b1.map(|p| p.coverage95)),
                    f(rho.map(|p| p.bias)),
                    s.n_used,
                    s.n_nonconverged,
                    if s.flagged { "flagged" } else { "ok" },
                ));
            }
            Err(msg) => {
                out.push_str(&format!(
                    "{},{},{},,,,,,,,,,,,,,failed: {}\n",
                    row.structure.as_str(),
                    row.censoring,
                    row.rho,
                    msg.replace(',', ";"),
                ));
            }
        }
    }
    out
}
