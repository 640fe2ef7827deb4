//! Cross-product sweeps into one combined table.

use mgnet::analysis::SCHEMA_VERSION;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::run::{csv_with_header, run_experiment};

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub target: String,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub depth: usize,
    pub p: f64,
    pub status: String,
    pub level: Option<usize>,
    pub t: Option<f64>,
    pub measured_error: Option<f64>,
    pub omega: Option<f64>,
    pub bound: Option<f64>,
    pub tolerance: Option<f64>,
    pub margin: Option<f64>,
    pub pass: bool,
    pub error: String,
}

impl SweepRow {
    fn keyed(cfg: &ExperimentConfig, status: &str) -> Self {
        SweepRow {
            target: cfg.target.clone(),
            n: cfg.n,
            depth: cfg.depth,
            p: cfg.p,
            status: status.to_string(),
            level: None,
            t: None,
            measured_error: None,
            omega: None,
            bound: None,
            tolerance: None,
            margin: None,
            pass: false,
            error: String::new(),
        }
    }
}

pub fn header_comment() -> String {
    format!("# mgnet sweep schema v{SCHEMA_VERSION}")
}

fn rows_for(cfg: &ExperimentConfig) -> Vec<SweepRow> {
    match run_experiment(cfg) {
        Ok(b) => match &b.report {
            Some(r) => r
                .rows
                .iter()
                .map(|row| SweepRow {
                    level: Some(row.level),
                    t: Some(row.t),
                    measured_error: Some(row.measured_error),
                    omega: row.omega,
                    bound: Some(row.bound),
                    tolerance: Some(row.tolerance),
                    margin: Some(row.margin),
                    pass: row.pass,
                    ..SweepRow::keyed(cfg, "ok")
                })
                .collect(),
            None => vec![SweepRow {
                error: b.summary.error.clone().unwrap_or_default(),
                ..SweepRow::keyed(cfg, b.summary.status)
            }],
        },
        Err(e) => vec![SweepRow {
            error: e.to_string(),
            ..SweepRow::keyed(cfg, "error")
        }],
    }
}

/// Run every config; rows come back in config order whatever the scheduling.
pub fn run_sweep(runs: &[ExperimentConfig]) -> Vec<SweepRow> {
    let per_run: Vec<Vec<SweepRow>> = runs.par_iter().map(rows_for).collect();
    per_run.into_iter().flatten().collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> anyhow::Result<Vec<u8>> {
    csv_with_header(&header_comment(), rows)
}
