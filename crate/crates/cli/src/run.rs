//! One experiment: build, verify, and the artifact bundle.

use std::path::Path;

use anyhow::Context;
use mgnet::analysis::{
    auto_delta, box_rescale_verify, estimate_modulus, verify_bounds, BoundReport, ModulusEstimate,
    SCHEMA_VERSION,
};
use mgnet::decoder::conditioning_report;
use mgnet::multigrade::{layout_parameter_count, shared_width, MultigradeNet, PARAMETER_CONSTANT};
use mgnet::quadrature::Cuboid;
use mgnet::targets::TargetFunction;
use mgnet::{Error, PartitionConfig};
use serde::Serialize;

use crate::config::{DeltaPolicy, ExperimentConfig, UsageError};

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    /// Build stopped at `level`; `partial` holds the grades finished before it.
    Build {
        error: Error,
        partial: Option<Box<MultigradeNet>>,
    },
    Other(Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(u) => write!(f, "{u}"),
            RunError::Build { error, .. } => write!(f, "build failed: {error}"),
            RunError::Other(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<UsageError> for RunError {
    fn from(u: UsageError) -> Self {
        RunError::Usage(u)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Other(e)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaInfo {
    pub policy: &'static str,
    pub value: f64,
    pub eta: Option<f64>,
    pub omega: Option<f64>,
    pub note: Option<String>,
}

pub struct Built {
    pub net: MultigradeNet,
    pub partition: PartitionConfig,
    pub delta: DeltaInfo,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusRow {
    pub level: usize,
    pub t: f64,
    /// Empty for the classical modulus.
    pub p: Option<f64>,
    pub value: f64,
    pub direction_count: usize,
    pub magnitude_count: usize,
    pub integration: String,
    pub is_lower_bound: bool,
    pub argmax: String,
}

impl ModulusRow {
    pub fn new(level: usize, m: &ModulusEstimate) -> Self {
        ModulusRow {
            level,
            t: m.t,
            p: m.p,
            value: m.value,
            direction_count: m.direction_count,
            magnitude_count: m.magnitude_count,
            integration: m.integration.clone(),
            is_lower_bound: m.is_lower_bound,
            argmax: m
                .argmax
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamsReport {
    pub schema_version: u32,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub depth: usize,
    pub width: usize,
    pub layers: usize,
    pub parameter_count: u64,
    /// `C W^2 (L + 2)`
    pub parameter_bound: f64,
    pub parameter_constant: f64,
    /// Count of the exported stack; absent when a level uses a table decoder.
    pub exported_parameter_count: Option<u64>,
    /// `(L', count)` for `L' = 0..=L`.
    pub count_by_depth: Vec<(usize, u64)>,
}

impl ParamsReport {
    pub fn new(net: &MultigradeNet) -> Self {
        let c = &net.config;
        let width = shared_width(c.d, c.n);
        let exported = net
            .export_weights()
            .ok()
            .map(|s| s.parameter_count() as u64);
        ParamsReport {
            schema_version: SCHEMA_VERSION,
            d: c.d,
            n: c.n,
            depth: c.depth,
            width,
            layers: c.depth + 2,
            parameter_count: layout_parameter_count(c.d, c.n, c.depth),
            parameter_bound: PARAMETER_CONSTANT * (width * width) as f64 * (c.depth + 2) as f64,
            parameter_constant: PARAMETER_CONSTANT,
            exported_parameter_count: exported,
            count_by_depth: (0..=c.depth)
                .map(|l| (l, layout_parameter_count(c.d, c.n, l)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub measured_error: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub decoder: &'static str,
    pub decoder_eps: f64,
    pub conditioning_flag: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    /// `ok` or `build-failed`.
    pub status: &'static str,
    pub all_pass: bool,
    /// Set when `net.json` holds only the grades finished before a failure.
    pub partial: bool,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub delta: Option<DeltaInfo>,
    pub bound_mode: Option<String>,
    pub sup_f: Option<f64>,
    pub levels: Vec<LevelSummary>,
    pub notes: Vec<String>,
}

pub struct Bundle {
    pub summary: Summary,
    pub report: Option<BoundReport>,
    pub modulus: Vec<ModulusRow>,
    pub net: Option<MultigradeNet>,
    pub params: Option<ParamsReport>,
}

impl Bundle {
    pub fn all_pass(&self) -> bool {
        self.summary.all_pass
    }
}

fn target_on_domain(cfg: &ExperimentConfig) -> Result<TargetFunction, RunError> {
    let spec = cfg.target_spec()?;
    let domain = cfg.domain_box();
    if domain == Cuboid::unit(cfg.d) {
        Ok(spec.function)
    } else {
        Ok(spec.function.with_domain(domain)?)
    }
}

fn partition(
    cfg: &ExperimentConfig,
    f: &TargetFunction,
) -> Result<(PartitionConfig, DeltaInfo), RunError> {
    let info = match cfg.delta {
        DeltaPolicy::Explicit(delta) => DeltaInfo {
            policy: "explicit",
            value: delta,
            eta: None,
            omega: None,
            note: None,
        },
        DeltaPolicy::Auto => {
            let g = f.pullback_to_unit_cube();
            let a = auto_delta(
                &g,
                cfg.d,
                cfg.n,
                cfg.depth,
                cfg.p,
                &cfg.sampling_plan(),
                &cfg.build_engine(),
            )?;
            DeltaInfo {
                policy: "auto",
                value: a.delta,
                eta: Some(a.eta),
                omega: Some(a.omega),
                note: a.note,
            }
        }
    };
    let part = PartitionConfig::new(cfg.d, cfg.n, cfg.depth, info.value)
        .map_err(|e| UsageError(vec![format!("field `delta`: {e}")]))?;
    Ok((part, info))
}

/// Build the net for `cfg` without verifying it.
pub fn build(cfg: &ExperimentConfig) -> Result<Built, RunError> {
    let f = target_on_domain(cfg)?;
    let (part, delta) = partition(cfg, &f)?;
    let g = f.pullback_to_unit_cube();
    let net = MultigradeNet::build(&g, &part, cfg.p, &cfg.build_engine(), cfg.decoder_mode())
        .map_err(build_error)?;
    Ok(Built {
        net,
        partition: part,
        delta,
    })
}

fn build_error(e: Error) -> RunError {
    match e {
        Error::Fit {
            level,
            achieved_eps,
            requested_eps,
            partial,
        } => RunError::Build {
            error: Error::Fit {
                level,
                achieved_eps,
                requested_eps,
                partial: None,
            },
            partial,
        },
        other => RunError::Other(other),
    }
}

/// Build, verify and collect every artifact in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Bundle, RunError> {
    cfg.validate()?;
    let f = target_on_domain(cfg)?;
    let spec = cfg.target_spec()?;
    let mode = cfg.bound_mode(&spec)?;
    let (part, delta) = partition(cfg, &f)?;
    let build_engine = cfg.build_engine();
    let measure = cfg.measure_engine();

    let built = if cfg.domain.is_none() {
        MultigradeNet::build(&f, &part, cfg.p, &build_engine, cfg.decoder_mode()).and_then(|net| {
            let r = verify_bounds(&f, &net, cfg.p, &mode, &measure)?;
            Ok((net, r))
        })
    } else {
        box_rescale_verify(
            &f,
            &part,
            cfg.p,
            &mode,
            &build_engine,
            &measure,
            cfg.decoder_mode(),
        )
    };
    let (net, report) = match built {
        Ok(x) => x,
        Err(e) => match build_error(e) {
            RunError::Build { error, partial } => {
                return Ok(Bundle {
                    summary: Summary {
                        schema_version: SCHEMA_VERSION,
                        status: "build-failed",
                        all_pass: false,
                        partial: partial.is_some(),
                        error: Some(error.to_string()),
                        config: cfg.clone(),
                        delta: Some(delta),
                        bound_mode: Some(mode.label().to_string()),
                        sup_f: None,
                        levels: Vec::new(),
                        notes: Vec::new(),
                    },
                    report: None,
                    modulus: Vec::new(),
                    net: partial.map(|b| *b),
                    params: None,
                })
            }
            other => return Err(other),
        },
    };

    let plan = cfg.sampling_plan();
    let modulus = report
        .rows
        .iter()
        .map(|r| estimate_modulus(&f, r.t, cfg.p, &plan).map(|m| ModulusRow::new(r.level, &m)))
        .collect::<mgnet::Result<Vec<_>>>()?;

    let levels = report
        .rows
        .iter()
        .zip(&net.grades)
        .map(|(r, g)| LevelSummary {
            level: r.level,
            measured_error: r.measured_error,
            bound: r.bound,
            tolerance: r.tolerance,
            pass: r.pass,
            decoder: match g.decoder {
                mgnet::Decoder::Sine(_) => "sine",
                mgnet::Decoder::Table(_) => "table",
            },
            decoder_eps: g.decoder.eps(),
            conditioning_flag: g
                .decoder
                .as_sine()
                .is_some_and(|s| conditioning_report(s).flagged),
        })
        .collect();
    let mut notes = report.notes.clone();
    if let Some(n) = &delta.note {
        notes.push(n.clone());
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        status: "ok",
        all_pass: report.all_pass,
        partial: false,
        error: None,
        config: cfg.clone(),
        delta: Some(delta),
        bound_mode: Some(report.mode.clone()),
        sup_f: Some(report.sup_f),
        levels,
        notes,
    };
    let params = ParamsReport::new(&net);
    Ok(Bundle {
        summary,
        report: Some(report),
        modulus,
        net: Some(net),
        params: Some(params),
    })
}

/// CSV text with a schema comment line first.
pub fn csv_with_header<T: Serialize>(header: &str, rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

pub fn bound_rows_csv(report: Option<&BoundReport>) -> anyhow::Result<Vec<u8>> {
    let rows = report.map(|r| r.rows.as_slice()).unwrap_or(&[]);
    csv_with_header(&BoundReport::header_comment(), rows)
}

pub fn modulus_csv(rows: &[ModulusRow]) -> anyhow::Result<Vec<u8>> {
    csv_with_header(&ModulusEstimate::header_comment(), rows)
}

pub fn json_bytes<T: Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// `bound_report.csv`, `modulus.csv`, `net.json`, `params.json`, `summary.json`.
pub fn write_bundle(dir: &Path, b: &Bundle) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, "bound_report.csv", &bound_rows_csv(b.report.as_ref())?)?;
    write(dir, "modulus.csv", &modulus_csv(&b.modulus)?)?;
    if let Some(net) = &b.net {
        let mut s = net.to_json()?.into_bytes();
        s.push(b'\n');
        write(dir, "net.json", &s)?;
    }
    if let Some(p) = &b.params {
        write(dir, "params.json", &json_bytes(p)?)?;
    }
    write(dir, "summary.json", &json_bytes(&b.summary)?)?;
    Ok(())
}
