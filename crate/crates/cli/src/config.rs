//! Experiment configuration: TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use mgnet::analysis::{measurement_engine, BoundMode, SamplingPlan, MODULUS_HEADROOM};
use mgnet::decoder::FitBudget;
use mgnet::multigrade::DecoderMode;
use mgnet::quadrature::{CellAverageEngine, Cuboid};
use mgnet::targets::{load_target, lookup, TargetSpec};
use serde::{Deserialize, Serialize};

/// A configuration problem, reported with the offending field.
#[derive(Debug)]
pub struct UsageError(pub Vec<String>);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl std::error::Error for UsageError {}

fn usage(field: &str, message: impl fmt::Display) -> UsageError {
    UsageError(vec![format!("field `{field}`: {message}")])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaPolicy {
    Auto,
    #[serde(untagged)]
    Explicit(f64),
}

impl std::str::FromStr for DeltaPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(DeltaPolicy::Auto);
        }
        s.parse::<f64>()
            .map(DeltaPolicy::Explicit)
            .map_err(|_| format!("expected `auto` or a number, got `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Table,
    Sine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Modulus,
    Holder,
    PointwiseHolder,
}

/// `auto`, `grid:<points per axis>` or `mc:<samples>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum QuadraturePlan {
    Auto,
    Grid(usize),
    MonteCarlo(usize),
}

impl TryFrom<String> for QuadraturePlan {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<QuadraturePlan> for String {
    fn from(q: QuadraturePlan) -> String {
        q.to_string()
    }
}

impl fmt::Display for QuadraturePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadraturePlan::Auto => write!(f, "auto"),
            QuadraturePlan::Grid(k) => write!(f, "grid:{k}"),
            QuadraturePlan::MonteCarlo(s) => write!(f, "mc:{s}"),
        }
    }
}

impl std::str::FromStr for QuadraturePlan {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected `auto`, `grid:<k>` or `mc:<samples>`, got `{s}`");
        if s == "auto" {
            return Ok(QuadraturePlan::Auto);
        }
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.parse().ok().filter(|&n| n > 0).ok_or_else(bad)?;
        match kind {
            "grid" => Ok(QuadraturePlan::Grid(n)),
            "mc" => Ok(QuadraturePlan::MonteCarlo(n)),
            _ => Err(bad()),
        }
    }
}

/// Everything that determines a run. Equal configs give byte-identical outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Catalog identifier (`ramp`, `tent:0.1`, ...) or path to a grid file.
    pub target: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub depth: usize,
    pub p: f64,
    pub delta: DeltaPolicy,
    pub decoder: DecoderKind,
    pub decoder_eps: f64,
    pub fallback_to_table: bool,
    pub bound: BoundKind,
    /// Hölder exponent and constant for the Hölder bound modes; taken from
    /// the catalog when absent.
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    /// Box `[lo_i, hi_i]` the target lives on; the unit cube when absent.
    pub domain: Option<Domain>,
    pub quadrature: QuadraturePlan,
    pub out: PathBuf,
    pub seed: u64,
}

/// Command-line flags, one per config field. Every flag overrides the file.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigArgs {
    /// TOML file supplying any of the fields below
    #[arg(long, short = 'c')]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Catalog identifier or grid file path
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Subdivision factor N
    #[arg(long = "n", short = 'N')]
    #[serde(rename = "N")]
    pub n: Option<u64>,
    /// Depth L
    #[arg(long = "depth", short = 'L')]
    #[serde(rename = "L")]
    pub depth: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// `auto` or an explicit gap
    #[arg(long)]
    pub delta: Option<DeltaPolicy>,
    #[arg(long, value_enum)]
    pub decoder: Option<DecoderKind>,
    #[arg(long)]
    pub decoder_eps: Option<f64>,
    #[arg(long)]
    pub fallback_to_table: Option<bool>,
    #[arg(long, value_enum)]
    pub bound: Option<BoundKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Box as `lo:hi` per axis, comma separated
    #[arg(long)]
    pub domain: Option<Domain>,
    /// `auto`, `grid:<k>` or `mc:<samples>`
    #[arg(long)]
    pub quadrature: Option<QuadraturePlan>,
    /// Output directory
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// The `[sweep]` table; only read by the sweep subcommand.
    #[arg(skip)]
    pub sweep: Option<SweepGrid>,
}

/// `[[lo_1, hi_1], ...]` in files, `lo_1:hi_1,lo_2:hi_2` on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Domain(pub Vec<[f64; 2]>);

impl std::str::FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_domain(s).map(Domain)
    }
}

fn parse_domain(s: &str) -> Result<Vec<[f64; 2]>, String> {
    s.split(',')
        .map(|axis| {
            let (a, b) = axis
                .split_once(':')
                .ok_or_else(|| format!("axis `{axis}` is not `lo:hi`"))?;
            let a: f64 = a.trim().parse().map_err(|_| format!("bad bound `{a}`"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad bound `{b}`"))?;
            Ok([a, b])
        })
        .collect()
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ConfigArgs {
    /// Read the file named by `--config`, if any, and lay the flags over it.
    pub fn merged(&self) -> Result<ConfigArgs, UsageError> {
        let mut base = match &self.config {
            Some(path) => read_partial(path)?,
            None => ConfigArgs::default(),
        };
        let top = self;
        overlay!(
            base,
            top,
            target,
            d,
            n,
            depth,
            p,
            delta,
            decoder,
            decoder_eps,
            fallback_to_table,
            bound,
            alpha,
            lambda,
            domain,
            quadrature,
            out,
            seed
        );
        Ok(base)
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, UsageError> {
        let m = self.merged()?;
        let mut errors = Vec::new();
        let target = m.target.clone().unwrap_or_else(|| {
            errors.push("field `target`: required".to_string());
            String::new()
        });
        let cfg = ExperimentConfig {
            target,
            d: m.d.unwrap_or(1),
            n: m.n.unwrap_or(2),
            depth: m.depth.unwrap_or(4),
            p: m.p.unwrap_or(2.0),
            delta: m.delta.unwrap_or(DeltaPolicy::Auto),
            decoder: m.decoder.unwrap_or(DecoderKind::Table),
            decoder_eps: m.decoder_eps.unwrap_or(1e-2),
            fallback_to_table: m.fallback_to_table.unwrap_or(false),
            bound: m.bound.unwrap_or(BoundKind::Modulus),
            alpha: m.alpha,
            lambda: m.lambda,
            domain: m.domain.clone(),
            quadrature: m.quadrature.unwrap_or(QuadraturePlan::Auto),
            out: m.out.clone().unwrap_or_else(|| PathBuf::from("mgnet-out")),
            seed: m.seed.unwrap_or(0),
        };
        if let Err(UsageError(more)) = cfg.validate() {
            errors.extend(more);
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            errors.dedup();
            Err(UsageError(errors))
        }
    }
}

fn read_partial(path: &Path) -> Result<ConfigArgs, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage("config", format!("{}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| usage("config", format!("{}: {}", path.display(), e.message())))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), UsageError> {
        let mut e = Vec::new();
        let mut bad = |field: &str, msg: String| e.push(format!("field `{field}`: {msg}"));
        if self.target.is_empty() {
            bad("target", "required".into());
        }
        if self.d == 0 {
            bad("d", "must be at least 1".into());
        }
        if self.n < 2 {
            bad("N", format!("must be at least 2, got {}", self.n));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            bad("p", format!("must lie in [1, inf), got {}", self.p));
        }
        if let DeltaPolicy::Explicit(delta) = self.delta {
            if !(delta > 0.0) {
                bad("delta", format!("must be positive, got {delta}"));
            }
        }
        if !(self.decoder_eps > 0.0) {
            bad(
                "decoder_eps",
                format!("must be positive, got {}", self.decoder_eps),
            );
        }
        if let Some(Domain(dom)) = &self.domain {
            if dom.len() != self.d {
                bad(
                    "domain",
                    format!("has {} axes, expected d = {}", dom.len(), self.d),
                );
            }
            if dom.iter().any(|[a, b]| !(a < b)) {
                bad("domain", "every axis needs lo < hi".into());
            }
        }
        if self.bound == BoundKind::Modulus && (self.alpha.is_some() || self.lambda.is_some()) {
            bad("alpha", "only used by the holder bound modes".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(UsageError(e))
        }
    }

    pub fn target_spec(&self) -> Result<TargetSpec, UsageError> {
        let path = Path::new(&self.target);
        let spec = if path.exists() || self.target.ends_with(".grid") {
            load_target(path).map_err(|e| usage("target", e))?
        } else {
            lookup(&self.target, self.d).map_err(|e| usage("target", e))?
        };
        if spec.dim() != self.d {
            return Err(usage(
                "target",
                format!("has dimension {}, config says d = {}", spec.dim(), self.d),
            ));
        }
        Ok(spec)
    }

    pub fn domain_box(&self) -> Cuboid {
        match &self.domain {
            Some(Domain(dom)) => Cuboid::new(
                dom.iter().map(|a| a[0]).collect(),
                dom.iter().map(|a| a[1]).collect(),
            )
            .expect("validated domain"),
            None => Cuboid::unit(self.d),
        }
    }

    pub fn decoder_mode(&self) -> DecoderMode {
        match self.decoder {
            DecoderKind::Table => DecoderMode::Table,
            DecoderKind::Sine => DecoderMode::Sine {
                eps: self.decoder_eps,
                budget: FitBudget::default(),
                fallback_to_table: self.fallback_to_table,
            },
        }
    }

    pub fn sampling_plan(&self) -> SamplingPlan {
        SamplingPlan {
            seed: self.seed,
            ..SamplingPlan::default_for_dim(self.d)
        }
    }

    pub fn build_engine(&self) -> CellAverageEngine {
        CellAverageEngine::default_for_dim(self.d, self.seed)
    }

    pub fn measure_engine(&self) -> CellAverageEngine {
        match self.quadrature {
            QuadraturePlan::Auto => measurement_engine(self.d, self.seed),
            QuadraturePlan::Grid(k) => CellAverageEngine::tensor_grid(k),
            QuadraturePlan::MonteCarlo(s) => CellAverageEngine::monte_carlo(s, self.seed),
        }
    }

    pub fn bound_mode(&self, spec: &TargetSpec) -> Result<BoundMode, UsageError> {
        let declared = match self.bound {
            BoundKind::Modulus => {
                return Ok(BoundMode::Modulus {
                    plan: self.sampling_plan(),
                    headroom: MODULUS_HEADROOM,
                })
            }
            BoundKind::Holder => spec.lp_holder(self.p),
            BoundKind::PointwiseHolder => spec.pointwise_holder(),
        };
        let alpha = self.alpha.or(declared.map(|h| h.alpha));
        let lambda = self.lambda.or(declared.map(|h| h.lambda));
        let (Some(alpha), Some(lambda)) = (alpha, lambda) else {
            return Err(usage(
                "alpha",
                "target has no known Hölder constants; pass alpha and lambda",
            ));
        };
        Ok(match self.bound {
            BoundKind::Holder => BoundMode::Holder { alpha, lambda },
            _ => BoundMode::PointwiseHolder { alpha, lambda },
        })
    }
}

/// Lists of `N`, `L`, `p` and targets crossed into individual runs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default, rename = "N")]
    pub n: Vec<u64>,
    #[serde(default, rename = "L")]
    pub depth: Vec<usize>,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub targets: Vec<String>,
}

impl SweepGrid {
    /// Cross product in the order targets, N, L, p.
    pub fn expand(&self, base: &ConfigArgs) -> Result<Vec<ExperimentConfig>, UsageError> {
        if self.n.is_empty()
            || self.depth.is_empty()
            || self.p.is_empty()
            || self.targets.is_empty()
        {
            return Err(UsageError(vec![
                "field `sweep`: every list (targets, N, L, p) needs at least one entry".to_string(),
            ]));
        }
        let mut runs = Vec::new();
        for t in &self.targets {
            for &n in &self.n {
                for &depth in &self.depth {
                    for &p in &self.p {
                        let mut a = base.clone();
                        a.config = None;
                        a.sweep = None;
                        a.target = Some(t.clone());
                        a.n = Some(n);
                        a.depth = Some(depth);
                        a.p = Some(p);
                        runs.push(a.resolve()?);
                    }
                }
            }
        }
        Ok(runs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_policy_parses_both_forms() {
        assert_eq!("auto".parse::<DeltaPolicy>().unwrap(), DeltaPolicy::Auto);
        assert_eq!(
            "1e-4".parse::<DeltaPolicy>().unwrap(),
            DeltaPolicy::Explicit(1e-4)
        );
        assert!("often".parse::<DeltaPolicy>().is_err());
        let a: ConfigArgs = toml::from_str("delta = \"auto\"").unwrap();
        assert_eq!(a.delta, Some(DeltaPolicy::Auto));
        let b: ConfigArgs = toml::from_str("delta = 0.001").unwrap();
        assert_eq!(b.delta, Some(DeltaPolicy::Explicit(0.001)));
    }

    #[test]
    fn quadrature_plan_roundtrips() {
        for s in ["auto", "grid:16", "mc:4096"] {
            assert_eq!(s.parse::<QuadraturePlan>().unwrap().to_string(), s);
        }
        for s in ["grid", "grid:0", "simpson:3"] {
            assert!(s.parse::<QuadraturePlan>().is_err());
        }
    }

    #[test]
    fn domain_flag_parses_axes() {
        let d: Domain = "0:2,-1:1".parse().unwrap();
        assert_eq!(d.0, vec![[0.0, 2.0], [-1.0, 1.0]]);
        assert!("0-2".parse::<Domain>().is_err());
    }

    #[test]
    fn sweep_expands_in_fixed_order() {
        let grid = SweepGrid {
            n: vec![2, 3],
            depth: vec![1],
            p: vec![1.0, 2.0],
            targets: vec!["ramp".into(), "indicator".into()],
        };
        let runs = grid.expand(&ConfigArgs::default()).unwrap();
        let keys: Vec<(String, u64, f64)> =
            runs.iter().map(|r| (r.target.clone(), r.n, r.p)).collect();
        assert_eq!(keys[0], ("ramp".into(), 2, 1.0));
        assert_eq!(keys[1], ("ramp".into(), 2, 2.0));
        assert_eq!(keys[2], ("ramp".into(), 3, 1.0));
        assert_eq!(keys[4], ("indicator".into(), 2, 1.0));
        assert_eq!(runs.len(), 8);
    }

    #[test]
    fn modulus_mode_rejects_holder_constants() {
        let a = ConfigArgs {
            target: Some("ramp".into()),
            alpha: Some(1.0),
            ..ConfigArgs::default()
        };
        assert!(a.resolve().is_err());
    }
}
