//! Target functions: a type-erased evaluator plus a small catalog of
//! functions whose L^p norms, moduli of continuity and Hölder constants are
//! known in closed form, and a sampled-grid loader.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Cuboid;

/// `|f(x) - f(y)| <= lambda * |x - y|_2^alpha`, or the L^p analogue
/// `omega_{f,p}(t) <= lambda * t^alpha`, depending on where it is used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub alpha: f64,
    pub lambda: f64,
}

impl Holder {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Hölder exponent must lie in (0, 1], got {alpha}"
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Hölder constant must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(Self { alpha, lambda })
    }

    pub fn lipschitz(lambda: f64) -> Self {
        Self { alpha: 1.0, lambda }
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A real-valued function on a box (the unit cube unless stated otherwise).
#[derive(Clone)]
pub struct TargetFunction {
    dim: usize,
    eval: Evaluator,
    /// Only used to compute theoretical bounds; never checked.
    pub declared_regularity: Option<Holder>,
    pub domain: Cuboid,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("dim", &self.dim)
            .field("declared_regularity", &self.declared_regularity)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl TargetFunction {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(f),
            declared_regularity: None,
            domain: Cuboid::unit(dim),
        }
    }

    pub fn with_regularity(mut self, h: Holder) -> Self {
        self.declared_regularity = Some(h);
        self
    }

    pub fn with_domain(mut self, domain: Cuboid) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::Domain(format!(
                "domain has dimension {} but the target has dimension {}",
                domain.dim(),
                self.dim
            )));
        }
        if domain.is_degenerate() {
            return Err(Error::Domain("degenerate target domain".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// `g(y) = f(a + (b - a) * y)` on the unit cube.
    pub fn pullback_to_unit_cube(&self) -> TargetFunction {
        let lo = self.domain.lo.clone();
        let sides = self.domain.sides();
        let inner = self.eval.clone();
        let d = self.dim;
        TargetFunction {
            dim: d,
            eval: Arc::new(move |y: &[f64]| {
                let mut x = [0.0f64; 8];
                if d <= 8 {
                    for i in 0..d {
                        x[i] = lo[i] + sides[i] * y[i];
                    }
                    inner(&x[..d])
                } else {
                    let x: Vec<f64> = (0..d).map(|i| lo[i] + sides[i] * y[i]).collect();
                    inner(&x)
                }
            }),
            declared_regularity: None,
            domain: Cuboid::unit(d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetKind {
    Zero,
    Constant {
        value: f64,
    },
    /// `x_1`
    Ramp,
    /// `(x_1 + ... + x_d) / d`
    Average,
    /// `1{x_1 > 1/2}`
    Indicator,
    /// `max(1 - |x_1 - 1/2| / eps, 0)`
    Tent {
        eps: f64,
    },
    /// `sin(2 pi m x_1)`
    Sine {
        m: u32,
    },
    /// `|x_1 - 1/2|^alpha`
    Holder {
        alpha: f64,
    },
    /// Multilinear interpolation of a sampled grid.
    Grid,
}

#[derive(Clone, Debug)]
pub struct TargetSpec {
    pub name: String,
    pub kind: TargetKind,
    pub function: TargetFunction,
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.function.eval(x)
    }

    /// Closed-form `omega_{f,p}(t)` where known; `p = inf` gives the classical modulus.
    pub fn exact_modulus(&self, t: f64, p: f64) -> Option<f64> {
        match self.kind {
            TargetKind::Zero | TargetKind::Constant { .. } => Some(0.0),
            TargetKind::Indicator if t <= 0.5 => {
                if t <= 0.0 {
                    Some(0.0)
                } else if p.is_infinite() {
                    Some(1.0)
                } else {
                    Some(t.powf(1.0 / p))
                }
            }
            // the worst translation is along e_1 and r (1 - r)^{1/p} increases on [0, 1/2]
            TargetKind::Ramp if t <= 0.5 => {
                if p.is_infinite() {
                    Some(t)
                } else {
                    Some(t * (1.0 - t).powf(1.0 / p))
                }
            }
            _ => None,
        }
    }

    /// Closed-form `||f||_{L^p([0,1]^d)}` where known.
    pub fn exact_lp_norm(&self, p: f64) -> Option<f64> {
        match self.kind {
            TargetKind::Zero => Some(0.0),
            TargetKind::Constant { value } => Some(value.abs()),
            TargetKind::Ramp => Some((1.0 / (p + 1.0)).powf(1.0 / p)),
            TargetKind::Indicator => Some(0.5f64.powf(1.0 / p)),
            TargetKind::Tent { eps } if eps <= 0.5 => Some((2.0 * eps / (p + 1.0)).powf(1.0 / p)),
            TargetKind::Holder { alpha } => {
                let ap = alpha * p;
                Some((0.5f64.powf(ap) / (ap + 1.0)).powf(1.0 / p))
            }
            TargetKind::Sine { .. } if p == 1.0 => Some(2.0 / PI),
            TargetKind::Sine { .. } if p == 2.0 => Some(0.5f64.sqrt()),
            _ => None,
        }
    }

    /// Pointwise Hölder constant on the unit cube.
    pub fn pointwise_holder(&self) -> Option<Holder> {
        let d = self.dim() as f64;
        match self.kind {
            TargetKind::Zero | TargetKind::Constant { .. } => Some(Holder::lipschitz(0.0)),
            TargetKind::Ramp => Some(Holder::lipschitz(1.0)),
            TargetKind::Average => Some(Holder::lipschitz(1.0 / d.sqrt())),
            TargetKind::Tent { eps } => Some(Holder::lipschitz(1.0 / eps)),
            TargetKind::Sine { m } => Some(Holder::lipschitz(2.0 * PI * m as f64)),
            // ||a|^alpha - |b|^alpha| <= |a - b|^alpha, with equality at a = 0
            TargetKind::Holder { alpha } => Some(Holder { alpha, lambda: 1.0 }),
            TargetKind::Indicator | TargetKind::Grid => None,
        }
    }

    /// `omega_{f,p}(t) <= lambda t^alpha` on the unit cube.
    pub fn lp_holder(&self, p: f64) -> Option<Holder> {
        match self.kind {
            TargetKind::Indicator => Some(Holder {
                alpha: 1.0 / p,
                lambda: 1.0,
            }),
            _ => self.pointwise_holder(),
        }
    }
}

fn spec(name: impl Into<String>, kind: TargetKind, d: usize) -> TargetSpec {
    let function = match kind.clone() {
        TargetKind::Zero => TargetFunction::new(d, |_| 0.0),
        TargetKind::Constant { value } => TargetFunction::new(d, move |_| value),
        TargetKind::Ramp => TargetFunction::new(d, |x| x[0]),
        TargetKind::Average => TargetFunction::new(d, move |x| x.iter().sum::<f64>() / d as f64),
        TargetKind::Indicator => TargetFunction::new(d, |x| if x[0] > 0.5 { 1.0 } else { 0.0 }),
        TargetKind::Tent { eps } => {
            TargetFunction::new(d, move |x| (1.0 - (x[0] - 0.5).abs() / eps).max(0.0))
        }
        TargetKind::Sine { m } => {
            TargetFunction::new(d, move |x| (2.0 * PI * m as f64 * x[0]).sin())
        }
        TargetKind::Holder { alpha } => {
            TargetFunction::new(d, move |x| (x[0] - 0.5).abs().powf(alpha))
        }
        TargetKind::Grid => unreachable!("grid targets are built by load_target"),
    };
    let mut s = TargetSpec {
        name: name.into(),
        kind,
        function,
    };
    s.function.declared_regularity = s.pointwise_holder();
    s
}

/// The built-in targets in dimension `d`, with default parameters.
pub fn catalog(d: usize) -> Vec<TargetSpec> {
    [
        "zero",
        "constant:1",
        "ramp",
        "average",
        "indicator",
        "tent:0.1",
        "sine:1",
        "holder:0.5",
    ]
    .iter()
    .map(|n| lookup(n, d).expect("catalog names parse"))
    .collect()
}

/// Resolve a catalog identifier such as `ramp`, `tent:0.1` or `constant:5`.
pub fn lookup(name: &str, d: usize) -> Result<TargetSpec> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let (base, arg) = match name.split_once(':') {
        Some((b, a)) => (b, Some(a)),
        None => (name, None),
    };
    let parse_arg = |default: f64| -> Result<f64> {
        match arg {
            None => Ok(default),
            Some(a) => a.trim().parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("bad parameter `{a}` in target `{name}`"))
            }),
        }
    };
    let kind = match base {
        "zero" => TargetKind::Zero,
        "constant" => TargetKind::Constant {
            value: parse_arg(1.0)?,
        },
        "ramp" => TargetKind::Ramp,
        "average" => TargetKind::Average,
        "indicator" => TargetKind::Indicator,
        "tent" => {
            let eps = parse_arg(0.1)?;
            if !(eps > 0.0) {
                return Err(Error::InvalidArgument("tent width must be positive".into()));
            }
            TargetKind::Tent { eps }
        }
        "sine" => {
            let m = parse_arg(1.0)?;
            if m < 1.0 || m.fract() != 0.0 {
                return Err(Error::InvalidArgument(
                    "sine frequency must be a positive integer".into(),
                ));
            }
            TargetKind::Sine { m: m as u32 }
        }
        "holder" => {
            let alpha = parse_arg(0.5)?;
            Holder::new(alpha, 1.0)?;
            TargetKind::Holder { alpha }
        }
        _ => return Err(Error::InvalidArgument(format!("unknown target `{name}`"))),
    };
    Ok(spec(name, kind, d))
}

/// Values of a function sampled on a uniform tensor grid over `[0,1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridData {
    pub shape: Vec<usize>,
    /// Row-major, last axis fastest.
    pub values: Vec<f64>,
}

impl GridData {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(
                "every grid axis needs at least 2 samples".into(),
            ));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "grid shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Multilinear interpolation; points outside `[0,1]^d` are clamped.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = 0usize;
        let mut frac = [0.0f64; 16];
        let mut strides = [0usize; 16];
        let mut stride = 1usize;
        for i in (0..d).rev() {
            strides[i] = stride;
            stride *= self.shape[i];
        }
        for i in 0..d {
            let n = self.shape[i];
            let pos = x[i].clamp(0.0, 1.0) * (n - 1) as f64;
            let j = (pos.floor() as usize).min(n - 2);
            frac[i] = pos - j as f64;
            base += j * strides[i];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut offset = 0usize;
            for i in 0..d {
                if corner >> i & 1 == 1 {
                    w *= frac[i];
                    offset += strides[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w != 0.0 {
                acc += w * self.values[base + offset];
            }
        }
        acc
    }

    /// Largest difference between adjacent samples divided by the grid spacing.
    pub fn max_adjacent_slope(&self) -> f64 {
        let d = self.dim();
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        let mut best = 0.0f64;
        for (flat, &v) in self.values.iter().enumerate() {
            for i in 0..d {
                let coord = flat / strides[i] % self.shape[i];
                if coord + 1 < self.shape[i] {
                    let w = self.values[flat + strides[i]];
                    best = best.max((w - v).abs() * (self.shape[i] - 1) as f64);
                }
            }
        }
        best
    }
}

/// Parse the sampled-grid text format:
///
/// ```text
/// # comments and blank lines are ignored
/// grid <d>
/// <n_1> <n_2> ... <n_d>
/// <n_1 * ... * n_d values, row-major, any whitespace>
/// ```
///
/// Axis `i` is sampled at `j / (n_i - 1)`, `j = 0..n_i`.
pub fn parse_grid(text: &str) -> Result<GridData> {
    let mut tokens = text.lines().enumerate().flat_map(|(ln, line)| {
        let content = line.split('#').next().unwrap_or("");
        let base = content.as_ptr() as usize;
        content
            .split_whitespace()
            .map(move |tok| (ln + 1, tok.as_ptr() as usize - base + 1, tok))
    });
    let err = |line, offset, message: String| Error::Parse {
        line,
        offset,
        message,
    };

    let (line, offset, tok) = tokens
        .next()
        .ok_or_else(|| err(1, 1, "empty grid file".into()))?;
    if tok != "grid" {
        return Err(err(line, offset, format!("expected `grid`, found `{tok}`")));
    }
    let (line, offset, tok) = tokens
        .next()
        .ok_or_else(|| err(line, offset, "missing dimension after `grid`".into()))?;
    let d: usize = tok
        .parse()
        .ok()
        .filter(|d| (1..=16).contains(d))
        .ok_or_else(|| err(line, offset, format!("bad dimension `{tok}`")))?;

    let mut shape = Vec::with_capacity(d);
    let mut last = (line, offset);
    for _ in 0..d {
        let (line, offset, tok) = tokens
            .next()
            .ok_or_else(|| err(last.0, last.1, "missing axis resolution".into()))?;
        let n: usize = tok
            .parse()
            .ok()
            .filter(|&n| n >= 2)
            .ok_or_else(|| err(line, offset, format!("bad axis resolution `{tok}`")))?;
        shape.push(n);
        last = (line, offset);
    }
    let expected: usize = shape.iter().product();
    let mut values = Vec::with_capacity(expected);
    for (line, offset, tok) in tokens.by_ref() {
        let v: f64 = tok
            .parse()
            .map_err(|_| err(line, offset, format!("bad value `{tok}`")))?;
        if !v.is_finite() {
            return Err(err(line, offset, format!("non-finite value `{tok}`")));
        }
        if values.len() == expected {
            return Err(err(
                line,
                offset,
                "more values than the grid shape allows".into(),
            ));
        }
        values.push(v);
        last = (line, offset);
    }
    if values.len() != expected {
        return Err(err(
            last.0,
            last.1,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    GridData::new(shape, values)
}

pub fn grid_target(name: impl Into<String>, grid: GridData) -> TargetSpec {
    let d = grid.dim();
    let grid = Arc::new(grid);
    TargetSpec {
        name: name.into(),
        kind: TargetKind::Grid,
        function: TargetFunction::new(d, move |x| grid.interpolate(x)),
    }
}

pub fn load_target(path: &Path) -> Result<TargetSpec> {
    let text = std::fs::read_to_string(path)?;
    let grid = parse_grid(&text)?;
    Ok(grid_target(format!("file:{}", path.display()), grid))
}
