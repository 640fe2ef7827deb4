//! Multiscale partition of `[0,1]^d`.
//!
//! At level `l` each axis is split into the closed intervals
//! `I_{l,j} = [j / N^l, (j+1) / N^l - delta]`, `j = 0..N^l`. Products of these
//! intervals are the interior cubes `Q_{l,beta}`; what is left over is the
//! transition region `Omega_l`, a union of slabs of width `delta`.
//!
//! Cube labels are integers `k = 1 + sum_i N^{(i-1) l} beta_i`, computed in
//! checked 64-bit arithmetic. Configurations with `N^{dL} > 2^62` are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{CellAverageEngine, Cuboid, IntervalSet, ProductSet};
use crate::targets::TargetFunction;

/// Smallest admissible gap; the encoder's ramp slope is `1 / delta`.
pub const MIN_DELTA: f64 = 1e-12;

const MAX_CELLS: u64 = 1 << 62;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub depth: usize,
    pub delta: f64,
}

impl PartitionConfig {
    pub fn new(d: usize, n: u64, depth: usize, delta: f64) -> Result<Self> {
        let cfg = Self { d, n, depth, delta };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses the default gap `1e-3 * N^{-L}`.
    pub fn with_default_delta(d: usize, n: u64, depth: usize) -> Result<Self> {
        check_shape(d, n, depth)?;
        Self::new(d, n, depth, default_delta(n, depth))
    }

    pub fn validate(&self) -> Result<()> {
        check_shape(self.d, self.n, self.depth)?;
        let upper = 0.5 / self.n.pow(self.depth as u32) as f64;
        if !(self.delta.is_finite() && self.delta >= MIN_DELTA && self.delta < upper) {
            return Err(Error::Config(format!(
                "delta must lie in [{MIN_DELTA:e}, 1/(2 N^L)) = [{MIN_DELTA:e}, {upper:e}), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// `N^level` as an integer.
    pub fn scale(&self, level: usize) -> u64 {
        self.n.pow(level as u32)
    }

    /// Number of interior cubes at `level`, `N^{d level}`.
    pub fn cube_count(&self, level: usize) -> u64 {
        self.scale(level).pow(self.d as u32)
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level > self.depth {
            return Err(Error::Range(format!(
                "level {level} exceeds terminal depth {}",
                self.depth
            )));
        }
        Ok(())
    }

    pub fn grid_level(&self, level: usize) -> Result<GridLevel> {
        self.check_level(level)?;
        Ok(GridLevel {
            level,
            side: 1.0 / self.scale(level) as f64 - self.delta,
            cube_count: self.cube_count(level),
        })
    }

    /// Endpoints of `I_{level,j}`.
    #[inline]
    pub fn interval(&self, level: usize, j: u64) -> (f64, f64) {
        let s = self.scale(level) as f64;
        (j as f64 / s, (j + 1) as f64 / s - self.delta)
    }

    /// Index `j` with `x` in `I_{level,j}`, or `None` if `x` lies in a gap.
    pub fn locate_coordinate(&self, x: f64, level: usize) -> Option<u64> {
        let scale = self.scale(level);
        let s = scale as f64;
        let mut j = ((x * s).floor().max(0.0) as u64).min(scale - 1);
        // floor(x * s) can undershoot by one when x = j / s is not representable
        if j + 1 < scale && x >= (j + 1) as f64 / s {
            j += 1;
        }
        let (lo, hi) = self.interval(level, j);
        (x >= lo && x <= hi).then_some(j)
    }

    /// The cube containing `x`, or the transition marker.
    pub fn locate_cell(&self, x: &[f64], level: usize) -> Result<Location> {
        self.check_level(level)?;
        if x.len() != self.d {
            return Err(Error::Domain(format!(
                "point has dimension {} but the partition has dimension {}",
                x.len(),
                self.d
            )));
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("point {x:?} is outside [0,1]^d")));
        }
        let mut beta = Vec::with_capacity(self.d);
        for &xi in x {
            match self.locate_coordinate(xi, level) {
                Some(j) => beta.push(j),
                None => return Ok(Location::Transition),
            }
        }
        let k = self.label_to_index(&beta, level)?;
        Ok(Location::Interior(CellLabel { beta, k }))
    }

    /// `k = 1 + sum_i N^{(i-1) level} beta_i`.
    pub fn label_to_index(&self, beta: &[u64], level: usize) -> Result<u64> {
        self.check_level(level)?;
        if beta.len() != self.d {
            return Err(Error::Range(format!(
                "multi-index has {} components, expected {}",
                beta.len(),
                self.d
            )));
        }
        let scale = self.scale(level);
        let mut k = 0u64;
        let mut place = 1u64;
        for &b in beta {
            if b >= scale {
                return Err(Error::Range(format!(
                    "component {b} outside [0, {}]",
                    scale - 1
                )));
            }
            k += place * b;
            place = place.saturating_mul(scale);
        }
        Ok(k + 1)
    }

    pub fn index_to_label(&self, k: u64, level: usize) -> Result<Vec<u64>> {
        self.check_level(level)?;
        let count = self.cube_count(level);
        if k < 1 || k > count {
            return Err(Error::Range(format!("label {k} outside [1, {count}]")));
        }
        let scale = self.scale(level);
        let mut rest = k - 1;
        Ok((0..self.d)
            .map(|_| {
                let b = rest % scale;
                rest /= scale;
                b
            })
            .collect())
    }

    /// `|Omega_level| = 1 - (1 - N^level delta)^d`.
    pub fn transition_mass(&self, level: usize) -> f64 {
        1.0 - (1.0 - self.scale(level) as f64 * self.delta).powi(self.d as i32)
    }

    pub fn cube(&self, level: usize, beta: &[u64]) -> Cuboid {
        let (lo, hi): (Vec<f64>, Vec<f64>) = beta.iter().map(|&b| self.interval(level, b)).unzip();
        Cuboid { lo, hi }
    }

    /// Union of the level intervals on one axis.
    pub fn interior_axis(&self, level: usize) -> IntervalSet {
        IntervalSet::new(
            (0..self.scale(level))
                .map(|j| self.interval(level, j))
                .collect(),
        )
    }

    /// The gaps `((j+1)/N^l - delta, (j+1)/N^l)` on one axis.
    pub fn gap_axis(&self, level: usize) -> IntervalSet {
        IntervalSet::new(
            (0..self.scale(level))
                .map(|j| {
                    let (_, hi) = self.interval(level, j);
                    (hi, (j + 1) as f64 / self.scale(level) as f64)
                })
                .collect(),
        )
    }

    /// Intervals and gaps together, in order; covers `[0,1]`.
    pub fn full_axis(&self, level: usize) -> IntervalSet {
        let mut v = Vec::with_capacity(2 * self.scale(level) as usize);
        for (a, b) in self
            .interior_axis(level)
            .intervals
            .into_iter()
            .zip(self.gap_axis(level).intervals)
        {
            v.push(a);
            v.push(b);
        }
        IntervalSet::new(v)
    }

    /// `U_level`, the union of interior cubes.
    pub fn interior_region(&self, level: usize) -> Vec<ProductSet> {
        vec![ProductSet::new(vec![self.interior_axis(level); self.d])]
    }

    /// `Omega_level` as `d` disjoint products: the first `i` axes interior,
    /// axis `i` in a gap, the rest unrestricted.
    pub fn transition_region(&self, level: usize) -> Vec<ProductSet> {
        let good = self.interior_axis(level);
        let gap = self.gap_axis(level);
        let full = self.full_axis(level);
        (0..self.d)
            .map(|i| {
                let axes = (0..self.d)
                    .map(|a| match a.cmp(&i) {
                        std::cmp::Ordering::Less => good.clone(),
                        std::cmp::Ordering::Equal => gap.clone(),
                        std::cmp::Ordering::Greater => full.clone(),
                    })
                    .collect();
                ProductSet::new(axes)
            })
            .collect()
    }

    /// `[0,1]^d` split along the level partition (interior part first).
    pub fn partitioned_unit_cube(&self, level: usize) -> Vec<ProductSet> {
        let mut r = self.interior_region(level);
        r.extend(self.transition_region(level));
        r
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "d = {}\nN = {}\nL = {}\ndelta = {:?}\n",
            self.d, self.n, self.depth, self.delta
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv_string())?;
        Ok(())
    }
}

impl FromStr for PartitionConfig {
    type Err = Error;

    /// Plain `key = value` lines with keys `d`, `N`, `L`, `delta`; `#` starts a comment.
    fn from_str(s: &str) -> Result<Self> {
        let (mut d, mut n, mut depth, mut delta) = (None, None, None, None);
        for (ln, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse {
                line: ln + 1,
                offset: 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || perr(format!("bad value `{value}` for `{key}`"));
            match key {
                "d" => d = Some(value.parse::<usize>().map_err(|_| bad())?),
                "N" => n = Some(value.parse::<u64>().map_err(|_| bad())?),
                "L" => depth = Some(value.parse::<usize>().map_err(|_| bad())?),
                "delta" => delta = Some(value.parse::<f64>().map_err(|_| bad())?),
                _ => return Err(perr(format!("unknown key `{key}`"))),
            }
        }
        let missing = |k: &str| Error::Config(format!("missing key `{k}`"));
        let d = d.ok_or_else(|| missing("d"))?;
        let n = n.ok_or_else(|| missing("N"))?;
        let depth = depth.ok_or_else(|| missing("L"))?;
        match delta {
            Some(delta) => Self::new(d, n, depth, delta),
            None => Self::with_default_delta(d, n, depth),
        }
    }
}

impl fmt::Display for PartitionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d={} N={} L={} delta={:e}",
            self.d, self.n, self.depth, self.delta
        )
    }
}

fn check_shape(d: usize, n: u64, depth: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::Config("dimension d must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::Config("refinement base N must be at least 2".into()));
    }
    let exponent = (d as u32)
        .checked_mul(depth as u32)
        .ok_or_else(|| Error::Config("d * L overflows".into()))?;
    match n.checked_pow(exponent) {
        Some(c) if c <= MAX_CELLS => Ok(()),
        _ => Err(Error::Config(format!(
            "N^(dL) = {n}^{exponent} exceeds 2^62 cells"
        ))),
    }
}

pub fn default_delta(n: u64, depth: usize) -> f64 {
    1e-3 / (n as f64).powi(depth as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLevel {
    pub level: usize,
    /// `N^{-level} - delta`
    pub side: f64,
    pub cube_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellLabel {
    pub beta: Vec<u64>,
    pub k: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Location {
    Interior(CellLabel),
    Transition,
}

impl Location {
    pub fn label(&self) -> Option<&CellLabel> {
        match self {
            Location::Interior(c) => Some(c),
            Location::Transition => None,
        }
    }
}

/// Outcome of the gap selection loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    pub delta: f64,
    pub eta: f64,
    /// `eta - max_l lhs_l`, nonnegative on success.
    pub margin: f64,
    pub trials: usize,
    /// `||f||_{L^p(Omega_l)} + (L+1) M |Omega_l|^{1/p}` for `l = 0..=L`.
    pub lhs: Vec<f64>,
    pub m_bound: f64,
}

/// `M = 2^{d+2} (d+1) N^{dL} ||f||_p`, the sup bound on every correction term.
pub fn sup_bound(d: usize, n: u64, depth: usize, f_norm: f64) -> f64 {
    2f64.powi(d as i32 + 2) * (d as f64 + 1.0) * (n as f64).powi((d * depth) as i32) * f_norm
}

/// Largest gap from `1/(4N^L), 1/(40N^L), ...` with
/// `||f||_{L^p(Omega_l)} + (L+1) M |Omega_l|^{1/p} <= eta` at every level.
///
/// The trial sequence stops at [`MIN_DELTA`].
pub fn choose_delta(
    f: &TargetFunction,
    d: usize,
    n: u64,
    depth: usize,
    p: f64,
    eta: f64,
    engine: &CellAverageEngine,
) -> Result<DeltaChoice> {
    check_shape(d, n, depth)?;
    if f.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "target dimension {} differs from partition dimension {d}",
            f.dim()
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eta must be strictly positive, got {eta}"
        )));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p must lie in [1, inf), got {p}")));
    }
    let abs_p = |x: &[f64]| f.eval(x).abs().powf(p);
    let f_norm = engine
        .integrate(&ProductSet::from(&Cuboid::unit(d)), 0, &abs_p)
        .powf(1.0 / p);
    let m = sup_bound(d, n, depth, f_norm);

    let mut delta = 0.25 / (n as f64).powi(depth as i32);
    let mut trials = 0;
    let mut last = (delta, f64::NEG_INFINITY);
    while delta >= MIN_DELTA {
        trials += 1;
        let cfg = PartitionConfig { d, n, depth, delta };
        let lhs: Vec<f64> = (0..=depth)
            .map(|l| {
                let on_gap = engine
                    .integrate_region(&cfg.transition_region(l), &abs_p)
                    .powf(1.0 / p);
                on_gap + (depth as f64 + 1.0) * m * cfg.transition_mass(l).powf(1.0 / p)
            })
            .collect();
        let worst = lhs.iter().cloned().fold(0.0, f64::max);
        let margin = eta - worst;
        if margin >= 0.0 {
            return Ok(DeltaChoice {
                delta,
                eta,
                margin,
                trials,
                lhs,
                m_bound: m,
            });
        }
        last = (delta, margin);
        delta /= 10.0;
    }
    Err(Error::DeltaExhausted {
        smallest_delta: last.0,
        residual_margin: last.1,
    })
}
