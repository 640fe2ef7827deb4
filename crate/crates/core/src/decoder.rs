//! Cell-value decoders: the two-sine map `k -> u sin(v sin(k w))` and an exact
//! lookup table.
//!
//! The fitter fixes `u = max |y_k|`, samples `w`, and searches integers `v = n`
//! with `|n| <= n_max` such that every phase `n sin(k w)` lands in the arc where
//! `|u sin(.) - y_k| < eps`. The search walks the most restrictive constraint by
//! baby-step/giant-step over `n` and filters the rest by phase arcs; the
//! returned certificate is always a direct re-evaluation of the formula.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate `w` is rejected when `|sin(j w)|` drops below this for some `j <= K`.
pub const DEPENDENCE_GUARD: f64 = 1e-6;

/// Phase slack (in turns) used by the arc filter before the direct check.
const PHASE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineDecoder {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub achieved_eps: f64,
    #[serde(rename = "K")]
    pub k_count: u64,
}

impl SineDecoder {
    pub fn zero(k_count: u64) -> Self {
        Self {
            u: 0.0,
            v: 0.0,
            w: 0.0,
            achieved_eps: 0.0,
            k_count,
        }
    }

    #[inline]
    pub fn eval(&self, k: f64) -> f64 {
        self.u * (self.v * (k * self.w).sin()).sin()
    }

    pub fn decode(&self, k: u64) -> Result<f64> {
        check_index(k, self.k_count)?;
        Ok(self.eval(k as f64))
    }

    /// Largest `|decode(k) - y_k|`.
    pub fn max_error(&self, y: &[f64]) -> f64 {
        max_error(self.u, self.v, self.w, y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableDecoder {
    pub values: Vec<f64>,
}

impl TableDecoder {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn decode(&self, k: u64) -> Result<f64> {
        check_index(k, self.values.len() as u64)?;
        Ok(self.values[(k - 1) as usize])
    }

    /// Piecewise-linear extension to real `k`, constant outside `[1, K]`.
    /// Codes within `1e-9` of an integer read that entry exactly.
    pub fn eval(&self, k: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        let r = k.round();
        let k = if (k - r).abs() <= 1e-9 { r } else { k };
        let t = (k - 1.0).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        if frac == 0.0 || i + 1 == n {
            self.values[i]
        } else {
            self.values[i] + frac * (self.values[i + 1] - self.values[i])
        }
    }
}

fn check_index(k: u64, count: u64) -> Result<()> {
    if k == 0 || k > count {
        Err(Error::Range(format!("cell index {k} outside 1..={count}")))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Decoder {
    Sine(SineDecoder),
    Table(TableDecoder),
}

impl Decoder {
    pub fn decode(&self, k: u64) -> Result<f64> {
        match self {
            Decoder::Sine(s) => s.decode(k),
            Decoder::Table(t) => t.decode(k),
        }
    }

    /// Evaluation at a real-valued code, used on transition regions.
    pub fn eval(&self, k: f64) -> f64 {
        match self {
            Decoder::Sine(s) => s.eval(k),
            Decoder::Table(t) => t.eval(k),
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            Decoder::Sine(s) => s.k_count,
            Decoder::Table(t) => t.values.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Certified fit error; zero for tables.
    pub fn eps(&self) -> f64 {
        match self {
            Decoder::Sine(s) => s.achieved_eps,
            Decoder::Table(_) => 0.0,
        }
    }

    /// Bound on `|eval|` over all real codes.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Decoder::Sine(s) => s.u.abs(),
            Decoder::Table(t) => t.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn as_sine(&self) -> Option<&SineDecoder> {
        match self {
            Decoder::Sine(s) => Some(s),
            Decoder::Table(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitBudget {
    pub n_max: u64,
    pub w_candidates: usize,
    pub seed: u64,
}

impl Default for FitBudget {
    fn default() -> Self {
        Self {
            n_max: 10_000_000,
            w_candidates: 256,
            seed: 0x6d67_6e65_7400_0001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    /// Best parameters seen; `best.achieved_eps` is its re-evaluated error.
    pub best: SineDecoder,
    pub requested_eps: f64,
    pub w_tried: usize,
    pub w_rejected: usize,
}

fn max_error(u: f64, v: f64, w: f64, y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &yk)| (u * (v * ((i + 1) as f64 * w).sin()).sin() - yk).abs())
        .fold(0.0, f64::max)
}

/// Arc `[start, start + len)` on the circle of circumference 1.
#[derive(Clone, Copy, Debug)]
struct Arc {
    start: f64,
    len: f64,
}

impl Arc {
    fn from_radians(a: f64, b: f64) -> Self {
        Self {
            start: (a / TAU).rem_euclid(1.0),
            len: (b - a) / TAU,
        }
    }

    #[inline]
    fn contains(&self, x: f64) -> bool {
        (x - self.start + PHASE_SLACK).rem_euclid(1.0) < self.len + 2.0 * PHASE_SLACK
    }
}

/// Phases `theta / 2pi` with `|u sin(theta) - y| < eps`; `None` when every phase qualifies.
fn acceptance_arcs(y: f64, u: f64, eps: f64) -> Option<Vec<Arc>> {
    let a = (y - eps) / u;
    let b = (y + eps) / u;
    match (a <= -1.0, b >= 1.0) {
        (true, true) => None,
        (false, true) => {
            let s = a.asin();
            Some(vec![Arc::from_radians(s, PI - s)])
        }
        (true, false) => {
            let s = b.asin();
            Some(vec![Arc::from_radians(PI - s, TAU + s)])
        }
        (false, false) => {
            let (sa, sb) = (a.asin(), b.asin());
            Some(vec![
                Arc::from_radians(sa, sb),
                Arc::from_radians(PI - sb, PI - sa),
            ])
        }
    }
}

struct Constraint {
    alpha: f64,
    arcs: Vec<Arc>,
    measure: f64,
}

impl Constraint {
    #[inline]
    fn admits(&self, n: i64) -> bool {
        let x = (n as f64 * self.alpha).rem_euclid(1.0);
        self.arcs.iter().any(|a| a.contains(x))
    }
}

enum WOutcome {
    Rejected,
    Found(SineDecoder),
    Best(SineDecoder),
}

/// Fit `u sin(v sin(k w)) ~ y_k` for `k = 1..=K` to within `eps`.
///
/// Returns [`Error::DecoderFit`] carrying the best parameters when the budget is exhausted.
pub fn fit_two_sine(y: &[f64], eps: f64, budget: &FitBudget) -> Result<SineDecoder> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("nothing to fit: K = 0".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite cell value".into()));
    }
    let k_count = y.len() as u64;
    let u = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if u == 0.0 {
        return Ok(SineDecoder::zero(k_count));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let ws: Vec<f64> = (0..budget.w_candidates)
        .map(|_| rng.gen_range(0.0..TAU))
        .collect();
    let admissible = |w: f64| (1..=k_count).all(|j| (j as f64 * w).sin().abs() >= DEPENDENCE_GUARD);

    let fallback = SineDecoder {
        u,
        v: 0.0,
        w: 0.0,
        achieved_eps: max_error(u, 0.0, 0.0, y),
        k_count,
    };

    if k_count == 1 {
        // one equation: v sin(w) = arcsin(y_1 / u); prefer a well-conditioned w
        let xi = (y[0] / u).clamp(-1.0, 1.0).asin();
        let mut pick = None;
        for &w in &ws {
            if admissible(w) && (pick.is_none() || w.sin().abs() >= 0.5) {
                pick = Some(w);
                if w.sin().abs() >= 0.5 {
                    break;
                }
            }
        }
        if let Some(w) = pick {
            let v = xi / w.sin();
            let dec = SineDecoder {
                u,
                v,
                w,
                achieved_eps: max_error(u, v, w, y),
                k_count,
            };
            if dec.achieved_eps < eps {
                return Ok(dec);
            }
            return Err(Error::DecoderFit(Box::new(FitFailure {
                best: dec,
                requested_eps: eps,
                w_tried: ws.len(),
                w_rejected: 0,
            })));
        }
    }

    let chunk = (rayon::current_num_threads() * 2).max(1);
    let mut best = fallback;
    let mut rejected = 0usize;
    for block in ws.chunks(chunk) {
        let outcomes: Vec<WOutcome> = block
            .par_iter()
            .map(|&w| {
                if !admissible(w) {
                    WOutcome::Rejected
                } else {
                    search_w(y, u, w, eps, budget.n_max)
                }
            })
            .collect();
        for o in outcomes {
            match o {
                WOutcome::Rejected => rejected += 1,
                WOutcome::Found(dec) => return Ok(dec),
                WOutcome::Best(dec) => {
                    if dec.achieved_eps < best.achieved_eps {
                        best = dec;
                    }
                }
            }
        }
    }
    Err(Error::DecoderFit(Box::new(FitFailure {
        best,
        requested_eps: eps,
        w_tried: ws.len(),
        w_rejected: rejected,
    })))
}

fn search_w(y: &[f64], u: f64, w: f64, eps: f64, n_max: u64) -> WOutcome {
    let k_count = y.len() as u64;
    let mut constraints: Vec<Constraint> = Vec::with_capacity(y.len());
    for (i, &yk) in y.iter().enumerate() {
        if let Some(arcs) = acceptance_arcs(yk, u, eps) {
            let alpha = ((i + 1) as f64 * w).sin() / TAU;
            let measure = arcs.iter().map(|a| a.len).sum();
            constraints.push(Constraint {
                alpha,
                arcs,
                measure,
            });
        }
    }
    let certify = |n: i64| {
        let v = n as f64;
        SineDecoder {
            u,
            v,
            w,
            achieved_eps: max_error(u, v, w, y),
            k_count,
        }
    };
    if constraints.is_empty() {
        let dec = certify(0);
        return if dec.achieved_eps < eps {
            WOutcome::Found(dec)
        } else {
            WOutcome::Best(dec)
        };
    }
    constraints.sort_by(|a, b| a.measure.total_cmp(&b.measure));
    let (lead, rest) = constraints.split_first().unwrap();

    let n_max = n_max as i64;
    let b = ((2.0 * n_max as f64).sqrt().ceil() as i64).max(1);
    let mut baby: Vec<(f64, i64)> = (0..b)
        .map(|r| ((r as f64 * lead.alpha).rem_euclid(1.0), r))
        .collect();
    baby.sort_by(|x, y| x.0.total_cmp(&y.0));
    let keys: Vec<f64> = baby.iter().map(|e| e.0).collect();
    let giant = (b as f64 * lead.alpha).rem_euclid(1.0);

    let mut best_count = 0usize;
    let mut best = certify(0);
    let q_lo = (-n_max).div_euclid(b);
    let q_hi = n_max.div_euclid(b);
    let mut hits: Vec<i64> = Vec::new();
    let reach = q_lo.abs().max(q_hi);
    // blocks ordered by distance from n = 0
    let order = (0..=reach).flat_map(|m| if m == 0 { vec![0] } else { vec![-m, m] });
    for q in order {
        if q < q_lo || q > q_hi {
            continue;
        }
        let shift = (q as f64 * giant).rem_euclid(1.0);
        hits.clear();
        for arc in &lead.arcs {
            let lo = (arc.start - shift - PHASE_SLACK).rem_euclid(1.0);
            let len = arc.len + 2.0 * PHASE_SLACK;
            collect_range(&keys, lo, len, |idx| hits.push(q * b + baby[idx].1));
        }
        hits.sort_unstable_by_key(|n| (n.abs(), *n));
        for &n in &hits {
            if n.abs() > n_max {
                continue;
            }
            let passed = rest.iter().take_while(|c| c.admits(n)).count();
            if passed == rest.len() {
                let dec = certify(n);
                if dec.achieved_eps < eps {
                    return WOutcome::Found(dec);
                }
            }
            if passed >= best_count {
                let dec = certify(n);
                if passed > best_count || dec.achieved_eps < best.achieved_eps {
                    best_count = passed;
                    best = dec;
                }
            }
        }
    }
    WOutcome::Best(best)
}

/// Visit indices of sorted `keys` in the circular window `[lo, lo + len)`.
fn collect_range(keys: &[f64], lo: f64, len: f64, mut visit: impl FnMut(usize)) {
    if len >= 1.0 {
        (0..keys.len()).for_each(visit);
        return;
    }
    let hi = lo + len;
    let first = keys.partition_point(|&k| k < lo);
    let last = keys.partition_point(|&k| k < hi.min(1.0));
    (first..last).for_each(&mut visit);
    if hi > 1.0 {
        let wrap = keys.partition_point(|&k| k < hi - 1.0);
        (0..wrap.min(first)).for_each(&mut visit);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub v_abs: f64,
    /// `max_k |v sin(k w)|`, the argument fed to the outer sine.
    pub max_outer_argument: f64,
    /// Absolute rounding error of that argument, about `max_outer_argument * machine eps`.
    pub argument_ulp_error: f64,
    pub flagged: bool,
}

/// Argument rounding above this level is flagged.
pub const CONDITIONING_FLAG: f64 = 1e-8;

pub fn conditioning_report(dec: &SineDecoder) -> ConditioningReport {
    let max_arg = (1..=dec.k_count)
        .map(|k| (dec.v * (k as f64 * dec.w).sin()).abs())
        .fold(0.0, f64::max);
    let ulp = max_arg * f64::EPSILON;
    ConditioningReport {
        v_abs: dec.v.abs(),
        max_outer_argument: max_arg,
        argument_ulp_error: ulp,
        flagged: ulp > CONDITIONING_FLAG,
    }
}
