//! Integration over unions of axis-aligned product sets.
//!
//! Every region the construction integrates over (single cubes, the union of
//! interior cubes `U_l`, the transition region `Omega_l`, translated overlaps
//! `E_h`) is a finite disjoint union of products of 1-d interval unions. The
//! tensor-grid scheme places `m` midpoint nodes in every interval of every
//! axis, so integrands that are smooth on each cell are integrated without
//! straddling a cell boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this many nodes the tensor grid is summed on the calling thread.
const PARALLEL_THRESHOLD: usize = 1 << 14;

/// A finite union of disjoint closed intervals on the real line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Self {
        let intervals = intervals.into_iter().filter(|(a, b)| b > a).collect();
        Self { intervals }
    }

    pub fn single(a: f64, b: f64) -> Self {
        Self::new(vec![(a, b)])
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub(crate) fn nodes(&self, per_interval: usize) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(self.intervals.len() * per_interval);
        let mut ws = Vec::with_capacity(self.intervals.len() * per_interval);
        for &(a, b) in &self.intervals {
            let h = (b - a) / per_interval as f64;
            for i in 0..per_interval {
                xs.push(a + (i as f64 + 0.5) * h);
                ws.push(h);
            }
        }
        (xs, ws)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = self.measure();
        let mut target = rng.gen::<f64>() * total;
        for &(a, b) in &self.intervals {
            let len = b - a;
            if target < len {
                return a + target;
            }
            target -= len;
        }
        let (a, b) = *self
            .intervals
            .last()
            .expect("sampling an empty interval set");
        a + rng.gen::<f64>() * (b - a)
    }
}

/// Cartesian product of one interval set per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSet {
    pub axes: Vec<IntervalSet>,
}

impl ProductSet {
    pub fn new(axes: Vec<IntervalSet>) -> Self {
        Self { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn measure(&self) -> f64 {
        self.axes.iter().map(IntervalSet::measure).product()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.iter().any(IntervalSet::is_empty)
    }
}

impl From<&Cuboid> for ProductSet {
    fn from(c: &Cuboid) -> Self {
        ProductSet::new(
            c.lo.iter()
                .zip(&c.hi)
                .map(|(&a, &b)| IntervalSet::single(a, b))
                .collect(),
        )
    }
}

/// Axis-aligned box `prod [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cuboid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Domain(format!(
                "box corners have dimensions {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::Domain("box corners must be finite".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(d: usize) -> Self {
        Self {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
        }
    }

    /// Cube `a + [0, s]^d`.
    pub fn cube(corner: Vec<f64>, side: f64) -> Result<Self> {
        let hi = corner.iter().map(|a| a + side).collect();
        Self::new(corner, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a).max(0.0))
            .product()
    }

    pub fn sides(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn max_side(&self) -> f64 {
        self.sides().into_iter().fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Intersection with `self - h`, i.e. the points `x` with `x, x + h` both in the box.
    pub fn overlap_with_shift(&self, h: &[f64]) -> Cuboid {
        let lo = self
            .lo
            .iter()
            .zip(h)
            .map(|(a, s)| a + (-s).max(0.0))
            .collect();
        let hi = self.hi.iter().zip(h).map(|(b, s)| b - s.max(0.0)).collect();
        Cuboid { lo, hi }
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| b <= a)
    }
}

/// Quadrature scheme used for cell averages and norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Scheme {
    /// Composite midpoint rule with `points_per_axis` nodes in every interval of every axis.
    TensorGrid { points_per_axis: usize },
    /// Uniform sampling with `samples` points per product set.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAverageEngine {
    pub scheme: Scheme,
}

impl Default for CellAverageEngine {
    fn default() -> Self {
        Self::tensor_grid(8)
    }
}

impl CellAverageEngine {
    pub fn tensor_grid(points_per_axis: usize) -> Self {
        Self {
            scheme: Scheme::TensorGrid {
                points_per_axis: points_per_axis.max(1),
            },
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            scheme: Scheme::MonteCarlo {
                samples: samples.max(1),
                seed,
            },
        }
    }

    /// Midpoint grid with 8 points per axis per cell up to d = 3, 4096-sample Monte Carlo beyond.
    pub fn default_for_dim(d: usize, seed: u64) -> Self {
        if d <= 3 {
            Self::tensor_grid(8)
        } else {
            Self::monte_carlo(4096, seed)
        }
    }

    pub fn describe(&self) -> String {
        match self.scheme {
            Scheme::TensorGrid { points_per_axis } => format!("tensor-grid:{points_per_axis}"),
            Scheme::MonteCarlo { samples, seed } => format!("monte-carlo:{samples}:seed={seed}"),
        }
    }

    /// Number of integrand evaluations spent on `set`.
    pub fn node_count(&self, set: &ProductSet) -> usize {
        match self.scheme {
            Scheme::TensorGrid { points_per_axis } => set
                .axes
                .iter()
                .map(|a| a.intervals.len() * points_per_axis)
                .product(),
            Scheme::MonteCarlo { samples, .. } => samples,
        }
    }

    /// Integral of `g` over `set`. `stream` selects an independent random
    /// stream for the Monte Carlo scheme and is ignored by the tensor grid.
    pub fn integrate<G>(&self, set: &ProductSet, stream: u64, g: &G) -> f64
    where
        G: Fn(&[f64]) -> f64 + Sync + ?Sized,
    {
        if set.is_empty() {
            return 0.0;
        }
        match self.scheme {
            Scheme::TensorGrid { points_per_axis } => tensor_sum(set, points_per_axis, g),
            Scheme::MonteCarlo { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                let mut x = vec![0.0; set.dim()];
                let mut acc = 0.0;
                for _ in 0..samples {
                    for (xi, axis) in x.iter_mut().zip(&set.axes) {
                        *xi = axis.sample(&mut rng);
                    }
                    acc += g(&x);
                }
                set.measure() * acc / samples as f64
            }
        }
    }

    pub fn integrate_region<G>(&self, region: &[ProductSet], g: &G) -> f64
    where
        G: Fn(&[f64]) -> f64 + Sync + ?Sized,
    {
        region
            .iter()
            .enumerate()
            .map(|(i, s)| self.integrate(s, i as u64, g))
            .sum()
    }

    /// Average of `g` over `cube`.
    pub fn average<G>(&self, cube: &Cuboid, stream: u64, g: &G) -> Result<f64>
    where
        G: Fn(&[f64]) -> f64 + Sync + ?Sized,
    {
        let vol = cube.volume();
        if cube.is_degenerate() || vol <= 0.0 {
            return Err(Error::Domain(format!(
                "cannot average over a zero-volume box {:?}..{:?}",
                cube.lo, cube.hi
            )));
        }
        let set = ProductSet::from(cube);
        Ok(self.integrate(&set, stream, g) / vol)
    }
}

/// Largest `g` over the midpoint nodes of `set` (`per_interval` per interval per axis).
pub fn grid_max<G>(set: &ProductSet, per_interval: usize, g: &G) -> f64
where
    G: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    if set.is_empty() {
        return f64::NEG_INFINITY;
    }
    let grids: Vec<Vec<f64>> = set
        .axes
        .iter()
        .map(|a| a.nodes(per_interval.max(1)).0)
        .collect();
    let (first, rest) = grids.split_first().unwrap();
    let slab = |x0: f64| -> f64 {
        let mut x = vec![0.0; grids.len()];
        x[0] = x0;
        let mut idx = vec![0usize; rest.len()];
        let mut best = f64::NEG_INFINITY;
        loop {
            for (a, (&j, xs)) in idx.iter().zip(rest).enumerate() {
                x[a + 1] = xs[j];
            }
            best = best.max(g(&x));
            let mut a = 0;
            loop {
                if a == rest.len() {
                    return best;
                }
                idx[a] += 1;
                if idx[a] < rest[a].len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    };
    let per_slab: Vec<f64> =
        if first.len() * rest.iter().map(Vec::len).product::<usize>() >= PARALLEL_THRESHOLD {
            first.par_iter().map(|&x0| slab(x0)).collect()
        } else {
            first.iter().map(|&x0| slab(x0)).collect()
        };
    per_slab.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn tensor_sum<G>(set: &ProductSet, m: usize, g: &G) -> f64
where
    G: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let grids: Vec<(Vec<f64>, Vec<f64>)> = set.axes.iter().map(|a| a.nodes(m)).collect();
    let total: usize = grids.iter().map(|(x, _)| x.len()).product();
    let (first_x, first_w) = &grids[0];
    let rest = &grids[1..];

    let slab = |i: usize| -> f64 {
        let d = grids.len();
        let mut x = vec![0.0; d];
        x[0] = first_x[i];
        let mut idx = vec![0usize; rest.len()];
        let mut acc = 0.0;
        loop {
            let mut w = first_w[i];
            for (a, (&j, (xs, ws))) in idx.iter().zip(rest).enumerate() {
                x[a + 1] = xs[j];
                w *= ws[j];
            }
            acc += w * g(&x);
            // odometer over the remaining axes
            let mut axis = rest.len();
            loop {
                if axis == 0 {
                    return acc;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < rest[axis].0.len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    };

    if total >= PARALLEL_THRESHOLD {
        let partial: Vec<f64> = (0..first_x.len()).into_par_iter().map(slab).collect();
        partial.iter().sum()
    } else {
        (0..first_x.len()).map(slab).sum()
    }
}
