//! L^p norms, the sampled L^p modulus of continuity, layer-wise bound
//! reports, and checks of the oscillation inequality around cell averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::Decoder;
use crate::error::{Error, Result};
use crate::geometry::{choose_delta, default_delta, DeltaChoice, PartitionConfig};
use crate::multigrade::{DecoderMode, MultigradeNet};
use crate::quadrature::{grid_max, CellAverageEngine, Cuboid, ProductSet, Scheme};
use crate::targets::TargetFunction;

/// Version tag written in the header of every CSV table.
pub const SCHEMA_VERSION: u32 = 1;

/// Relative quadrature budget added to every bound check.
pub const QUADRATURE_RTOL: f64 = 1e-3;

/// Factor applied to the sampled modulus in modulus mode.
pub const MODULUS_HEADROOM: f64 = 1.1;

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    Ok(())
}

/// `(int_region |g|^p)^{1/p}`.
pub fn lp_norm<G>(g: &G, region: &[ProductSet], p: f64, engine: &CellAverageEngine) -> Result<f64>
where
    G: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    check_p(p)?;
    if !p.is_finite() {
        return Err(Error::Domain(
            "lp_norm takes finite p; use grid_max for the sup norm".into(),
        ));
    }
    if region.iter().map(ProductSet::measure).sum::<f64>() <= 0.0 {
        return Err(Error::Domain("region has zero volume".into()));
    }
    let abs_p = |x: &[f64]| g(x).abs().powf(p);
    Ok(engine.integrate_region(region, &abs_p).powf(1.0 / p))
}

/// Measurement grid for norms of `f - Phi_l`: 32, 16, 8 midpoint nodes per
/// cell axis for `d = 1, 2, 3`, Monte Carlo beyond.
pub fn measurement_engine(d: usize, seed: u64) -> CellAverageEngine {
    match d {
        1 => CellAverageEngine::tensor_grid(32),
        2 => CellAverageEngine::tensor_grid(16),
        3 => CellAverageEngine::tensor_grid(8),
        _ => CellAverageEngine::monte_carlo(1 << 16, seed),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Random unit directions added to `+-e_i`.
    pub direction_count: usize,
    /// Magnitudes `t i / M`, `i = 1..=M`.
    pub magnitude_count: usize,
    pub seed: u64,
    /// Midpoint nodes per axis on each overlap `E_h`.
    pub points_per_axis: usize,
}

impl SamplingPlan {
    pub fn default_for_dim(d: usize) -> Self {
        let points_per_axis = match d {
            1 => 4096,
            2 => 128,
            3 => 32,
            _ => 12,
        };
        Self {
            direction_count: 4,
            magnitude_count: 8,
            seed: 7,
            points_per_axis,
        }
    }

    /// Shift vectors for scale `t`, in a fixed order.
    pub fn shifts(&self, d: usize, t: f64) -> Vec<Vec<f64>> {
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(2 * d + self.direction_count);
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                dirs.push(e);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.direction_count {
            dirs.push(unit_vector(&mut rng, d));
        }
        let m = self.magnitude_count.max(1);
        let mut out = Vec::with_capacity(dirs.len() * m);
        for dir in &dirs {
            for i in 1..=m {
                let r = t * i as f64 / m as f64;
                out.push(dir.iter().map(|c| c * r).collect());
            }
        }
        out
    }
}

/// Uniform direction on the sphere: a normalized standard normal vector.
fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub t: f64,
    /// `None` stands for `p = inf`, the classical modulus.
    pub p: Option<f64>,
    pub value: f64,
    pub direction_count: usize,
    pub magnitude_count: usize,
    pub integration: String,
    /// The shift attaining `value`.
    pub argmax: Vec<f64>,
    pub is_lower_bound: bool,
}

/// Sampled `omega_{f,p}(t) = sup_{|h| <= t} ||f(. + h) - f||_{L^p(E_h)}`
/// over the target's domain; `p = inf` gives the classical modulus.
pub fn estimate_modulus(
    f: &TargetFunction,
    t: f64,
    p: f64,
    plan: &SamplingPlan,
) -> Result<ModulusEstimate> {
    check_p(p)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale t must be finite and nonnegative, got {t}"
        )));
    }
    let d = f.dim();
    let total_dirs = 2 * d + plan.direction_count;
    let integration = format!("tensor-grid:{} on E_h", plan.points_per_axis);
    let p_field = p.is_finite().then_some(p);
    if t == 0.0 {
        return Ok(ModulusEstimate {
            t,
            p: p_field,
            value: 0.0,
            direction_count: total_dirs,
            magnitude_count: plan.magnitude_count,
            integration,
            argmax: vec![0.0; d],
            is_lower_bound: true,
        });
    }
    let engine = CellAverageEngine::tensor_grid(plan.points_per_axis);
    let shifts = plan.shifts(d, t);
    let values: Vec<f64> = shifts
        .par_iter()
        .map(|h| {
            let e = f.domain.overlap_with_shift(h);
            if e.is_degenerate() {
                return 0.0;
            }
            let set = ProductSet::from(&e);
            let diff = |x: &[f64]| {
                let xh: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + b).collect();
                (f.eval(&xh) - f.eval(x)).abs()
            };
            if p.is_finite() {
                let pw = |x: &[f64]| diff(x).powf(p);
                engine.integrate(&set, 0, &pw).powf(1.0 / p)
            } else {
                grid_max(&set, plan.points_per_axis, &diff).max(0.0)
            }
        })
        .collect();
    let (best_i, value) =
        values.iter().enumerate().fold(
            (0usize, 0.0f64),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    Ok(ModulusEstimate {
        t,
        p: p_field,
        value,
        direction_count: total_dirs,
        magnitude_count: plan.magnitude_count,
        integration,
        argmax: shifts[best_i].clone(),
        is_lower_bound: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BoundMode {
    /// `(2d+1) * headroom * omega_{f,p}(t)` with `omega` sampled.
    Modulus { plan: SamplingPlan, headroom: f64 },
    /// `||f(.+h) - f||_{L^p(E_h)} <= lambda |h|^alpha`: bound `(2d+1) lambda t^alpha`.
    Holder { alpha: f64, lambda: f64 },
    /// `|f(x) - f(y)| <= lambda |x - y|^alpha`: bound `(2d+1) lambda t^alpha |Q|^{1/p}`.
    PointwiseHolder { alpha: f64, lambda: f64 },
}

impl BoundMode {
    pub fn modulus(d: usize) -> Self {
        BoundMode::Modulus {
            plan: SamplingPlan::default_for_dim(d),
            headroom: MODULUS_HEADROOM,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BoundMode::Modulus { .. } => "modulus",
            BoundMode::Holder { .. } => "holder",
            BoundMode::PointwiseHolder { .. } => "pointwise-holder",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub level: usize,
    /// Scale `max side * N^{-level}`.
    pub t: f64,
    pub measured_error: f64,
    /// Sampled `omega_{f,p}(t)` in modulus mode.
    pub omega: Option<f64>,
    pub bound: f64,
    pub tolerance: f64,
    /// `bound + tolerance - measured_error`.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: f64,
    pub mode: String,
    pub domain: Cuboid,
    pub quadrature: String,
    pub quadrature_tol: f64,
    pub sup_f: f64,
    pub rows: Vec<BoundRow>,
    pub all_pass: bool,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn header_comment() -> String {
        format!("# mgnet bound_report schema v{SCHEMA_VERSION}")
    }
}

impl ModulusEstimate {
    pub fn header_comment() -> String {
        format!("# mgnet modulus schema v{SCHEMA_VERSION}")
    }
}

/// Check `||f - Phi_l||_p` against the layer bound at every level.
///
/// `f` lives on the unit cube; `engine` measures the errors.
pub fn verify_bounds(
    f: &TargetFunction,
    net: &MultigradeNet,
    p: f64,
    mode: &BoundMode,
    engine: &CellAverageEngine,
) -> Result<BoundReport> {
    let unit = Cuboid::unit(f.dim());
    if f.domain != unit {
        return Err(Error::Domain(
            "verify_bounds expects a target on [0,1]^d; use box_rescale_verify".into(),
        ));
    }
    verify_on_domain(f, f, net, p, mode, engine)
}

/// `f` on its own domain, `g` its pullback to the unit cube (the net's input space).
fn verify_on_domain(
    f: &TargetFunction,
    g: &TargetFunction,
    net: &MultigradeNet,
    p: f64,
    mode: &BoundMode,
    engine: &CellAverageEngine,
) -> Result<BoundReport> {
    check_p(p)?;
    if !p.is_finite() {
        return Err(Error::Domain("bound checks need finite p".into()));
    }
    if (net.p - p).abs() > 0.0 {
        return Err(Error::Config(format!(
            "net was built for p = {}, asked to verify p = {p}",
            net.p
        )));
    }
    let cfg = &net.config;
    if g.dim() != cfg.d {
        return Err(Error::InvalidArgument(
            "target and net dimensions differ".into(),
        ));
    }
    let d = cfg.d;
    let domain = f.domain.clone();
    let vol_p = domain.volume().powf(1.0 / p);
    let max_side = domain.max_side();

    let unit_region = vec![ProductSet::from(&Cuboid::unit(d))];
    let g_norm = lp_norm(&|x: &[f64]| g.eval(x), &unit_region, p, engine)?;
    let quad_tol = QUADRATURE_RTOL * g_norm * vol_p;
    let sup_f = grid_max(&unit_region[0], grid_points(engine), &|x: &[f64]| {
        g.eval(x).abs()
    })
    .max(0.0);

    let mut notes = Vec::new();
    let mut decoder_eps = 0.0;
    let mut gamma_sup = 0.0;
    let mut rows = Vec::with_capacity(net.grades.len());
    for (level, grade) in net.grades.iter().enumerate() {
        decoder_eps += grade.decoder.eps();
        gamma_sup += grade.decoder.sup_bound();
        let region = cfg.partitioned_unit_cube(level);
        let err = |y: &[f64]| {
            let phi = net.readout(y, level).unwrap_or(f64::NAN);
            g.eval(y) - phi
        };
        let measured = lp_norm(&err, &region, p, engine)? * vol_p;
        if !measured.is_finite() {
            return Err(Error::Domain(format!("non-finite error at level {level}")));
        }
        let t = max_side / cfg.scale(level) as f64;
        let factor = (2 * d + 1) as f64;
        let (bound, omega) = match mode {
            BoundMode::Modulus { plan, headroom } => {
                let om = estimate_modulus(f, t, p, plan)?.value;
                (factor * headroom * om, Some(om))
            }
            BoundMode::Holder { alpha, lambda } => (factor * lambda * t.powf(*alpha), None),
            BoundMode::PointwiseHolder { alpha, lambda } => {
                (factor * lambda * t.powf(*alpha) * vol_p, None)
            }
        };
        let transition = (sup_f + gamma_sup) * cfg.transition_mass(level).powf(1.0 / p) * vol_p;
        let tolerance = quad_tol + decoder_eps + transition;
        let margin = bound + tolerance - measured;
        rows.push(BoundRow {
            level,
            t,
            measured_error: measured,
            omega,
            bound,
            tolerance,
            margin,
            pass: margin >= 0.0,
        });
    }
    if matches!(net.mode, DecoderMode::Sine { .. })
        && net
            .grades
            .iter()
            .any(|g| matches!(g.decoder, Decoder::Table(_)))
    {
        notes.push("some levels fell back to table decoders".into());
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(BoundReport {
        p,
        mode: mode.label().into(),
        domain,
        quadrature: engine.describe(),
        quadrature_tol: quad_tol,
        sup_f,
        rows,
        all_pass,
        notes,
    })
}

fn grid_points(engine: &CellAverageEngine) -> usize {
    match engine.scheme {
        Scheme::TensorGrid { points_per_axis } => points_per_axis.max(16),
        Scheme::MonteCarlo { .. } => 16,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `1e-6` plus the change in both sides when the grid is halved.
    pub tolerance: f64,
    pub pass: bool,
}

/// Midpoint nodes on `[-s, s]` for the shift integral.
const SHIFT_NODES: usize = 64;

/// `int_Q |f - A_Q f|^p <= (d^{p-1} / s) int_{-s}^{s} sum_i int_{Q cap (Q - h e_i)} |f(x + h e_i) - f(x)|^p dx dh`.
pub fn check_oscillation_inequality(
    f: &TargetFunction,
    cube: &Cuboid,
    p: f64,
    engine: &CellAverageEngine,
) -> Result<OscillationCheck> {
    check_p(p)?;
    if !p.is_finite() {
        return Err(Error::Domain("oscillation check needs finite p".into()));
    }
    if cube.is_degenerate() {
        return Err(Error::Domain("degenerate cube".into()));
    }
    let sides = cube.sides();
    let s = sides[0];
    if sides.iter().any(|x| (x - s).abs() > 1e-12 * s.max(1.0)) {
        return Err(Error::Domain(format!(
            "expected a cube, got sides {sides:?}"
        )));
    }
    let sides_of = |e: &CellAverageEngine, shift_nodes: usize| -> Result<(f64, f64)> {
        let avg = e.average(cube, 0, &|x: &[f64]| f.eval(x))?;
        let set = ProductSet::from(cube);
        let lhs = e.integrate(&set, 1, &|x: &[f64]| (f.eval(x) - avg).abs().powf(p));
        let d = cube.dim();
        let dh = 2.0 * s / shift_nodes as f64;
        let inner: Vec<f64> = (0..shift_nodes)
            .into_par_iter()
            .map(|j| {
                let h = -s + (j as f64 + 0.5) * dh;
                (0..d)
                    .map(|i| {
                        let mut shift = vec![0.0; d];
                        shift[i] = h;
                        let e_h = cube.overlap_with_shift(&shift);
                        if e_h.is_degenerate() {
                            return 0.0;
                        }
                        let diff = |x: &[f64]| {
                            let mut xh = x.to_vec();
                            xh[i] += h;
                            (f.eval(&xh) - f.eval(x)).abs().powf(p)
                        };
                        e.integrate(&ProductSet::from(&e_h), 2 + (j * d + i) as u64, &diff)
                    })
                    .sum::<f64>()
            })
            .collect();
        let rhs = (d as f64).powf(p - 1.0) / s * inner.iter().sum::<f64>() * dh;
        Ok((lhs, rhs))
    };
    let (lhs, rhs) = sides_of(engine, SHIFT_NODES)?;
    let coarse = match engine.scheme {
        Scheme::TensorGrid { points_per_axis } => {
            CellAverageEngine::tensor_grid((points_per_axis / 2).max(1))
        }
        Scheme::MonteCarlo { samples, seed } => {
            CellAverageEngine::monte_carlo(samples, seed ^ 0x9e37_79b9)
        }
    };
    let (lhs_c, rhs_c) = sides_of(&coarse, SHIFT_NODES / 2)?;
    let tolerance = 1e-6 + (lhs - lhs_c).abs() + (rhs - rhs_c).abs();
    Ok(OscillationCheck {
        lhs,
        rhs,
        tolerance,
        pass: lhs <= rhs + tolerance,
    })
}

/// `||f - chi_l||_{L^p(U_l)}` for the exact-average piecewise constant `chi_l`.
pub fn piecewise_average_diagnostic(
    f: &TargetFunction,
    config: &PartitionConfig,
    level: usize,
    p: f64,
    engine: &CellAverageEngine,
) -> Result<f64> {
    check_p(p)?;
    if !p.is_finite() {
        return Err(Error::Domain("diagnostic needs finite p".into()));
    }
    config.grid_level(level)?;
    let count = config.cube_count(level);
    let parts: Vec<f64> = (1..=count)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let beta = config.index_to_label(k, level)?;
            let cube = config.cube(level, &beta);
            let avg = engine.average(&cube, k, &|x: &[f64]| f.eval(x))?;
            Ok(engine.integrate(&ProductSet::from(&cube), k, &|x: &[f64]| {
                (f.eval(x) - avg).abs().powf(p)
            }))
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().powf(1.0 / p))
}

/// Build on the box `f.domain` through the affine pullback to `[0,1]^d` and
/// check `||f - Phi_l o T^{-1}||_{L^p(Q)}` against the box bound.
pub fn box_rescale_verify(
    f: &TargetFunction,
    config: &PartitionConfig,
    p: f64,
    mode: &BoundMode,
    build_engine: &CellAverageEngine,
    measure_engine: &CellAverageEngine,
    decoder_mode: DecoderMode,
) -> Result<(MultigradeNet, BoundReport)> {
    if f.domain.is_degenerate() {
        return Err(Error::Domain("degenerate box".into()));
    }
    let g = f.pullback_to_unit_cube();
    let net = MultigradeNet::build(&g, config, p, build_engine, decoder_mode)?;
    let report = verify_on_domain(f, &g, &net, p, mode, measure_engine)?;
    Ok((net, report))
}

/// Gap choice with `eta = max(omega_{f,p}(N^{-L}) / 2, 1e-12)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoDelta {
    pub delta: f64,
    pub eta: f64,
    pub omega: f64,
    pub choice: Option<DeltaChoice>,
    /// Set when the target looked constant or the trial sequence ran out.
    pub note: Option<String>,
}

pub fn auto_delta(
    f: &TargetFunction,
    d: usize,
    n: u64,
    depth: usize,
    p: f64,
    plan: &SamplingPlan,
    engine: &CellAverageEngine,
) -> Result<AutoDelta> {
    let t = 1.0 / (n as f64).powi(depth as i32);
    let omega = estimate_modulus(f, t, p, plan)?.value;
    let mut note = None;
    let eta = if omega / 2.0 > 1e-12 {
        omega / 2.0
    } else {
        note = Some("target is numerically constant; eta set to 1e-12".to_string());
        1e-12
    };
    match choose_delta(f, d, n, depth, p, eta, engine) {
        Ok(choice) => Ok(AutoDelta {
            delta: choice.delta,
            eta,
            omega,
            choice: Some(choice),
            note,
        }),
        Err(Error::DeltaExhausted {
            smallest_delta,
            residual_margin,
        }) => Ok(AutoDelta {
            delta: default_delta(n, depth),
            eta,
            omega,
            choice: None,
            note: Some(format!(
                "no gap down to {smallest_delta:e} meets eta (margin {residual_margin:e}); using the default gap"
            )),
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> Vec<ProductSet> {
        vec![ProductSet::from(&Cuboid::unit(d))]
    }

    #[test]
    fn norms() {
        let e = CellAverageEngine::tensor_grid(256);
        assert_eq!(lp_norm(&|_: &[f64]| 1.0, &unit(2), 1.5, &e).unwrap(), 1.0);
        let n = lp_norm(&|x: &[f64]| x[0], &unit(1), 2.0, &e).unwrap();
        assert!((n - 1.0 / 3f64.sqrt()).abs() < 1e-5);
        let n = lp_norm(
            &|x: &[f64]| if x[0] > 0.5 { 1.0 } else { 0.0 },
            &unit(1),
            1.0,
            &e,
        )
        .unwrap();
        assert!((n - 0.5).abs() < 1e-3);
        assert!(matches!(
            lp_norm(&|_: &[f64]| 1.0, &unit(1), 0.5, &e),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn constant_has_zero_modulus() {
        let f = TargetFunction::new(2, |_| 3.0);
        let plan = SamplingPlan::default_for_dim(2);
        for p in [1.0, 2.0, f64::INFINITY] {
            assert_eq!(estimate_modulus(&f, 0.3, p, &plan).unwrap().value, 0.0);
        }
        let f = TargetFunction::new(1, |x| x[0]);
        assert_eq!(
            estimate_modulus(&f, 0.0, 1.0, &SamplingPlan::default_for_dim(1))
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn ramp_modulus_matches_formula() {
        // ||f(.+h) - f||_{L^p(0, 1-h)} = h (1-h)^{1/p}, largest at h = t for t <= 1/2
        let f = TargetFunction::new(1, |x| x[0]);
        let plan = SamplingPlan::default_for_dim(1);
        for (t, p) in [(0.1, 1.0), (0.25, 2.0)] {
            let est = estimate_modulus(&f, t, p, &plan).unwrap().value;
            let exact: f64 = t * (1.0 - t).powf(1.0 / p);
            assert!(
                (est - exact).abs() < 1e-6 * exact.max(1.0),
                "{est} vs {exact}"
            );
        }
    }

    #[test]
    fn oscillation_ramp_oracle() {
        let f = TargetFunction::new(1, |x| x[0]);
        let e = CellAverageEngine::tensor_grid(256);
        let c = check_oscillation_inequality(&f, &Cuboid::unit(1), 1.0, &e).unwrap();
        assert!((c.lhs - 0.25).abs() < 1e-3);
        assert!((c.rhs - 1.0 / 3.0).abs() < 1e-3);
        assert!(c.pass);
        let c = check_oscillation_inequality(&f, &Cuboid::unit(1), 2.0, &e).unwrap();
        assert!((c.lhs - 1.0 / 12.0).abs() < 1e-4);
        assert!((c.rhs - 1.0 / 6.0).abs() < 1e-3);
        let k = TargetFunction::new(2, |_| 1.0);
        let c =
            check_oscillation_inequality(&k, &Cuboid::cube(vec![0.1, 0.2], 0.3).unwrap(), 1.0, &e)
                .unwrap();
        assert!(c.lhs < 1e-14 && c.rhs == 0.0);
        assert!(c.pass);
        let flat = Cuboid::new(vec![0.0, 0.0], vec![0.5, 0.0]).unwrap();
        assert!(check_oscillation_inequality(&k, &flat, 1.0, &e).is_err());
    }

    #[test]
    fn diagnostic_ramp_value() {
        let f = TargetFunction::new(1, |x| x[0]);
        let cfg = PartitionConfig::new(1, 2, 1, 1e-9).unwrap();
        let e = CellAverageEngine::tensor_grid(512);
        let v = piecewise_average_diagnostic(&f, &cfg, 1, 1.0, &e).unwrap();
        assert!((v - 0.125).abs() < 1e-5);
        let c = TargetFunction::new(1, |_| 2.0);
        assert!(piecewise_average_diagnostic(&c, &cfg, 1, 1.0, &e).unwrap() < 1e-12);
    }

    #[test]
    fn zero_target_reports_zero_error() {
        let f = TargetFunction::new(1, |_| 0.0);
        let cfg = PartitionConfig::new(1, 2, 3, 1e-4).unwrap();
        let net = MultigradeNet::build(
            &f,
            &cfg,
            1.0,
            &CellAverageEngine::default(),
            DecoderMode::Table,
        )
        .unwrap();
        let r = verify_bounds(
            &f,
            &net,
            1.0,
            &BoundMode::modulus(1),
            &measurement_engine(1, 0),
        )
        .unwrap();
        assert!(r.all_pass);
        assert!(r.rows.iter().all(|row| row.measured_error == 0.0));
        assert!(matches!(
            verify_bounds(
                &f,
                &net,
                2.0,
                &BoundMode::modulus(1),
                &measurement_engine(1, 0)
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn auto_delta_on_constant_target() {
        let f = TargetFunction::new(1, |_| 0.0);
        let a = auto_delta(
            &f,
            1,
            2,
            2,
            1.0,
            &SamplingPlan::default_for_dim(1),
            &CellAverageEngine::default(),
        )
        .unwrap();
        assert!(a.note.is_some());
        assert_eq!(a.eta, 1e-12);
    }
}
