use mgnet::analysis::{
    auto_delta, check_oscillation_inequality, estimate_modulus, lp_norm, measurement_engine,
    verify_bounds, BoundMode, SamplingPlan,
};
use mgnet::multigrade::{DecoderMode, MultigradeNet};
use mgnet::quadrature::{CellAverageEngine, Cuboid, ProductSet};
use mgnet::targets::{catalog, lookup, TargetFunction};
use mgnet::{Error, PartitionConfig};
use proptest::prelude::*;

#[test]
fn catalog_modulus_matches_closed_forms() {
    let plan = SamplingPlan::default_for_dim(1);
    for spec in catalog(1) {
        for t in [0.05, 0.125, 0.3] {
            for p in [1.0, 2.0] {
                let Some(exact) = spec.exact_modulus(t, p) else {
                    continue;
                };
                let est = estimate_modulus(&spec.function, t, p, &plan).unwrap();
                assert!(est.is_lower_bound);
                let err = (est.value - exact).abs();
                assert!(
                    err <= 0.05 * exact + 1e-12,
                    "{} t={t} p={p}: {} vs {exact}",
                    spec.name,
                    est.value
                );
            }
        }
    }
}

#[test]
fn catalog_norms_match_closed_forms() {
    let engine = CellAverageEngine::tensor_grid(20_000);
    let unit = [ProductSet::from(&Cuboid::unit(1))];
    for spec in catalog(1) {
        for p in [1.0, 2.0, 3.0] {
            let Some(exact) = spec.exact_lp_norm(p) else {
                continue;
            };
            let est = lp_norm(&|x: &[f64]| spec.eval(x), &unit, p, &engine).unwrap();
            assert!(
                (est - exact).abs() <= 1e-3 * exact.max(1e-12),
                "{} p={p}",
                spec.name
            );
        }
    }
}

#[test]
fn modulus_increases_with_p_for_indicator() {
    // ||.||_p is nondecreasing in p on a probability space and the indicator difference is 0/1
    let plan = SamplingPlan::default_for_dim(1);
    let f = lookup("indicator", 1).unwrap().function;
    let a = estimate_modulus(&f, 0.2, 1.0, &plan).unwrap().value;
    let b = estimate_modulus(&f, 0.2, 2.0, &plan).unwrap().value;
    let c = estimate_modulus(&f, 0.2, f64::INFINITY, &plan)
        .unwrap()
        .value;
    assert!(a <= b && b <= c);
}

#[test]
fn modulus_rejects_bad_arguments() {
    let plan = SamplingPlan::default_for_dim(1);
    let f = lookup("ramp", 1).unwrap().function;
    assert!(estimate_modulus(&f, -0.1, 1.0, &plan).is_err());
    assert!(estimate_modulus(&f, 0.1, 0.5, &plan).is_err());
}

#[test]
fn bounds_hold_for_lipschitz_catalog_targets() {
    for name in ["ramp", "average", "sine:1", "tent:0.1"] {
        let spec = lookup(name, 2).unwrap();
        let cfg = PartitionConfig::with_default_delta(2, 2, 3).unwrap();
        let net = MultigradeNet::build(
            &spec.function,
            &cfg,
            1.0,
            &CellAverageEngine::default(),
            DecoderMode::Table,
        )
        .unwrap();
        let h = spec.pointwise_holder().unwrap();
        let mode = BoundMode::Holder {
            alpha: h.alpha,
            lambda: h.lambda,
        };
        let report =
            verify_bounds(&spec.function, &net, 1.0, &mode, &measurement_engine(2, 0)).unwrap();
        assert!(report.all_pass, "{name}: {:?}", report.rows);
        assert_eq!(report.rows.len(), 4);
    }
}

#[test]
fn modulus_mode_passes_on_indicator() {
    let spec = lookup("indicator", 1).unwrap();
    let cfg = PartitionConfig::with_default_delta(1, 2, 5).unwrap();
    let net = MultigradeNet::build(
        &spec.function,
        &cfg,
        2.0,
        &CellAverageEngine::default(),
        DecoderMode::Table,
    )
    .unwrap();
    let report = verify_bounds(
        &spec.function,
        &net,
        2.0,
        &BoundMode::modulus(1),
        &measurement_engine(1, 0),
    )
    .unwrap();
    assert!(report.all_pass, "{:?}", report.rows);
}

#[test]
fn p_mismatch_is_rejected() {
    let spec = lookup("ramp", 1).unwrap();
    let cfg = PartitionConfig::with_default_delta(1, 2, 2).unwrap();
    let net = MultigradeNet::build(
        &spec.function,
        &cfg,
        2.0,
        &CellAverageEngine::default(),
        DecoderMode::Table,
    )
    .unwrap();
    let r = verify_bounds(
        &spec.function,
        &net,
        1.0,
        &BoundMode::modulus(1),
        &measurement_engine(1, 0),
    );
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn auto_delta_satisfies_its_target() {
    let f = lookup("sine:1", 1).unwrap().function;
    let plan = SamplingPlan::default_for_dim(1);
    let a = auto_delta(&f, 1, 2, 3, 2.0, &plan, &CellAverageEngine::tensor_grid(64)).unwrap();
    let choice = a.choice.expect("sine admits a gap");
    assert!(choice.margin >= 0.0);
    assert!(choice.lhs.iter().all(|&v| v <= a.eta));
    PartitionConfig::new(1, 2, 3, a.delta).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn modulus_monotone_in_t(t in 0.01f64..0.2, dt in 0.01f64..0.2, p in 1.0f64..3.0) {
        let f = lookup("ramp", 1).unwrap().function;
        let plan = SamplingPlan::default_for_dim(1);
        let a = estimate_modulus(&f, t, p, &plan).unwrap().value;
        let b = estimate_modulus(&f, t + dt, p, &plan).unwrap().value;
        prop_assert!(a <= b + 1e-9);
    }

    #[test]
    fn oscillation_holds_for_smooth_functions(
        a in -3.0f64..3.0, b in -3.0f64..3.0, m in 0.5f64..4.0,
        corner in 0.0f64..0.5, side in 0.05f64..0.5, p in 1.0f64..3.0,
    ) {
        let f = TargetFunction::new(2, move |x| a * (m * x[0]).sin() + b * x[1] * x[1]);
        let cube = Cuboid::cube(vec![corner, 0.5 - corner / 2.0], side).unwrap();
        let c = check_oscillation_inequality(&f, &cube, p, &CellAverageEngine::tensor_grid(16)).unwrap();
        prop_assert!(c.pass, "lhs {} rhs {} tol {}", c.lhs, c.rhs, c.tolerance);
    }
}
