use mgnet::decoder::{Decoder, FitBudget};
use mgnet::multigrade::{stack_readouts, DecoderMode, MultigradeNet};
use mgnet::quadrature::CellAverageEngine;
use mgnet::targets::{lookup, TargetFunction};
use mgnet::{Error, PartitionConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table_net(name: &str, d: usize, n: u64, depth: usize) -> (MultigradeNet, PartitionConfig) {
    let f = lookup(name, d).unwrap().function;
    let cfg = PartitionConfig::with_default_delta(d, n, depth).unwrap();
    let net = MultigradeNet::build(
        &f,
        &cfg,
        2.0,
        &CellAverageEngine::default(),
        DecoderMode::Table,
    )
    .unwrap();
    (net, cfg)
}

fn interior_point(
    cfg: &PartitionConfig,
    level: usize,
    beta: &[u64],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    beta.iter()
        .map(|&b| {
            let (lo, hi) = cfg.interval(level, b);
            lo + rng.gen::<f64>() * (hi - lo)
        })
        .collect()
}

#[test]
fn readout_is_constant_on_each_cube() {
    let (net, cfg) = table_net("sine:2", 2, 2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for level in 0..=3 {
        for k in 1..=cfg.cube_count(level) {
            let beta = cfg.index_to_label(k, level).unwrap();
            let expect = net.readout_on_cell(level, &beta).unwrap();
            for _ in 0..8 {
                let x = interior_point(&cfg, level, &beta, &mut rng);
                assert!((net.readout(&x, level).unwrap() - expect).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn readouts_telescope() {
    let (net, _) = table_net("holder:0.5", 1, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let x = [rng.gen::<f64>()];
        let all = net.readouts(&x).unwrap();
        let mut acc = 0.0;
        for (l, phi) in all.iter().enumerate() {
            acc += net.correction(l, &x).unwrap();
            assert!((acc - phi).abs() < 1e-12);
            assert!((net.readout(&x, l).unwrap() - phi).abs() < 1e-12);
        }
    }
}

#[test]
fn cell_values_within_sup_bound() {
    for name in ["indicator", "sine:1", "tent:0.1"] {
        let (net, _) = table_net(name, 2, 2, 3);
        let m = net.sup_bound();
        for g in &net.grades {
            assert!(g.cell_values.iter().all(|v| v.abs() <= m));
        }
    }
}

#[test]
fn readouts_reject_outside_points() {
    let (net, _) = table_net("ramp", 1, 2, 2);
    assert!(matches!(net.readout(&[1.5], 1), Err(Error::Domain(_))));
    assert!(matches!(net.readout(&[0.5], 3), Err(Error::Range(_))));
    assert!(matches!(net.readouts(&[0.5, 0.5]), Err(Error::Domain(_))));
}

#[test]
fn exported_stack_matches_fitted_sine_readouts() {
    let f = lookup("ramp", 1).unwrap().function;
    let cfg = PartitionConfig::with_default_delta(1, 2, 1).unwrap();
    let net = MultigradeNet::build(
        &f,
        &cfg,
        2.0,
        &CellAverageEngine::default(),
        DecoderMode::sine(1e-3),
    )
    .unwrap();
    let stack = net.export_weights().unwrap();
    assert_eq!(stack.width, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let x = [rng.gen::<f64>()];
        let a = net.readouts(&x).unwrap();
        let b = stack_readouts(&stack, &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-6, "{x:?}: {u} vs {v}");
        }
    }
}

#[test]
fn fallback_reproduces_table_values() {
    let (table, cfg) = table_net("sine:3", 1, 2, 4);
    let f = lookup("sine:3", 1).unwrap().function;
    let mode = DecoderMode::Sine {
        eps: 1e-9,
        budget: FitBudget {
            n_max: 1000,
            w_candidates: 4,
            ..FitBudget::default()
        },
        fallback_to_table: true,
    };
    let net = MultigradeNet::build(&f, &cfg, 2.0, &CellAverageEngine::default(), mode).unwrap();
    assert!(net
        .grades
        .iter()
        .any(|g| matches!(g.decoder, Decoder::Table(_))));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let x = [rng.gen::<f64>()];
        let a = table.readouts(&x).unwrap();
        let b = net.readouts(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-9);
        }
    }
}

#[test]
fn failed_fit_returns_partial_net() {
    let f = lookup("sine:3", 1).unwrap().function;
    let cfg = PartitionConfig::with_default_delta(1, 2, 5).unwrap();
    let mode = DecoderMode::Sine {
        eps: 1e-9,
        budget: FitBudget {
            n_max: 1000,
            w_candidates: 4,
            ..FitBudget::default()
        },
        fallback_to_table: false,
    };
    match MultigradeNet::build(&f, &cfg, 2.0, &CellAverageEngine::default(), mode) {
        Err(Error::Fit {
            level,
            requested_eps,
            partial: Some(partial),
            ..
        }) => {
            assert_eq!(requested_eps, 1e-9);
            assert_eq!(partial.grades.len(), level);
        }
        other => panic!("expected a fit failure, got {other:?}"),
    }
}

#[test]
fn roundtrip_through_file() {
    let (net, _) = table_net("average", 2, 2, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    net.write(&path).unwrap();
    assert_eq!(MultigradeNet::read(&path).unwrap(), net);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prefixes_are_nested(seed in 0u64..1000, short in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = TargetFunction::new(1, move |x| coeffs[0] + coeffs[1] * x[0] + coeffs[2] * (5.0 * x[0]).sin());
        let delta = 1e-3 / 16.0;
        let e = CellAverageEngine::default();
        let a = MultigradeNet::build(&f, &PartitionConfig::new(1, 2, short, delta).unwrap(), 1.0, &e, DecoderMode::Table).unwrap();
        let b = MultigradeNet::build(&f, &PartitionConfig::new(1, 2, 4, delta).unwrap(), 1.0, &e, DecoderMode::Table).unwrap();
        for l in 0..=short {
            prop_assert_eq!(&a.grades[l], &b.grades[l]);
        }
    }

    #[test]
    fn level_zero_is_the_mean(c in -5.0f64..5.0, s in -5.0f64..5.0) {
        let f = TargetFunction::new(1, move |x| c + s * x[0]);
        let cfg = PartitionConfig::with_default_delta(1, 2, 1).unwrap();
        let net = MultigradeNet::build(&f, &cfg, 2.0, &CellAverageEngine::default(), DecoderMode::Table).unwrap();
        // Q_{0,0} = [0, 1 - delta]
        let mean = c + s * (1.0 - cfg.delta) / 2.0;
        prop_assert!((net.grades[0].cell_values[0] - mean).abs() <= 1e-12 * (1.0 + c.abs() + s.abs()));
    }
}
