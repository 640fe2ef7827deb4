use mgnet::quadrature::Cuboid;
use mgnet::targets::{load_target, lookup, parse_grid, TargetFunction};
use mgnet::Error;
use proptest::prelude::*;

#[test]
fn spot_values() {
    assert_eq!(lookup("ramp", 2).unwrap().eval(&[0.3, 0.9]), 0.3);
    assert!((lookup("average", 3).unwrap().eval(&[0.3, 0.6, 0.9]) - 0.6).abs() < 1e-15);
    assert_eq!(lookup("constant:5", 1).unwrap().eval(&[0.2]), 5.0);
    assert!((lookup("sine:2", 1).unwrap().eval(&[0.125]) - 1.0).abs() < 1e-15);
    assert!((lookup("holder:0.5", 1).unwrap().eval(&[0.75]) - 0.5).abs() < 1e-15);
    assert_eq!(lookup("zero", 4).unwrap().eval(&[0.1, 0.2, 0.3, 0.4]), 0.0);
}

#[test]
fn zero_dimension_rejected() {
    assert!(lookup("ramp", 0).is_err());
}

#[test]
fn grid_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plane.grid");
    std::fs::write(&path, "# x + 2y\ngrid 2\n2 3\n0 1 2\n1 2 3\n").unwrap();
    let t = load_target(&path).unwrap();
    assert_eq!(t.dim(), 2);
    assert!((t.eval(&[0.5, 0.25]) - 1.0).abs() < 1e-14);
    assert!((t.eval(&[1.0, 1.0]) - 3.0).abs() < 1e-14);
}

#[test]
fn grid_errors_carry_positions() {
    match parse_grid("grid 1\n3\n0 1 x\n") {
        Err(Error::Parse { line, offset, .. }) => assert_eq!((line, offset), (3, 5)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_grid("grid 1\n3\n0 1\n"),
        Err(Error::Parse { .. })
    ));
    assert!(matches!(
        parse_grid("grid 1\n2\n0 1 2\n"),
        Err(Error::Parse { .. })
    ));
    assert!(matches!(
        parse_grid("mesh 1\n"),
        Err(Error::Parse {
            line: 1,
            offset: 1,
            ..
        })
    ));
    assert!(matches!(parse_grid(""), Err(Error::Parse { .. })));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(
        load_target(std::path::Path::new("/nonexistent/x.grid")),
        Err(Error::Io(_))
    ));
}

proptest! {
    #[test]
    fn pullback_composes_with_affine_map(lo in -3.0f64..3.0, len in 0.1f64..5.0, y in 0.0f64..1.0) {
        let f = TargetFunction::new(1, |x| x[0] * x[0])
            .with_domain(Cuboid::new(vec![lo], vec![lo + len]).unwrap())
            .unwrap();
        let g = f.pullback_to_unit_cube();
        let x = lo + len * y;
        prop_assert!((g.eval(&[y]) - x * x).abs() <= 1e-12 * (1.0 + x * x));
    }

    #[test]
    fn grid_interpolation_is_exact_for_affine_data(a in -2.0f64..2.0, b in -2.0f64..2.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let mut text = String::from("grid 2\n4 5\n");
        for i in 0..4 {
            for j in 0..5 {
                text += &format!("{} ", a * i as f64 / 3.0 + b * j as f64 / 4.0);
            }
        }
        let g = parse_grid(&text).unwrap();
        prop_assert!((g.interpolate(&[x, y]) - (a * x + b * y)).abs() <= 1e-12);
    }
}
