use grwflow_core::verify::{oracle_self_test, CurvatureOracle};
use grwflow_core::{FiberGrid, FiberKind, WarpingFactor};

fn families() -> Vec<(WarpingFactor, FiberGrid)> {
    vec![
        (WarpingFactor::product(-1.0, 1.0), FiberGrid::torus2(16, 16, 6.0, 6.0).unwrap()),
        (WarpingFactor::de_sitter(-1.5, 1.5), FiberGrid::sphere2_axisym(32).unwrap()),
        (WarpingFactor::gaussian(-1.0, 2.0), FiberGrid::torus2(16, 16, 6.0, 6.0).unwrap()),
        (WarpingFactor::gaussian(-1.0, 2.0), FiberGrid::torus1(16, 6.0).unwrap()),
        (WarpingFactor::de_sitter(-1.5, 1.5), FiberGrid::torus2(16, 16, 6.0, 6.0).unwrap()),
    ]
}

#[test]
fn closed_forms_match_oracle() {
    for (w, grid) in families() {
        let rep = oracle_self_test(&w, &grid, 1e-3, 20, 7).unwrap();
        assert!(rep.max_antisymmetry <= 1e-8, "{rep:?}");
        assert!(rep.max_bianchi <= 1e-8, "{rep:?}");
        assert!(rep.closed_forms_agree(1e-6), "{rep:?}");
        assert!(rep.max_null_norm <= 1e-12, "{rep:?}");
    }
}

#[test]
fn flat_ambient_has_zero_ricci() {
    let o = CurvatureOracle::new(WarpingFactor::product(-1.0, 1.0), FiberKind::Torus2, 1e-3);
    let ric = o.ricci_tensor(&[0.2, 1.0, 2.0]);
    for row in ric {
        for v in row {
            assert!(v.abs() <= 1e-8);
        }
    }
}

#[test]
fn de_sitter_sphere_is_einstein_with_constant_n() {
    let w = WarpingFactor::de_sitter(-1.5, 1.5);
    let grid = FiberGrid::sphere2_axisym(32).unwrap();
    let rep = oracle_self_test(&w, &grid, 1e-3, 20, 11).unwrap();
    assert!((rep.einstein_constant - 2.0).abs() <= 1e-6, "{rep:?}");
    assert!(rep.einstein_residual <= 1e-6, "{rep:?}");
}
