use std::f64::consts::PI;

use grwflow_core::integrals;
use grwflow_core::isoperimetric::IsoperimetricProfile;
use grwflow_core::{FiberGrid, GraphState, WarpingFactor};
use proptest::prelude::*;

fn family(i: usize) -> WarpingFactor {
    match i {
        0 => WarpingFactor::product(-1.0, 1.0),
        1 => WarpingFactor::de_sitter(-1.5, 1.5),
        _ => WarpingFactor::gaussian(-1.0, 2.0),
    }
}

fn torus_graph(g: &FiberGrid, c: f64, amps: &[f64; 3]) -> Vec<f64> {
    (0..g.len())
        .map(|k| {
            let x = g.coords(k);
            c + amps[0] * x[0].sin() * x[1].cos() + amps[1] * (2.0 * x[1]).sin() + amps[2] * (x[0] + x[1]).cos()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn antiderivative_matches_value(fam in 0usize..3, r in -0.9f64..0.9) {
        let w = family(fam);
        let h = 1e-4;
        let fd = (w.antiderivative(r + h) - w.antiderivative(r - h)) / (2.0 * h);
        prop_assert!((fd - w.value(r)).abs() < 1e-8);
    }

    #[test]
    fn graph_invariants(fam in 0usize..3, c in -0.4f64..0.4, a0 in -0.15f64..0.15, a1 in -0.1f64..0.1, a2 in -0.1f64..0.1) {
        let g = FiberGrid::torus2(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        let w = family(fam);
        let rho = torus_graph(&g, c, &[a0, a1, a2]);
        let s = GraphState::new(&g, &w, &rho, 1e-4).unwrap();
        for k in 0..g.len() {
            prop_assert!(s.metric.v2[k] > 0.0 && s.metric.v2[k] <= 1.0);
            prop_assert!(s.metric.u[k] >= s.metric.warp[k].value);
            prop_assert!(s.curvature.ring_a2[k] >= -1e-10);
        }
        // divergence form: the weighted sum of Delta Theta telescopes
        let area = integrals::area(&g, &s);
        prop_assert!(integrals::surface_integral(&g, &s, &s.lap_theta).abs() <= 1e-13 * area);
    }

    #[test]
    fn summation_by_parts(c in -0.3f64..0.3, a0 in -0.2f64..0.2, p in 1i32..3) {
        // int f Delta f = -int |grad f|^2 <= 0 up to discretisation
        let g = FiberGrid::torus2(32, 32, 2.0 * PI, 2.0 * PI).unwrap();
        let w = WarpingFactor::gaussian(-1.0, 2.0);
        let rho = torus_graph(&g, c, &[a0, 0.0, 0.0]);
        let s = GraphState::new(&g, &w, &rho, 1e-4).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|k| (p as f64 * g.coords(k)[1]).sin()).collect();
        let lap = grwflow_core::geometry::laplace_beltrami(&g, &w, &s.metric, &f, grwflow_core::Parity::Even, 1e-4).unwrap();
        let prod: Vec<f64> = f.iter().zip(&lap).map(|(a, b)| a * b).collect();
        prop_assert!(integrals::surface_integral(&g, &s, &prod) < 0.0);
    }

    #[test]
    fn slice_for_volume_inverts_f0(fam in 0usize..3, t in 0.01f64..0.99) {
        let w = family(fam);
        let p = IsoperimetricProfile::new(w.clone(), 4.0 * PI * PI, 2);
        let r = w.a() + t * (w.b() - w.a());
        let v = p.f0(r);
        prop_assert!((p.slice_for_volume(v).unwrap() - r).abs() < 1e-9);
    }
}

#[test]
fn profile_is_monotone_in_dense_tabulation() {
    let p = IsoperimetricProfile::new(WarpingFactor::gaussian(-1.0, 2.0), 4.0 * PI * PI, 2);
    let rs: Vec<f64> = (0..2000).map(|i| -1.0 + 3.0 * i as f64 / 2000.0).collect();
    for pair in rs.windows(2) {
        assert!(p.f0(pair[1]) > p.f0(pair[0]));
    }
    // f1 o f0^-1 through root finding agrees with the tabulated pairs
    for &r in rs.iter().step_by(97) {
        assert!((p.phi(p.f0(r)).unwrap() - p.f1(r)).abs() <= 1e-10 * p.f1(r));
    }
}
