use std::f64::consts::PI;

use grwflow_core::flow::{cfl_dt, run, stable_dt, step, FlowConfig, Integrator, Verdict};
use grwflow_core::integrals::{self, area_rate_prediction};
use grwflow_core::isoperimetric::IsoperimetricProfile;
use grwflow_core::{FiberGrid, GraphState, WarpingFactor};

const EPS_V: f64 = 1e-4;

fn torus2_data(g: &FiberGrid, c: f64, amp: f64) -> Vec<f64> {
    (0..g.len())
        .map(|k| {
            let x = g.coords(k);
            c + amp * x[0].sin() * x[1].sin() + 0.5 * amp * (2.0 * x[1]).cos()
        })
        .collect()
}

fn one_step_drift(g: &FiberGrid, w: &WarpingFactor, s: &GraphState, dt: f64, integrator: Integrator) -> f64 {
    let v0 = integrals::enclosed_volume(g, w, s.rho()).unwrap();
    let next = step(g, w, s, dt, integrator, EPS_V).unwrap();
    (integrals::enclosed_volume(g, w, next.rho()).unwrap() - v0).abs() / v0
}

#[test]
fn volume_drift_per_step_orders() {
    let g = FiberGrid::torus2(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
    let w = WarpingFactor::gaussian(-1.0, 2.0);
    let s = GraphState::new(&g, &w, &torus2_data(&g, 0.4, 0.25), EPS_V).unwrap();
    let dt = cfl_dt(&g, &s, 0.5);
    for (integrator, min_slope) in [(Integrator::Euler, 1.9), (Integrator::Rk2, 2.8)] {
        let d1 = one_step_drift(&g, &w, &s, dt, integrator);
        let d2 = one_step_drift(&g, &w, &s, 0.5 * dt, integrator);
        let slope = (d1 / d2).log2();
        assert!(slope >= min_slope, "{integrator:?}: drift {d1:e} -> {d2:e}, slope {slope}");
    }
}

fn checkerboard_growth(dt_of: impl Fn(&FiberGrid, &GraphState) -> f64, integrator: Integrator) -> f64 {
    // growth of the highest grid mode, measured on the difference of two nearby trajectories
    let g = FiberGrid::torus1(64, 2.0 * PI).unwrap();
    let w = WarpingFactor::product(-2.0, 2.0);
    let base: Vec<f64> = (0..64).map(|k| 0.6 * g.coords(k)[0].sin()).collect();
    let delta = 1e-7;
    let bumped: Vec<f64> = base.iter().enumerate().map(|(k, r)| r + delta * if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut a = GraphState::new(&g, &w, &base, EPS_V).unwrap();
    let mut b = GraphState::new(&g, &w, &bumped, EPS_V).unwrap();
    for _ in 0..50 {
        let dt = dt_of(&g, &a);
        a = step(&g, &w, &a, dt, integrator, EPS_V).unwrap();
        match step(&g, &w, &b, dt, integrator, EPS_V) {
            Ok(next) => b = next,
            Err(_) => return f64::INFINITY,
        }
    }
    a.rho().iter().zip(b.rho()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / delta
}

#[test]
fn checkerboard_mode_is_damped_at_run_step() {
    for integrator in [Integrator::Euler, Integrator::Rk2] {
        let growth = checkerboard_growth(|g, s| stable_dt(g, s, 0.9), integrator);
        assert!(growth < 1.0, "{integrator:?}: perturbation grew by {growth:e}");
    }
}

#[test]
fn plain_cfl_bound_is_too_generous_on_steep_curves() {
    // min v^2 = 0.64 here, so cfl 0.9 without the v^2 factor is past the limit
    let growth = checkerboard_growth(|g, s| cfl_dt(g, s, 0.9), Integrator::Euler);
    assert!(growth > 1e3, "growth {growth:e}");
}

#[test]
fn euler_stability_boundary_matches_cfl_bound_on_slice() {
    // flat slice: the bound with cfl = 1 is exactly the Euler stability limit h^2 / 2
    let g = FiberGrid::torus1(32, 2.0 * PI).unwrap();
    let w = WarpingFactor::product(-1.0, 1.0);
    let slice = GraphState::new(&g, &w, &vec![0.0; 32], EPS_V).unwrap();
    let bound = cfl_dt(&g, &slice, 0.999_999);
    let growth = |dt: f64| {
        let rho: Vec<f64> = (0..32).map(|k| 1e-8 * if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut s = GraphState::new(&g, &w, &rho, EPS_V).unwrap();
        for _ in 0..20 {
            s = step(&g, &w, &s, dt, Integrator::Euler, EPS_V).unwrap();
        }
        s.rho().iter().map(|x| x.abs()).fold(0.0, f64::max) / 1e-8
    };
    let (mut lo, mut hi) = (0.5 * bound, 2.0 * bound);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if growth(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo / bound - 1.0).abs() < 1e-3, "measured {lo}, bound {bound}");
}

#[test]
fn flat_torus_curve_converges_to_slice_of_equal_volume() {
    let g = FiberGrid::torus1(64, 2.0 * PI).unwrap();
    let w = WarpingFactor::product(-1.0, 1.0);
    let rho: Vec<f64> = (0..64).map(|k| 0.3 * g.coords(k)[0].sin()).collect();
    let cfg = FlowConfig { record_every: 1, ..FlowConfig::default() };
    let out = run(&g, &w, &rho, &cfg).unwrap();
    assert_eq!(out.verdict, Verdict::ConvergedToSlice);
    let v0 = out.trace.records[0].volume;
    let target = IsoperimetricProfile::for_grid(&w, &g).slice_for_volume(v0).unwrap();
    assert!(out.final_state.rho().iter().all(|r| (r - target).abs() < 1e-6));

    let h = g.spacing(0);
    let (lo, hi) = out.initial_rho_range;
    assert!(out.rho_range.0 >= lo - 10.0 * h * h && out.rho_range.1 <= hi + 10.0 * h * h);
    for pair in out.trace.records.windows(2) {
        assert!(pair[1].osc <= pair[0].osc + 1e-12);
        assert!(pair[1].area >= pair[0].area - 1e-10 * out.trace.records[0].area);
    }
}

#[test]
fn area_rate_matches_finite_difference() {
    let err = |n: usize| {
        let g = FiberGrid::torus2(n, n, 2.0 * PI, 2.0 * PI).unwrap();
        let w = WarpingFactor::gaussian(-1.0, 2.0);
        let s = GraphState::new(&g, &w, &torus2_data(&g, 0.3, 0.2), EPS_V).unwrap();
        let dt = cfl_dt(&g, &s, 0.2);
        let fwd = step(&g, &w, &s, dt, Integrator::Rk2, EPS_V).unwrap();
        let bwd_rate = area_rate_prediction(&g, &s).prediction;
        let fd = (integrals::area(&g, &fwd) - integrals::area(&g, &s)) / dt;
        (fd - bwd_rate).abs() / bwd_rate.abs()
    };
    let (e1, e2) = (err(16), err(32));
    // the gap is O(dt + h^2) with dt ~ h^2: second order in h
    assert!(e1 < 0.1 && e2 < 0.35 * e1, "{e1:e} {e2:e}");
}

#[test]
fn area_rate_dominates_umbilicity_under_strict_ncc() {
    let g = FiberGrid::torus2(32, 32, 2.0 * PI, 2.0 * PI).unwrap();
    let w = WarpingFactor::gaussian(-1.0, 2.0);
    for amp in [0.05, 0.15, 0.3] {
        let s = GraphState::new(&g, &w, &torus2_data(&g, 0.2, amp), EPS_V).unwrap();
        let rate = area_rate_prediction(&g, &s);
        let bound = rate.lower_bound.unwrap();
        assert!(rate.prediction >= bound - 1e-6 * rate.prediction.abs(), "{rate:?}");
        assert!(rate.prediction >= -1e-10);
    }
}
