//! Global functionals of a graph. Every surface integral uses the fiber
//! weights with the area density `w(rho)^n v`, so `int_Sigma f` is
//! `sum_k weight_k w_k^n v_k f_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::fiber::FiberGrid;
use crate::geometry::GraphState;
use crate::warping::WarpingFactor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub area: f64,
    pub volume: f64,
    pub osc: f64,
    pub umbilicity_deficit: f64,
    pub area_rate_prediction: f64,
}

impl Functionals {
    pub fn compute(grid: &FiberGrid, w: &WarpingFactor, state: &GraphState) -> Result<Self> {
        Ok(Self {
            area: area(grid, state),
            volume: enclosed_volume(grid, w, state.rho())?,
            osc: oscillation(grid, w, state.rho()),
            umbilicity_deficit: umbilicity_deficit(grid, state),
            area_rate_prediction: area_rate_prediction(grid, state).prediction,
        })
    }
}

/// `int_Sigma f` for a nodal field `f`.
pub fn surface_integral(grid: &FiberGrid, state: &GraphState, f: &[f64]) -> f64 {
    let n = grid.n();
    let m = &state.metric;
    exec::sum((0..grid.len()).map(|k| grid.weights()[k] * crate::geometry::pow_n(m.warp[k].value, n) * m.v[k] * f[k]))
}

/// `|Sigma|`.
pub fn area(grid: &FiberGrid, state: &GraphState) -> f64 {
    let n = grid.n();
    let m = &state.metric;
    exec::sum((0..grid.len()).map(|k| grid.weights()[k] * crate::geometry::pow_n(m.warp[k].value, n) * m.v[k]))
}

/// Volume between `{a} x S0` and the graph: `sum_k weight_k int_a^rho_k w^n`.
pub fn enclosed_volume(grid: &FiberGrid, w: &WarpingFactor, rho: &[f64]) -> Result<f64> {
    if rho.len() != grid.len() {
        return Err(Error::FieldLength { expected: grid.len(), got: rho.len() });
    }
    if let Some(&r) = rho.iter().find(|&&r| !(r >= w.a())) {
        return Err(Error::Domain { r, a: w.a(), b: w.b() });
    }
    let n = grid.n();
    let cols = exec::map_range(grid.len(), |k| w.power_integral(n, rho[k]));
    Ok(exec::sum((0..grid.len()).map(|k| grid.weights()[k] * cols[k])))
}

/// `max Theta(rho) - min Theta(rho)` over the nodes.
pub fn oscillation(_grid: &FiberGrid, w: &WarpingFactor, rho: &[f64]) -> f64 {
    let th: Vec<f64> = rho.iter().map(|&r| w.antiderivative(r)).collect();
    exec::max(th.iter().copied()) - exec::min(th.iter().copied())
}

/// `int_Sigma |A_0|^2 u`.
pub fn umbilicity_deficit(grid: &FiberGrid, state: &GraphState) -> f64 {
    let f: Vec<f64> = (0..grid.len())
        .map(|k| state.curvature.ring_a2[k].max(0.0) * state.metric.u[k])
        .collect();
    surface_integral(grid, state, &f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaRate {
    /// `int (H^2 u - n w' H)`
    pub prediction: f64,
    /// `n/(n-1) int |A_0|^2 u`; undefined for `n = 1`.
    pub lower_bound: Option<f64>,
}

/// Predicted `d/dt |Sigma_t|` along the flow and its umbilicity lower bound.
pub fn area_rate_prediction(grid: &FiberGrid, state: &GraphState) -> AreaRate {
    let n = grid.n();
    let f: Vec<f64> = (0..grid.len())
        .map(|k| {
            let h = state.curvature.mean[k];
            h * h * state.metric.u[k] - n as f64 * state.metric.warp[k].d1 * h
        })
        .collect();
    let prediction = surface_integral(grid, state, &f);
    let lower_bound = (n >= 2).then(|| {
        let nf = n as f64;
        nf / (nf - 1.0) * umbilicity_deficit(grid, state)
    });
    AreaRate { prediction, lower_bound }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn slice_area_and_volume_on_torus() {
        let g = FiberGrid::torus2(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        let w = WarpingFactor::gaussian(-1.0, 2.0);
        let rho = vec![0.4; g.len()];
        let s = GraphState::new(&g, &w, &rho, 1e-4).unwrap();
        let f = Functionals::compute(&g, &w, &s).unwrap();
        let th = w.value(0.4);
        assert!((f.area - 4.0 * PI * PI * th * th).abs() < 1e-12 * f.area);
        assert_eq!(f.osc, 0.0);
        assert!(f.umbilicity_deficit.abs() < 1e-20);
        let rate = area_rate_prediction(&g, &s);
        assert!(rate.prediction.abs() < 1e-12);
        assert!(rate.lower_bound.unwrap().abs() < 1e-20);

        let p = WarpingFactor::product(-1.0, 2.0);
        let vol = enclosed_volume(&g, &p, &rho).unwrap();
        assert!((vol - 4.0 * PI * PI * 1.4).abs() < 1e-12);
    }

    #[test]
    fn volume_below_a_is_domain_error() {
        let g = FiberGrid::torus1(8, 1.0).unwrap();
        let w = WarpingFactor::product(0.0, 1.0);
        let mut rho = vec![0.5; 8];
        rho[3] = -0.1;
        assert!(matches!(enclosed_volume(&g, &w, &rho), Err(Error::Domain { .. })));
    }

    #[test]
    fn lower_bound_undefined_in_one_dimension() {
        let g = FiberGrid::torus1(32, 2.0 * PI).unwrap();
        let w = WarpingFactor::product(-1.0, 1.0);
        let rho: Vec<f64> = (0..32).map(|k| 0.1 * g.coords(k)[0].sin()).collect();
        let s = GraphState::new(&g, &w, &rho, 1e-4).unwrap();
        assert!(area_rate_prediction(&g, &s).lower_bound.is_none());
        assert!((oscillation(&g, &w, &rho) - 0.2).abs() < 1e-3);
    }
}
